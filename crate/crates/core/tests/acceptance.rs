//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints exactly one PASS or FAIL line.

use std::collections::{BTreeMap, HashMap};
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use rase::estimator::{bootstrap_mean_from_indices, mle_mean, sample_mean};
use rase::experiment::{attack_rounds, run_trace, Scenario};
use rase::grouping::{initial_partition, refine_groups, sensitivity, ContributorGraph, Partition};
use rase::mallows::{self, MallowsParams};
use rase::permutation::{all_permutations, data_permutation_from_arrivals};
use rase::pipeline::{run_rase, RunConfig, SensorReading};
use rase::randomizer::{min_budget, BudgetAwareRandomizer, DataRange, PrecisionRequirement, PrivacyBudget};
use rase::shuffler::{plan_shuffle, Branch};
use rase::trace::{group_batches, synth};
use rase::Permutation;

type Check = Result<String, String>;
type Named = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table_range() -> DataRange {
    DataRange::new(3.9, 178.3).unwrap()
}

fn defaults() -> PrecisionRequirement {
    PrecisionRequirement::new(0.5, 0.9).unwrap()
}

// 1
fn estimator_golden_values() -> Check {
    let z = [9.5, 1.1, 8.4, 2.8, 3.2];
    let sample = sample_mean(&z).unwrap();
    let mle = mle_mean(&z).unwrap();
    // resamples {1.1,2.8,1.1,3.2,2.8} and {9.5,2.8,3.2,3.2,1.1} as indices
    let boot = bootstrap_mean_from_indices(&z, vec![vec![1, 3, 1, 4, 3], vec![0, 3, 4, 4, 1]]).unwrap();
    ensure(sample == 5.0, || format!("sample mean {sample}"))?;
    ensure(mle == 3.2, || format!("median {mle}"))?;
    ensure(boot == 3.08, || format!("bootstrap {boot}"))?;
    Ok(format!("sample={sample} mle={mle} bootstrap={boot}"))
}

// 2
fn grouping_golden_values() -> Check {
    let sigma = Permutation::new(vec![1, 4, 5, 6, 3, 2]).unwrap();
    let graph = ContributorGraph::new(6, [[1, 2], [2, 3], [3, 4], [4, 5]]).unwrap();
    let initial = initial_partition(&graph, 2).unwrap();
    ensure(initial.groups() == vec![vec![1, 2, 3, 4, 5], vec![6]], || format!("initial groups {:?}", initial.groups()))?;
    let before = sensitivity(&sigma, &initial).unwrap();
    let refined = refine_groups(&sigma, 2).unwrap();
    let after = sensitivity(&sigma, &refined).unwrap();
    ensure(before == 15, || format!("initial sensitivity {before}"))?;
    ensure(after <= 10, || format!("refined sensitivity {after}"))?;
    Ok(format!("initial={before} refined={after} groups={:?}", refined.groups()))
}

// 3
fn mallows_exactness() -> Check {
    let n = 5;
    let center = Permutation::new(vec![3, 1, 5, 2, 4]).unwrap();
    let perms = all_permutations(n);
    let index: HashMap<Permutation, usize> = perms.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
    let draws = 1_000_000;
    let mut details = Vec::new();
    for (s, theta) in [0.1, 0.5, 1.0, 2.0].into_iter().enumerate() {
        let params = MallowsParams::new(center.clone(), theta).unwrap();
        let probs: Vec<f64> = perms.iter().map(|p| mallows::pmf(p, &params).unwrap()).collect();
        let total: f64 = probs.iter().sum();
        ensure((total - 1.0).abs() <= 1e-12, || format!("theta={theta}: pmf sums to {total}"))?;

        let mut rng = ChaCha8Rng::seed_from_u64(300 + s as u64);
        let mut counts = vec![0u64; perms.len()];
        for _ in 0..draws {
            counts[index[&mallows::sample(&params, &mut rng)]] += 1;
        }

        // cells expecting fewer than 5 hits are pooled
        let (mut stat, mut cells) = (0.0, 0usize);
        let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
        for (&c, &p) in counts.iter().zip(&probs) {
            let e = p * draws as f64;
            if e < 5.0 {
                pooled_obs += c as f64;
                pooled_exp += e;
            } else {
                stat += (c as f64 - e).powi(2) / e;
                cells += 1;
            }
        }
        if pooled_exp > 0.0 {
            stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
            cells += 1;
        }
        let p_value = ChiSquared::new((cells - 1) as f64).unwrap().sf(stat);
        ensure(p_value > 1e-3, || format!("theta={theta}: chi2={stat:.1} on {} df, p={p_value:.2e}", cells - 1))?;

        // per-permutation frequency falls with distance from the center
        let mut by_distance: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for (p, &c) in perms.iter().zip(&counts) {
            let d = p.kendall_tau(&center).unwrap();
            let e = by_distance.entry(d).or_default();
            e.0 += c as f64;
            e.1 += 1.0;
        }
        let mean_freq: Vec<f64> = by_distance
            .values()
            .map(|(c, m)| c / m)
            .take_while(|&f| f >= 100.0)
            .collect();
        ensure(mean_freq.windows(2).all(|w| w[0] > w[1]), || format!("theta={theta}: no decay {mean_freq:?}"))?;
        details.push(format!("theta={theta} p={p_value:.3}"));
    }
    Ok(details.join(" "))
}

// 4
fn uniform_cycle_fallback() -> Check {
    let graph = ContributorGraph::edgeless(4).unwrap();
    let arrival = data_permutation_from_arrivals(&[2, 4, 1, 3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let runs = 100_000;
    let mut counts: HashMap<Permutation, usize> = HashMap::new();
    for _ in 0..runs {
        let plan = plan_shuffle(&arrival, 4, &graph, 1.0, &mut rng).unwrap();
        ensure(plan.branch == Branch::UniformCycle, || "fallback branch not taken".into())?;
        ensure(plan.rearrangement.is_single_cycle(), || format!("{} is not a 4-cycle", plan.rearrangement))?;
        *counts.entry(plan.rearrangement).or_default() += 1;
    }
    ensure(counts.len() == 6, || format!("{} distinct rearrangements", counts.len()))?;
    let tv = counts.values().map(|&c| (c as f64 / runs as f64 - 1.0 / 6.0).abs()).sum::<f64>() / 2.0;
    ensure(tv < 0.01, || format!("TV distance {tv}"))?;
    Ok(format!("6 distinct 4-cycles, TV={tv:.4}"))
}

// 5
fn ldp_ratio() -> Check {
    let range = DataRange::new(0.0, 1.0).unwrap();
    let draws = 1_000_000;
    let (x, x2) = (range.x_min(), range.x_max());
    let mut details = Vec::new();
    // rho = 0.9 puts both budgets under the clamping bound, rho = 0.1 above it
    for (regime, rho) in [("clamped", 0.9), ("unclamped", 0.1)] {
        let precision = PrecisionRequirement::new(0.5, rho).unwrap();
        for (s, eps) in [0.5, 2.0].into_iter().enumerate() {
            let budget = PrivacyBudget::new(eps, 1.0).unwrap();
            let br = BudgetAwareRandomizer::new(budget, range, precision).unwrap();
            ensure(br.clamps() == (regime == "clamped"), || format!("{regime} eps={eps}: wrong regime"))?;
            let draw = |input: f64, seed: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..draws).map(|_| br.randomize(input, &mut rng).unwrap()).collect::<Vec<f64>>()
            };
            let a = draw(x, 500 + s as u64 * 2);
            let b = draw(x2, 501 + s as u64 * 2);

            // interior bins at pooled quantiles, plus one bin per boundary atom
            let mut interior: Vec<f64> = a.iter().chain(&b).copied().filter(|&y| y != x && y != x2).collect();
            interior.sort_by(f64::total_cmp);
            let edges: Vec<f64> = (1..50).map(|q| interior[q * interior.len() / 50]).collect();
            let bin = |y: f64| -> usize {
                if br.clamps() && y == x {
                    50
                } else if br.clamps() && y == x2 {
                    51
                } else {
                    edges.partition_point(|&e| e <= y)
                }
            };
            let mut ca = [0usize; 52];
            let mut cb = [0usize; 52];
            a.iter().for_each(|&y| ca[bin(y)] += 1);
            b.iter().for_each(|&y| cb[bin(y)] += 1);
            let bound = eps.exp() * 1.1;
            let mut worst: f64 = 0.0;
            for i in 0..52 {
                if ca[i] < 500 || cb[i] < 500 {
                    continue;
                }
                let r = (ca[i] as f64 / cb[i] as f64).max(cb[i] as f64 / ca[i] as f64);
                worst = worst.max(r);
            }
            ensure(worst <= bound, || format!("{regime} eps={eps}: ratio {worst:.3} > {bound:.3}"))?;

            if br.clamps() {
                ensure(a.iter().chain(&b).all(|&y| range.contains(y)), || format!("eps={eps}: clamped output escaped"))?;
                let lambda = br.scale();
                for (counts, input) in [(&ca, x), (&cb, x2)] {
                    for (edge, idx, gap) in [(x, 50, input - x), (x2, 51, x2 - input)] {
                        // Pr[x + noise beyond the edge]
                        let expected = 0.5 * (-gap / lambda).exp();
                        let observed = counts[idx] as f64 / draws as f64;
                        let se = (expected * (1.0 - expected) / draws as f64).sqrt();
                        ensure((observed - expected).abs() <= 3.0 * se, || {
                            format!("eps={eps} x={input}: mass at {edge} is {observed:.5}, expected {expected:.5}")
                        })?;
                    }
                }
            }
            details.push(format!("{regime} eps={eps} worst={worst:.3}"));
        }
    }
    Ok(details.join(" "))
}

// 6
fn precision_coverage() -> Check {
    let range = table_range();
    let precision = defaults();
    let eps = min_budget(&range, &precision).unwrap();
    let br = BudgetAwareRandomizer::new(PrivacyBudget::new(eps, 1.0).unwrap(), range, precision).unwrap();
    let x = range.x_max();
    let (lo, hi) = ((1.0 - precision.beta()) * x, (1.0 + precision.beta()) * x);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 100_000;
    let inside = (0..draws)
        .filter(|_| {
            let y = br.randomize(x, &mut rng).unwrap();
            lo <= y && y <= hi
        })
        .count();
    let frac = inside as f64 / draws as f64;
    ensure(frac >= precision.rho() - 0.01, || format!("coverage {frac}"))?;
    Ok(format!("eps={eps:.4} coverage={frac:.4}"))
}

fn one_batch(n: usize, seed: u64) -> Vec<SensorReading> {
    let range = table_range();
    group_batches(&synth(n, 1, &range, seed), n).batches.remove(&1).unwrap()
}

fn config(n: usize, eps: f64, alpha: f64, k: usize) -> RunConfig {
    RunConfig::new(n, table_range(), defaults(), PrivacyBudget::new(eps, alpha).unwrap(), k).unwrap()
}

// 7
fn utility_envelope() -> Check {
    let n = 50;
    let batch = one_batch(n, 7);
    let truth = batch.iter().map(|r| r.state).sum::<f64>() / n as f64;
    let delta = table_range().delta();
    let mut details = Vec::new();
    for eps in [0.1, 1.0, 9.0] {
        let c = config(n, eps, 1.0, 5);
        let err = (0..200u64)
            .map(|s| (run_rase(&batch, &c, s).unwrap().estimate.estimate - truth).abs())
            .sum::<f64>()
            / 200.0;
        let bound = (2.0 * delta / (eps * (n as f64).sqrt())).max(delta);
        ensure(err <= bound, || format!("eps={eps}: mean error {err:.2} > {bound:.2}"))?;
        details.push(format!("eps={eps} err={err:.2}<={bound:.1}"));
    }
    Ok(details.join(" "))
}

// 8
fn error_trend() -> Check {
    let n = 50;
    let batches = group_batches(&synth(n, 48, &table_range(), 8), n).batches;
    let mut aae = Vec::new();
    let mut mse = Vec::new();
    for eps in [0.1, 1.0, 3.0, 9.0] {
        let c = config(n, eps, 1.0, 5);
        let (mut a, mut m) = (0.0, 0.0);
        for seed in 0..10 {
            let report = run_trace(&batches, &c, seed).unwrap().report;
            a += report.mean_abs_aae() / 10.0;
            m += report.mse / 10.0;
        }
        aae.push(a);
        mse.push(m);
    }
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[0] > w[1]);
    let show = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(",");
    ensure(decreasing(&aae), || format!("|AAE| not decreasing: {}", show(&aae)))?;
    ensure(decreasing(&mse), || format!("MSE not decreasing: {}", show(&mse)))?;
    Ok(format!("|AAE|={} MSE={}", show(&aae), show(&mse)))
}

// 9
fn attack_degradation() -> Check {
    let n = 64;
    let c = config(n, 1.0, 1.0, 8);
    let scale = c.randomizer().unwrap().scale();
    let mut precision = [0.0; 3];
    for seed in 0..10u64 {
        let batches = group_batches(&synth(n, 100, &table_range(), 900 + seed), n).batches;
        let out = run_trace(&batches, &c, seed).unwrap();
        for (i, scenario) in Scenario::ALL.into_iter().enumerate() {
            precision[i] += attack_rounds(&out.rounds, scenario, scale).unwrap().unwrap().precision / 10.0;
        }
    }
    let [raw, br, full] = precision;
    let detail = format!("raw={raw:.3} randomized={br:.3} full={full:.3}");
    ensure(raw > br && br > full, || format!("ordering violated: {detail}"))?;
    ensure(full <= 0.125, || format!("full pipeline precision too high: {detail}"))?;
    Ok(detail)
}

/// Set partitions of `0..n` as restricted growth strings.
fn set_partitions(n: usize, blocks: Option<usize>) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, rgs: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(rgs.clone());
            return;
        }
        for b in 0..=max + 1 {
            rgs.push(b);
            rec(i + 1, n, rgs, max.max(b), out);
            rgs.pop();
        }
    }
    let mut strings = Vec::new();
    let mut rgs = vec![0];
    rec(1, n, &mut rgs, 0, &mut strings);
    strings
        .into_iter()
        .map(|s| {
            let k = s.iter().max().unwrap() + 1;
            let mut groups = vec![Vec::new(); k];
            for (i, &b) in s.iter().enumerate() {
                groups[b].push(i);
            }
            groups
        })
        .filter(|g| blocks.is_none_or(|k| g.len() == k))
        .collect()
}

fn kendall_oracle(a: &[usize], b: &[usize]) -> usize {
    let mut d = 0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if (a[i] as i64 - a[j] as i64) * (b[i] as i64 - b[j] as i64) < 0 {
                d += 1;
            }
        }
    }
    d
}

fn permutations_of(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations_of(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

// 10
fn grouping_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cases = 0usize;
    for n in 2..=7 {
        let mut sigmas: Vec<Vec<usize>> = if n <= 6 {
            all_permutations(n).iter().map(|p| p.to_one_line()).collect()
        } else {
            vec![(1..=n).collect()]
        };
        if n == 7 {
            for _ in 0..10 {
                let mut s: Vec<usize> = (1..=n).collect();
                s.shuffle(&mut rng);
                sigmas.push(s);
            }
        }
        let partitions = set_partitions(n, None);
        for sigma in &sigmas {
            for groups in &partitions {
                for g in groups {
                    let pos: Vec<usize> = g.iter().map(|&i| sigma[i]).collect();
                    let (lo, hi) = (*pos.iter().min().unwrap(), *pos.iter().max().unwrap());
                    let width = hi - lo;
                    let bound = width * (width + 1) / 2;
                    let mut worst = 0;
                    for rearranged in permutations_of(&pos) {
                        let mut other = sigma.clone();
                        for (&i, &p) in g.iter().zip(&rearranged) {
                            other[i] = p;
                        }
                        worst = worst.max(kendall_oracle(sigma, &other));
                    }
                    ensure(worst <= bound, || format!("sigma={sigma:?} group={g:?}: distance {worst} > {bound}"))?;
                    if width + 1 == g.len() {
                        ensure(worst == bound, || format!("sigma={sigma:?} contiguous group={g:?}: {worst} != {bound}"))?;
                    }
                    cases += 1;
                }
            }
        }
    }

    let mut instances = 0usize;
    let mut gaps = Vec::new();
    for n in 3..=8 {
        for k in [2, 3] {
            if k >= n {
                continue;
            }
            let partitions = set_partitions(n, Some(k));
            for sigma in all_permutations(n) {
                let pos = sigma.to_one_line();
                let optimum = partitions
                    .iter()
                    .map(|groups| {
                        groups
                            .iter()
                            .map(|g| {
                                let (lo, hi) = g.iter().fold((usize::MAX, 0), |(lo, hi), &i| (lo.min(pos[i]), hi.max(pos[i])));
                                hi - lo
                            })
                            .max()
                            .unwrap()
                    })
                    .min()
                    .unwrap();
                let refined: Partition = refine_groups(&sigma, k).unwrap();
                let got = refined.global_width(&sigma).unwrap();
                if got != optimum {
                    gaps.push(format!("n={n} k={k} sigma={sigma}: {got} vs {optimum}"));
                }
                instances += 1;
            }
        }
    }
    ensure(gaps.is_empty(), || format!("{} of {instances} instances off the optimum, e.g. {}", gaps.len(), gaps[0]))?;
    Ok(format!("{cases} group rearrangement checks, {instances} refinement instances at the optimum"))
}

fn main() -> ExitCode {
    let checks: [Named; 10] = [
        ("estimator golden values", estimator_golden_values),
        ("grouping golden values", grouping_golden_values),
        ("Mallows sampler exactness", mallows_exactness),
        ("uniform-cycle fallback", uniform_cycle_fallback),
        ("LDP likelihood ratios", ldp_ratio),
        ("precision coverage at the bound", precision_coverage),
        ("utility envelope", utility_envelope),
        ("error trend over budgets", error_trend),
        ("attack degradation", attack_degradation),
        ("grouping oracles", grouping_oracles),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
