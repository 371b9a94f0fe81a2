//! Contributor groups and the Kendall-tau sensitivity they induce.
//!
//! Contributors are split into disjoint groups. Under a data permutation `σ`
//! (contributor `i` sits at arrival position `σ(i)`), the width of a group is
//! the positional spread of its members, and the sensitivity of the Mallows
//! shuffle is `ω(ω+1)/2` for the largest width `ω` of any group.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Permutation;

/// Undirected simple graph over contributors `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct ContributorGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
}

#[derive(Deserialize)]
struct RawGraph {
    n: usize,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawGraph> for ContributorGraph {
    type Error = Error;
    fn try_from(r: RawGraph) -> Result<Self> {
        ContributorGraph::new(r.n, r.edges)
    }
}

impl ContributorGraph {
    /// Validates and normalizes the edge list: each edge is stored as
    /// `[min, max]`, sorted, with no self-loops or duplicates.
    pub fn new(n: usize, edges: impl IntoIterator<Item = [usize; 2]>) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("graph.n", "must be positive"));
        }
        let mut set = BTreeSet::new();
        for [a, b] in edges {
            if a == 0 || b == 0 || a > n || b > n {
                return Err(Error::config("graph.edges", format!("edge [{a}, {b}] outside 1..={n}")));
            }
            if a == b {
                return Err(Error::config("graph.edges", format!("self-loop on {a}")));
            }
            if !set.insert([a.min(b), a.max(b)]) {
                return Err(Error::config("graph.edges", format!("duplicate edge [{a}, {b}]")));
            }
        }
        Ok(ContributorGraph {
            n,
            edges: set.into_iter().collect(),
        })
    }

    pub fn edgeless(n: usize) -> Result<Self> {
        ContributorGraph::new(n, [])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &[a, b] in &self.edges {
            adj[a - 1].push(b - 1);
            adj[b - 1].push(a - 1);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest member.
    /// Indices are 0-based.
    fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

/// `k` nonempty disjoint groups covering `1..=n`.
///
/// Groups are kept in canonical form: members sorted, groups ordered by
/// their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<usize>>")]
pub struct Partition {
    // 0-based members
    groups: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition of `1..=n` from 1-based groups.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("n must be positive".into()));
        }
        let mut seen = vec![false; n];
        let mut zero_based = Vec::with_capacity(groups.len());
        for g in groups {
            if g.is_empty() {
                return Err(Error::InvalidPartition("empty group".into()));
            }
            let mut members = Vec::with_capacity(g.len());
            for i in g {
                if i == 0 || i > n {
                    return Err(Error::InvalidPartition(format!("member {i} outside 1..={n}")));
                }
                if std::mem::replace(&mut seen[i - 1], true) {
                    return Err(Error::InvalidPartition(format!("member {i} in two groups")));
                }
                members.push(i - 1);
            }
            zero_based.push(members);
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("member {} not covered", missing + 1)));
        }
        Ok(Partition::canonical(zero_based))
    }

    fn canonical(mut groups: Vec<Vec<usize>>) -> Self {
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort_unstable_by_key(|g| g[0]);
        Partition { groups }
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Partition::new(n, (1..=n).map(|i| vec![i]).collect())
    }

    pub fn whole(n: usize) -> Result<Self> {
        Partition::new(n, vec![(1..=n).collect()])
    }

    pub fn n(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Number of groups `k`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// 1-based groups.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|i| i + 1).collect())
            .collect()
    }

    /// Group sizes `δ = (δ_1, …, δ_k)`.
    pub fn size_vector(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Largest group width under `sigma`.
    pub fn global_width(&self, sigma: &Permutation) -> Result<usize> {
        if sigma.len() != self.n() {
            return Err(Error::SizeMismatch {
                expected: self.n(),
                found: sigma.len(),
            });
        }
        Ok(self
            .groups
            .iter()
            .map(|g| width_zero_based(sigma, g))
            .max()
            .unwrap_or(0))
    }
}

impl From<Partition> for Vec<Vec<usize>> {
    fn from(p: Partition) -> Self {
        p.groups()
    }
}

/// Maximum positional gap `max |σ(i) - σ(j)|` between members of `group`
/// (1-based contributor indices).
pub fn group_width(sigma: &Permutation, group: &[usize]) -> Result<usize> {
    if group.is_empty() {
        return Err(Error::Empty("group"));
    }
    if let Some(&bad) = group.iter().find(|&&i| i == 0 || i > sigma.len()) {
        return Err(Error::InvalidPartition(format!("member {bad} outside 1..={}", sigma.len())));
    }
    let positions = group.iter().map(|&i| sigma.get(i));
    let (lo, hi) = positions.fold((usize::MAX, 0), |(lo, hi), p| (lo.min(p), hi.max(p)));
    Ok(hi - lo)
}

fn width_zero_based(sigma: &Permutation, group: &[usize]) -> usize {
    let pos = sigma.zero_based();
    let (lo, hi) = group
        .iter()
        .map(|&i| pos[i])
        .fold((usize::MAX, 0), |(lo, hi), p| (lo.min(p), hi.max(p)));
    hi - lo
}

/// `ω(ω+1)/2` for a global width `ω`.
pub fn sensitivity_of_width(width: usize) -> u64 {
    let w = width as u64;
    w * (w + 1) / 2
}

/// Kendall-tau sensitivity of the Mallows shuffle centered at `sigma0` under
/// `partition`.
pub fn sensitivity(sigma0: &Permutation, partition: &Partition) -> Result<u64> {
    Ok(sensitivity_of_width(partition.global_width(sigma0)?))
}

/// Extracts `k` groups of contributors that are close in the graph.
///
/// Starts from connected components. Surplus components are merged pairwise,
/// always joining two components that hold consecutive indices (smallest
/// combined size first, then smallest member). Missing groups are produced
/// by splitting the largest group along a breadth-first order from its
/// smallest member.
pub fn initial_partition(graph: &ContributorGraph, k: usize) -> Result<Partition> {
    let n = graph.n();
    if k == 0 || k > n {
        return Err(Error::config("k", format!("{k} not in 1..={n}")));
    }
    let mut groups = graph.components();

    while groups.len() > k {
        let mut owner = vec![0; n];
        for (g, members) in groups.iter().enumerate() {
            for &i in members {
                owner[i] = g;
            }
        }
        // (combined size, smallest member, first, second)
        let mut best: Option<(usize, usize, usize, usize)> = None;
        for i in 0..n - 1 {
            let (a, b) = (owner[i], owner[i + 1]);
            if a == b {
                continue;
            }
            let (a, b) = (a.min(b), a.max(b));
            let key = (
                groups[a].len() + groups[b].len(),
                groups[a][0].min(groups[b][0]),
                a,
                b,
            );
            if best.is_none_or(|cur| key < cur) {
                best = Some(key);
            }
        }
        let (_, _, a, b) = best.expect("at least two groups share a boundary");
        let absorbed = groups.remove(b);
        groups[a].extend(absorbed);
        groups[a].sort_unstable();
    }

    if groups.len() < k {
        let adj = graph.adjacency();
        while groups.len() < k {
            let target = (0..groups.len())
                .max_by(|&x, &y| groups[x].len().cmp(&groups[y].len()).then(groups[y][0].cmp(&groups[x][0])))
                .unwrap();
            let members = groups.swap_remove(target);
            let (head, tail) = bfs_split(&members, &adj);
            groups.push(head);
            groups.push(tail);
        }
    }
    Ok(Partition::canonical(groups))
}

fn bfs_split(members: &[usize], adj: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let inside: BTreeSet<usize> = members.iter().copied().collect();
    let mut order = Vec::with_capacity(members.len());
    let mut seen = BTreeSet::new();
    // members may not be connected; restart from the smallest unvisited one
    for &start in members {
        if !seen.insert(start) {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &adj[u] {
                if inside.contains(&v) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
    }
    let cut = members.len().div_ceil(2);
    let mut head = order[..cut].to_vec();
    let mut tail = order[cut..].to_vec();
    head.sort_unstable();
    tail.sort_unstable();
    (head, tail)
}

/// Agglomerative refinement of `n` contributors into `k` groups (`1 < k < n`)
/// that keeps the global width under `sigma` small.
///
/// Starts from singletons and repeatedly performs the merge with the lowest
/// cost, where cost is the resulting global width floored at
/// `⌈n/k⌉ - 1` (no `k`-partition can do better). Ties prefer the larger
/// merged group, then the narrower one, then the one whose leftmost member
/// comes first.
pub fn refine_groups(sigma: &Permutation, k: usize) -> Result<Partition> {
    let n = sigma.len();
    if k <= 1 || k >= n {
        return Err(Error::config("k", format!("refinement needs 1 < k < n, got k={k}, n={n}")));
    }
    Ok(Agglomeration::new(sigma, k).run_until(k).into_partition(sigma))
}

#[derive(Debug, Clone)]
struct Span {
    lo: usize,
    hi: usize,
    size: usize,
    // arrival positions, 0-based
    positions: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Agglomeration {
    spans: Vec<Span>,
    floor: usize,
}

impl Agglomeration {
    fn new(sigma: &Permutation, k: usize) -> Self {
        let n = sigma.len();
        Agglomeration {
            spans: (0..n)
                .map(|p| Span {
                    lo: p,
                    hi: p,
                    size: 1,
                    positions: vec![p],
                })
                .collect(),
            floor: n.div_ceil(k) - 1,
        }
    }

    fn run_until(mut self, k: usize) -> Self {
        while self.spans.len() > k {
            let (a, b) = self.best_merge();
            self.merge(a, b);
        }
        self
    }

    #[cfg(test)]
    fn global_width(&self) -> usize {
        self.spans.iter().map(|s| s.hi - s.lo).max().unwrap_or(0)
    }

    /// Cost key of merging spans `a` and `b`; lower is better.
    fn merge_key(&self, a: usize, b: usize, others_max: usize) -> (usize, std::cmp::Reverse<usize>, usize, usize, usize) {
        let (sa, sb) = (&self.spans[a], &self.spans[b]);
        let lo = sa.lo.min(sb.lo);
        let hi = sa.hi.max(sb.hi);
        let width = hi - lo;
        (
            width.max(others_max).max(self.floor),
            std::cmp::Reverse(sa.size + sb.size),
            width,
            lo,
            sa.lo.max(sb.lo),
        )
    }

    fn best_merge(&self) -> (usize, usize) {
        // the three widest spans are enough to know the width of "everything else"
        let mut top: Vec<(usize, usize)> = self.spans.iter().enumerate().map(|(i, s)| (s.hi - s.lo, i)).collect();
        top.sort_unstable_by(|x, y| y.cmp(x));
        top.truncate(3);
        let others_max = |a: usize, b: usize| {
            top.iter()
                .find(|&&(_, i)| i != a && i != b)
                .map_or(0, |&(w, _)| w)
        };
        let mut best = None;
        for a in 0..self.spans.len() {
            for b in a + 1..self.spans.len() {
                let key = self.merge_key(a, b, others_max(a, b));
                if best.as_ref().is_none_or(|(k, _)| &key < k) {
                    best = Some((key, (a, b)));
                }
            }
        }
        best.expect("at least two spans").1
    }

    fn merge(&mut self, a: usize, b: usize) {
        let absorbed = self.spans.swap_remove(b.max(a));
        let keep = &mut self.spans[a.min(b)];
        keep.lo = keep.lo.min(absorbed.lo);
        keep.hi = keep.hi.max(absorbed.hi);
        keep.size += absorbed.size;
        keep.positions.extend(absorbed.positions);
    }

    fn into_partition(self, sigma: &Permutation) -> Partition {
        let at = sigma.inverse();
        let groups = self
            .spans
            .into_iter()
            .map(|s| s.positions.into_iter().map(|p| at.zero_based()[p]).collect())
            .collect();
        Partition::canonical(groups)
    }
}
