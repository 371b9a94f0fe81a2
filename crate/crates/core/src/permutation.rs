//! Permutations of `1..=n` in one-line notation.
//!
//! A [`Permutation`] maps every index `i` to a distinct `σ(i)`. All public
//! interfaces are 1-based; storage is 0-based. Composition follows the
//! function convention `(σ∘τ)(i) = σ(τ(i))`.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bijection on `1..=n`, `n >= 1`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    // images[i] = σ(i + 1) - 1
    images: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from its 1-based one-line notation.
    pub fn new(one_line: Vec<usize>) -> Result<Self> {
        let n = one_line.len();
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        let mut seen = vec![false; n];
        let mut images = one_line;
        for v in images.iter_mut() {
            if *v == 0 || *v > n {
                return Err(Error::NotBijection {
                    n,
                    reason: format!("value {v} out of range"),
                });
            }
            *v -= 1;
            if std::mem::replace(&mut seen[*v], true) {
                return Err(Error::NotBijection {
                    n,
                    reason: format!("value {} repeated", *v + 1),
                });
            }
        }
        Ok(Permutation { images })
    }

    pub(crate) fn from_zero_based_unchecked(images: Vec<usize>) -> Self {
        debug_assert!(is_bijection(&images));
        Permutation { images }
    }

    /// The identity permutation `(1, 2, …, n)`.
    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(0));
        }
        Ok(Permutation {
            images: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// `σ(i)` for 1-based `i`.
    ///
    /// Panics if `i` is not in `1..=n`.
    pub fn get(&self, i: usize) -> usize {
        self.images[i - 1] + 1
    }

    /// The 1-based one-line notation.
    pub fn to_one_line(&self) -> Vec<usize> {
        self.images.iter().map(|v| v + 1).collect()
    }

    pub(crate) fn zero_based(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| i == v)
    }

    /// `π` with `π(i) = σ(τ(i))`.
    pub fn compose(&self, tau: &Permutation) -> Result<Permutation> {
        check_sizes(self.len(), tau.len())?;
        Ok(Permutation {
            images: tau.images.iter().map(|&t| self.images[t]).collect(),
        })
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.images.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { images: inv }
    }

    /// Kendall-tau distance: the number of index pairs `i < j` that `self`
    /// and `other` order differently.
    ///
    /// Runs in `O(n log n)` by counting the inversions of `σ∘τ⁻¹` with a
    /// merge sort.
    pub fn kendall_tau(&self, other: &Permutation) -> Result<u64> {
        check_sizes(self.len(), other.len())?;
        let relative = self.compose(&other.inverse())?;
        let mut buf = relative.images;
        let mut scratch = vec![0; buf.len()];
        Ok(count_inversions(&mut buf, &mut scratch))
    }

    /// Number of cycles in the disjoint-cycle decomposition, fixed points
    /// included.
    pub fn cycle_count(&self) -> usize {
        let mut seen = vec![false; self.len()];
        let mut cycles = 0;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.images[i];
            }
        }
        cycles
    }

    /// True when the permutation is a single `n`-cycle.
    pub fn is_single_cycle(&self) -> bool {
        self.len() >= 2 && self.cycle_count() == 1
    }

    /// Rearranges `values` into `(v_{σ(1)}, …, v_{σ(n)})`.
    pub fn apply<T: Clone>(&self, values: &[T]) -> Result<Vec<T>> {
        check_sizes(self.len(), values.len())?;
        Ok(self.images.iter().map(|&i| values[i].clone()).collect())
    }

    /// Uniform-cycle shuffle: for each position `i` in `1..n`, swap entry
    /// `i` with an entry `j` drawn uniformly from `i+1..=n`.
    ///
    /// The output equals `σ∘c` for a uniformly random `n`-cycle `c`, so each
    /// of the `(n-1)!` reachable outputs has probability `1/(n-1)!`.
    pub fn sattolo_shuffle<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Permutation> {
        self.sattolo_shuffle_with(|lo, hi| rng.gen_range(lo..=hi))
    }

    /// [`Permutation::sattolo_shuffle`] with the swap partner supplied by
    /// `pick(lo, hi)`, which must return a 1-based position in `lo..=hi`.
    pub fn sattolo_shuffle_with<F>(&self, mut pick: F) -> Result<Permutation>
    where
        F: FnMut(usize, usize) -> usize,
    {
        let n = self.len();
        if n < 2 {
            return Err(Error::Degenerate(format!(
                "uniform-cycle shuffle needs at least 2 entries, got {n}"
            )));
        }
        let mut images = self.images.clone();
        for i in 1..n {
            let j = pick(i + 1, n);
            assert!(
                (i + 1..=n).contains(&j),
                "swap partner {j} outside {}..={n}",
                i + 1
            );
            images.swap(i - 1, j - 1);
        }
        Ok(Permutation { images })
    }
}

/// Data permutation `σ_ŷ = (Idx(y_1), …, Idx(y_n))`: `positions[i-1]` is the
/// 1-based arrival position of contributor `i`.
pub fn data_permutation(positions: &[usize]) -> Result<Permutation> {
    Permutation::new(positions.to_vec())
}

/// Data permutation from the arrival sequence itself: `arrivals[p-1]` is the
/// contributor whose value arrived at position `p`.
pub fn data_permutation_from_arrivals(arrivals: &[usize]) -> Result<Permutation> {
    Ok(Permutation::new(arrivals.to_vec())?.inverse())
}

fn check_sizes(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::SizeMismatch { expected, found });
    }
    Ok(())
}

fn is_bijection(images: &[usize]) -> bool {
    let mut seen = vec![false; images.len()];
    images
        .iter()
        .all(|&v| v < images.len() && !std::mem::replace(&mut seen[v], true))
}

fn count_inversions(buf: &mut [usize], scratch: &mut [usize]) -> u64 {
    let n = buf.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = buf.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        count_inversions(left, sl) + count_inversions(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if buf[i] <= buf[j] {
            scratch[k] = buf[i];
            i += 1;
        } else {
            scratch[k] = buf[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&buf[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&buf[j..n]);
    buf.copy_from_slice(&scratch[..n]);
    count
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.to_one_line()
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.images.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v + 1)?;
        }
        f.write_str(")")
    }
}

/// Every permutation of `1..=n` in lexicographic order. Intended for small
/// `n` (exhaustive checks).
pub fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    loop {
        out.push(Permutation::from_zero_based_unchecked(current.clone()));
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| current[i] < current[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| current[j] > current[i]).unwrap();
        current.swap(i, j);
        current[i + 1..].reverse();
    }
    out
}
