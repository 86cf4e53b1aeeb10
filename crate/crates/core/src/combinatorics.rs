//! Subsets, frequency lattices, smoothness coefficients, and stable
//! log-binomial arithmetic.
//!
//! Subsets of {1..d} of fixed cardinality k are streamed in lexicographic
//! order and addressed by their rank in that order (combinatorial number
//! system), so a subset never needs to be materialized to be located.
//! Frequency vectors are k-variate integer vectors with every coordinate
//! nonzero; most algorithms only consume them through their squared norm,
//! for which [`ShellTable`] provides lattice point counts per norm shell.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// An ordered k-subset of {1..d}: strictly increasing 1-based coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subset {
    coords: Vec<u32>,
}

impl Subset {
    /// Build from strictly increasing coordinates in [1, d].
    pub fn new(coords: Vec<u32>, d: u32) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("subset must be nonempty".into()));
        }
        if coords[0] < 1 || *coords.last().unwrap() > d {
            return Err(Error::InvalidArgument(format!(
                "subset coordinates must lie in [1, {d}]: {coords:?}"
            )));
        }
        if coords.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "subset coordinates must be strictly increasing: {coords:?}"
            )));
        }
        Ok(Subset { coords })
    }

    pub fn coords(&self) -> &[u32] {
        &self.coords
    }

    pub fn cardinality(&self) -> usize {
        self.coords.len()
    }

    /// Rank of this subset in the lexicographic enumeration of k-subsets of {1..d}.
    pub fn rank(&self, d: u32) -> u64 {
        let k = self.coords.len();
        let mut rank = 0u64;
        let mut prev = 0u32;
        for (i, &c) in self.coords.iter().enumerate() {
            for skipped in (prev + 1)..c {
                rank += binomial(u64::from(d - skipped), (k - i - 1) as u64);
            }
            prev = c;
        }
        rank
    }

    /// Inverse of [`Subset::rank`]. `rank` must be below binom(d,k).
    pub fn from_rank(d: u32, k: usize, mut rank: u64) -> Self {
        let mut coords = Vec::with_capacity(k);
        let mut next = 1u32;
        for i in 0..k {
            let mut c = next;
            loop {
                let tail = binomial(u64::from(d - c), (k - i - 1) as u64);
                if rank < tail {
                    break;
                }
                rank -= tail;
                c += 1;
            }
            coords.push(c);
            next = c + 1;
        }
        Subset { coords }
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}}")
    }
}

/// A k-variate frequency with all coordinates nonzero (coordinates outside
/// the owning subset are implicitly zero).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Frequency {
    entries: Vec<i32>,
}

impl Frequency {
    pub fn new(entries: Vec<i32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("frequency must be nonempty".into()));
        }
        if entries.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "frequency entries must be nonzero: {entries:?}"
            )));
        }
        Ok(Frequency { entries })
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    pub fn arity(&self) -> usize {
        self.entries.len()
    }

    /// Squared Euclidean norm Σ l². At least k by the nonzero-entry invariant.
    pub fn norm_sq(&self) -> u64 {
        self.entries
            .iter()
            .map(|&l| (i64::from(l) * i64::from(l)) as u64)
            .sum()
    }
}

/// Streaming lexicographic enumeration of all k-subsets of {1..d}.
///
/// Yields exactly binom(d,k) subsets using O(k) state.
pub fn enumerate_subsets(d: u32, k: usize) -> Result<SubsetIter> {
    if k == 0 || k as u64 > u64::from(d) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= d, got k={k}, d={d}"
        )));
    }
    Ok(SubsetIter {
        d,
        current: (1..=k as u32).collect(),
        done: false,
    })
}

pub struct SubsetIter {
    d: u32,
    current: Vec<u32>,
    done: bool,
}

impl Iterator for SubsetIter {
    type Item = Subset;

    fn next(&mut self) -> Option<Subset> {
        if self.done {
            return None;
        }
        let out = Subset {
            coords: self.current.clone(),
        };
        // advance to the lexicographic successor
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.d - (k - 1 - i) as u32 {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Exact binomial coefficient in u64; saturates only far outside this
/// library's operating range (d ≤ a few thousand, small k).
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc as u64
}

/// log of binom(d,k) via log-gamma.
///
/// ```
/// let lb = fanova_select::combinatorics::log_binomial(10, 2).unwrap();
/// assert!((lb - 45f64.ln()).abs() < 1e-12);
/// ```
pub fn log_binomial(d: u32, k: u32) -> Result<f64> {
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= d, got k={k}, d={d}"
        )));
    }
    if k == d {
        return Ok(0.0);
    }
    let (d, k) = (f64::from(d), f64::from(k));
    Ok(ln_gamma(d + 1.0) - ln_gamma(k + 1.0) - ln_gamma(d - k + 1.0))
}

/// All k-variate frequencies with nonzero integer coordinates and Euclidean
/// norm strictly less than `radius`, in lexicographic order on entries.
pub fn enumerate_frequencies(k: usize, radius: f64) -> Result<Vec<Frequency>> {
    if radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("arity k must be positive".into()));
    }
    let mut out = Vec::new();
    let mut entries = vec![0i32; k];
    let r_sq = radius * radius;
    fill_frequencies(&mut entries, 0, 0, r_sq, &mut out);
    Ok(out)
}

fn fill_frequencies(
    entries: &mut [i32],
    depth: usize,
    norm_sq_so_far: u64,
    r_sq: f64,
    out: &mut Vec<Frequency>,
) {
    let k = entries.len();
    let remaining = (k - depth - 1) as u64; // each remaining coordinate costs at least 1
    let budget = r_sq - (norm_sq_so_far + remaining) as f64;
    if budget <= 0.0 {
        return;
    }
    let max_abs = budget.sqrt().ceil() as i64;
    for l in -max_abs..=max_abs {
        if l == 0 {
            continue;
        }
        let n = norm_sq_so_far + (l * l) as u64;
        if (n + remaining) as f64 >= r_sq {
            continue;
        }
        entries[depth] = l as i32;
        if depth + 1 == k {
            out.push(Frequency {
                entries: entries.to_vec(),
            });
        } else {
            fill_frequencies(entries, depth + 1, n, r_sq, out);
        }
    }
}

/// Smoothness coefficient c_ℓ² = (Σ (2π l_j)²)^σ.
pub fn smoothness_coefficient(freq: &Frequency, sigma: f64) -> f64 {
    smoothness_from_norm_sq(freq.norm_sq(), sigma)
}

/// c² as a function of the squared frequency norm.
#[inline]
pub fn smoothness_from_norm_sq(norm_sq: u64, sigma: f64) -> f64 {
    let four_pi_sq = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    (four_pi_sq * norm_sq as f64).powf(sigma)
}

/// Lattice point counts per squared-norm shell.
///
/// `count(n)` is the number of k-variate vectors with all coordinates
/// nonzero and Σ l² = n. Built by k-fold convolution of the 1-D square
/// indicator, so no frequency list is ever materialized.
#[derive(Debug, Clone)]
pub struct ShellTable {
    k: usize,
    counts: Vec<u64>, // counts[n] for 0 <= n <= max_norm_sq
}

impl ShellTable {
    pub fn new(k: usize, max_norm_sq: u64) -> Self {
        // Walk positive-magnitude tuples; each stands for 2^k sign patterns.
        let mut counts = vec![0u64; (max_norm_sq + 1) as usize];
        let mult = 1u64 << k.min(63);
        fill_shell_counts(&mut counts, k, 0, 0, mult);
        ShellTable { k, counts }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn max_norm_sq(&self) -> u64 {
        self.counts.len() as u64 - 1
    }

    #[inline]
    pub fn count(&self, norm_sq: u64) -> u64 {
        self.counts.get(norm_sq as usize).copied().unwrap_or(0)
    }

    /// Occupied shells (n, count) with count > 0, ascending in n.
    pub fn occupied(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(n, &c)| (n as u64, c))
    }

    /// Total number of frequencies with norm² strictly below `r_sq`.
    pub fn total_below(&self, r_sq: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .take_while(|(n, _)| (*n as f64) < r_sq)
            .map(|(_, &c)| c)
            .sum()
    }
}

fn fill_shell_counts(counts: &mut [u64], k: usize, depth: usize, norm_sq: u64, mult: u64) {
    let remaining = (k - depth - 1) as u64;
    let len = counts.len() as u64;
    let mut m = 1u64;
    loop {
        let n = norm_sq + m * m;
        if n + remaining >= len {
            break;
        }
        if depth + 1 == k {
            counts[n as usize] += mult;
        } else {
            fill_shell_counts(counts, k, depth + 1, n, mult);
        }
        m += 1;
    }
}
