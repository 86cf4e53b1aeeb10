//! Weighted chi-square statistics, threshold grids, and the fixed-β and
//! Lepski-adaptive selectors.
//!
//! One grid node m carries a sparsity level β_m, the radius r*_m at which
//! the extremal value reaches √(2 β_m log binom(d,k)), the corresponding
//! extremal profile, and the decision threshold √((2β_m + ϵ) log binom).
//! The statistic of a subset at node m is S = Σ ω_ℓ ((X_ℓ/ε)² − 1) over the
//! node's support. Weights are constant on norm shells and affine in c², so
//! all M node statistics of one subset come out of a single prefix scan of
//! its shell sums: S_m = g_m·Σ T_n − h_m·Σ c²(n) T_n.
//!
//! The adaptive selector computes all M decision vectors, picks the Lepski
//! index m̂ = max{m : |η̂(β_m) − η̂(β_j)| ≤ v_j ∀ j < m} with slack
//! v_j = binom^{1−β_j}/τ, and reports the decisions at node m̂.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    binomial, log_binomial, smoothness_from_norm_sq, Frequency, Subset,
};
use crate::error::{Error, Result};
use crate::extremal::{ExtremalProfile, ExtremalSolver};

/// Threshold slack rule for ϵ in √((2β + ϵ) log binom).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonRule {
    /// Fixed value.
    Explicit(f64),
    /// ϵ = (log binom(d,k))^{-1/2}.
    LogInvSqrt,
}

/// Rule for the Lepski slack denominator τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauRule {
    /// Fixed value.
    Explicit(f64),
    /// max(2, log binom) when s is fixed; exp(√(log binom)·5/16) when s grows.
    LogRule,
}

/// Whether the number of orders s is held fixed or grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparsityRegime {
    FixedS,
    GrowingS,
}

/// Grid and rule configuration for the adaptive selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    /// Lower end b of the sparsity grid.
    pub grid_start: f64,
    /// Upper end B of the sparsity grid.
    pub grid_end: f64,
    /// Number of grid nodes M.
    pub grid_size: usize,
    pub epsilon_rule: EpsilonRule,
    pub tau_rule: TauRule,
    pub regime: SparsityRegime,
    /// Retain per-subset statistics in outcomes (small designs only).
    pub keep_statistics: bool,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            grid_start: 0.001,
            grid_end: 0.999,
            grid_size: 20,
            epsilon_rule: EpsilonRule::LogInvSqrt,
            tau_rule: TauRule::LogRule,
            regime: SparsityRegime::FixedS,
            keep_statistics: false,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_start > 0.0 && self.grid_start < self.grid_end && self.grid_end < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grid bounds must satisfy 0 < b < B < 1, got b={}, B={}",
                self.grid_start, self.grid_end
            )));
        }
        if self.grid_size < 2 || self.grid_size > 64 {
            return Err(Error::InvalidArgument(format!(
                "grid size must lie in [2, 64], got {}",
                self.grid_size
            )));
        }
        if let EpsilonRule::Explicit(e) = self.epsilon_rule {
            if e <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "threshold slack must be positive, got {e}"
                )));
            }
        }
        if let TauRule::Explicit(t) = self.tau_rule {
            if t <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "Lepski denominator must be positive, got {t}"
                )));
            }
        }
        Ok(())
    }

    /// Grid nodes β_1 = b < ... < β_M = B, equally spaced.
    pub fn grid_betas(&self) -> Vec<f64> {
        let step = (self.grid_end - self.grid_start) / (self.grid_size - 1) as f64;
        (0..self.grid_size)
            .map(|m| self.grid_start + m as f64 * step)
            .collect()
    }

    fn epsilon_for(&self, log_binom: f64) -> f64 {
        match self.epsilon_rule {
            EpsilonRule::Explicit(e) => e,
            EpsilonRule::LogInvSqrt => log_binom.powf(-0.5),
        }
    }

    /// Shared slack rule for the aggregate selector over orders 1..s.
    pub fn aggregate_epsilon(&self, d: u32, s: usize) -> f64 {
        match self.epsilon_rule {
            EpsilonRule::Explicit(e) => e,
            EpsilonRule::LogInvSqrt => match self.regime {
                SparsityRegime::FixedS => f64::from(d).ln().powf(-0.5),
                SparsityRegime::GrowingS => (f64::from(d) / s as f64).ln().powf(-0.5),
            },
        }
    }

    fn tau_for(&self, log_binom: f64) -> f64 {
        match self.tau_rule {
            TauRule::Explicit(t) => t,
            TauRule::LogRule => match self.regime {
                SparsityRegime::FixedS => log_binom.max(2.0),
                SparsityRegime::GrowingS => (log_binom.sqrt() * 5.0 / 16.0).exp(),
            },
        }
    }
}

/// One node of the selector grid.
#[derive(Debug, Clone)]
pub struct GridNode {
    pub beta: f64,
    /// √(2 β_m log binom), the level r*_m is solved for.
    pub a_target: f64,
    pub r_star: f64,
    pub threshold: f64,
    pub profile: ExtremalProfile,
}

/// Immutable per-(d,k) selector state: grid nodes, thresholds, Lepski
/// slacks, and the shell layout shared by all statistics.
#[derive(Debug, Clone)]
pub struct SelectorGrid {
    pub d: u32,
    pub k: usize,
    pub sigma: f64,
    pub epsilon_noise: f64,
    pub log_binom: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub nodes: Vec<GridNode>,
    /// v_j = binom^{1−β_j}/τ for j = 1..M.
    pub lepski_slack: Vec<f64>,
    pub keep_statistics: bool,
    // union support (node 1): shells ascending, lattice counts, c² values
    shells: Vec<u64>,
    shell_counts: Vec<u64>,
    phi: Vec<f64>,
    // per node: support prefix length and affine statistic coefficients
    node_len: Vec<usize>,
    node_g: Vec<f64>,
    node_h: Vec<f64>,
    // (prefix length, node) checkpoints sorted ascending by length
    checkpoints: Vec<(usize, usize)>,
}

impl SelectorGrid {
    /// Number of subsets binom(d,k).
    pub fn subset_count(&self) -> u64 {
        binomial(u64::from(self.d), self.k as u64)
    }

    pub fn grid_size(&self) -> usize {
        self.nodes.len()
    }

    /// Shells of the union support, ascending in norm².
    pub fn shells(&self) -> &[u64] {
        &self.shells
    }

    pub fn shell_counts(&self) -> &[u64] {
        &self.shell_counts
    }

    /// Statistic support size (frequencies) of the largest node.
    pub fn union_support_size(&self) -> u64 {
        self.shell_counts.iter().sum()
    }

    /// All M node statistics of one subset from its shell sums
    /// T_n = Σ_{‖ℓ‖²=n} ((X_ℓ/ε)² − 1), aligned with [`SelectorGrid::shells`].
    pub fn node_statistics(&self, t: &[f64]) -> Vec<f64> {
        debug_assert_eq!(t.len(), self.shells.len());
        let mut out = vec![0.0; self.nodes.len()];
        let mut c0 = 0.0;
        let mut cphi = 0.0;
        let mut next = 0;
        for i in 0..=t.len() {
            while next < self.checkpoints.len() && self.checkpoints[next].0 == i {
                let m = self.checkpoints[next].1;
                out[m] = self.node_g[m] * c0 - self.node_h[m] * cphi;
                next += 1;
            }
            if i < t.len() {
                c0 += t[i];
                cphi += self.phi[i] * t[i];
            }
        }
        out
    }

    /// Decision bitmask: bit m set iff S_m strictly exceeds threshold_m.
    pub fn decide(&self, stats: &[f64]) -> u64 {
        let mut mask = 0u64;
        for (m, (&s, node)) in stats.iter().zip(&self.nodes).enumerate() {
            if s > node.threshold {
                mask |= 1 << m;
            }
        }
        mask
    }

    /// Number of support shells of node m (0-based).
    pub fn node_support_shells(&self, m: usize) -> usize {
        self.node_len[m]
    }

    /// Number of support frequencies of node m (0-based).
    pub fn node_support_size(&self, m: usize) -> u64 {
        self.shell_counts[..self.node_len[m]].iter().sum()
    }

    /// Index (0-based) of the grid node snapped to β from below.
    pub fn snap_below(&self, beta: f64) -> usize {
        let mut idx = 0;
        for (m, node) in self.nodes.iter().enumerate() {
            if node.beta <= beta {
                idx = m;
            }
        }
        idx
    }
}

/// Build the selector grid: per node m, the grid point β_m, the boundary
/// radius r*_m, its extremal profile, and the threshold √((2β_m+ϵ) log binom).
pub fn build_grid(
    d: u32,
    k: usize,
    sigma: f64,
    epsilon_noise: f64,
    config: &SelectorConfig,
) -> Result<SelectorGrid> {
    build_grid_with_epsilon(d, k, sigma, epsilon_noise, config, None)
}

/// Grid with an explicit threshold slack override (used by the aggregate
/// selector, whose slack rule is shared across orders).
pub fn build_grid_with_epsilon(
    d: u32,
    k: usize,
    sigma: f64,
    epsilon_noise: f64,
    config: &SelectorConfig,
    epsilon_override: Option<f64>,
) -> Result<SelectorGrid> {
    config.validate()?;
    if epsilon_noise <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "grid construction needs a positive noise intensity, got {epsilon_noise}"
        )));
    }
    let log_binom = log_binomial(d, k as u32)?;
    let epsilon = epsilon_override.unwrap_or_else(|| config.epsilon_for(log_binom));
    let tau = config.tau_for(log_binom);
    let betas = config.grid_betas();

    let mut solver = ExtremalSolver::new(k, sigma)?;
    let mut nodes = Vec::with_capacity(betas.len());
    for (m, &beta) in betas.iter().enumerate() {
        let a_target = (2.0 * beta * log_binom).sqrt();
        let r_star = solver.solve_r_star(epsilon_noise, a_target).map_err(|e| match e {
            Error::TargetUnattainable {
                target, reachable, ..
            } => Error::TargetUnattainable {
                target,
                reachable,
                node: Some(m + 1),
            },
            other => other,
        })?;
        let profile = solver.solve(epsilon_noise, r_star)?;
        nodes.push(GridNode {
            beta,
            a_target,
            r_star,
            threshold: ((2.0 * beta + epsilon) * log_binom).sqrt(),
            profile,
        });
    }

    let lepski_slack = betas
        .iter()
        .map(|&b| ((1.0 - b) * log_binom).exp() / tau)
        .collect();

    // union support = node 1 (smallest β, widest support)
    let union = &nodes[0].profile;
    let shells: Vec<u64> = union.shells.iter().map(|s| s.norm_sq).collect();
    let shell_counts: Vec<u64> = union.shells.iter().map(|s| s.count).collect();
    let phi: Vec<f64> = shells
        .iter()
        .map(|&n| smoothness_from_norm_sq(n, sigma))
        .collect();

    let mut node_len = Vec::with_capacity(nodes.len());
    let mut node_g = Vec::with_capacity(nodes.len());
    let mut node_h = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let p = &node.profile;
        let len = shells.partition_point(|&n| n <= p.max_norm_sq());
        debug_assert_eq!(len, p.shells.len(), "node support is not a shell prefix");
        node_len.push(len);
        let g = p.amplitude / (2.0 * epsilon_noise * epsilon_noise * p.a_value);
        node_g.push(g);
        node_h.push(g * p.mu);
    }
    let mut checkpoints: Vec<(usize, usize)> =
        node_len.iter().copied().enumerate().map(|(m, l)| (l, m)).collect();
    checkpoints.sort_unstable();

    Ok(SelectorGrid {
        d,
        k,
        sigma,
        epsilon_noise,
        log_binom,
        epsilon,
        tau,
        nodes,
        lepski_slack,
        keep_statistics: config.keep_statistics,
        shells,
        shell_counts,
        phi,
        node_len,
        node_g,
        node_h,
        checkpoints,
    })
}

/// The weighted chi-square statistic Σ ω_ℓ ((X_ℓ/ε)² − 1) of one subset's
/// observations under the given extremal profile.
///
/// `data` must contain a value for every frequency in the profile support.
pub fn statistic(
    data: &BTreeMap<Frequency, f64>,
    profile: &ExtremalProfile,
    epsilon_noise: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for (freq, _, weight) in profile.frequencies() {
        let x = data.get(&freq).ok_or_else(|| {
            Error::MissingFrequency(format!("no observation at {:?}", freq.entries()))
        })?;
        let z = x / epsilon_noise;
        sum += weight * (z * z - 1.0);
    }
    Ok(sum)
}

/// Shell sums T_n from per-frequency observations aligned with a frequency
/// list; `shell_of[i]` maps observation i to its index in `grid.shells()`.
pub fn shell_stats_from_values(
    values: &[f64],
    shell_of: &[u32],
    grid: &SelectorGrid,
) -> Result<Vec<f64>> {
    if values.len() != shell_of.len() {
        return Err(Error::IndexMismatch(format!(
            "{} observations for {} support frequencies",
            values.len(),
            shell_of.len()
        )));
    }
    let mut t = vec![0.0; grid.shells.len()];
    for (&x, &s) in values.iter().zip(shell_of) {
        let z = x / grid.epsilon_noise;
        t[s as usize] += z * z - 1.0;
    }
    Ok(t)
}

/// Supplier of shell sums per subset rank.
///
/// Implementations must be pure in the rank so that scans parallelize
/// deterministically.
pub trait ShellStatSource: Sync {
    /// Fill `t` (length = number of grid shells) with the subset's shell sums.
    fn fill(&self, rank: u64, t: &mut [f64]);
}

/// Decision-vector aggregates over an ensemble of subsets.
///
/// Stores per-node positive counts, pairwise joint counts, and the sparse
/// list of subsets with any positive decision; enough to run Lepski's scan
/// and recover the selected decision vector without rescanning.
#[derive(Debug, Clone)]
pub struct EnsembleScan {
    m: usize,
    /// #subsets with decision 1 at node m.
    positives: Vec<u64>,
    /// joint counts for pairs (m, j), m > j, row-major triangular.
    joint: Vec<u64>,
    /// (rank, decision mask) for subsets with a nonzero mask, sorted by rank.
    masks: Vec<(u64, u64)>,
    /// retained statistics (rank, per-node values), when requested.
    stats: Option<Vec<(u64, Vec<f64>)>>,
}

impl EnsembleScan {
    pub fn new(m: usize, keep_stats: bool) -> Self {
        EnsembleScan {
            m,
            positives: vec![0; m],
            joint: vec![0; m * (m - 1) / 2],
            masks: Vec::new(),
            stats: keep_stats.then(Vec::new),
        }
    }

    #[inline]
    fn pair_index(m: usize, j: usize) -> usize {
        debug_assert!(m > j);
        m * (m - 1) / 2 + j
    }

    pub fn add(&mut self, rank: u64, mask: u64, stats: Option<Vec<f64>>) {
        if mask != 0 {
            for m in 0..self.m {
                if mask & (1 << m) != 0 {
                    self.positives[m] += 1;
                    for j in 0..m {
                        if mask & (1 << j) != 0 {
                            self.joint[Self::pair_index(m, j)] += 1;
                        }
                    }
                }
            }
            self.masks.push((rank, mask));
        }
        if let (Some(all), Some(s)) = (self.stats.as_mut(), stats) {
            all.push((rank, s));
        }
    }

    pub fn merge(mut self, other: EnsembleScan) -> EnsembleScan {
        for (a, b) in self.positives.iter_mut().zip(&other.positives) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(&other.joint) {
            *a += b;
        }
        self.masks.extend(other.masks);
        if let (Some(a), Some(b)) = (self.stats.as_mut(), other.stats) {
            a.extend(b);
        }
        self
    }

    /// Hamming distance between the decision vectors at nodes m and j.
    pub fn distance(&self, m: usize, j: usize) -> u64 {
        if m == j {
            return 0;
        }
        let (hi, lo) = if m > j { (m, j) } else { (j, m) };
        self.positives[hi] + self.positives[lo] - 2 * self.joint[Self::pair_index(hi, lo)]
    }

    pub fn positives(&self) -> &[u64] {
        &self.positives
    }

    fn sort(&mut self) {
        self.masks.sort_unstable_by_key(|&(rank, _)| rank);
        if let Some(stats) = self.stats.as_mut() {
            stats.sort_unstable_by_key(|&(rank, _)| rank);
        }
    }

    /// Restore rank order after merging scans of interleaved rank sets.
    pub fn into_sorted(mut self) -> Self {
        self.sort();
        self
    }
}

/// Scan a contiguous rank range, skipping `skip` (sorted), in parallel.
pub fn scan_subsets<S: ShellStatSource + ?Sized>(
    grid: &SelectorGrid,
    source: &S,
    ranks: std::ops::Range<u64>,
    skip: &[u64],
) -> EnsembleScan {
    const CHUNK: u64 = 2048;
    let total = ranks.end.saturating_sub(ranks.start);
    let n_chunks = total.div_ceil(CHUNK);
    let mut scan = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = ranks.start + c * CHUNK;
            let hi = (lo + CHUNK).min(ranks.end);
            let mut acc = EnsembleScan::new(grid.grid_size(), grid.keep_statistics);
            let mut t = vec![0.0; grid.shells.len()];
            for rank in lo..hi {
                if skip.binary_search(&rank).is_ok() {
                    continue;
                }
                source.fill(rank, &mut t);
                let stats = grid.node_statistics(&t);
                let mask = grid.decide(&stats);
                acc.add(rank, mask, grid.keep_statistics.then_some(stats));
            }
            acc
        })
        .reduce(
            || EnsembleScan::new(grid.grid_size(), grid.keep_statistics),
            EnsembleScan::merge,
        );
    scan.sort();
    scan
}

/// Scan an explicit sorted list of subset ranks (serial; used for the small
/// active sets of a sweep).
pub fn scan_ranks<S: ShellStatSource + ?Sized>(
    grid: &SelectorGrid,
    source: &S,
    ranks: &[u64],
) -> EnsembleScan {
    let mut acc = EnsembleScan::new(grid.grid_size(), grid.keep_statistics);
    let mut t = vec![0.0; grid.shells.len()];
    for &rank in ranks {
        source.fill(rank, &mut t);
        let stats = grid.node_statistics(&t);
        let mask = grid.decide(&stats);
        acc.add(rank, mask, grid.keep_statistics.then_some(stats));
    }
    acc
}

/// Lepski index from per-node aggregates: the largest m whose decision
/// vector stays within v_j of every coarser node j < m.
pub fn lepski_index_from_scan(scan: &EnsembleScan, slack: &[f64]) -> usize {
    let m_total = slack.len();
    let mut m_hat = 1;
    for m in 1..m_total {
        if (0..m).all(|j| scan.distance(m, j) as f64 <= slack[j]) {
            m_hat = m + 1;
        }
    }
    m_hat
}

/// Lepski index from explicit per-node decision vectors given as sorted
/// lists of flagged subset ranks.
pub fn lepski_index(node_decisions: &[Vec<u64>], slack: &[f64]) -> usize {
    let m_total = node_decisions.len();
    let dist = |a: &[u64], b: &[u64]| -> u64 {
        let mut i = 0;
        let mut j = 0;
        let mut d = 0;
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    d += 1;
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    d += 1;
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        d + (a.len() - i) as u64 + (b.len() - j) as u64
    };
    let mut m_hat = 1;
    for m in 1..m_total {
        if (0..m).all(|j| dist(&node_decisions[m], &node_decisions[j]) as f64 <= slack[j]) {
            m_hat = m + 1;
        }
    }
    m_hat
}

/// Result of one selection run.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionOutcome {
    /// Selected grid node, 1-based.
    pub m_hat: usize,
    /// Sorted ranks of subsets flagged at node m̂.
    pub flagged: Vec<u64>,
    /// Per-node thresholds.
    pub thresholds: Vec<f64>,
    /// Per-node counts of positive decisions.
    pub node_positives: Vec<u64>,
    /// Per-subset statistics (rank, per-node values) when retained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistics: Option<Vec<(u64, Vec<f64>)>>,
}

impl SelectionOutcome {
    pub fn is_flagged(&self, rank: u64) -> bool {
        self.flagged.binary_search(&rank).is_ok()
    }

    /// Decisions as subsets (for small designs).
    pub fn flagged_subsets(&self, d: u32, k: usize) -> Vec<Subset> {
        self.flagged
            .iter()
            .map(|&r| Subset::from_rank(d, k, r))
            .collect()
    }
}

pub(crate) fn outcome_from_scan(
    grid: &SelectorGrid,
    scan: EnsembleScan,
    m_hat: usize,
) -> SelectionOutcome {
    let bit = 1u64 << (m_hat - 1);
    let flagged = scan
        .masks
        .iter()
        .filter(|&&(_, mask)| mask & bit != 0)
        .map(|&(rank, _)| rank)
        .collect();
    SelectionOutcome {
        m_hat,
        flagged,
        thresholds: grid.nodes.iter().map(|n| n.threshold).collect(),
        node_positives: scan.positives.clone(),
        statistics: scan.stats,
    }
}

/// Adaptive selector: statistics at every grid node for every subset,
/// Lepski's choice of m̂, decisions at node m̂.
pub fn select_adaptive<S: ShellStatSource>(grid: &SelectorGrid, source: &S) -> SelectionOutcome {
    let scan = scan_subsets(grid, source, 0..grid.subset_count(), &[]);
    let m_hat = lepski_index_from_scan(&scan, &grid.lepski_slack);
    outcome_from_scan(grid, scan, m_hat)
}

/// Fixed-β selector: decisions at the grid node snapped to β from below.
pub fn select_fixed_beta<S: ShellStatSource>(
    grid: &SelectorGrid,
    source: &S,
    beta: f64,
) -> Result<SelectionOutcome> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sparsity index must lie in (0,1), got {beta}"
        )));
    }
    let scan = scan_subsets(grid, source, 0..grid.subset_count(), &[]);
    let m = grid.snap_below(beta);
    Ok(outcome_from_scan(grid, scan, m + 1))
}

/// Aggregate selector over orders: runs the adaptive selector independently
/// per order with grids sharing the regime's slack rule.
pub fn select_aggregate(
    items: &[(&SelectorGrid, &dyn ShellStatSource)],
) -> BTreeMap<usize, SelectionOutcome> {
    items
        .iter()
        .map(|&(grid, source)| {
            let scan = scan_subsets(grid, source, 0..grid.subset_count(), &[]);
            let m_hat = lepski_index_from_scan(&scan, &grid.lepski_slack);
            (grid.k, outcome_from_scan(grid, scan, m_hat))
        })
        .collect()
}
