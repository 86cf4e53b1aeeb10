//! Monte Carlo estimation of the normalized Hamming risk, signal-strength
//! sweeps, the boundary dichotomy experiment, and the phase diagram.
//!
//! The harness never materializes per-frequency observations: the statistics
//! of a subset depend on the data only through the per-shell sums
//! Σ_{‖ℓ‖²=n} (X_ℓ/ε)², which is chi-square with N_n degrees of freedom
//! (noncentral under signal with λ_n = Σ (αθ_ℓ/ε)²). Sampling those sums
//! directly is exact in distribution and turns ~10⁷ normal draws per subset
//! into ~10⁴ chi-square draws. Streams are keyed by (replicate seed, subset
//! rank), so results are identical for any thread count.

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::Serialize;

use crate::combinatorics::Subset;
use crate::error::{Error, Result};
use crate::extremal::ExtremalSolver;
use crate::model::{ComponentSpec, ModelInstance, Orders};
use crate::rng::{mix, subset_stream};
use crate::selector::{
    lepski_index_from_scan, outcome_from_scan, scan_ranks, scan_subsets, SelectorConfig,
    SelectorGrid, SelectionOutcome, ShellStatSource,
};

/// Hamming distance between dense decision vectors over the same index set.
pub fn hamming(a: &[bool], b: &[bool]) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::IndexMismatch(format!(
            "decision vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count() as u64)
}

/// Hamming distance between decision vectors given as sorted flagged-rank lists.
pub fn hamming_sorted(a: &[u64], b: &[u64]) -> u64 {
    let (mut i, mut j, mut d) = (0, 0, 0u64);
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
}

/// Sparse counts of disagreements split into false positives/negatives.
fn fp_fn(flagged: &[u64], truth: &[u64]) -> (u32, u32) {
    let fp = flagged
        .iter()
        .filter(|r| truth.binary_search(r).is_err())
        .count() as u32;
    let fn_ = truth
        .iter()
        .filter(|r| flagged.binary_search(r).is_err())
        .count() as u32;
    (fp, fn_)
}

/// Shell-level Monte Carlo observation source for one replicate.
///
/// Null subsets draw central chi-squares per shell; active subsets draw
/// noncentral ones via χ²_{N−1} + (Z + √λ)².
pub struct MonteCarloSource<'a> {
    replicate_seed: u64,
    shell_counts: &'a [u64],
    /// rank → per-shell noncentrality λ_n (aligned with the grid shells).
    lambda: HashMap<u64, Vec<f64>>,
}

impl<'a> MonteCarloSource<'a> {
    pub fn new(
        replicate_seed: u64,
        shell_counts: &'a [u64],
        lambda: HashMap<u64, Vec<f64>>,
    ) -> Self {
        MonteCarloSource {
            replicate_seed,
            shell_counts,
            lambda,
        }
    }
}

impl ShellStatSource for MonteCarloSource<'_> {
    fn fill(&self, rank: u64, t: &mut [f64]) {
        let mut rng = subset_stream(self.replicate_seed, rank);
        let lambda = self.lambda.get(&rank);
        for (i, &n) in self.shell_counts.iter().enumerate() {
            let nf = n as f64;
            let lam = lambda.map_or(0.0, |l| l[i]);
            let w = if lam > 0.0 {
                let central = if n > 1 {
                    Gamma::new(0.5 * (nf - 1.0), 2.0).unwrap().sample(&mut rng)
                } else {
                    0.0
                };
                let z: f64 = rng.sample(StandardNormal);
                central + (z + lam.sqrt()) * (z + lam.sqrt())
            } else {
                Gamma::new(0.5 * nf, 2.0).unwrap().sample(&mut rng)
            };
            t[i] = w - nf;
        }
    }
}

/// Outcome counts of one replicate.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: u32,
    pub false_pos: u32,
    pub false_neg: u32,
    /// Normalized Hamming error Σ_k binom^{β_k−1} (fp_k + fn_k).
    pub err: f64,
    /// Selected Lepski node per order.
    pub m_hat: Vec<usize>,
    /// Counts split by order, aligned with the report's order list.
    pub fp_by_order: Vec<u32>,
    pub fn_by_order: Vec<u32>,
}

/// Monte Carlo risk estimate for one configuration.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RiskReport {
    pub d: u32,
    pub orders: Vec<usize>,
    /// Scale applied to the swept component, when part of a sweep.
    pub alpha: Option<f64>,
    /// Mean normalized Hamming risk over replicates.
    pub err: f64,
    pub false_pos: f64,
    pub false_neg: f64,
    pub replicates: u32,
    pub seed: u64,
    pub per_replicate: Vec<ReplicateRecord>,
    /// Wall-clock seconds; excluded from serialized reports so that equal
    /// seeds yield byte-identical output.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RiskReport {
    fn from_replicates(
        d: u32,
        orders: Vec<usize>,
        alpha: Option<f64>,
        seed: u64,
        records: Vec<ReplicateRecord>,
        wall_time: f64,
    ) -> Self {
        let j = records.len() as f64;
        RiskReport {
            d,
            orders,
            alpha,
            err: records.iter().map(|r| r.err).sum::<f64>() / j,
            false_pos: records.iter().map(|r| f64::from(r.false_pos)).sum::<f64>() / j,
            false_neg: records.iter().map(|r| f64::from(r.false_neg)).sum::<f64>() / j,
            replicates: records.len() as u32,
            seed,
            per_replicate: records,
            wall_time,
        }
    }
}

/// One order of a compiled experiment: grid, truth, and noncentralities.
struct CompiledOrder {
    grid: SelectorGrid,
    /// Sorted ranks of the active subsets.
    truth: Vec<u64>,
    /// λ per active rank, aligned with the grid shells; includes the
    /// component's signal scale.
    lambda: HashMap<u64, Vec<f64>>,
    /// binom(d,k)^{β−1} with β derived from the active count.
    norm: f64,
}

fn compile_order(
    instance: &ModelInstance,
    k: usize,
    config: &SelectorConfig,
    epsilon_override: Option<f64>,
) -> Result<CompiledOrder> {
    let beta = instance.beta(k)?;
    let grid = crate::selector::build_grid_with_epsilon(
        instance.d(),
        k,
        instance.sigma(),
        instance.epsilon_noise(),
        config,
        epsilon_override,
    )?;
    let max_n = *grid.shells().last().expect("nonempty support");
    let mut truth = Vec::new();
    let mut lambda = HashMap::new();
    let eps = instance.epsilon_noise();
    for u in instance.active().keys() {
        if u.cardinality() != k {
            continue;
        }
        let rank = u.rank(instance.d());
        truth.push(rank);
        let energy = instance.signal_energy_by_norm(u, max_n)?;
        let scale = (instance.alpha_of(u) / eps).powi(2);
        let lam: Vec<f64> = grid
            .shells()
            .iter()
            .map(|&n| energy[n as usize] * scale)
            .collect();
        lambda.insert(rank, lam);
    }
    truth.sort_unstable();
    let norm = ((beta - 1.0) * grid.log_binom).exp();
    Ok(CompiledOrder {
        grid,
        truth,
        lambda,
        norm,
    })
}

fn epsilon_override_for(instance: &ModelInstance, config: &SelectorConfig) -> Option<f64> {
    match instance.orders() {
        Orders::Single(_) => None,
        Orders::UpTo(s) => Some(config.aggregate_epsilon(instance.d(), s)),
    }
}

/// Monte Carlo estimate of the normalized Hamming risk of the adaptive
/// selector on the given instance: J independent replicates with seeds
/// derived from `seed` via the fixed mixing function.
pub fn estimate_risk(
    instance: &ModelInstance,
    config: &SelectorConfig,
    replicates: u32,
    seed: u64,
) -> Result<RiskReport> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let start = Instant::now();
    let orders: Vec<usize> = instance.orders().iter().collect();

    if instance.epsilon_noise() == 0.0 {
        return noiseless_report(instance, config, replicates, seed, start);
    }

    let eps_override = epsilon_override_for(instance, config);
    let compiled: Vec<CompiledOrder> = orders
        .iter()
        .map(|&k| {
            compile_order(instance, k, config, eps_override).map_err(|e| Error::AtOrder {
                k,
                inner: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(replicates as usize);
    for j in 0..replicates {
        let seed_j = mix(seed, u64::from(j));
        let mut err = 0.0;
        let mut m_hats = Vec::with_capacity(compiled.len());
        let mut fp_by_order = Vec::with_capacity(compiled.len());
        let mut fn_by_order = Vec::with_capacity(compiled.len());
        for order in &compiled {
            let source =
                MonteCarloSource::new(seed_j, order.grid.shell_counts(), order.lambda.clone());
            let outcome = crate::selector::select_adaptive(&order.grid, &source);
            let (fp, fn_) = fp_fn(&outcome.flagged, &order.truth);
            err += order.norm * f64::from(fp + fn_);
            m_hats.push(outcome.m_hat);
            fp_by_order.push(fp);
            fn_by_order.push(fn_);
        }
        records.push(ReplicateRecord {
            replicate: j,
            false_pos: fp_by_order.iter().sum(),
            false_neg: fn_by_order.iter().sum(),
            err,
            m_hat: m_hats,
            fp_by_order,
            fn_by_order,
        });
    }
    Ok(RiskReport::from_replicates(
        instance.d(),
        orders,
        None,
        seed,
        records,
        start.elapsed().as_secs_f64(),
    ))
}

/// Degenerate noiseless case: every signal coefficient is observed exactly,
/// so a component is identified iff it carries any energy.
fn noiseless_report(
    instance: &ModelInstance,
    config: &SelectorConfig,
    replicates: u32,
    seed: u64,
    start: Instant,
) -> Result<RiskReport> {
    let orders: Vec<usize> = instance.orders().iter().collect();
    let mut fn_total = 0u32;
    let mut err = 0.0;
    let mut fp_noiseless = Vec::with_capacity(orders.len());
    let mut fn_noiseless = Vec::with_capacity(orders.len());
    for &k in &orders {
        let beta = instance.beta(k)?;
        let lb = crate::combinatorics::log_binomial(instance.d(), k as u32)?;
        let norm = ((beta - 1.0) * lb).exp();
        let window = instance.truncation_for(k, 512);
        let max_n = (k as u64) * u64::from(window) * u64::from(window);
        let mut fn_k = 0u32;
        for u in instance.active().keys().filter(|u| u.cardinality() == k) {
            let energy: f64 = instance.signal_energy_by_norm(u, max_n)?.iter().sum();
            if energy == 0.0 {
                fn_k += 1;
                err += norm;
            }
        }
        fn_total += fn_k;
        fp_noiseless.push(0);
        fn_noiseless.push(fn_k);
    }
    let records = (0..replicates)
        .map(|j| ReplicateRecord {
            replicate: j,
            false_pos: 0,
            false_neg: fn_total,
            err,
            m_hat: vec![config.grid_size; orders.len()],
            fp_by_order: fp_noiseless.clone(),
            fn_by_order: fn_noiseless.clone(),
        })
        .collect();
    Ok(RiskReport::from_replicates(
        instance.d(),
        orders,
        None,
        seed,
        records,
        start.elapsed().as_secs_f64(),
    ))
}

/// Risk estimates for a sweep over signal scales of one component.
///
/// Replicate seeds are shared across the sweep and the null-subset scan of
/// each replicate is computed once: null statistics do not depend on the
/// scale, so each scale only re-evaluates the active subsets. Results are
/// identical to calling [`estimate_risk`] on `instance.scale_signal(u, α)`
/// with the same seed.
pub fn sweep_signal_scale(
    instance: &ModelInstance,
    scaled: &Subset,
    alphas: &[f64],
    config: &SelectorConfig,
    replicates: u32,
    seed: u64,
) -> Result<Vec<RiskReport>> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let k = match instance.orders() {
        Orders::Single(k) => k,
        other => {
            return Err(Error::InvalidArgument(format!(
                "signal sweeps need a single-order instance, got {other:?}"
            )))
        }
    };
    if !instance.active().contains_key(scaled) {
        return Err(Error::UnknownSubset(scaled.to_string()));
    }
    if alphas.iter().any(|&a| a <= 0.0) {
        return Err(Error::InvalidArgument("scales must be positive".into()));
    }
    let start = Instant::now();
    let base = compile_order(instance, k, config, None)?;
    let scaled_rank = scaled.rank(instance.d());
    // λ of the swept component at unit scale
    let alpha0 = instance.alpha_of(scaled);
    let lambda_unit: Vec<f64> = base.lambda[&scaled_rank]
        .iter()
        .map(|l| l / (alpha0 * alpha0))
        .collect();

    let mut per_alpha: Vec<Vec<ReplicateRecord>> =
        vec![Vec::with_capacity(replicates as usize); alphas.len()];
    for j in 0..replicates {
        let seed_j = mix(seed, u64::from(j));
        let null_source = MonteCarloSource::new(seed_j, base.grid.shell_counts(), HashMap::new());
        let null_scan = scan_subsets(
            &base.grid,
            &null_source,
            0..base.grid.subset_count(),
            &base.truth,
        );
        for (ai, &alpha) in alphas.iter().enumerate() {
            let mut lambda = base.lambda.clone();
            lambda.insert(
                scaled_rank,
                lambda_unit.iter().map(|l| l * alpha * alpha).collect(),
            );
            let source = MonteCarloSource::new(seed_j, base.grid.shell_counts(), lambda);
            let active_scan = scan_ranks(&base.grid, &source, &base.truth);
            let scan = null_scan.clone().merge(active_scan).into_sorted();
            let m_hat = lepski_index_from_scan(&scan, &base.grid.lepski_slack);
            let outcome = outcome_from_scan(&base.grid, scan, m_hat);
            let (fp, fn_) = fp_fn(&outcome.flagged, &base.truth);
            per_alpha[ai].push(ReplicateRecord {
                replicate: j,
                false_pos: fp,
                false_neg: fn_,
                err: base.norm * f64::from(fp + fn_),
                m_hat: vec![outcome.m_hat],
                fp_by_order: vec![fp],
                fn_by_order: vec![fn_],
            });
        }
    }
    let wall = start.elapsed().as_secs_f64();
    Ok(alphas
        .iter()
        .zip(per_alpha)
        .map(|(&alpha, records)| {
            RiskReport::from_replicates(
                instance.d(),
                vec![k],
                Some(alpha),
                seed,
                records,
                wall / alphas.len() as f64,
            )
        })
        .collect())
}

/// Adaptive selection on a freshly compiled instance, one replicate.
/// Convenience for diagnostics and tests.
pub fn run_selector_once(
    instance: &ModelInstance,
    config: &SelectorConfig,
    seed: u64,
) -> Result<Vec<(usize, SelectionOutcome)>> {
    let orders: Vec<usize> = instance.orders().iter().collect();
    let eps_override = epsilon_override_for(instance, config);
    let mut out = Vec::new();
    for k in orders {
        let order = compile_order(instance, k, config, eps_override)
            .map_err(|e| Error::AtOrder { k, inner: Box::new(e) })?;
        let source = MonteCarloSource::new(seed, order.grid.shell_counts(), order.lambda.clone());
        out.push((k, crate::selector::select_adaptive(&order.grid, &source)));
    }
    Ok(out)
}

/// Phase-diagram regions for the boundary parameterization
/// a(r) = √(2γ log binom).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseRegion {
    /// γ > (1+√(1−β))²: exact selection possible.
    Exact,
    /// β < γ < (1+√(1−β))²: almost-full selection possible, exact impossible.
    AlmostFull,
    /// γ < β: no selection possible.
    NoSelection,
    /// Exactly on γ = β.
    AlmostFullBoundary,
    /// Exactly on γ = (1+√(1−β))².
    ExactBoundary,
}

/// The exact-selection boundary curve γ = (1+√(1−β))².
pub fn exact_boundary(beta: f64) -> f64 {
    let s = 1.0 + (1.0 - beta).sqrt();
    s * s
}

/// Classify a point of the (β, γ) diagram.
///
/// ```
/// use fanova_select::risk::{phase_classify, PhaseRegion};
/// assert_eq!(phase_classify(0.5, 3.0).unwrap(), PhaseRegion::Exact);
/// assert_eq!(phase_classify(0.5, 1.0).unwrap(), PhaseRegion::AlmostFull);
/// assert_eq!(phase_classify(0.5, 0.2).unwrap(), PhaseRegion::NoSelection);
/// ```
pub fn phase_classify(beta: f64, gamma: f64) -> Result<PhaseRegion> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sparsity index must lie in (0,1), got {beta}"
        )));
    }
    if gamma <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "boundary level must be positive, got {gamma}"
        )));
    }
    let exact = exact_boundary(beta);
    Ok(if gamma == beta {
        PhaseRegion::AlmostFullBoundary
    } else if gamma == exact {
        PhaseRegion::ExactBoundary
    } else if gamma > exact {
        PhaseRegion::Exact
    } else if gamma > beta {
        PhaseRegion::AlmostFull
    } else {
        PhaseRegion::NoSelection
    })
}

/// Sample of the two boundary curves at one β.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPoint {
    pub beta: f64,
    pub gamma_almost_full: f64,
    pub gamma_exact: f64,
}

/// Both selection boundaries on a β grid inside (0,1).
pub fn boundary_curves(betas: &[f64]) -> Result<Vec<BoundaryPoint>> {
    if betas.iter().any(|&b| b <= 0.0 || b >= 1.0) {
        return Err(Error::InvalidArgument(
            "boundary grid must lie inside (0,1)".into(),
        ));
    }
    Ok(betas
        .iter()
        .map(|&beta| BoundaryPoint {
            beta,
            gamma_almost_full: beta,
            gamma_exact: exact_boundary(beta),
        })
        .collect())
}

/// Synthetic above/below-boundary experiment.
///
/// Builds an instance whose ⌊binom^{1−β}⌋ active components (the first
/// subsets in lexicographic order) all equal the extremal sequence at the
/// radius where a(r) = (1+margin)·√(2β log binom), then estimates the risk
/// of the adaptive selector. Positive margins sit above the selection
/// boundary, negative ones below.
#[allow(clippy::too_many_arguments)]
pub fn boundary_dichotomy_experiment(
    k: usize,
    sigma: f64,
    epsilon_noise: f64,
    d: u32,
    beta: f64,
    margin: f64,
    config: &SelectorConfig,
    replicates: u32,
    seed: u64,
) -> Result<RiskReport> {
    if margin == 0.0 || margin.abs() > 0.5 {
        return Err(Error::InvalidArgument(format!(
            "margin must be nonzero with |margin| <= 0.5, got {margin}"
        )));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sparsity index must lie in (0,1), got {beta}"
        )));
    }
    let lb = crate::combinatorics::log_binomial(d, k as u32)?;
    let target = (1.0 + margin) * (2.0 * beta * lb).sqrt();
    let mut solver = ExtremalSolver::new(k, sigma)?;
    let r = solver.solve_r_star(epsilon_noise, target)?;
    let profile = solver.solve(epsilon_noise, r)?;
    let coeffs: std::collections::BTreeMap<_, _> = profile
        .frequencies()
        .into_iter()
        .map(|(f, theta_sq, _)| (f, theta_sq.sqrt()))
        .collect();

    let binom = crate::combinatorics::binomial(u64::from(d), k as u64);
    let count = ((1.0 - beta) * lb).exp().floor() as u64;
    if count < 2 || count >= binom {
        return Err(Error::InvalidArgument(format!(
            "β={beta} yields {count} active components out of {binom}; need at least 2 and not all"
        )));
    }
    let active = (0..count)
        .map(|rank| {
            (
                Subset::from_rank(d, k, rank),
                ComponentSpec::Explicit(coeffs.clone()),
            )
        })
        .collect();
    let instance = ModelInstance::new(d, Orders::Single(k), sigma, epsilon_noise, active)?;
    estimate_risk(&instance, config, replicates, seed)
}
