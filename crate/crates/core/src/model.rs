//! Experiment descriptions and sequence-space observations.
//!
//! A [`ModelInstance`] lists the active components of a d-variate signal,
//! each either a tensor product of univariate generators or an explicit
//! coefficient map, together with the noise intensity and per-component
//! signal scales. Observations follow X_ℓ = α θ_ℓ 1{active} + ε ξ_ℓ with
//! ξ_ℓ iid standard normal, addressed by a counter-based stream so that
//! sampling is reproducible and parallelizable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{log_binomial, smoothness_from_norm_sq, Frequency, Subset};
use crate::error::{Error, Result};
use crate::extremal::{max_radius, ExtremalSolver};
use crate::generators::{generator_coefficients, CoefficientTable, Generator};
use crate::rng::normal_at;

/// Default per-coordinate truncation of the signal lattice window, chosen so
/// that no statistic weight at the simulation scales falls outside it.
pub fn default_truncation(k: usize) -> Option<u32> {
    match k {
        2 => Some(344),
        3 => Some(127),
        _ => None,
    }
}

/// One ANOVA component: separable factors or explicit coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ComponentSpec {
    /// Tensor product of univariate generators, one per subset coordinate.
    Factors(Vec<Generator>),
    /// Direct frequency → coefficient association; absent frequencies are zero.
    Explicit(BTreeMap<Frequency, f64>),
}

impl ComponentSpec {
    pub fn arity(&self) -> Option<usize> {
        match self {
            ComponentSpec::Factors(gs) => Some(gs.len()),
            ComponentSpec::Explicit(map) => map.keys().next().map(|f| f.arity()),
        }
    }
}

/// Coefficients of a component at the given support frequencies.
///
/// Factor form multiplies 1-D coefficients; explicit form looks entries up
/// (zero when absent).
pub fn component_coefficients(
    spec: &ComponentSpec,
    support: &[Frequency],
) -> Result<Vec<f64>> {
    match spec {
        ComponentSpec::Factors(gs) => {
            let n_max = support
                .iter()
                .flat_map(|f| f.entries().iter().map(|l| l.unsigned_abs() as usize))
                .max()
                .unwrap_or(1);
            let tables: Vec<CoefficientTable> = gs
                .iter()
                .map(|&g| generator_coefficients(g, n_max))
                .collect::<Result<_>>()?;
            support
                .iter()
                .map(|f| {
                    if f.arity() != gs.len() {
                        return Err(Error::DimensionMismatch {
                            expected: gs.len(),
                            got: f.arity(),
                        });
                    }
                    Ok(f.entries()
                        .iter()
                        .zip(&tables)
                        .map(|(&l, table)| table.get(l))
                        .product())
                })
                .collect()
        }
        ComponentSpec::Explicit(map) => {
            let arity = spec.arity();
            support
                .iter()
                .map(|f| {
                    if let Some(a) = arity {
                        if f.arity() != a {
                            return Err(Error::DimensionMismatch {
                                expected: a,
                                got: f.arity(),
                            });
                        }
                    }
                    Ok(map.get(f).copied().unwrap_or(0.0))
                })
                .collect()
        }
    }
}

/// Which component orders an instance contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orders {
    /// A single order k.
    Single(usize),
    /// All orders 1..=s.
    UpTo(usize),
}

impl Orders {
    pub fn contains(self, k: usize) -> bool {
        match self {
            Orders::Single(kk) => k == kk,
            Orders::UpTo(s) => (1..=s).contains(&k),
        }
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        match self {
            Orders::Single(k) => k..=k,
            Orders::UpTo(s) => 1..=s,
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelInstance {
    d: u32,
    orders: Orders,
    sigma: f64,
    epsilon_noise: f64,
    active: BTreeMap<Subset, ComponentSpec>,
    alpha: BTreeMap<Subset, f64>,
    /// Per-order signal window override; falls back to [`default_truncation`].
    truncation: BTreeMap<usize, u32>,
}

impl ModelInstance {
    pub fn new(
        d: u32,
        orders: Orders,
        sigma: f64,
        epsilon_noise: f64,
        active: Vec<(Subset, ComponentSpec)>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("d must be positive".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "smoothness must be positive, got {sigma}"
            )));
        }
        if epsilon_noise < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise intensity must be nonnegative, got {epsilon_noise}"
            )));
        }
        match orders {
            Orders::Single(k) if k >= 1 && k as u64 <= u64::from(d) => {}
            Orders::UpTo(s) if s >= 1 && s as u64 <= u64::from(d) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "orders {orders:?} incompatible with d={d}"
                )))
            }
        }
        let mut map = BTreeMap::new();
        let mut alpha = BTreeMap::new();
        for (u, spec) in active {
            let k = u.cardinality();
            if !orders.contains(k) {
                return Err(Error::InvalidArgument(format!(
                    "active subset {u} has order {k} outside {orders:?}"
                )));
            }
            if *u.coords().last().unwrap() > d {
                return Err(Error::InvalidArgument(format!(
                    "active subset {u} exceeds d={d}"
                )));
            }
            if let Some(a) = spec.arity() {
                if a != k {
                    return Err(Error::DimensionMismatch { expected: k, got: a });
                }
            }
            alpha.insert(u.clone(), 1.0);
            map.insert(u, spec);
        }
        Ok(ModelInstance {
            d,
            orders,
            sigma,
            epsilon_noise,
            active: map,
            alpha,
            truncation: BTreeMap::new(),
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn orders(&self) -> Orders {
        self.orders
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn epsilon_noise(&self) -> f64 {
        self.epsilon_noise
    }

    pub fn active(&self) -> &BTreeMap<Subset, ComponentSpec> {
        &self.active
    }

    pub fn alpha_of(&self, u: &Subset) -> f64 {
        self.alpha.get(u).copied().unwrap_or(1.0)
    }

    pub fn active_count(&self, k: usize) -> usize {
        self.active.keys().filter(|u| u.cardinality() == k).count()
    }

    /// Override the signal window for an order.
    pub fn with_truncation(mut self, k: usize, n: u32) -> Self {
        self.truncation.insert(k, n);
        self
    }

    /// Per-coordinate signal window for order k; `fallback` is used when
    /// neither an override nor a default applies.
    pub fn truncation_for(&self, k: usize, fallback: u32) -> u32 {
        self.truncation
            .get(&k)
            .copied()
            .or_else(|| default_truncation(k))
            .unwrap_or(fallback)
    }

    /// Derived sparsity index β = 1 − log(#active of order k) / log binom(d,k).
    ///
    /// Requires the active count to lie strictly between 1 and binom(d,k).
    pub fn beta(&self, k: usize) -> Result<f64> {
        let count = self.active_count(k);
        let lb = log_binomial(self.d, k as u32)?;
        if count < 2 {
            return Err(Error::InvalidArgument(format!(
                "order {k} has {count} active components; the sparsity index needs at least 2"
            )));
        }
        let beta = 1.0 - (count as f64).ln() / lb;
        if beta <= 0.0 || beta >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "derived sparsity index {beta} outside (0,1) for order {k}"
            )));
        }
        Ok(beta)
    }

    /// Copy of the instance with the signal scale of one active component replaced.
    pub fn scale_signal(&self, u: &Subset, alpha: f64) -> Result<Self> {
        if !self.active.contains_key(u) {
            return Err(Error::UnknownSubset(u.to_string()));
        }
        if alpha <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "signal scale must be positive, got {alpha}"
            )));
        }
        let mut out = self.clone();
        out.alpha.insert(u.clone(), alpha);
        Ok(out)
    }

    /// Sequence-space observations at the given supports.
    ///
    /// X_ℓ = α θ_ℓ 1{u active} + ε ξ_ℓ, with ξ_ℓ read from the counter
    /// stream at (seed, subset rank, frequency rank); the frequency rank is
    /// the position within the support list passed in.
    pub fn sample_data(
        &self,
        supports: &BTreeMap<Subset, Vec<Frequency>>,
        seed: u64,
    ) -> Result<BTreeMap<(Subset, Frequency), f64>> {
        let mut out = BTreeMap::new();
        for (u, support) in supports {
            let signal: Option<(Vec<f64>, f64)> = match self.active.get(u) {
                Some(spec) => Some((component_coefficients(spec, support)?, self.alpha_of(u))),
                None => None,
            };
            let rank = u.rank(self.d);
            for (i, f) in support.iter().enumerate() {
                let mut x = self.epsilon_noise * normal_at(seed, rank, i as u64);
                if let Some((thetas, alpha)) = &signal {
                    x += alpha * thetas[i];
                }
                out.insert((u.clone(), f.clone()), x);
            }
        }
        Ok(out)
    }

    /// Σ θ² of a component per squared norm, over the box window ∩ the ball
    /// of squared radius `max_norm_sq`. Index n of the returned vector holds
    /// the shell sum at ‖ℓ‖² = n. The component's own scale α is not applied.
    pub fn signal_energy_by_norm(&self, u: &Subset, max_norm_sq: u64) -> Result<Vec<f64>> {
        let spec = self
            .active
            .get(u)
            .ok_or_else(|| Error::UnknownSubset(u.to_string()))?;
        let k = u.cardinality();
        let window = self.truncation_for(k, (max_norm_sq as f64).sqrt().ceil() as u32);
        signal_energy_by_norm(spec, k, window, max_norm_sq)
    }
}

/// Shell-indexed signal energy Σ θ² at ‖ℓ‖² = n for n ≤ max_norm_sq,
/// restricted to the box window |l_j| ≤ window.
pub fn signal_energy_by_norm(
    spec: &ComponentSpec,
    k: usize,
    window: u32,
    max_norm_sq: u64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; max_norm_sq as usize + 1];
    match spec {
        ComponentSpec::Factors(gs) => {
            if gs.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: gs.len(),
                });
            }
            let reach = (max_norm_sq as f64).sqrt().floor() as u32;
            let n_max = window.min(reach).max(1) as usize;
            // θ(+l)² + θ(−l)² per coordinate magnitude: summing the 2^k sign
            // patterns of a magnitude vector factorizes into this product.
            let sq: Vec<Vec<f64>> = gs
                .iter()
                .map(|&g| {
                    generator_coefficients(g, n_max).map(|t| t.squared_by_magnitude())
                })
                .collect::<Result<_>>()?;
            accumulate_factor_energy(&sq, 0, 0, 1.0, max_norm_sq, &mut out);
        }
        ComponentSpec::Explicit(map) => {
            for (f, &theta) in map {
                if f.arity() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        got: f.arity(),
                    });
                }
                let n = f.norm_sq();
                if n <= max_norm_sq
                    && f.entries().iter().all(|l| l.unsigned_abs() <= window)
                {
                    out[n as usize] += theta * theta;
                }
            }
        }
    }
    Ok(out)
}

fn accumulate_factor_energy(
    sq: &[Vec<f64>],
    depth: usize,
    norm_sq: u64,
    product: f64,
    max_norm_sq: u64,
    out: &mut [f64],
) {
    let remaining = (sq.len() - depth - 1) as u64;
    for (i, &s) in sq[depth].iter().enumerate() {
        let m = (i + 1) as u64;
        let n = norm_sq + m * m;
        if n + remaining > max_norm_sq {
            break;
        }
        let p = product * s;
        if depth + 1 == sq.len() {
            out[n as usize] += p;
        } else if p != 0.0 {
            accumulate_factor_energy(sq, depth + 1, n, p, max_norm_sq, out);
        }
    }
}

/// Norms and boundary position of one component.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentDiagnostics {
    /// (Σ θ²)^{1/2} over the truncated window.
    pub l2_norm: f64,
    /// (Σ θ² c²)^{1/2} over the truncated window.
    pub sobolev_seminorm: f64,
    /// a(‖f‖₂) / √(2 β log binom(d,k)); above 1 means the component sits
    /// above the almost-full selection boundary.
    pub boundary_ratio: f64,
}

/// Diagnostics for a component of order k under sparsity index β.
pub fn diagnostics(
    spec: &ComponentSpec,
    k: usize,
    sigma: f64,
    epsilon_noise: f64,
    d: u32,
    beta: f64,
) -> Result<ComponentDiagnostics> {
    let window = default_truncation(k).unwrap_or(256);
    let max_norm_sq = (k as u64) * u64::from(window) * u64::from(window);
    let energy = signal_energy_by_norm(spec, k, window, max_norm_sq)?;
    let mut l2_sq = 0.0;
    let mut sob_sq = 0.0;
    for (n, &e) in energy.iter().enumerate() {
        if e > 0.0 {
            l2_sq += e;
            sob_sq += e * smoothness_from_norm_sq(n as u64, sigma);
        }
    }
    let l2 = l2_sq.sqrt();
    // Components with L2 norm at or beyond the class maximum lie outside the
    // unit Sobolev ball; a(·) is evaluated at the largest admissible radius
    // there, so the reported ratio is a lower bound on their detectability.
    let boundary_ratio = if l2 == 0.0 {
        0.0
    } else {
        let r = l2.min(max_radius(k, sigma) * (1.0 - 1e-9));
        let a = ExtremalSolver::new(k, sigma)?.a_value(epsilon_noise, r)?;
        a / (2.0 * beta * log_binomial(d, k as u32)?).sqrt()
    };
    Ok(ComponentDiagnostics {
        l2_norm: l2,
        sobolev_seminorm: sob_sq.sqrt(),
        boundary_ratio,
    })
}

/// The six-component benchmark instance: for k=2 the active subsets are
/// {1,i} with factors (g1, g_i) for i=2..7; for k=3 they are {1,2,i} with
/// factors (g1, g2, g_i) for i=3..8.
pub fn benchmark_instance(d: u32, k: usize, sigma: f64, epsilon_noise: f64) -> Result<ModelInstance> {
    let active = match k {
        2 => (2..=7)
            .map(|i| {
                Ok((
                    Subset::new(vec![1, i as u32], d)?,
                    ComponentSpec::Factors(vec![Generator::G1, Generator::from_index(i)?]),
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        3 => (3..=8)
            .map(|i| {
                Ok((
                    Subset::new(vec![1, 2, i as u32], d)?,
                    ComponentSpec::Factors(vec![
                        Generator::G1,
                        Generator::G2,
                        Generator::from_index(i)?,
                    ]),
                ))
            })
            .collect::<Result<Vec<_>>>()?,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "benchmark configuration defined for k ∈ {{2,3}}, got {k}"
            )))
        }
    };
    ModelInstance::new(d, Orders::Single(k), sigma, epsilon_noise, active)
}

/// The subset whose signal is rescaled in the strength sweep: {1,2} for k=2,
/// {1,2,3} for k=3.
pub fn benchmark_scaled_subset(d: u32, k: usize) -> Result<Subset> {
    match k {
        2 => Subset::new(vec![1, 2], d),
        3 => Subset::new(vec![1, 2, 3], d),
        _ => Err(Error::InvalidArgument(format!(
            "benchmark configuration defined for k ∈ {{2,3}}, got {k}"
        ))),
    }
}
