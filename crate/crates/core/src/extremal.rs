//! Exact solution of the constrained extremal problem behind the detection
//! boundary, plus its closed-form asymptotics.
//!
//! For arity k, smoothness σ, noise intensity ε, and separation radius r,
//! the extremal value is
//!
//! ```text
//! a²(r) = 1/(2ε⁴) · inf { Σ θ⁴ : Σ θ² c² ≤ 1, Σ θ² ≥ r² },
//! ```
//!
//! with c² = (4π² ‖ℓ‖²)^σ. The minimizer has the water-filling shape
//! θ*² = A (1 − μ c²)₊, where (A, μ) make both constraints active. Because
//! θ*² depends on ℓ only through ‖ℓ‖², the whole solve runs on norm shells:
//! an outer bisection on μ against r²·S₂(μ)/S₁(μ) = 1 with
//! S₁(μ) = Σ (1 − μc²)₊ and S₂(μ) = Σ c² (1 − μc²)₊ evaluated in O(log)
//! time from prefix sums over shells.

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::combinatorics::{enumerate_frequencies, smoothness_from_norm_sq, Frequency, ShellTable};
use crate::error::{Error, Result};

/// Residual tolerance for the scalar water-level equation.
const WATER_LEVEL_TOL: f64 = 1e-10;
/// Bisection iteration cap for both the water level and the radius inversion.
const MAX_BISECT_ITER: usize = 200;
/// Relative tolerance for inverting r ↦ a(r).
const R_STAR_REL_TOL: f64 = 1e-6;

/// One norm shell of the extremal solution.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileShell {
    /// Squared Euclidean norm ‖ℓ‖² shared by all frequencies in the shell.
    pub norm_sq: u64,
    /// Number of lattice frequencies on the shell (all coordinates nonzero).
    pub count: u64,
    /// θ*² per frequency on the shell.
    pub theta_sq: f64,
    /// Statistic weight ω per frequency on the shell.
    pub weight: f64,
}

/// Solution of the extremal problem at one radius.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalProfile {
    pub k: usize,
    pub sigma: f64,
    pub epsilon_noise: f64,
    pub r: f64,
    /// a(r), the square root of the extremal value.
    pub a_value: f64,
    /// Water level parameter: the support is exactly {ℓ : c_ℓ² < 1/μ}.
    pub mu: f64,
    /// Common amplitude A in θ*² = A (1 − μ c²)₊.
    pub amplitude: f64,
    /// Support shells, ascending in norm².
    pub shells: Vec<ProfileShell>,
}

impl ExtremalProfile {
    /// Number of frequencies carrying positive θ*².
    pub fn support_size(&self) -> u64 {
        self.shells.iter().map(|s| s.count).sum()
    }

    /// Largest squared norm in the support.
    pub fn max_norm_sq(&self) -> u64 {
        self.shells.last().map_or(0, |s| s.norm_sq)
    }

    /// Σ θ*² over the support (should equal r²).
    pub fn theta_sq_total(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.count as f64 * s.theta_sq)
            .sum()
    }

    /// Σ θ*² c² over the support (should equal 1).
    pub fn sobolev_total(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.count as f64 * s.theta_sq * smoothness_from_norm_sq(s.norm_sq, self.sigma))
            .sum()
    }

    /// Σ θ*⁴ over the support.
    pub fn theta_quartic_total(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.count as f64 * s.theta_sq * s.theta_sq)
            .sum()
    }

    /// Σ ω² over the support (should equal 1/2).
    pub fn weight_sq_total(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.count as f64 * s.weight * s.weight)
            .sum()
    }

    /// Weight for a squared norm, zero outside the support.
    pub fn weight_at(&self, norm_sq: u64) -> f64 {
        match self.shells.binary_search_by_key(&norm_sq, |s| s.norm_sq) {
            Ok(i) => self.shells[i].weight,
            Err(_) => 0.0,
        }
    }

    /// Explicit per-frequency expansion of the support.
    ///
    /// Intended for small profiles (tests, diagnostics, serialization of
    /// low-dimensional solves); the shell form is the working representation.
    pub fn frequencies(&self) -> Vec<(Frequency, f64, f64)> {
        let radius = (self.max_norm_sq() as f64 + 1.0).sqrt();
        let mut out = Vec::new();
        for f in enumerate_frequencies(self.k, radius).expect("radius positive") {
            if let Ok(i) = self.shells.binary_search_by_key(&f.norm_sq(), |s| s.norm_sq) {
                out.push((f, self.shells[i].theta_sq, self.shells[i].weight));
            }
        }
        out
    }
}

/// Largest admissible separation radius (2π)^{-σ} k^{-σ/2}; the constraint
/// set is empty for r at or above this value.
pub fn max_radius(k: usize, sigma: f64) -> f64 {
    (std::f64::consts::TAU).powf(-sigma) * (k as f64).powf(-sigma / 2.0)
}

/// Shell-level workspace reused across solves for one (k, σ).
///
/// Grows on demand; a larger candidate set never changes the solution, it
/// only widens the bracketing range for the water level.
#[derive(Debug)]
pub struct ExtremalSolver {
    k: usize,
    sigma: f64,
    shells: Vec<u64>,
    counts: Vec<u64>,
    c2: Vec<f64>,
    // inclusive prefix sums of count, count·c², count·c⁴
    p0: Vec<f64>,
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl ExtremalSolver {
    pub fn new(k: usize, sigma: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("arity k must be positive".into()));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "smoothness must be positive, got {sigma}"
            )));
        }
        let mut solver = ExtremalSolver {
            k,
            sigma,
            shells: Vec::new(),
            counts: Vec::new(),
            c2: Vec::new(),
            p0: Vec::new(),
            p1: Vec::new(),
            p2: Vec::new(),
        };
        solver.ensure(4 * k as u64);
        Ok(solver)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn ensure(&mut self, max_norm_sq: u64) {
        if self
            .shells
            .last()
            .is_some_and(|&n| n >= max_norm_sq)
        {
            return;
        }
        let table = ShellTable::new(self.k, max_norm_sq);
        self.shells.clear();
        self.counts.clear();
        self.c2.clear();
        self.p0.clear();
        self.p1.clear();
        self.p2.clear();
        let (mut a0, mut a1, mut a2) = (0.0f64, 0.0f64, 0.0f64);
        for (n, count) in table.occupied() {
            let c2 = smoothness_from_norm_sq(n, self.sigma);
            let cf = count as f64;
            a0 += cf;
            a1 += cf * c2;
            a2 += cf * c2 * c2;
            self.shells.push(n);
            self.counts.push(count);
            self.c2.push(c2);
            self.p0.push(a0);
            self.p1.push(a1);
            self.p2.push(a2);
        }
    }

    /// Number of shells with c² < 1/μ (assumes μ > 0).
    fn cut_index(&self, mu: f64) -> usize {
        let bound = 1.0 / mu;
        self.c2.partition_point(|&c2| c2 < bound)
    }

    /// (S₁, S₂) = (Σ (1−μc²)₊, Σ c²(1−μc²)₊) over the candidate shells.
    fn water_sums(&self, mu: f64, max_cut: usize) -> (f64, f64) {
        let cut = self.cut_index(mu).min(max_cut);
        if cut == 0 {
            return (0.0, 0.0);
        }
        let i = cut - 1;
        let s1 = self.p0[i] - mu * self.p1[i];
        let s2 = self.p1[i] - mu * self.p2[i];
        (s1, s2)
    }

    /// Solve the extremal problem at radius r.
    pub fn solve(&mut self, epsilon_noise: f64, r: f64) -> Result<ExtremalProfile> {
        if epsilon_noise <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise intensity must be positive, got {epsilon_noise}"
            )));
        }
        let r_max = max_radius(self.k, self.sigma);
        if !(r > 0.0 && r < r_max) {
            return Err(Error::InfeasibleRadius { r, max: r_max });
        }

        // Candidate shells out to twice the asymptotic support radius.
        let asym_radius = (1.0 + 4.0 * self.sigma / self.k as f64).powf(1.0 / (2.0 * self.sigma))
            / (std::f64::consts::TAU * r.powf(1.0 / self.sigma));
        let mut cand_radius = (2.0 * asym_radius).max(((self.k + 2) as f64).sqrt());

        for _ in 0..8 {
            self.ensure((cand_radius * cand_radius).ceil() as u64 + 1);
            let max_cut = self
                .shells
                .partition_point(|&n| (n as f64) < cand_radius * cand_radius);
            let (mu, cut) = self.solve_water_level(r, max_cut)?;
            // Guard against support truncation by the candidate boundary.
            let support_radius = (self.shells[cut - 1] as f64).sqrt();
            if support_radius > 0.98 * cand_radius {
                cand_radius *= 2.0;
                continue;
            }
            return Ok(self.profile_at(epsilon_noise, r, mu, cut));
        }
        Err(Error::NoConvergence(format!(
            "candidate support kept growing at r = {r}"
        )))
    }

    /// Bisect the water level μ so that r² S₂(μ)/S₁(μ) = 1.
    fn solve_water_level(&self, r: f64, max_cut: usize) -> Result<(f64, usize)> {
        let r_sq = r * r;
        let residual = |mu: f64| -> f64 {
            let (s1, s2) = self.water_sums(mu, max_cut);
            if s1 <= 0.0 {
                // support collapsed; drive the bisection downward
                return -1.0;
            }
            r_sq * s2 / s1 - 1.0
        };

        // At μ just below 1/c²_min the support is the lowest shell and the
        // residual is r² c²_min − 1 < 0; shrink μ_lo until the residual
        // brackets a root.
        let mut mu_hi = (1.0 - 1e-12) / self.c2[0];
        if residual(mu_hi) >= 0.0 {
            // r is so close to the admissible maximum that the lowest shell
            // already saturates the equation
            mu_hi /= 1.0 - 1e-12;
        }
        let mut mu_lo = mu_hi / 2.0;
        let mut tries = 0;
        while residual(mu_lo) < 0.0 {
            mu_lo /= 4.0;
            tries += 1;
            if tries > 600 {
                return Err(Error::NoConvergence(format!(
                    "failed to bracket the water level at r = {r}"
                )));
            }
        }

        let mut best = (mu_lo, residual(mu_lo).abs());
        for _ in 0..MAX_BISECT_ITER {
            let mid = 0.5 * (mu_lo + mu_hi);
            let res = residual(mid);
            if res.abs() < best.1 {
                best = (mid, res.abs());
            }
            if res.abs() <= WATER_LEVEL_TOL {
                best = (mid, res.abs());
                break;
            }
            if res > 0.0 {
                mu_lo = mid;
            } else {
                mu_hi = mid;
            }
            if (mu_hi - mu_lo) <= f64::EPSILON * mu_hi {
                break;
            }
        }
        let mu = best.0;
        let cut = self.cut_index(mu).min(max_cut);
        if cut == 0 {
            return Err(Error::NoConvergence(format!(
                "empty support after water-level solve at r = {r}"
            )));
        }
        Ok((mu, cut))
    }

    fn profile_at(&self, epsilon_noise: f64, r: f64, mu: f64, cut: usize) -> ExtremalProfile {
        let i = cut - 1;
        let (q0, q1, q2) = (self.p0[i], self.p1[i], self.p2[i]);
        let s1 = q0 - mu * q1;
        let amplitude = r * r / s1;
        // Σ θ⁴ = A² Σ (1 − μc²)² = A² (Q0 − 2μQ1 + μ²Q2)
        let quartic = amplitude * amplitude * (q0 - 2.0 * mu * q1 + mu * mu * q2);
        let a_value = (quartic / (2.0 * epsilon_noise.powi(4))).sqrt();
        let shells = (0..cut)
            .map(|j| {
                let theta_sq = amplitude * (1.0 - mu * self.c2[j]).max(0.0);
                ProfileShell {
                    norm_sq: self.shells[j],
                    count: self.counts[j],
                    theta_sq,
                    weight: theta_sq / (2.0 * epsilon_noise * epsilon_noise * a_value),
                }
            })
            .collect();
        ExtremalProfile {
            k: self.k,
            sigma: self.sigma,
            epsilon_noise,
            r,
            a_value,
            mu,
            amplitude,
            shells,
        }
    }

    /// a(r) without materializing the profile shells.
    pub fn a_value(&mut self, epsilon_noise: f64, r: f64) -> Result<f64> {
        Ok(self.solve(epsilon_noise, r)?.a_value)
    }

    /// Invert a(·): find r* with a(r*) = target, by bisection on the
    /// admissible radius interval using monotonicity of a.
    pub fn solve_r_star(&mut self, epsilon_noise: f64, target: f64) -> Result<f64> {
        if target <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "target must be positive, got {target}"
            )));
        }
        let r_max = max_radius(self.k, self.sigma);
        let mut r_hi = r_max * (1.0 - 1e-9);
        let a_hi = self.a_value(epsilon_noise, r_hi)?;
        if a_hi < target {
            return Err(Error::TargetUnattainable {
                target,
                reachable: a_hi,
                node: None,
            });
        }
        // bracket from above: halve until a(r_lo) < target
        let mut r_lo = r_hi / 2.0;
        loop {
            let a_lo = self.a_value(epsilon_noise, r_lo)?;
            if a_lo < target {
                break;
            }
            r_hi = r_lo;
            r_lo /= 2.0;
            if r_lo < 1e-12 * r_max {
                return Err(Error::NoConvergence(format!(
                    "radius bracket collapsed for target {target}"
                )));
            }
        }
        for _ in 0..MAX_BISECT_ITER {
            let mid = 0.5 * (r_lo + r_hi);
            let a_mid = self.a_value(epsilon_noise, mid)?;
            if (a_mid - target).abs() <= R_STAR_REL_TOL * target {
                return Ok(mid);
            }
            if a_mid > target {
                r_hi = mid;
            } else {
                r_lo = mid;
            }
        }
        Ok(0.5 * (r_lo + r_hi))
    }
}

/// Solve the extremal problem at radius r (one-shot convenience wrapper).
///
/// ```
/// let p = fanova_select::extremal::solve_extremal(1, 1.0, 0.1, 0.05).unwrap();
/// assert!((p.theta_sq_total() - 0.05 * 0.05).abs() < 1e-10);
/// assert!((p.weight_sq_total() - 0.5).abs() < 1e-9);
/// ```
pub fn solve_extremal(k: usize, sigma: f64, epsilon_noise: f64, r: f64) -> Result<ExtremalProfile> {
    ExtremalSolver::new(k, sigma)?.solve(epsilon_noise, r)
}

/// a(r) for the given parameters.
pub fn a_value(k: usize, sigma: f64, epsilon_noise: f64, r: f64) -> Result<f64> {
    ExtremalSolver::new(k, sigma)?.a_value(epsilon_noise, r)
}

/// r* with a(r*) = target.
pub fn solve_r_star(k: usize, sigma: f64, epsilon_noise: f64, target: f64) -> Result<f64> {
    ExtremalSolver::new(k, sigma)?.solve_r_star(epsilon_noise, target)
}

/// Which closed-form regime to evaluate in [`a_asymptotic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticRegime {
    /// k held fixed as the noise vanishes.
    FixedK,
    /// k growing; sharper constant in k.
    GrowingK,
}

/// Sharp small-radius asymptotics of a(r).
pub fn a_asymptotic(
    k: usize,
    sigma: f64,
    epsilon_noise: f64,
    r: f64,
    regime: AsymptoticRegime,
) -> f64 {
    let kf = k as f64;
    let power = r.powf(2.0 + kf / (2.0 * sigma)) / (epsilon_noise * epsilon_noise);
    match regime {
        AsymptoticRegime::FixedK => fixed_k_constant(k, sigma) * power,
        AsymptoticRegime::GrowingK => {
            let c = (std::f64::consts::TAU * kf / std::f64::consts::E).powf(kf / 4.0)
                * (std::f64::consts::PI * kf).powf(0.25)
                / std::f64::consts::E;
            c * power
        }
    }
}

/// C(σ,k) with C² = π^k (1 + 2σ/k) Γ(1 + k/2) / ((1 + 4σ/k)^{1 + k/(2σ)} Γ^k(3/2)).
pub fn fixed_k_constant(k: usize, sigma: f64) -> f64 {
    let kf = k as f64;
    let c_sq = std::f64::consts::PI.powi(k as i32) * (1.0 + 2.0 * sigma / kf)
        * gamma(1.0 + kf / 2.0)
        / ((1.0 + 4.0 * sigma / kf).powf(1.0 + kf / (2.0 * sigma)) * gamma(1.5).powi(k as i32));
    c_sq.sqrt()
}
