//! The univariate test-function family and its Fourier coefficients.
//!
//! Eight benchmark functions on [0,1], each centered so that its integral
//! vanishes to four decimal places. Coefficients in the trigonometric basis
//! φ_l(t) = √2 cos(2πlt), φ_{-l}(t) = √2 sin(2πlt) (l > 0) are computed by
//! composite Simpson quadrature on 2^18 uniform panels; the Simpson sums for
//! all frequencies at once are evaluated through a single FFT of the
//! weighted samples, which is algebraically identical to the per-frequency
//! quadrature sum.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of Simpson panels. 2^18 keeps the per-coefficient quadrature error
/// below 1e-9 out to frequency ~350 for this function family.
const SIMPSON_PANELS: usize = 1 << 18;

/// The benchmark univariate functions g1..g8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
    G7,
    G8,
}

pub const ALL_GENERATORS: [Generator; 8] = [
    Generator::G1,
    Generator::G2,
    Generator::G3,
    Generator::G4,
    Generator::G5,
    Generator::G6,
    Generator::G7,
    Generator::G8,
];

impl Generator {
    pub fn index(self) -> usize {
        match self {
            Generator::G1 => 1,
            Generator::G2 => 2,
            Generator::G3 => 3,
            Generator::G4 => 4,
            Generator::G5 => 5,
            Generator::G6 => 6,
            Generator::G7 => 7,
            Generator::G8 => 8,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        ALL_GENERATORS
            .get(i.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no generator g{i}")))
    }

    /// Evaluate at t ∈ [0,1].
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Generator::G1 => {
                t * t * (2f64.powf(t - 1.0) - (t - 0.5) * (t - 0.5)) * t.exp() - 0.5424
            }
            Generator::G2 => t * t * (2f64.powf(t - 1.0) - (t - 1.0).powi(5)) - 0.2887,
            Generator::G3 => 0.1 * (15.0 * t * t * 2f64.powf(t - 1.0) * (15.0 * t).cos() - 0.5011),
            Generator::G4 => t - 0.5,
            Generator::G5 => 5.0 * (t - 0.7).powi(3) + 0.29,
            Generator::G6 => 2.0 * (t - 0.4) * (t - 0.4) - 0.1867,
            Generator::G7 => 0.7 * (t * t - 0.1).powi(3) - 0.0643,
            Generator::G8 => 10.0 * (t * t - 0.5).powi(5) + 0.068,
        }
    }
}

impl std::fmt::Display for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "g{}", self.index())
    }
}

/// Fourier coefficients of a univariate function for 1 ≤ |l| ≤ n_max.
///
/// `pos[l-1]` holds the cosine coefficient (index +l), `neg[l-1]` the sine
/// coefficient (index −l).
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    n_max: usize,
    pos: Vec<f64>,
    neg: Vec<f64>,
    mean: f64,
}

impl CoefficientTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Coefficient at a nonzero index l with |l| ≤ n_max; zero outside the table.
    #[inline]
    pub fn get(&self, l: i32) -> f64 {
        let idx = (l.unsigned_abs() as usize).wrapping_sub(1);
        if l > 0 {
            self.pos.get(idx).copied().unwrap_or(0.0)
        } else {
            self.neg.get(idx).copied().unwrap_or(0.0)
        }
    }

    /// Quadrature value of ∫₀¹ g(t) dt (the centering residual).
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Σ over ±l of the squared coefficient, for l = 1..n_max.
    pub fn squared_by_magnitude(&self) -> Vec<f64> {
        (0..self.n_max)
            .map(|i| self.pos[i] * self.pos[i] + self.neg[i] * self.neg[i])
            .collect()
    }

    /// Σ θ² over the whole table.
    pub fn energy(&self) -> f64 {
        self.squared_by_magnitude().iter().sum()
    }
}

/// Fourier coefficients θ_l = ∫₀¹ g(t) φ_l(t) dt for 1 ≤ |l| ≤ n_max.
pub fn fourier_coefficients<F: Fn(f64) -> f64>(g: F, n_max: usize) -> Result<CoefficientTable> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n_max must be at least 1".into()));
    }
    if 2 * n_max >= SIMPSON_PANELS {
        return Err(Error::InvalidArgument(format!(
            "n_max {n_max} too large for the quadrature grid"
        )));
    }
    let n = SIMPSON_PANELS;
    let h = 1.0 / n as f64;
    // Simpson weights h/3 · [1, 4, 2, 4, ..., 2, 4, 1]; the closing node t=1
    // is folded onto t=0 (e^{±2πil} = 1).
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| {
            let w = if i == 0 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
            Complex64::new(w * g(i as f64 * h), 0.0)
        })
        .collect();
    buf[0] += Complex64::new(h / 3.0 * g(1.0), 0.0);
    let mean = buf.iter().map(|z| z.re).sum::<f64>();

    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let sqrt2 = std::f64::consts::SQRT_2;
    let pos = (1..=n_max).map(|l| sqrt2 * buf[l].re).collect();
    let neg = (1..=n_max).map(|l| -sqrt2 * buf[l].im).collect();
    Ok(CoefficientTable {
        n_max,
        pos,
        neg,
        mean,
    })
}

/// Coefficient table for one of the benchmark generators.
pub fn generator_coefficients(g: Generator, n_max: usize) -> Result<CoefficientTable> {
    fourier_coefficients(|t| g.eval(t), n_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_cosine_is_orthonormal() {
        let table =
            fourier_coefficients(|t| std::f64::consts::SQRT_2 * (std::f64::consts::TAU * t).cos(), 16)
                .unwrap();
        assert!((table.get(1) - 1.0).abs() < 1e-9);
        for l in [-16i32, -5, -1, 2, 3, 16] {
            assert!(table.get(l).abs() < 1e-9, "l={l}: {}", table.get(l));
        }
    }

    #[test]
    fn sawtooth_matches_closed_form() {
        // ∫ (t-1/2) √2 sin(2πlt) dt = -√2/(2πl); cosine coefficients vanish
        let table = generator_coefficients(Generator::G4, 64).unwrap();
        for l in 1..=64i32 {
            let exact = -std::f64::consts::SQRT_2 / (std::f64::consts::TAU * f64::from(l));
            assert!(
                (table.get(-l) - exact).abs() < 1e-9,
                "sin l={l}: {} vs {}",
                table.get(-l),
                exact
            );
            assert!(table.get(l).abs() < 1e-9, "cos l={l}");
        }
    }

    #[test]
    fn sawtooth_parseval() {
        // ∫ (t-1/2)² dt = 1/12; the tail beyond |l|=344 carries ~1.5e-4
        let table = generator_coefficients(Generator::G4, 344).unwrap();
        assert!(
            (table.energy() - 1.0 / 12.0).abs() < 2e-4,
            "energy {}",
            table.energy()
        );
    }

    #[test]
    fn generators_are_centered() {
        for g in ALL_GENERATORS {
            let table = generator_coefficients(g, 1).unwrap();
            assert!(
                table.mean().abs() <= 1.0e-4,
                "{g} mean {}",
                table.mean()
            );
        }
    }

    #[test]
    fn quadrature_matches_naive_simpson() {
        // spot-check the FFT evaluation against a direct Simpson sum
        let g = Generator::G1;
        let table = generator_coefficients(g, 8).unwrap();
        for &l in &[1i32, -3, 7] {
            let n = 1 << 12;
            let h = 1.0 / n as f64;
            let phi = |t: f64| {
                if l > 0 {
                    std::f64::consts::SQRT_2 * (std::f64::consts::TAU * f64::from(l) * t).cos()
                } else {
                    std::f64::consts::SQRT_2 * (std::f64::consts::TAU * f64::from(-l) * t).sin()
                }
            };
            let mut s = g.eval(0.0) * phi(0.0) + g.eval(1.0) * phi(1.0);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * g.eval(i as f64 * h) * phi(i as f64 * h);
            }
            s *= h / 3.0;
            assert!((table.get(l) - s).abs() < 1e-8, "l={l}");
        }
    }
}
