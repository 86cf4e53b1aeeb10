//! Reference-table computation and report formatting.
//!
//! CSV cells mirror the reference layout: sparsity indices, log-binomials,
//! and risk estimates carry four decimals; counts are integers. JSON output
//! keeps full precision and a fixed field order, so reruns with the same
//! seed emit byte-identical files.

use serde::Serialize;

use crate::combinatorics::{binomial, log_binomial};
use crate::error::{Error, Result};
use crate::risk::{BoundaryPoint, PhaseRegion, RiskReport};

/// One design row: sparsity index, subset counts, and the noise-rate bound.
#[derive(Debug, Clone, Serialize)]
pub struct DesignRow {
    pub k: u32,
    pub d: u32,
    pub beta: f64,
    pub binom: u64,
    pub log_binom: f64,
    /// ε^{-2k/(2σ+k)}, the scale the log-binomial must stay below.
    pub eps_power: f64,
}

/// Design table over (d, k) pairs for a fixed number of active components.
pub fn design_table(
    ds: &[u32],
    ks: &[u32],
    sigma: f64,
    epsilon_noise: f64,
    active_count: u64,
) -> Result<Vec<DesignRow>> {
    if epsilon_noise <= 0.0 || sigma <= 0.0 {
        return Err(Error::InvalidArgument(
            "noise intensity and smoothness must be positive".into(),
        ));
    }
    if active_count < 2 {
        return Err(Error::InvalidArgument(
            "active count must be at least 2".into(),
        ));
    }
    let mut rows = Vec::new();
    for &k in ks {
        for &d in ds {
            let lb = log_binomial(d, k)?;
            let beta = 1.0 - (active_count as f64).ln() / lb;
            if beta <= 0.0 || beta >= 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "derived sparsity index {beta} outside (0,1) at d={d}, k={k}"
                )));
            }
            rows.push(DesignRow {
                k,
                d,
                beta,
                binom: binomial(u64::from(d), u64::from(k)),
                log_binom: lb,
                eps_power: epsilon_noise.powf(-2.0 * f64::from(k) / (2.0 * sigma + f64::from(k))),
            });
        }
    }
    Ok(rows)
}

fn format_eps_power(v: f64) -> String {
    if v >= 1000.0 {
        format!("{:.0}", v.round())
    } else {
        format!("{v:.4}")
    }
}

/// CSV with columns k, d, beta, binom, log_binom, eps_power.
pub fn design_table_csv(rows: &[DesignRow]) -> String {
    let mut out = String::from("k,d,beta,binom,log_binom,eps_power\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{},{:.4},{}\n",
            r.k,
            r.d,
            r.beta,
            r.binom,
            r.log_binom,
            format_eps_power(r.eps_power)
        ));
    }
    out
}

/// Risk-table CSV: one row per (k, d, β), one column per signal scale.
pub fn risk_table_csv(rows: &[(u32, u32, f64, Vec<RiskReport>)]) -> String {
    let mut out = String::from("k,d,beta");
    if let Some((_, _, _, first)) = rows.first() {
        for report in first {
            out.push_str(&format!(
                ",alpha_{}",
                report.alpha.map_or_else(|| "1".into(), trim_float)
            ));
        }
    }
    out.push('\n');
    for (k, d, beta, reports) in rows {
        out.push_str(&format!("{k},{d},{beta:.4}"));
        for report in reports {
            out.push_str(&format!(",{:.4}", report.err));
        }
        out.push('\n');
    }
    out
}

fn trim_float(v: f64) -> String {
    let s = format!("{v}");
    s
}

/// Boundary-curve CSV with columns beta, gamma_almost_full, gamma_exact.
pub fn boundary_csv(points: &[BoundaryPoint]) -> String {
    let mut out = String::from("beta,gamma_almost_full,gamma_exact\n");
    for p in points {
        out.push_str(&format!(
            "{:.6},{:.6},{:.6}\n",
            p.beta, p.gamma_almost_full, p.gamma_exact
        ));
    }
    out
}

/// Phase-diagram grid CSV with columns beta, gamma, region.
pub fn phase_grid_csv(points: &[(f64, f64, PhaseRegion)]) -> String {
    let mut out = String::from("beta,gamma,region\n");
    for (beta, gamma, region) in points {
        let label = match region {
            PhaseRegion::Exact => "exact",
            PhaseRegion::AlmostFull => "almost-full",
            PhaseRegion::NoSelection => "none",
            PhaseRegion::AlmostFullBoundary => "boundary-almost-full",
            PhaseRegion::ExactBoundary => "boundary-exact",
        };
        out.push_str(&format!("{beta:.6},{gamma:.6},{label}\n"));
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}
