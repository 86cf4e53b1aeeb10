//! Estimate the normalized Hamming risk of the adaptive selector on the
//! six-component benchmark and print one row of the risk table.
//!
//! Usage: benchmark_risk [d] [k]

use fanova_select::model::{benchmark_instance, benchmark_scaled_subset};
use fanova_select::risk::sweep_signal_scale;
use fanova_select::selector::SelectorConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let d: u32 = args.next().map_or(10, |s| s.parse().expect("d"));
    let k: usize = args.next().map_or(2, |s| s.parse().expect("k"));
    let alphas = [0.01, 0.015, 0.03, 0.05, 0.07, 0.1, 0.25, 0.5, 1.0];

    let instance = benchmark_instance(d, k, 1.0, 1e-4).expect("benchmark instance");
    let scaled = benchmark_scaled_subset(d, k).expect("scaled subset");
    let reports = sweep_signal_scale(
        &instance,
        &scaled,
        &alphas,
        &SelectorConfig::default(),
        20,
        7,
    )
    .expect("sweep");

    println!("d={d} k={k} beta={:.4}", instance.beta(k).unwrap());
    for (alpha, report) in alphas.iter().zip(&reports) {
        println!(
            "  alpha={alpha:<6} err={:.4}  (mean fp {:.2}, mean fn {:.2})",
            report.err, report.false_pos, report.false_neg
        );
    }
}
