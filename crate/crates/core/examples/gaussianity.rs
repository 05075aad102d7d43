//! Moments of the A→B error vectors against their Gaussian limit.
//!
//!     cargo run --release --example gaussianity

use coupled_oamp::harness::diag::gaussianity_report;
use coupled_oamp::harness::ExperimentConfig;

fn main() -> coupled_oamp::error::Result<()> {
    let exp = ExperimentConfig {
        sections: 1,
        coupling_width: 0,
        n: 1 << 14,
        trials: 20,
        deltas: vec![0.5],
        ..Default::default()
    };
    let report = gaussianity_report(&exp, &[1, 3, 5])?;
    let bound = 3.0 / (exp.n as f64).sqrt();
    println!("N = {}, {} trials, correlation bound 3/sqrt(N) = {bound:.4}", exp.n, report.trials);
    println!("{:>3} {:>10} {:>10} {:>11} {:>11} {:>11}", "t", "kurtosis", "skewness", "corr", "var", "SE var");
    for r in &report.rows {
        println!(
            "{:>3} {:>+10.4} {:>+10.4} {:>+11.2e} {:>11.4e} {:>11.4e}",
            r.t, r.excess_kurtosis, r.skewness, r.correlation, r.empirical_var, r.predicted_var
        );
    }
    Ok(())
}
