//! Coupled versus uncoupled largest MSE over overall compression rate, at a
//! reduced trial count. Writes the sweep table to `coupling_gain.csv`.
//!
//!     cargo run --release --example coupling_gain -- 20

use std::path::Path;

use coupled_oamp::harness::output::emit_csv;
use coupled_oamp::harness::{run_comparison, ExperimentConfig};

fn main() -> coupled_oamp::error::Result<()> {
    let trials = std::env::args().nth(1).map_or(20, |s| s.parse().expect("trial count"));
    let exp = ExperimentConfig {
        trials,
        ..Default::default()
    };
    let [coupled, uncoupled] = run_comparison(&exp)?;
    println!("{:>8} {:>14} {:>14} {:>9}", "rate", "coupled", "uncoupled", "gain dB");
    for (c, u) in coupled.points.iter().zip(&uncoupled.points) {
        let (mc, mu) = (c.best_mean().unwrap_or(f64::NAN), u.best_mean().unwrap_or(f64::NAN));
        println!("{:>8.4} {mc:>14.3e} {mu:>14.3e} {:>9.1}", c.overall_rate, 10.0 * (mu / mc).log10());
    }
    emit_csv(&[coupled, uncoupled], Path::new("coupling_gain.csv"))?;
    println!("wrote coupling_gain.csv");
    Ok(())
}
