//! The Bernoulli-Gaussian posterior mean and its MMSE curve.
//!
//!     cargo run --release --example denoiser

use coupled_oamp::denoiser::BernoulliGaussian;

fn main() -> coupled_oamp::error::Result<()> {
    let prior = BernoulliGaussian::new(0.1)?;
    let v = 0.05;
    println!("posterior at rho = 0.1, v = {v}");
    println!("{:>8} {:>12} {:>12}", "u", "mean", "variance");
    for u in [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0] {
        let ch = prior.channel(v)?.posterior(u);
        println!("{u:>8.2} {:>12.6} {:>12.6}", ch.mean, ch.var);
    }

    println!("\nmmse(v) for rho = 0.1 and rho = 1");
    println!("{:>10} {:>14} {:>14}", "v", "sparse", "gaussian");
    let gauss = BernoulliGaussian::new(1.0)?;
    for k in -8..=2 {
        let v = 10f64.powi(k);
        println!("{v:>10.0e} {:>14.6e} {:>14.6e}", prior.mmse(v)?, gauss.mmse(v)?);
    }
    Ok(())
}
