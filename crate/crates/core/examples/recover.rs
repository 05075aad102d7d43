//! One coupled OAMP recovery, with the MSE trace next to state evolution.
//!
//!     cargo run --release --example recover

use coupled_oamp::harness::{se_for, ExperimentConfig, Instance};

fn main() -> coupled_oamp::error::Result<()> {
    let exp = ExperimentConfig {
        deltas: vec![0.25],
        ..Default::default()
    };
    let c = exp.coupling(0.25)?;
    let inst = Instance::generate(&exp, &c, 0)?;
    let traj = se_for(&exp, &c, exp.iterations)?;
    let out = inst
        .oamp(&c, exp.rho, 0.9)?
        .run(exp.iterations, Some(&inst.signals))
        .map_err(|f| f.error)?;
    println!("(L, W) = (8, 1), N = {}, M = {}, zeta = 0.9", c.n(), c.m());
    println!("{:>5} {:>12} {:>12}", "t", "largest MSE", "SE (zeta=1)");
    for (t, rec) in out.trace.iterations.iter().enumerate() {
        if t % 10 == 0 || t + 1 == out.trace.len() {
            println!("{t:>5} {:>12.3e} {:>12.3e}", rec.largest_mse().unwrap(), traj.state_at(t + 1).largest_v_b());
        }
    }
    Ok(())
}
