//! State evolution of the coupled and the uncoupled system at one overall rate.
//!
//!     cargo run --release --example state_evolution -- 0.2

use coupled_oamp::harness::{matched_uncoupled, run_se, ExperimentConfig};

fn main() -> coupled_oamp::error::Result<()> {
    let delta = std::env::args().nth(1).map_or(0.2, |s| s.parse().expect("delta"));
    let coupled = ExperimentConfig {
        deltas: vec![delta],
        ..Default::default()
    };
    let uncoupled = matched_uncoupled(&coupled)?;
    for exp in [&coupled, &uncoupled] {
        let (_, c, traj) = run_se(exp, None)?.remove(0);
        println!(
            "(L, W) = ({}, {}), delta = {:.4}, overall rate {:.4}",
            c.sections(),
            c.width(),
            c.delta(),
            c.overall_rate()
        );
        for s in traj.states.iter().filter(|s| s.t % 10 == 0 || s.t < 5) {
            let v: Vec<String> = s.v_b.iter().map(|x| format!("{x:.2e}")).collect();
            println!("  t = {:>4}  v_B = [{}]", s.t, v.join(", "));
        }
        match traj.converged_at {
            Some(t) => println!("  fixed point after {t} steps, largest v_B = {:.3e}\n", traj.last().largest_v_b()),
            None => println!("  no fixed point within the step limit\n"),
        }
    }
    Ok(())
}
