//! Statistics of the A→B error vectors across trials.

use rayon::prelude::*;

use super::{ExperimentConfig, Instance, se_for};
use crate::coupling::CouplingConfig;
use crate::error::{Error, Result};
use crate::oamp::{IterationTrace, error_vectors};
use crate::stats;

/// Trial-averaged statistics of `h_t[ℓ]` for one checkpoint and row section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagRow {
    pub t: usize,
    pub section: usize,
    pub excess_kurtosis: f64,
    pub skewness: f64,
    pub correlation: f64,
    /// `N_c^{-1}‖h_t[ℓ]‖²`.
    pub empirical_var: f64,
    /// `v̄_{A→B,t}[ℓ]` from state evolution.
    pub predicted_var: f64,
}

impl DiagRow {
    pub fn relative_var_gap(&self) -> f64 {
        (self.empirical_var - self.predicted_var).abs() / self.predicted_var
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianityReport {
    pub sections: usize,
    pub width: usize,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub zeta: f64,
    /// Trials that reached every checkpoint.
    pub trials: usize,
    pub failed: usize,
    pub rows: Vec<DiagRow>,
}

/// Traces and error-vector statistics from one batch of trials.
#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub coupling: CouplingConfig,
    /// Traces of completed trials, in trial order.
    pub traces: Vec<IterationTrace>,
    pub report: GaussianityReport,
}

/// Per-trial statistics `[checkpoint][row] -> (kurtosis, skewness, corr, var)`.
type TrialStats = Vec<Vec<[f64; 4]>>;

/// Run `exp.trials` trials at `delta` and damping `zeta` for `iterations`
/// iterations, recording the error-vector statistics at `checkpoints`
/// (0-based iteration indices).
pub fn monte_carlo(
    exp: &ExperimentConfig,
    delta: f64,
    zeta: f64,
    iterations: usize,
    checkpoints: &[usize],
) -> Result<MonteCarloRun> {
    exp.validate()?;
    if let Some(&t) = checkpoints.iter().find(|&&t| t >= iterations) {
        return Err(Error::config(format!("checkpoint {t} is not below the {iterations} iterations run")));
    }
    let coupling = exp.coupling(delta)?;
    let c = &coupling;
    let outcomes: Vec<Option<(IterationTrace, TrialStats)>> = (0..exp.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let inst = Instance::generate(exp, c, trial)?;
            let oamp = inst.oamp(c, exp.rho, zeta)?;
            let mut per_checkpoint = Vec::with_capacity(checkpoints.len());
            let run = oamp.run_observed(iterations, Some(&inst.signals), |state| {
                let t = state.t - 1;
                if checkpoints.contains(&t) {
                    let ev = error_vectors(state, &inst.system, c);
                    let rows: Vec<[f64; 4]> = ev
                        .h
                        .iter()
                        .zip(inst.system.x_vec())
                        .map(|(h, x)| {
                            let power = h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64;
                            [stats::excess_kurtosis(h), stats::skewness(h), stats::correlation(h, x), power]
                        })
                        .collect();
                    per_checkpoint.push((t, rows));
                }
            });
            Ok(run.ok().map(|out| {
                // observer fires in iteration order; reorder to match `checkpoints`
                let ordered = checkpoints
                    .iter()
                    .map(|t| per_checkpoint.iter().find(|(s, _)| s == t).unwrap().1.clone())
                    .collect();
                (out.trace, ordered)
            }))
        })
        .collect::<Result<_>>()?;

    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    let done: Vec<(IterationTrace, TrialStats)> = outcomes.into_iter().flatten().collect();
    let traj = se_for(exp, c, iterations.max(1) + 1)?;
    let mut rows = Vec::new();
    if !done.is_empty() {
        for (k, &t) in checkpoints.iter().enumerate() {
            for section in 0..c.rows() {
                let mut acc = [0.0; 4];
                for (_, st) in &done {
                    acc.iter_mut().zip(&st[k][section]).for_each(|(a, b)| *a += b);
                }
                let n = done.len() as f64;
                rows.push(DiagRow {
                    t,
                    section,
                    excess_kurtosis: acc[0] / n,
                    skewness: acc[1] / n,
                    correlation: acc[2] / n,
                    empirical_var: acc[3] / n,
                    predicted_var: traj.state_at(t + 1).v_ab[section],
                });
            }
        }
    }
    let report = GaussianityReport {
        sections: c.sections(),
        width: c.width(),
        n: c.n(),
        m: c.m(),
        delta,
        zeta,
        trials: done.len(),
        failed,
        rows,
    };
    Ok(MonteCarloRun {
        coupling,
        traces: done.into_iter().map(|(tr, _)| tr).collect(),
        report,
    })
}

/// Error-vector diagnostics at the configured checkpoints, without damping.
pub fn gaussianity_report(exp: &ExperimentConfig, checkpoints: &[usize]) -> Result<GaussianityReport> {
    let delta = exp
        .diagnostics
        .delta
        .or_else(|| exp.deltas.first().copied())
        .ok_or_else(|| Error::config("no compression rate for the diagnostics"))?;
    let iterations = checkpoints.iter().max().map_or(1, |t| t + 1);
    Ok(monte_carlo(exp, delta, 1.0, iterations, checkpoints)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_shape_and_prediction_index() {
        let exp = ExperimentConfig {
            sections: 2,
            coupling_width: 1,
            n: 256,
            trials: 3,
            deltas: vec![0.5],
            ..Default::default()
        };
        let report = gaussianity_report(&exp, &[0, 2]).unwrap();
        assert_eq!(report.rows.len(), 2 * 3);
        assert_eq!(report.trials + report.failed, 3);
        let c = exp.coupling(0.5).unwrap();
        let traj = se_for(&exp, &c, 5).unwrap();
        for r in &report.rows {
            assert_eq!(r.predicted_var, traj.states[r.t + 1].v_ab[r.section]);
            assert!(r.empirical_var > 0.0);
        }
        assert!(gaussianity_report(&exp, &[]).unwrap().rows.is_empty());
        assert!(monte_carlo(&exp, 0.5, 1.0, 3, &[3]).is_err());
    }
}
