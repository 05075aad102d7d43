//! Seeded Monte-Carlo experiments: compression-rate sweeps, state-evolution
//! runs and the error-vector diagnostics.

pub mod config;
pub mod diag;
pub mod output;

use std::time::Instant;

use rayon::prelude::*;

use crate::coupling::{CouplingConfig, SignalEnsemble, VectorizedSystem};
use crate::denoiser::BernoulliGaussian;
use crate::error::{Error, Result};
use crate::oamp::{Oamp, OampState};
use crate::se::{DEFAULT_MAX_ITERATIONS, SeTrajectory, StateEvolution};
use crate::seed::{Purpose, SeedStream};
use crate::sensing::{SensingOperator, condition_number_profile};
use crate::stats;

pub use config::{DiagnosticsConfig, Ensemble, ExperimentConfig};

/// A drawn problem: signals, operators and noisy measurements.
#[derive(Debug, Clone)]
pub struct Instance {
    pub signals: SignalEnsemble,
    pub system: VectorizedSystem,
    pub ops: Vec<SensingOperator>,
    pub y: Vec<Vec<f64>>,
}

impl Instance {
    /// Draw trial `trial` of the sweep point `coupling`. The random streams
    /// depend only on the master seed, `(L, W, N, M)` and the trial index.
    pub fn generate(exp: &ExperimentConfig, coupling: &CouplingConfig, trial: u64) -> Result<Self> {
        let seeds = point_seeds(exp.seed, coupling).child(trial);
        let signals = SignalEnsemble::generate(coupling, exp.rho, &mut seeds.rng(Purpose::Signal, 0))?;
        let system = VectorizedSystem::build(coupling, &signals)?;
        let ops = (0..coupling.rows())
            .map(|row| {
                let profile = condition_number_profile(coupling.m(), coupling.n(), coupling.window_len(row), exp.kappa)?;
                match exp.ensemble {
                    Ensemble::Structured => SensingOperator::structured(
                        &profile,
                        exp.random_signs,
                        &mut seeds.rng(Purpose::Permutation, row as u64),
                    ),
                    Ensemble::Haar => {
                        SensingOperator::haar_dense(&profile, &mut seeds.rng(Purpose::Orthogonal, row as u64))
                    }
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let y = system.measure(coupling, &ops, &mut seeds.rng(Purpose::Noise, 0))?;
        Ok(Self { signals, system, ops, y })
    }

    pub fn oamp<'a>(&'a self, coupling: &'a CouplingConfig, rho: f64, zeta: f64) -> Result<Oamp<'a>> {
        Oamp::new(coupling, &self.ops, &self.y, BernoulliGaussian::new(rho)?, zeta)
    }
}

fn point_seeds(master: u64, c: &CouplingConfig) -> SeedStream {
    SeedStream::new(master)
        .child(c.sections() as u64)
        .child(c.width() as u64)
        .child(c.n() as u64)
        .child(c.m() as u64)
}

/// Result of one trial at one damping value.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    /// Per-section MSE after the last iteration.
    Completed(Vec<f64>),
    /// Iteration at which the run stopped.
    Failed { iteration: usize, reason: String },
}

impl TrialOutcome {
    pub fn largest(&self) -> Option<f64> {
        match self {
            Self::Completed(mse) => Some(mse.iter().copied().fold(0.0, f64::max)),
            Self::Failed { .. } => None,
        }
    }
}

/// Runs `iterations` OAMP iterations and reports the final per-section MSE.
pub fn run_trial(instance: &Instance, coupling: &CouplingConfig, rho: f64, zeta: f64, iterations: usize) -> Result<TrialOutcome> {
    let oamp = instance.oamp(coupling, rho, zeta)?;
    let mut state = oamp.init();
    for _ in 0..iterations {
        if let Err(e) = oamp.iterate(&mut state) {
            return Ok(TrialOutcome::Failed {
                iteration: state.t,
                reason: e.to_string(),
            });
        }
    }
    let mse = final_mse(&state, &instance.signals);
    if mse.iter().any(|m| !m.is_finite()) {
        return Ok(TrialOutcome::Failed {
            iteration: state.t,
            reason: "non-finite estimate".into(),
        });
    }
    Ok(TrialOutcome::Completed(mse))
}

fn final_mse(state: &OampState, truth: &SignalEnsemble) -> Vec<f64> {
    crate::oamp::section_mse(&state.x_b, truth.sections())
}

/// Order statistics of the per-trial largest MSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Summary {
    /// `None` when `values` is empty.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            mean: stats::mean(values),
            median: stats::quantile_sorted(&sorted, 0.5),
            q10: stats::quantile_sorted(&sorted, 0.1),
            q90: stats::quantile_sorted(&sorted, 0.9),
        })
    }
}

/// All trials of one `(δ, ζ)` pair, in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaResult {
    pub zeta: f64,
    pub outcomes: Vec<TrialOutcome>,
}

impl ZetaResult {
    pub fn largest(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(TrialOutcome::largest).collect()
    }

    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.largest().is_none()).count()
    }

    pub fn summary(&self) -> Option<Summary> {
        Summary::of(&self.largest())
    }

    /// Trial-averaged MSE per section over completed trials.
    pub fn section_mean(&self) -> Vec<f64> {
        let done: Vec<&Vec<f64>> = self
            .outcomes
            .iter()
            .filter_map(|o| match o {
                TrialOutcome::Completed(m) => Some(m),
                TrialOutcome::Failed { .. } => None,
            })
            .collect();
        let Some(first) = done.first() else {
            return Vec::new();
        };
        let mut acc = vec![0.0; first.len()];
        for m in &done {
            acc.iter_mut().zip(m.iter()).for_each(|(a, b)| *a += b);
        }
        acc.iter().map(|a| a / done.len() as f64).collect()
    }
}

/// One compression rate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub m: usize,
    pub overall_rate: f64,
    pub per_zeta: Vec<ZetaResult>,
    /// Index into `per_zeta` of the damping with the smallest mean largest MSE.
    pub best: Option<usize>,
    /// Largest `v̄_B` after the configured number of iterations at `ζ = 1`.
    pub se_largest: f64,
    pub se_trajectory: SeTrajectory,
}

impl SweepPoint {
    pub fn best_result(&self) -> Option<&ZetaResult> {
        self.best.map(|i| &self.per_zeta[i])
    }

    pub fn best_mean(&self) -> Option<f64> {
        self.best_result().and_then(|r| r.summary()).map(|s| s.mean)
    }
}

/// A full sweep over `config.deltas` for one `(L, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sections: usize,
    pub width: usize,
    pub n: usize,
    pub points: Vec<SweepPoint>,
    pub wall_clock_secs: f64,
}

/// Picks the damping with the smallest mean largest MSE; ties keep the first.
pub fn select_best(per_zeta: &[ZetaResult]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in per_zeta.iter().enumerate() {
        if let Some(s) = r.summary() {
            if best.is_none_or(|(_, b)| s.mean < b) {
                best = Some((i, s.mean));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// State evolution at `ζ = 1` for `iterations` steps (or until the fixed point).
pub fn se_for(exp: &ExperimentConfig, coupling: &CouplingConfig, iterations: usize) -> Result<SeTrajectory> {
    let prior = BernoulliGaussian::new(exp.rho)?;
    StateEvolution::with_condition_number(coupling, exp.kappa, prior)?.run(iterations, exp.fp_tol)
}

/// Run every `(δ, ζ, trial)` combination of `exp`.
///
/// Each `(δ, trial)` instance is drawn once and shared by all damping
/// values. Work runs on the current rayon pool; results are collected in
/// index order so the output does not depend on the worker count.
pub fn run_sweep(exp: &ExperimentConfig) -> Result<SweepResult> {
    exp.validate()?;
    let started = Instant::now();
    let couplings = exp
        .deltas
        .iter()
        .map(|&d| exp.coupling(d))
        .collect::<Result<Vec<_>>>()?;

    let units: Vec<(usize, u64)> = (0..couplings.len())
        .flat_map(|p| (0..exp.trials as u64).map(move |t| (p, t)))
        .collect();
    let per_unit: Vec<Vec<TrialOutcome>> = units
        .par_iter()
        .map(|&(p, trial)| {
            let c = &couplings[p];
            let inst = Instance::generate(exp, c, trial)?;
            exp.zeta
                .iter()
                .map(|&z| run_trial(&inst, c, exp.rho, z, exp.iterations))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(couplings.len());
    for (p, (c, &delta)) in couplings.iter().zip(&exp.deltas).enumerate() {
        let unit_results = &per_unit[p * exp.trials..(p + 1) * exp.trials];
        let per_zeta: Vec<ZetaResult> = exp
            .zeta
            .iter()
            .enumerate()
            .map(|(k, &zeta)| ZetaResult {
                zeta,
                outcomes: unit_results.iter().map(|u| u[k].clone()).collect(),
            })
            .collect();
        let best = select_best(&per_zeta);
        let traj = se_for(exp, c, exp.iterations)?;
        let se_largest = traj.state_at(exp.iterations).largest_v_b();
        points.push(SweepPoint {
            delta,
            m: c.m(),
            overall_rate: c.overall_rate(),
            per_zeta,
            best,
            se_largest,
            se_trajectory: traj,
        });
    }
    Ok(SweepResult {
        sections: exp.sections,
        width: exp.coupling_width,
        n: exp.n,
        points,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// The uncoupled reference for `exp`: `L = 1, W = 0`, with every sweep value
/// replaced by the overall rate `(1 + W/L)·δ` of the coupled point, so both
/// systems spend the same number of measurements per signal entry.
pub fn matched_uncoupled(exp: &ExperimentConfig) -> Result<ExperimentConfig> {
    let deltas = exp
        .deltas
        .iter()
        .map(|&d| Ok(exp.coupling(d)?.overall_rate()))
        .collect::<Result<Vec<_>>>()?;
    let mut u = exp.clone().uncoupled();
    u.deltas = deltas;
    Ok(u)
}

/// Coupled sweep followed by its rate-matched uncoupled reference.
pub fn run_comparison(exp: &ExperimentConfig) -> Result<[SweepResult; 2]> {
    let uncoupled = matched_uncoupled(exp)?;
    Ok([run_sweep(exp)?, run_sweep(&uncoupled)?])
}

/// State evolution for every sweep value, run to the fixed point.
pub fn run_se(exp: &ExperimentConfig, max_iterations: Option<usize>) -> Result<Vec<(f64, CouplingConfig, SeTrajectory)>> {
    exp.validate()?;
    exp.deltas
        .iter()
        .map(|&d| {
            let c = exp.coupling(d)?;
            let traj = se_for(exp, &c, max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS))?;
            Ok((d, c, traj))
        })
        .collect()
}

/// Run `f` on a dedicated pool of `threads` workers (`0` = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            sections: 2,
            coupling_width: 1,
            n: 64,
            iterations: 5,
            trials: 2,
            deltas: vec![0.5],
            zeta: vec![0.9, 1.0],
            ..Default::default()
        }
    }

    #[test]
    fn zero_iterations_give_unit_mse_scale() {
        let exp = ExperimentConfig { iterations: 0, trials: 1, ..tiny() };
        let res = run_sweep(&exp).unwrap();
        for r in &res.points[0].per_zeta {
            let TrialOutcome::Completed(mse) = &r.outcomes[0] else {
                panic!("zero iterations cannot fail")
            };
            // zero estimate: MSE is the empirical signal power
            let inst = Instance::generate(&exp, &exp.coupling(0.5).unwrap(), 0).unwrap();
            for (m, x) in mse.iter().zip(inst.signals.sections()) {
                let power = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
                assert_eq!(*m, power);
            }
        }
        assert_eq!(res.points[0].se_largest, 1.0);
    }

    #[test]
    fn instances_are_reproducible_and_distinct() {
        let exp = tiny();
        let c = exp.coupling(0.5).unwrap();
        let a = Instance::generate(&exp, &c, 3).unwrap();
        let b = Instance::generate(&exp, &c, 3).unwrap();
        let d = Instance::generate(&exp, &c, 4).unwrap();
        assert_eq!(a.y, b.y);
        assert_ne!(a.y, d.y);
        assert_ne!(a.signals, d.signals);
    }

    #[test]
    fn best_zeta_skips_all_failed() {
        let failed = TrialOutcome::Failed {
            iteration: 2,
            reason: "x".into(),
        };
        let rs = vec![
            ZetaResult { zeta: 0.6, outcomes: vec![failed.clone()] },
            ZetaResult { zeta: 0.8, outcomes: vec![TrialOutcome::Completed(vec![0.3, 0.5])] },
            ZetaResult { zeta: 1.0, outcomes: vec![TrialOutcome::Completed(vec![0.5]), failed] },
        ];
        assert_eq!(select_best(&rs), Some(1));
        assert_eq!(rs[2].failed(), 1);
        assert_eq!(rs[1].summary().unwrap().mean, 0.5);
        assert_eq!(select_best(&rs[..1]), None);
    }

    #[test]
    fn matched_rates() {
        let exp = ExperimentConfig { deltas: vec![0.2, 0.25], ..tiny() };
        let u = matched_uncoupled(&exp).unwrap();
        assert_eq!((u.sections, u.coupling_width), (1, 0));
        for (d, du) in exp.deltas.iter().zip(&u.deltas) {
            let c = exp.coupling(*d).unwrap();
            assert_eq!(*du, c.overall_rate());
            // same total measurement budget up to rounding of M
            let mu = u.coupling(*du).unwrap().m() as f64;
            assert!((mu - c.overall_rate() * exp.n as f64).abs() <= 0.5);
        }
    }

    #[test]
    fn summary_quantiles() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.median), (3.0, 3.0));
        assert!((s.q10 - 1.4).abs() < 1e-12 && (s.q90 - 4.6).abs() < 1e-12);
        assert!(Summary::of(&[]).is_none());
    }
}
