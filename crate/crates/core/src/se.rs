//! Deterministic state evolution for OAMP.
//!
//! The recursion follows the variance lines of the algorithm with two
//! replacements: `η_A` is evaluated on the deterministic singular profile
//! and the empirical posterior variance `v_B` becomes the MMSE of the scalar
//! Gaussian channel. Damping is not modeled.

use crate::coupling::CouplingConfig;
use crate::denoiser::BernoulliGaussian;
use crate::error::{Error, Result};
use crate::oamp::{IterationTrace, VARIANCE_FLOOR};
use crate::sensing::{condition_number_profile, SingularProfile};

/// Default fixed-point tolerance on `max_l |v̄_B,t+1[l] - v̄_B,t[l]|`.
pub const DEFAULT_FP_TOL: f64 = 1e-10;
/// Default iteration cap for [`StateEvolution::run`].
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// Large-system `η̄_A = 1 - n_c^{-1} Σ s_i²/(snr_ratio + s_i²)` on a fixed profile.
pub fn se_eta_a(profile: &SingularProfile, n_c: usize, snr_ratio: f64) -> Result<f64> {
    if !(snr_ratio > 0.0) {
        return Err(Error::domain(format!(
            "noise-to-signal ratio must be positive, got {snr_ratio}"
        )));
    }
    if n_c == 0 {
        return Err(Error::domain("column count must be positive"));
    }
    let gain: f64 = profile
        .values()
        .iter()
        .map(|s| {
            let s2 = s * s;
            s2 / (snr_ratio + s2)
        })
        .sum();
    Ok(1.0 - gain / n_c as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeState {
    pub t: usize,
    /// Per row section.
    pub v_ba: Vec<f64>,
    pub eta_a: Vec<f64>,
    pub v_ab: Vec<f64>,
    pub eta_b: Vec<f64>,
    /// Per column section.
    pub v_suf: Vec<f64>,
    pub v_b: Vec<f64>,
}

impl SeState {
    pub fn largest_v_b(&self) -> f64 {
        self.v_b.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrajectory {
    /// `states[0]` is the initialization (`v̄_B = 1`, the prior variance);
    /// `states[t]` holds `v̄_B,t` after `t` steps.
    pub states: Vec<SeState>,
    /// Step at which the fixed-point criterion first held.
    pub converged_at: Option<usize>,
    pub tolerance: f64,
}

impl SeTrajectory {
    pub fn last(&self) -> &SeState {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// `v̄_B,t`; past the end of a converged trajectory the fixed point is returned.
    pub fn v_b_at(&self, t: usize) -> &[f64] {
        &self.states[t.min(self.states.len() - 1)].v_b
    }

    pub fn state_at(&self, t: usize) -> &SeState {
        &self.states[t.min(self.states.len() - 1)]
    }

    /// Steps `(t, l)` where `v̄_B` increased by more than `slack`.
    pub fn monotonicity_violations(&self, slack: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for t in 1..self.states.len() {
            for (l, (a, b)) in self.states[t - 1].v_b.iter().zip(&self.states[t].v_b).enumerate() {
                if b - a > slack {
                    out.push((t, l));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct StateEvolution<'a> {
    config: &'a CouplingConfig,
    profiles: Vec<SingularProfile>,
    prior: BernoulliGaussian,
}

impl<'a> StateEvolution<'a> {
    /// `profiles[ℓ]` describes the spectrum of `A[ℓ]`.
    pub fn new(config: &'a CouplingConfig, profiles: Vec<SingularProfile>, prior: BernoulliGaussian) -> Result<Self> {
        if profiles.len() != config.rows() {
            return Err(Error::domain(format!(
                "{} profiles for {} row sections",
                profiles.len(),
                config.rows()
            )));
        }
        for (row, p) in profiles.iter().enumerate() {
            if p.n_c() != config.n_c(row) {
                return Err(Error::domain(format!("profile {row} has the wrong column count")));
            }
        }
        Ok(Self {
            config,
            profiles,
            prior,
        })
    }

    /// Geometric condition-number profiles for every row section.
    pub fn with_condition_number(config: &'a CouplingConfig, kappa: f64, prior: BernoulliGaussian) -> Result<Self> {
        let profiles = (0..config.rows())
            .map(|row| condition_number_profile(config.m(), config.n(), config.window_len(row), kappa))
            .collect::<Result<_>>()?;
        Self::new(config, profiles, prior)
    }

    pub fn config(&self) -> &CouplingConfig {
        self.config
    }

    pub fn init(&self) -> SeState {
        let c = self.config;
        SeState {
            t: 0,
            v_ba: (0..c.rows()).map(|r| c.row_energy(r).max(VARIANCE_FLOOR)).collect(),
            eta_a: vec![0.0; c.rows()],
            v_ab: vec![0.0; c.rows()],
            eta_b: vec![0.0; c.rows()],
            v_suf: vec![0.0; c.sections()],
            v_b: vec![1.0; c.sections()],
        }
    }

    pub fn step(&self, prev: &SeState) -> Result<SeState> {
        let c = self.config;
        let sigma2 = c.sigma2();
        let mut eta_a = Vec::with_capacity(c.rows());
        let mut v_ab = Vec::with_capacity(c.rows());
        for (row, profile) in self.profiles.iter().enumerate() {
            let v = prev.v_ba[row];
            let eta = se_eta_a(profile, c.n_c(row), sigma2 / v)?;
            let wl = c.window_len(row) as f64;
            eta_a.push(eta);
            v_ab.push((eta * v / (wl * (1.0 - eta))).max(VARIANCE_FLOOR));
        }
        let mut v_suf = Vec::with_capacity(c.sections());
        let mut v_b = Vec::with_capacity(c.sections());
        for col in 0..c.sections() {
            let precision: f64 = (0..=c.width())
                .map(|w| c.gamma().at_offset(col, w).powi(2) / v_ab[col + w])
                .sum();
            let vs = (1.0 / precision).max(VARIANCE_FLOOR);
            v_suf.push(vs);
            v_b.push(self.prior.mmse(vs)?);
        }
        let mut eta_b = Vec::with_capacity(c.rows());
        let mut v_ba = Vec::with_capacity(c.rows());
        #[allow(clippy::needless_range_loop)]
        for row in 0..c.rows() {
            let wl = c.window_len(row) as f64;
            let eta: f64 = c
                .window_unchecked(row)
                .map(|w| {
                    let col = row - w;
                    c.gamma().at_offset(col, w).powi(2) * v_b[col]
                })
                .sum::<f64>()
                / v_ab[row];
            if !(eta < wl) {
                return Err(Error::Divergence {
                    iteration: prev.t,
                    section: row,
                    what: "eta_B",
                    value: eta,
                    bound: wl,
                });
            }
            eta_b.push(eta);
            v_ba.push((eta * v_ab[row] / (1.0 - eta / wl)).max(VARIANCE_FLOOR));
        }
        Ok(SeState {
            t: prev.t + 1,
            v_ba,
            eta_a,
            v_ab,
            eta_b,
            v_suf,
            v_b,
        })
    }

    /// Iterate up to `max_iterations` steps, stopping once successive `v̄_B`
    /// differ by less than `fp_tol` in max-norm.
    pub fn run(&self, max_iterations: usize, fp_tol: f64) -> Result<SeTrajectory> {
        if !(fp_tol > 0.0) {
            return Err(Error::domain("fixed-point tolerance must be positive"));
        }
        let mut states = vec![self.init()];
        let mut converged_at = None;
        for _ in 0..max_iterations {
            let prev = states.last().unwrap();
            let next = self.step(prev)?;
            let change = max_abs_diff(&prev.v_b, &next.v_b);
            states.push(next);
            if change < fp_tol {
                converged_at = Some(states.len() - 1);
                break;
            }
        }
        Ok(SeTrajectory {
            states,
            converged_at,
            tolerance: fp_tol,
        })
    }

    /// `max_l |v̄_B| change` produced by one more step from `state`.
    pub fn residual(&self, state: &SeState) -> Result<f64> {
        let next = self.step(state)?;
        Ok(max_abs_diff(&state.v_b, &next.v_b))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Relative deviation between trial-averaged MSE and the SE prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    /// Trial-averaged MSE per compared iteration and column.
    pub mean_mse: Vec<Vec<f64>>,
    /// `max_l |mean_mse - v̄_B| / v̄_B` per compared iteration.
    pub per_iteration: Vec<f64>,
    pub max: f64,
    /// `(iteration, column)` of the largest deviation, iterations counted from 1.
    pub worst: (usize, usize),
}

/// Compare the first `iterations` iterations of `traces` (all with ground
/// truth) against `trajectory`. Iteration `t` of a trace is the estimate
/// `x_B,t`, predicted by `v̄_B,t`.
pub fn compare_se_mc(trajectory: &SeTrajectory, traces: &[IterationTrace], iterations: usize) -> Result<DeviationReport> {
    if traces.is_empty() {
        return Err(Error::domain("no traces to compare"));
    }
    let cols = trajectory.states[0].v_b.len();
    let mut mean_mse = Vec::with_capacity(iterations);
    let mut per_iteration = Vec::with_capacity(iterations);
    let mut max = 0.0;
    let mut worst = (0, 0);
    for t in 1..=iterations {
        let mut sum = vec![0.0; cols];
        for trace in traces {
            let rec = trace
                .iterations
                .get(t - 1)
                .ok_or_else(|| Error::domain(format!("trace shorter than {t} iterations")))?;
            if rec.mse.len() != cols {
                return Err(Error::domain("trace and trajectory disagree on the number of sections"));
            }
            sum.iter_mut().zip(&rec.mse).for_each(|(s, m)| *s += m);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / traces.len() as f64).collect();
        let predicted = trajectory.v_b_at(t);
        let mut worst_here = 0.0;
        for (l, (m, p)) in mean.iter().zip(predicted).enumerate() {
            let dev = (m - p).abs() / p;
            if dev > worst_here {
                worst_here = dev;
            }
            if dev > max {
                max = dev;
                worst = (t, l);
            }
        }
        per_iteration.push(worst_here);
        mean_mse.push(mean);
    }
    Ok(DeviationReport {
        mean_mse,
        per_iteration,
        max,
        worst,
    })
}
