//! Orthogonal AMP for the spatially coupled system.
//!
//! Each iteration runs module A (per-row LMMSE estimate with Onsager
//! correction), fuses the `W+1` row messages of every column into a
//! sufficient statistic, applies the Bayes denoiser (module B), maps the
//! estimate back to the row spaces with a second Onsager correction, and
//! finally damps the B→A messages.

use std::fmt;

use crate::coupling::{CouplingConfig, SignalEnsemble, VectorizedSystem};
use crate::denoiser::BernoulliGaussian;
use crate::error::{Error, Result};
use crate::sensing::SensingOperator;

/// Lower bound applied to every message variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Per-row-section messages: one mean vector of length `N_c[ℓ]` and one variance each.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<f64>,
}

impl Message {
    fn zeros(config: &CouplingConfig) -> Self {
        Self {
            mean: (0..config.rows()).map(|r| vec![0.0; config.n_c(r)]).collect(),
            var: vec![0.0; config.rows()],
        }
    }
}

/// All messages and variance scalars of one OAMP iteration.
///
/// After iteration `t` has completed, `t` reads `t + 1`: `a_to_b`, `eta_a`,
/// `x_suf` and `eta_b` belong to iteration `t`, while `x_b` and `b_to_a`
/// are the inputs of iteration `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OampState {
    pub t: usize,
    pub b_to_a: Message,
    pub a_to_b: Message,
    pub eta_a: Vec<f64>,
    pub eta_b: Vec<f64>,
    pub x_suf: Vec<Vec<f64>>,
    pub v_suf: Vec<f64>,
    pub x_b: Vec<Vec<f64>>,
    pub v_b: Vec<f64>,
}

/// Scalars recorded after one iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationRecord {
    /// `N^{-1}‖x_B[l] - x[l]‖²` per column; empty without ground truth.
    pub mse: Vec<f64>,
    pub v_b: Vec<f64>,
    pub v_suf: Vec<f64>,
    pub eta_a: Vec<f64>,
    pub eta_b: Vec<f64>,
}

impl IterationRecord {
    pub fn largest_mse(&self) -> Option<f64> {
        self.mse.iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub iterations: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct OampOutput {
    /// `x_B,T[l]` for every column section.
    pub estimate: Vec<Vec<f64>>,
    pub trace: IterationTrace,
    pub state: OampState,
}

/// A run that stopped early, together with everything recorded before the failure.
#[derive(Debug)]
pub struct OampFailure {
    pub error: Error,
    pub trace: IterationTrace,
}

impl fmt::Display for OampFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.trace.len())
    }
}

impl std::error::Error for OampFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Convex combination `zeta·new + (1-zeta)·old` of means and variances.
pub fn damp(new: Message, old: &Message, zeta: f64) -> Result<Message> {
    check_zeta(zeta)?;
    if zeta == 1.0 {
        return Ok(new);
    }
    let keep = 1.0 - zeta;
    let mean = new
        .mean
        .into_iter()
        .zip(&old.mean)
        .map(|(n, o)| n.iter().zip(o).map(|(a, b)| zeta * a + keep * b).collect())
        .collect();
    let var = new
        .var
        .iter()
        .zip(&old.var)
        .map(|(a, b)| zeta * a + keep * b)
        .collect();
    Ok(Message { mean, var })
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("damping factor must lie in (0, 1], got {zeta}")))
    }
}

/// Error vectors `h[ℓ] = x_{A→B}[ℓ] - |W[ℓ]|^{-1/2} x_vec[ℓ]` and
/// `q[ℓ] = x_{B→A}[ℓ] - x_vec[ℓ]` of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVectors {
    pub h: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
}

pub fn error_vectors(state: &OampState, system: &VectorizedSystem, config: &CouplingConfig) -> ErrorVectors {
    let rows = config.rows();
    let mut h = Vec::with_capacity(rows);
    let mut q = Vec::with_capacity(rows);
    for (row, x) in system.x_vec().iter().enumerate() {
        let scale = 1.0 / (config.window_len(row) as f64).sqrt();
        h.push(
            state.a_to_b.mean[row]
                .iter()
                .zip(x)
                .map(|(m, x)| m - scale * x)
                .collect(),
        );
        q.push(state.b_to_a.mean[row].iter().zip(x).map(|(m, x)| m - x).collect());
    }
    ErrorVectors { h, q }
}

/// One OAMP problem instance: configuration, operators and measurements.
#[derive(Debug, Clone)]
pub struct Oamp<'a> {
    config: &'a CouplingConfig,
    ops: &'a [SensingOperator],
    y: &'a [Vec<f64>],
    prior: BernoulliGaussian,
    zeta: f64,
}

impl<'a> Oamp<'a> {
    pub fn new(
        config: &'a CouplingConfig,
        ops: &'a [SensingOperator],
        y: &'a [Vec<f64>],
        prior: BernoulliGaussian,
        zeta: f64,
    ) -> Result<Self> {
        check_zeta(zeta)?;
        if ops.len() != config.rows() || y.len() != config.rows() {
            return Err(Error::domain(format!(
                "need {} operators and measurement sections, got {} and {}",
                config.rows(),
                ops.len(),
                y.len()
            )));
        }
        for (row, (op, yr)) in ops.iter().zip(y).enumerate() {
            if op.m() != config.m() || op.n_c() != config.n_c(row) || yr.len() != config.m() {
                return Err(Error::domain(format!("row section {row} has mismatched dimensions")));
            }
        }
        Ok(Self {
            config,
            ops,
            y,
            prior,
            zeta,
        })
    }

    pub fn config(&self) -> &CouplingConfig {
        self.config
    }

    /// Zero B→A messages with variance `Σ_w γ²[ℓ][ℓ-w]`.
    pub fn init(&self) -> OampState {
        let c = self.config;
        let mut b_to_a = Message::zeros(c);
        for (row, v) in b_to_a.var.iter_mut().enumerate() {
            *v = c.row_energy(row).max(VARIANCE_FLOOR);
        }
        OampState {
            t: 0,
            b_to_a,
            a_to_b: Message::zeros(c),
            eta_a: vec![0.0; c.rows()],
            eta_b: vec![0.0; c.rows()],
            x_suf: vec![vec![0.0; c.n()]; c.sections()],
            v_suf: vec![0.0; c.sections()],
            x_b: vec![vec![0.0; c.n()]; c.sections()],
            v_b: vec![1.0; c.sections()],
        }
    }

    /// LMMSE estimation and Onsager correction for every row section.
    pub fn module_a_step(&self, state: &mut OampState) -> Result<()> {
        let c = self.config;
        let sigma2 = c.sigma2();
        for row in 0..c.rows() {
            let op = &self.ops[row];
            let x_ba = &state.b_to_a.mean[row];
            let v_ba = state.b_to_a.var[row];
            let snr_ratio = sigma2 / v_ba;
            let mut resid = op.forward(x_ba)?;
            for (r, y) in resid.iter_mut().zip(&self.y[row]) {
                *r = y - *r;
            }
            let filtered = op.lmmse_apply(snr_ratio, &resid)?;
            let eta = op.eta_a(snr_ratio)?;
            if !(eta < 1.0) || !eta.is_finite() {
                return Err(Error::Divergence {
                    iteration: state.t,
                    section: row,
                    what: "eta_A",
                    value: eta,
                    bound: 1.0,
                });
            }
            let wl = c.window_len(row) as f64;
            let denom = wl.sqrt() * (1.0 - eta);
            let out = &mut state.a_to_b.mean[row];
            for ((o, xb), f) in out.iter_mut().zip(x_ba).zip(&filtered) {
                let x_a = xb + f;
                *o = (x_a - eta * xb) / denom;
            }
            state.a_to_b.var[row] = (eta * v_ba / (wl * (1.0 - eta))).max(VARIANCE_FLOOR);
            state.eta_a[row] = eta;
        }
        Ok(())
    }

    /// Harmonic-variance fusion of the A→B blocks that observe each column.
    pub fn sufficient_statistic(&self, state: &mut OampState) -> Result<()> {
        let c = self.config;
        let n = c.n();
        for col in 0..c.sections() {
            let mut precision = 0.0;
            let acc = &mut state.x_suf[col];
            acc.iter_mut().for_each(|x| *x = 0.0);
            for w in 0..=c.width() {
                let row = col + w;
                let g = c.gamma().at_offset(col, w);
                let v = state.a_to_b.var[row];
                precision += g * g / v;
                let pos = c.block_position(row, w);
                let block = &state.a_to_b.mean[row][pos * n..(pos + 1) * n];
                let weight = g / v;
                for (a, b) in acc.iter_mut().zip(block) {
                    *a += weight * b;
                }
            }
            if !(precision > 0.0) || !precision.is_finite() {
                return Err(Error::domain(format!("column {col} receives no information")));
            }
            let v_suf = (1.0 / precision).max(VARIANCE_FLOOR);
            acc.iter_mut().for_each(|x| *x *= v_suf);
            state.v_suf[col] = v_suf;
        }
        Ok(())
    }

    /// Denoising and the B→A Onsager correction. Stores `x_B`, `v_B` and
    /// `eta_B` in `state` and returns the undamped B→A message.
    pub fn module_b_step(&self, state: &mut OampState) -> Result<Message> {
        let c = self.config;
        for col in 0..c.sections() {
            let (mean, var) = self.prior.denoise_vector(&state.x_suf[col], state.v_suf[col])?;
            state.x_b[col] = mean;
            state.v_b[col] = var;
        }
        let mut next = Message::zeros(c);
        for row in 0..c.rows() {
            let wl = c.window_len(row) as f64;
            let v_ab = state.a_to_b.var[row];
            let eta: f64 = c
                .window_unchecked(row)
                .map(|w| {
                    let col = row - w;
                    c.gamma().at_offset(col, w).powi(2) * state.v_b[col]
                })
                .sum::<f64>()
                / v_ab;
            if !(eta < wl) || !eta.is_finite() {
                return Err(Error::Divergence {
                    iteration: state.t,
                    section: row,
                    what: "eta_B",
                    value: eta,
                    bound: wl,
                });
            }
            state.eta_b[row] = eta;
            let x_ext = c.build_x_vec(&state.x_b, row)?;
            let sw = wl.sqrt();
            let denom = sw * (1.0 - eta / wl);
            for ((o, xe), xab) in next.mean[row].iter_mut().zip(&x_ext).zip(&state.a_to_b.mean[row]) {
                *o = (sw * xe - eta * xab) / denom;
            }
            next.var[row] = (eta * v_ab / (1.0 - eta / wl)).max(VARIANCE_FLOOR);
        }
        Ok(next)
    }

    /// One full iteration, including damping.
    pub fn iterate(&self, state: &mut OampState) -> Result<()> {
        self.module_a_step(state)?;
        self.sufficient_statistic(state)?;
        let fresh = self.module_b_step(state)?;
        let mut damped = damp(fresh, &state.b_to_a, self.zeta)?;
        damped.var.iter_mut().for_each(|v| *v = v.max(VARIANCE_FLOOR));
        state.b_to_a = damped;
        state.t += 1;
        Ok(())
    }

    pub fn run(&self, iterations: usize, truth: Option<&SignalEnsemble>) -> Result<OampOutput, OampFailure> {
        self.run_observed(iterations, truth, |_| {})
    }

    /// Like [`Oamp::run`], calling `observer` after every completed iteration.
    pub fn run_observed(
        &self,
        iterations: usize,
        truth: Option<&SignalEnsemble>,
        mut observer: impl FnMut(&OampState),
    ) -> Result<OampOutput, OampFailure> {
        let mut trace = IterationTrace::default();
        if let Some(t) = truth {
            let ok = t.sections().len() == self.config.sections()
                && t.sections().iter().all(|s| s.len() == self.config.n());
            if !ok {
                return Err(OampFailure {
                    error: Error::domain("ground truth does not match the configuration"),
                    trace,
                });
            }
        }
        let mut state = self.init();
        for _ in 0..iterations {
            if let Err(error) = self.iterate(&mut state) {
                return Err(OampFailure { error, trace });
            }
            let mse = truth
                .map(|t| section_mse(&state.x_b, t.sections()))
                .unwrap_or_default();
            if mse.iter().any(|m| !m.is_finite()) {
                let error = Error::Divergence {
                    iteration: state.t - 1,
                    section: 0,
                    what: "mse",
                    value: f64::NAN,
                    bound: f64::INFINITY,
                };
                return Err(OampFailure { error, trace });
            }
            trace.iterations.push(IterationRecord {
                mse,
                v_b: state.v_b.clone(),
                v_suf: state.v_suf.clone(),
                eta_a: state.eta_a.clone(),
                eta_b: state.eta_b.clone(),
            });
            observer(&state);
        }
        Ok(OampOutput {
            estimate: state.x_b.clone(),
            trace,
            state,
        })
    }
}

/// `N^{-1}‖est[l] - truth[l]‖²` per section.
pub fn section_mse(estimate: &[Vec<f64>], truth: &[Vec<f64>]) -> Vec<f64> {
    estimate
        .iter()
        .zip(truth)
        .map(|(e, x)| e.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::condition_number_profile;
    use crate::seed::{Purpose, SeedStream};

    fn msg(mean: Vec<Vec<f64>>, var: Vec<f64>) -> Message {
        Message { mean, var }
    }

    #[test]
    fn damping_examples() {
        let new = msg(vec![vec![2.0]], vec![4.0]);
        let old = msg(vec![vec![0.0]], vec![2.0]);
        assert_eq!(damp(new.clone(), &old, 1.0).unwrap(), new);
        let half = damp(new.clone(), &old, 0.5).unwrap();
        assert_eq!(half.mean[0][0], 1.0);
        assert_eq!(half.var[0], 3.0);
        let fixed = damp(old.clone(), &old, 0.3).unwrap();
        assert_eq!(fixed, old);
        assert!(damp(new.clone(), &old, 0.0).is_err());
        assert!(damp(new, &old, 1.2).is_err());
    }

    fn instance(l: usize, w: usize, n: usize, m: usize) -> (CouplingConfig, Vec<SensingOperator>) {
        let c = CouplingConfig::new(l, w, n, m, 1e-3).unwrap();
        let seeds = SeedStream::new(5);
        let ops = (0..c.rows())
            .map(|row| {
                let p = condition_number_profile(m, n, c.window_len(row), 10.0).unwrap();
                SensingOperator::structured(&p, false, &mut seeds.rng(Purpose::Permutation, row as u64)).unwrap()
            })
            .collect();
        (c, ops)
    }

    #[test]
    fn init_variances() {
        let (c, ops) = instance(4, 1, 8, 4);
        let y = vec![vec![0.0; 4]; c.rows()];
        let prior = BernoulliGaussian::new(0.1).unwrap();
        let s = Oamp::new(&c, &ops, &y, prior, 1.0).unwrap().init();
        assert!((s.b_to_a.var[0] - 0.5).abs() < 1e-15);
        assert!((s.b_to_a.var[2] - 1.0).abs() < 1e-15);
        assert!((s.b_to_a.var[4] - 0.5).abs() < 1e-15);
        assert!(s.b_to_a.mean.iter().flatten().all(|x| *x == 0.0));

        let (c, ops) = instance(1, 0, 8, 4);
        let y = vec![vec![0.0; 4]];
        let s = Oamp::new(&c, &ops, &y, prior, 1.0).unwrap().init();
        assert_eq!(s.b_to_a.var, vec![1.0]);
    }

    #[test]
    fn sufficient_statistic_harmonic_mean() {
        let (c, ops) = instance(3, 1, 4, 2);
        let y = vec![vec![0.0; 2]; c.rows()];
        let prior = BernoulliGaussian::new(0.1).unwrap();
        let oamp = Oamp::new(&c, &ops, &y, prior, 1.0).unwrap();
        let mut s = oamp.init();
        s.a_to_b.var = vec![1.0, 3.0, 1.0, 3.0];
        oamp.sufficient_statistic(&mut s).unwrap();
        // column 0 sees rows 0 (v=1) and 1 (v=3)
        assert!((s.v_suf[0] - 1.5).abs() < 1e-14);
        s.a_to_b.var = vec![0.7; 4];
        oamp.sufficient_statistic(&mut s).unwrap();
        assert!(s.v_suf.iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn sufficient_statistic_single_section_passthrough() {
        let (c, ops) = instance(1, 0, 8, 4);
        let y = vec![vec![0.0; 4]];
        let prior = BernoulliGaussian::new(0.1).unwrap();
        let oamp = Oamp::new(&c, &ops, &y, prior, 1.0).unwrap();
        let mut s = oamp.init();
        s.a_to_b.mean[0] = (0..8).map(|i| i as f64 - 3.5).collect();
        s.a_to_b.var[0] = 0.25;
        oamp.sufficient_statistic(&mut s).unwrap();
        assert_eq!(s.v_suf[0], 0.25);
        for (a, b) in s.x_suf[0].iter().zip(&s.a_to_b.mean[0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn eta_b_bulk_ratio() {
        let (c, ops) = instance(4, 1, 8, 4);
        let y = vec![vec![0.0; 4]; c.rows()];
        let prior = BernoulliGaussian::new(0.1).unwrap();
        let oamp = Oamp::new(&c, &ops, &y, prior, 1.0).unwrap();
        let mut s = oamp.init();
        s.a_to_b.var = vec![0.5; c.rows()];
        s.v_suf = vec![0.5; 4];
        // x_suf = 0 gives the same posterior variance in every column
        let _ = oamp.module_b_step(&mut s).unwrap();
        let vb = s.v_b[0];
        assert!(s.v_b.iter().all(|v| *v == vb));
        assert!((s.eta_b[2] - vb / 0.5).abs() < 1e-14);
        assert!((s.eta_b[0] - 0.5 * vb / 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_iterations_give_zero_estimate() {
        let (c, ops) = instance(2, 1, 8, 4);
        let y = vec![vec![1.0; 4]; c.rows()];
        let prior = BernoulliGaussian::new(0.1).unwrap();
        let out = Oamp::new(&c, &ops, &y, prior, 1.0).unwrap().run(0, None).unwrap();
        assert!(out.trace.is_empty());
        assert!(out.estimate.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (c, ops) = instance(2, 1, 8, 4);
        let prior = BernoulliGaussian::new(0.1).unwrap();
        let y = vec![vec![0.0; 4]; 2];
        assert!(Oamp::new(&c, &ops, &y, prior, 1.0).is_err());
        let y = vec![vec![0.0; 4]; 3];
        assert!(Oamp::new(&c, &ops, &y, prior, 0.0).is_err());
        assert!(Oamp::new(&c, &ops[..2], &y, prior, 1.0).is_err());
    }
}
