use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Randomly permuted Hadamard right factor, applied by FWHT.
    Structured,
    /// Haar-distributed right factor held as a dense matrix (small N only).
    Haar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Iterations at which the A→B error vectors are inspected.
    pub checkpoints: Vec<usize>,
    /// Compression rate for the diagnostic runs; the first sweep value when unset.
    pub delta: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            checkpoints: vec![1, 3, 5],
            delta: None,
        }
    }
}

/// One experiment: a coupled system, a compression-rate sweep and a damping grid.
///
/// The defaults are the desk-scale preset shipped in `configs/desk.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Column sections `L`.
    pub sections: usize,
    /// Coupling width `W`.
    pub coupling_width: usize,
    /// Signal length per section `N`.
    pub n: usize,
    pub rho: f64,
    pub kappa: f64,
    /// `1/σ²` in dB.
    pub snr_db: f64,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    /// Per-section compression rates `δ = M/N`; `M = round(δ·N)`.
    pub deltas: Vec<f64>,
    /// Damping grid searched per sweep point.
    pub zeta: Vec<f64>,
    pub ensemble: Ensemble,
    /// Multiply the Hadamard factor by a random sign diagonal.
    pub random_signs: bool,
    /// State-evolution fixed-point tolerance.
    pub fp_tol: f64,
    pub out: Option<PathBuf>,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sections: 8,
            coupling_width: 1,
            n: 1 << 10,
            rho: 0.1,
            kappa: 10.0,
            snr_db: 30.0,
            iterations: 200,
            trials: 200,
            seed: 20230604,
            deltas: vec![0.15, 0.175, 0.19, 0.2, 0.21, 0.225, 0.25, 0.3],
            zeta: vec![0.6, 0.7, 0.8, 0.9, 0.95, 1.0],
            ensemble: Ensemble::Structured,
            random_signs: false,
            fp_tol: crate::se::DEFAULT_FP_TOL,
            out: None,
            diagnostics: DiagnosticsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sigma2(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Force the uncoupled system `L = 1, W = 0`.
    pub fn uncoupled(mut self) -> Self {
        self.sections = 1;
        self.coupling_width = 0;
        self
    }

    pub fn m_for(&self, delta: f64) -> usize {
        (delta * self.n as f64).round() as usize
    }

    /// Coupled system for sweep value `delta`.
    pub fn coupling(&self, delta: f64) -> Result<CouplingConfig> {
        let m = self.m_for(delta);
        CouplingConfig::new(self.sections, self.coupling_width, self.n, m, self.sigma2())
            .map_err(|e| Error::config(format!("delta = {delta}: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.sections == 0 || self.n == 0 {
            return Err(Error::config("L and N must be positive"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::config(format!("rho = {} outside (0, 1]", self.rho)));
        }
        if !(self.kappa >= 1.0) {
            return Err(Error::config(format!("kappa = {} below 1", self.kappa)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db must be finite"));
        }
        if !(self.fp_tol > 0.0) {
            return Err(Error::config("fp_tol must be positive"));
        }
        if self.zeta.is_empty() || self.zeta.iter().any(|z| !(*z > 0.0 && *z <= 1.0)) {
            return Err(Error::config(format!("damping grid {:?} must be a non-empty subset of (0, 1]", self.zeta)));
        }
        for &d in &self.deltas {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::config(format!("delta = {d} outside (0, 1]")));
            }
            let m = self.m_for(d);
            if m == 0 {
                return Err(Error::config(format!("delta = {d} gives M = 0 at N = {}", self.n)));
            }
            if m == 1 && self.kappa > 1.0 {
                return Err(Error::config(format!(
                    "delta = {d} gives M = 1, which cannot realize kappa = {}",
                    self.kappa
                )));
            }
        }
        if self.ensemble == Ensemble::Structured {
            let max_window = self.coupling_width.min(self.sections - 1) + 1;
            for k in 1..=max_window {
                let n_c = k * self.n;
                if !n_c.is_power_of_two() {
                    return Err(Error::config(format!(
                        "structured ensemble needs power-of-two N_c = |W[l]|·N, but {k}·{} = {n_c}; \
                         windows take every size from 1 to min(W, L-1)+1, so use a power-of-two N \
                         with W <= 1 (or L = 1)",
                        self.n
                    )));
                }
            }
        }
        if self.diagnostics.delta.is_some_and(|d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::config("diagnostics.delta outside (0, 1]"));
        }
        Ok(())
    }
}
