//! Spatially coupled measurement model and its per-row-section vector form.
//!
//! Column sections `l = 0..L` hold the unknown signals `x[l]` of length `N`.
//! Row section `ℓ = 0..L+W` observes the columns `ℓ - w` for `w` in its
//! window, each scaled by the coupling coefficient `γ[ℓ][ℓ-w]`:
//!
//! ```text
//! y[ℓ] = Σ_w γ[ℓ][ℓ-w] A[ℓ][ℓ-w] x[ℓ-w] + w[ℓ]
//! ```
//!
//! Stacking the blocks of a row section gives `y[ℓ] = A[ℓ] x_vec[ℓ] + w[ℓ]`.
//! Blocks inside `x_vec[ℓ]` are always ordered by increasing offset `w`, so
//! block 0 belongs to the newest column `ℓ - lo`. Every module goes through
//! [`CouplingConfig::block_position`] to map between offsets and blocks.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::sensing::SensingOperator;

const GAMMA_TOL: f64 = 1e-12;

/// Coupling coefficients `γ[l+w][l]`, stored per column `l` and offset `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma {
    width: usize,
    coeffs: Vec<f64>,
}

impl Gamma {
    /// `coeffs[l][w]` is `γ[l+w][l]`.
    pub fn from_columns(width: usize, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.iter().any(|c| c.len() != width + 1) {
            return Err(Error::domain("every column needs W+1 coupling coefficients"));
        }
        Ok(Self {
            width,
            coeffs: coeffs.into_iter().flatten().collect(),
        })
    }

    pub fn sections(&self) -> usize {
        self.coeffs.len() / (self.width + 1)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `γ[l+w][l]`.
    #[inline]
    pub fn at_offset(&self, col: usize, w: usize) -> f64 {
        self.coeffs[col * (self.width + 1) + w]
    }

    /// `L^{-1} Σ_l Σ_w γ²[l+w][l]`; equals 1 for admissible coefficients.
    pub fn normalization(&self) -> f64 {
        self.coeffs.iter().map(|g| g * g).sum::<f64>() / self.sections() as f64
    }
}

/// `γ[l+w][l] = (W+1)^{-1/2}` for every column and offset.
pub fn uniform_gamma(sections: usize, width: usize) -> Gamma {
    let g = 1.0 / ((width + 1) as f64).sqrt();
    Gamma {
        width,
        coeffs: vec![g; sections * (width + 1)],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingConfig {
    sections: usize,
    width: usize,
    n: usize,
    m: usize,
    sigma2: f64,
    gamma: Gamma,
}

impl CouplingConfig {
    /// Uniformly coupled system with `L = sections`, `W = width`.
    pub fn new(sections: usize, width: usize, n: usize, m: usize, sigma2: f64) -> Result<Self> {
        if sections == 0 {
            return Err(Error::domain("L must be at least 1"));
        }
        Self::with_gamma(n, m, sigma2, uniform_gamma(sections, width))
    }

    pub fn with_gamma(n: usize, m: usize, sigma2: f64, gamma: Gamma) -> Result<Self> {
        let sections = gamma.sections();
        let width = gamma.width();
        if sections == 0 {
            return Err(Error::domain("L must be at least 1"));
        }
        if n == 0 || m == 0 {
            return Err(Error::domain(format!("N = {n} and M = {m} must both be positive")));
        }
        if m > n {
            return Err(Error::domain(format!("compression rate M/N = {m}/{n} exceeds 1")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!("noise variance must be positive, got {sigma2}")));
        }
        let norm = gamma.normalization();
        if (norm - 1.0).abs() > GAMMA_TOL {
            return Err(Error::domain(format!(
                "coupling coefficients violate normalization: {norm}"
            )));
        }
        Ok(Self {
            sections,
            width,
            n,
            m,
            sigma2,
            gamma,
        })
    }

    /// Number of column sections `L`.
    pub fn sections(&self) -> usize {
        self.sections
    }

    /// Coupling width `W`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of row sections `L + W`.
    pub fn rows(&self) -> usize {
        self.sections + self.width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn delta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// `(1 + W/L)·δ`: measurements per unknown over the whole system.
    pub fn overall_rate(&self) -> f64 {
        (1.0 + self.width as f64 / self.sections as f64) * self.delta()
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    /// `γ[row][col]`, zero outside the band.
    pub fn gamma_at(&self, row: usize, col: usize) -> f64 {
        if col >= self.sections || row < col || row - col > self.width {
            0.0
        } else {
            self.gamma.at_offset(col, row - col)
        }
    }

    /// Window `W[ℓ] = {max(ℓ-(L-1), 0), ..., min(W, ℓ)}` of offsets active in row `ℓ`.
    pub fn window(&self, row: usize) -> Result<RangeInclusive<usize>> {
        if row >= self.rows() {
            return Err(Error::domain(format!(
                "row section {row} outside 0..{}",
                self.rows()
            )));
        }
        Ok(self.window_unchecked(row))
    }

    #[inline]
    pub(crate) fn window_unchecked(&self, row: usize) -> RangeInclusive<usize> {
        let lo = row.saturating_sub(self.sections - 1);
        let hi = self.width.min(row);
        lo..=hi
    }

    /// `|W[ℓ]|`.
    pub fn window_len(&self, row: usize) -> usize {
        let w = self.window_unchecked(row);
        w.end() - w.start() + 1
    }

    /// `N_c[ℓ] = |W[ℓ]|·N`.
    pub fn n_c(&self, row: usize) -> usize {
        self.window_len(row) * self.n
    }

    /// Position of offset `w`'s block inside `x_vec[row]`.
    #[inline]
    pub fn block_position(&self, row: usize, w: usize) -> usize {
        w - self.window_unchecked(row).start()
    }

    /// `Σ_{w∈W[ℓ]} γ²[ℓ][ℓ-w]`.
    pub fn row_energy(&self, row: usize) -> f64 {
        self.window_unchecked(row)
            .map(|w| self.gamma.at_offset(row - w, w).powi(2))
            .sum()
    }

    /// Stack `√|W[ℓ]|·γ[ℓ][ℓ-w]·x[ℓ-w]` over the window in increasing `w`.
    pub fn build_x_vec<S: AsRef<[f64]>>(&self, sections: &[S], row: usize) -> Result<Vec<f64>> {
        if sections.len() != self.sections || sections.iter().any(|s| s.as_ref().len() != self.n) {
            return Err(Error::domain(format!(
                "expected {} sections of length {}",
                self.sections, self.n
            )));
        }
        let window = self.window(row)?;
        let scale = (self.window_len(row) as f64).sqrt();
        let mut out = Vec::with_capacity(self.n_c(row));
        for w in window {
            let col = row - w;
            let g = scale * self.gamma.at_offset(col, w);
            out.extend(sections[col].as_ref().iter().map(|x| g * x));
        }
        Ok(out)
    }
}

/// Bernoulli-Gaussian signal sections: each entry is nonzero with probability
/// `rho` and then drawn from `N(0, 1/rho)`, so the entry variance is one.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEnsemble {
    rho: f64,
    sections: Vec<Vec<f64>>,
}

impl SignalEnsemble {
    pub fn generate<R: Rng + ?Sized>(config: &CouplingConfig, rho: f64, rng: &mut R) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::domain(format!("sparsity rate must lie in (0, 1], got {rho}")));
        }
        let sd = rho.recip().sqrt();
        let sections = (0..config.sections())
            .map(|_| {
                (0..config.n())
                    .map(|_| {
                        // draw both so the stream layout does not depend on rho
                        let active = rng.random::<f64>() < rho;
                        let g: f64 = StandardNormal.sample(rng);
                        if active {
                            sd * g
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rho, sections })
    }

    pub fn from_sections(rho: f64, sections: Vec<Vec<f64>>) -> Self {
        Self { rho, sections }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sections(&self) -> &[Vec<f64>] {
        &self.sections
    }
}

/// The stacked signals `x_vec[ℓ]` of every row section.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedSystem {
    x_vec: Vec<Vec<f64>>,
}

impl VectorizedSystem {
    pub fn build(config: &CouplingConfig, signals: &SignalEnsemble) -> Result<Self> {
        let x_vec = (0..config.rows())
            .map(|row| config.build_x_vec(signals.sections(), row))
            .collect::<Result<_>>()?;
        Ok(Self { x_vec })
    }

    pub fn x_vec(&self) -> &[Vec<f64>] {
        &self.x_vec
    }

    /// `y[ℓ] = A[ℓ] x_vec[ℓ] + w[ℓ]` with i.i.d. `N(0, σ²)` noise drawn row by row.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        config: &CouplingConfig,
        ops: &[SensingOperator],
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        if ops.len() != self.x_vec.len() {
            return Err(Error::domain(format!(
                "{} operators for {} row sections",
                ops.len(),
                self.x_vec.len()
            )));
        }
        let sd = config.sigma2().sqrt();
        self.x_vec
            .iter()
            .zip(ops)
            .map(|(x, op)| {
                if op.m() != config.m() {
                    return Err(Error::domain("operator row count differs from M"));
                }
                let mut y = op.forward(x)?;
                for yi in &mut y {
                    let z: f64 = StandardNormal.sample(rng);
                    *yi += sd * z;
                }
                Ok(y)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{Purpose, SeedStream};

    fn cfg(l: usize, w: usize) -> CouplingConfig {
        CouplingConfig::new(l, w, 4, 2, 0.01).unwrap()
    }

    #[test]
    fn window_examples() {
        let c = cfg(16, 1);
        assert_eq!(c.window(0).unwrap(), 0..=0);
        assert_eq!(c.window(5).unwrap(), 0..=1);
        assert_eq!(c.window(16).unwrap(), 1..=1);
        assert!(matches!(c.window(17), Err(Error::Domain(_))));
    }

    #[test]
    fn window_sizes_sum_to_band() {
        for (l, w) in [(1, 0), (1, 3), (4, 1), (16, 1), (3, 5), (8, 3)] {
            let c = cfg(l, w);
            let mut total = 0;
            for row in 0..c.rows() {
                let expect = w.min(row).min(l - 1).min(l + w - 1 - row) + 1;
                assert_eq!(c.window_len(row), expect, "L={l} W={w} row={row}");
                total += c.window_len(row);
            }
            assert_eq!(total, l * (w + 1));
        }
    }

    #[test]
    fn uniform_gamma_values() {
        let g = uniform_gamma(1, 0);
        assert_eq!(g.at_offset(0, 0), 1.0);
        let g = uniform_gamma(16, 1);
        for l in 0..16 {
            for w in 0..2 {
                assert!((g.at_offset(l, w) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
            }
        }
        assert!((g.normalization() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_validation() {
        let bad = Gamma::from_columns(1, vec![vec![1.0, 1.0]; 2]).unwrap();
        assert!(CouplingConfig::with_gamma(4, 2, 0.1, bad).is_err());
        // non-uniform but normalized
        let ok = Gamma::from_columns(1, vec![vec![0.8, 0.6]; 3]).unwrap();
        assert!(CouplingConfig::with_gamma(4, 2, 0.1, ok).is_ok());
    }

    #[test]
    fn config_rejects_bad_dimensions() {
        assert!(CouplingConfig::new(0, 1, 4, 2, 0.1).is_err());
        assert!(CouplingConfig::new(1, 0, 0, 2, 0.1).is_err());
        assert!(CouplingConfig::new(1, 0, 4, 0, 0.1).is_err());
        assert!(CouplingConfig::new(1, 0, 4, 5, 0.1).is_err());
        assert!(CouplingConfig::new(1, 0, 4, 2, 0.0).is_err());
    }

    #[test]
    fn build_x_vec_examples() {
        let x = vec![vec![1.0, -2.0, 3.0, 0.5]];
        let c = cfg(1, 0);
        assert_eq!(c.build_x_vec(&x, 0).unwrap(), x[0]);

        let xs: Vec<Vec<f64>> = (0..16).map(|l| vec![l as f64, 1.0, -1.0, 2.0 * l as f64]).collect();
        let c = cfg(16, 1);
        let v0 = c.build_x_vec(&xs, 0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(v0.len(), 4);
        for (a, b) in v0.iter().zip(&xs[0]) {
            assert!((a - h * b).abs() < 1e-15);
        }
        let v5 = c.build_x_vec(&xs, 5).unwrap();
        let expect: Vec<f64> = xs[5].iter().chain(&xs[4]).copied().collect();
        for (a, b) in v5.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(c.build_x_vec(&xs[..3], 0).is_err());
    }

    #[test]
    fn signal_variance_is_one() {
        let c = CouplingConfig::new(8, 1, 4096, 2048, 0.01).unwrap();
        let count = (c.sections() * c.n()) as f64;
        for (i, rho) in [1.0, 0.5, 0.1].into_iter().enumerate() {
            let mut rng = SeedStream::new(11).rng(Purpose::Signal, i as u64);
            let s = SignalEnsemble::generate(&c, rho, &mut rng).unwrap();
            let var: f64 = s.sections().iter().flatten().map(|x| x * x).sum::<f64>() / count;
            // sd of x² is sqrt(3/rho - 1)
            let tol = 5.0 * (3.0 / rho - 1.0f64).sqrt().max(1.0) / count.sqrt();
            assert!((var - 1.0).abs() < tol, "rho {rho}: variance {var}");
        }
        let mut rng = SeedStream::new(11).rng(Purpose::Signal, 9);
        assert!(SignalEnsemble::generate(&c, 0.0, &mut rng).is_err());
    }
}
