//! Row-section sensing operators `A[ℓ] = Σ[ℓ] V[ℓ]ᵀ`.
//!
//! The structured operator never forms a matrix. `V = D H P` with `H` the
//! orthonormal Walsh-Hadamard matrix, `P` a column permutation and `D` an
//! optional sign diagonal, so `V[ℓ]ᵀ v` is an FWHT followed by a scatter and
//! `Σ[ℓ]` keeps `M` randomly chosen Hadamard rows scaled by the singular
//! values. The dense mode
//! holds an explicit matrix together with its SVD and exists for oracle tests
//! and for Haar-distributed comparisons at small sizes.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// In-place orthonormal Walsh-Hadamard transform; the length must be a power of two.
pub fn fwht_in_place(data: &mut [f64]) -> Result<()> {
    let n = data.len();
    if !n.is_power_of_two() {
        return Err(Error::domain(format!("FWHT length {n} is not a power of two")));
    }
    let mut h = 1;
    while h < n {
        for chunk in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

/// Orthonormal Walsh-Hadamard transform of `v`.
pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Non-increasing singular values of one `M × N_c` row-section matrix.
///
/// Generated profiles satisfy `Σ s_i² = N`, i.e. the eigenvalues of
/// `|W[ℓ]|·AᵀA` have unit mean over the `N_c = |W[ℓ]|·N` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularProfile {
    values: Vec<f64>,
    kappa: f64,
    n_c: usize,
}

impl SingularProfile {
    /// Rescale an arbitrary positive non-increasing shape to `Σ s_i² = N`,
    /// where `N = n_c / window_len`.
    pub fn normalized(shape: Vec<f64>, n_c: usize, window_len: usize) -> Result<Self> {
        if shape.is_empty() || shape.len() > n_c {
            return Err(Error::domain(format!(
                "{} singular values for {n_c} columns",
                shape.len()
            )));
        }
        if shape.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::domain("singular values must be positive and finite"));
        }
        if shape.windows(2).any(|p| p[1] > p[0]) {
            return Err(Error::domain("singular values must be non-increasing"));
        }
        if window_len == 0 || !n_c.is_multiple_of(window_len) {
            return Err(Error::domain("column count is not a multiple of the window size"));
        }
        let n = (n_c / window_len) as f64;
        let energy: f64 = shape.iter().map(|s| s * s).sum();
        let c = (n / energy).sqrt();
        let values: Vec<f64> = shape.into_iter().map(|s| c * s).collect();
        let kappa = values[0] / values[values.len() - 1];
        Ok(Self { values, kappa, n_c })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    /// `1 - N_c^{-1} Σ s_i²/(snr_ratio + s_i²)`: normalized trace of `I - WᵀA`
    /// for the LMMSE filter with noise-to-signal ratio `snr_ratio = σ²/v`.
    pub fn eta(&self, snr_ratio: f64) -> Result<f64> {
        check_ratio(snr_ratio)?;
        let gain: f64 = self
            .values
            .iter()
            .map(|s| {
                let s2 = s * s;
                s2 / (snr_ratio + s2)
            })
            .sum();
        Ok(1.0 - gain / self.n_c as f64)
    }
}

/// Geometric singular values with `s_0 / s_{M-1} = kappa`, scaled to `Σ s_i² = N`.
pub fn condition_number_profile(m: usize, n: usize, window_len: usize, kappa: f64) -> Result<SingularProfile> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("condition number must be >= 1, got {kappa}")));
    }
    if m == 0 || n == 0 {
        return Err(Error::domain("M and N must be positive"));
    }
    if m == 1 && kappa > 1.0 {
        return Err(Error::domain("a single singular value cannot have kappa > 1"));
    }
    let shape = if m == 1 {
        vec![1.0]
    } else {
        let step = kappa.ln() / (m - 1) as f64;
        (0..m).map(|i| (-step * i as f64).exp()).collect()
    };
    let mut profile = SingularProfile::normalized(shape, window_len * n, window_len)?;
    // pin the requested ratio rather than the rounded one
    profile.kappa = kappa;
    Ok(profile)
}

fn check_ratio(snr_ratio: f64) -> Result<()> {
    if snr_ratio > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "noise-to-signal ratio must be positive, got {snr_ratio}"
        )))
    }
}

#[derive(Debug, Clone)]
enum Factor {
    /// `Vᵀ v = Pᵀ H D v`: optional random signs, FWHT, then permutation.
    Hadamard {
        perm: Vec<usize>,
        signs: Option<Vec<f64>>,
    },
    /// Explicit `A = U Σ Vᵀ`.
    Dense {
        a: DMatrix<f64>,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
    },
}

/// One row-section operator `A[ℓ]` of size `M × N_c`.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    singular: Vec<f64>,
    n_c: usize,
    factor: Factor,
}

impl SensingOperator {
    /// `A = Σ Vᵀ` with `V` the Hadamard matrix under a uniformly random column permutation.
    pub fn structured<R: Rng + ?Sized>(profile: &SingularProfile, random_signs: bool, rng: &mut R) -> Result<Self> {
        let n_c = profile.n_c();
        if !n_c.is_power_of_two() {
            return Err(Error::domain(format!(
                "structured operator needs a power-of-two column count, got {n_c}"
            )));
        }
        let mut perm: Vec<usize> = (0..n_c).collect();
        perm.shuffle(rng);
        let signs = random_signs.then(|| {
            (0..n_c)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        });
        Ok(Self {
            singular: profile.values().to_vec(),
            n_c,
            factor: Factor::Hadamard { perm, signs },
        })
    }

    /// `A = Σ Vᵀ` with `V` Haar-distributed (QR of a Gaussian matrix with sign fix).
    pub fn haar_dense<R: Rng + ?Sized>(profile: &SingularProfile, rng: &mut R) -> Result<Self> {
        let n_c = profile.n_c();
        let g = DMatrix::<f64>::from_fn(n_c, n_c, |_, _| StandardNormal.sample(rng));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..n_c {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        let m = profile.m();
        let u = DMatrix::identity(m, m);
        Ok(Self::from_svd(profile.values().to_vec(), u, q))
    }

    /// Dense operator from an explicit `M × N_c` matrix with `M <= N_c`.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        let (m, n_c) = a.shape();
        if m == 0 || m > n_c {
            return Err(Error::domain(format!("matrix shape {m}x{n_c} needs 0 < M <= N_c")));
        }
        // SVD of the tall Aᵀ = V_thin Σ Uᵀ yields U and the leading columns of V
        let svd = a.transpose().svd(true, true);
        let v_thin = svd.u.expect("requested U");
        let u = svd.v_t.expect("requested Vᵀ").transpose();
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let singular: Vec<f64> = order.iter().map(|&i| s[i]).collect();
        let u = DMatrix::from_fn(m, m, |r, c| u[(r, order[c])]);
        let v_lead = DMatrix::from_fn(n_c, m, |r, c| v_thin[(r, order[c])]);
        let v = complete_basis(&v_lead);
        if singular.iter().any(|s| *s <= 0.0) {
            return Err(Error::domain("matrix is rank deficient"));
        }
        Ok(Self {
            singular,
            n_c,
            factor: Factor::Dense { a, u, v },
        })
    }

    fn from_svd(singular: Vec<f64>, u: DMatrix<f64>, v: DMatrix<f64>) -> Self {
        let m = singular.len();
        let n_c = v.nrows();
        let a = DMatrix::from_fn(m, n_c, |i, j| {
            (0..m).map(|k| u[(i, k)] * singular[k] * v[(j, k)]).sum()
        });
        Self {
            singular,
            n_c,
            factor: Factor::Dense { a, u, v },
        }
    }

    pub fn m(&self) -> usize {
        self.singular.len()
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    pub fn is_structured(&self) -> bool {
        matches!(self.factor, Factor::Hadamard { .. })
    }

    /// `Vᵀ v` (length `N_c`).
    pub fn v_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len(), self.n_c, "input")?;
        match &self.factor {
            Factor::Hadamard { perm, signs } => {
                let mut t = v.to_vec();
                if let Some(signs) = signs {
                    t.iter_mut().zip(signs).for_each(|(x, s)| *x *= s);
                }
                fwht_in_place(&mut t)?;
                let mut out = vec![0.0; self.n_c];
                for (&p, x) in perm.iter().zip(t) {
                    out[p] = x;
                }
                Ok(out)
            }
            Factor::Dense { v: vm, .. } => Ok((vm.transpose() * DVector::from_column_slice(v)).as_slice().to_vec()),
        }
    }

    /// `V c` (length `N_c`).
    pub fn v_apply(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(c.len(), self.n_c, "coefficients")?;
        match &self.factor {
            Factor::Hadamard { perm, signs } => {
                let mut t: Vec<f64> = perm.iter().map(|&p| c[p]).collect();
                fwht_in_place(&mut t)?;
                if let Some(signs) = signs {
                    t.iter_mut().zip(signs).for_each(|(x, s)| *x *= s);
                }
                Ok(t)
            }
            Factor::Dense { v: vm, .. } => Ok((vm * DVector::from_column_slice(c)).as_slice().to_vec()),
        }
    }

    fn u_apply(&self, r: Vec<f64>) -> Vec<f64> {
        match &self.factor {
            Factor::Hadamard { .. } => r,
            Factor::Dense { u, .. } => (u * DVector::from_vec(r)).as_slice().to_vec(),
        }
    }

    fn u_transpose(&self, r: &[f64]) -> Vec<f64> {
        match &self.factor {
            Factor::Hadamard { .. } => r.to_vec(),
            Factor::Dense { u, .. } => (u.transpose() * DVector::from_column_slice(r)).as_slice().to_vec(),
        }
    }

    /// `A v`.
    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len(), self.n_c, "input")?;
        if let Factor::Dense { a, .. } = &self.factor {
            return Ok((a * DVector::from_column_slice(v)).as_slice().to_vec());
        }
        let t = self.v_transpose(v)?;
        let r = self.singular.iter().zip(&t).map(|(s, x)| s * x).collect();
        Ok(self.u_apply(r))
    }

    /// `Aᵀ r`.
    pub fn adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check_len(r.len(), self.m(), "residual")?;
        if let Factor::Dense { a, .. } = &self.factor {
            return Ok((a.transpose() * DVector::from_column_slice(r)).as_slice().to_vec());
        }
        self.spectral_back(r, |s| s)
    }

    /// `W r = Aᵀ (snr_ratio·I + A Aᵀ)^{-1} r`, evaluated through the SVD.
    pub fn lmmse_apply(&self, snr_ratio: f64, r: &[f64]) -> Result<Vec<f64>> {
        check_ratio(snr_ratio)?;
        self.check_len(r.len(), self.m(), "residual")?;
        self.spectral_back(r, |s| s / (snr_ratio + s * s))
    }

    /// `N_c^{-1} Tr(I - WᵀA)` for the LMMSE filter at `snr_ratio`.
    pub fn eta_a(&self, snr_ratio: f64) -> Result<f64> {
        check_ratio(snr_ratio)?;
        let gain: f64 = self
            .singular
            .iter()
            .map(|s| {
                let s2 = s * s;
                s2 / (snr_ratio + s2)
            })
            .sum();
        Ok(1.0 - gain / self.n_c as f64)
    }

    /// `V diag(g(s_i)) Uᵀ r`, zero-padded beyond `M`.
    fn spectral_back(&self, r: &[f64], gain: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let ur = self.u_transpose(r);
        let mut c = vec![0.0; self.n_c];
        for ((ci, s), x) in c.iter_mut().zip(&self.singular).zip(&ur) {
            *ci = gain(*s) * x;
        }
        self.v_apply(&c)
    }

    fn check_len(&self, got: usize, want: usize, what: &str) -> Result<()> {
        if got == want {
            Ok(())
        } else {
            Err(Error::domain(format!("{what} has length {got}, expected {want}")))
        }
    }
}

/// Extend orthonormal columns to a full orthonormal basis by Gram-Schmidt
/// against the standard basis.
fn complete_basis(lead: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = lead.shape();
    let mut cols: Vec<DVector<f64>> = (0..k).map(|j| lead.column(j).into_owned()).collect();
    for e in 0..n {
        if cols.len() == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    DMatrix::from_columns(&cols)
}
