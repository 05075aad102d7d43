//! Bayes-optimal scalar denoiser for the Bernoulli-Gaussian prior.
//!
//! The prior puts mass `1 - rho` at zero and spreads `rho` over `N(0, 1/rho)`,
//! so it has zero mean and unit variance. Given `u = x + √v z`, the posterior
//! is the same two-component mixture with updated weights.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Nodes per Gauss-Legendre panel.
const PANEL_NODES: usize = 20;
/// Standardized integration half-range; the Gaussian tail beyond is below 1e-40.
const Z_MAX: f64 = 13.5;
/// Uniform panels on `[0, Z_MAX]` before transition refinement.
const BASE_PANELS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliGaussian {
    rho: f64,
}

/// Posterior mean and variance at one pseudo-observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub var: f64,
}

impl BernoulliGaussian {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho <= 1.0 {
            Ok(Self { rho })
        } else {
            Err(Error::domain(format!("sparsity rate must lie in (0, 1], got {rho}")))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Variance of the nonzero component, `1/rho`.
    pub fn active_var(&self) -> f64 {
        1.0 / self.rho
    }

    /// Precomputes the `u`-independent parts of the posterior for noise variance `v`.
    pub fn channel(&self, v: f64) -> Result<Channel> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("noise variance must be positive, got {v}")));
        }
        let s = self.active_var();
        let gain = s / (s + v);
        let prior_logit = if self.rho < 1.0 {
            (self.rho / (1.0 - self.rho)).ln() + 0.5 * (v / (s + v)).ln()
        } else {
            f64::INFINITY
        };
        Ok(Channel {
            v,
            gain,
            prior_logit,
            // 1/v - 1/(s+v), written to avoid cancellation
            curvature: 0.5 * s / (v * (s + v)),
        })
    }

    pub fn posterior_mean(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.channel(v)?.posterior(u).mean)
    }

    pub fn posterior_var(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.channel(v)?.posterior(u).var)
    }

    /// `E[(x - E[x | x + √v z])²]`.
    ///
    /// Written as `E_u[Var(u; v)]` where `u` is a two-component Gaussian
    /// mixture, each component is integrated in its standardized variable
    /// with composite Gauss-Legendre panels. Panels are refined around the
    /// point where the posterior switches between the spike and the slab,
    /// whose width shrinks like `√v`.
    pub fn mmse(&self, v: f64) -> Result<f64> {
        let ch = self.channel(v)?;
        let active = self.rho * ch.expect_var((self.active_var() + v).sqrt());
        let idle = if self.rho < 1.0 {
            (1.0 - self.rho) * ch.expect_var(v.sqrt())
        } else {
            0.0
        };
        Ok((active + idle).clamp(0.0, 1.0f64.min(v)))
    }

    /// Element-wise posterior mean and the average posterior variance.
    pub fn denoise_vector(&self, u: &[f64], v: f64) -> Result<(Vec<f64>, f64)> {
        let ch = self.channel(v)?;
        let mut var_sum = 0.0;
        let mean = u
            .iter()
            .map(|&ui| {
                let p = ch.posterior(ui);
                var_sum += p.var;
                p.mean
            })
            .collect();
        let avg = if u.is_empty() { 0.0 } else { var_sum / u.len() as f64 };
        Ok((mean, avg))
    }
}

/// Posterior evaluator for a fixed noise variance.
#[derive(Debug, Clone, Copy)]
pub struct Channel {
    v: f64,
    gain: f64,
    prior_logit: f64,
    curvature: f64,
}

impl Channel {
    #[inline]
    pub fn posterior(&self, u: f64) -> Posterior {
        // responsibility of the nonzero component as a sigmoid of the log-likelihood ratio
        let logit = self.prior_logit + self.curvature * u * u;
        let pi = if logit >= 0.0 {
            1.0 / (1.0 + (-logit).exp())
        } else {
            let e = logit.exp();
            e / (1.0 + e)
        };
        let gu = self.gain * u;
        Posterior {
            mean: pi * gu,
            var: pi * self.gain * self.v + pi * (1.0 - pi) * gu * gu,
        }
    }

    /// `|u|` where the spike and slab responsibilities are equal, with the
    /// width of the switch in `u`. `None` when the slab always dominates.
    fn transition(&self) -> Option<(f64, f64)> {
        if self.prior_logit >= 0.0 || !self.prior_logit.is_finite() {
            return None;
        }
        let u = (-self.prior_logit / self.curvature).sqrt();
        // logit changes by one over this distance
        let width = 1.0 / (2.0 * self.curvature * u);
        Some((u, width))
    }

    /// `E[Var(sd·z)]` for `z ~ N(0, 1)`, using that the integrand is even.
    fn expect_var(&self, sd: f64) -> f64 {
        let mut breaks: Vec<f64> = (0..=BASE_PANELS)
            .map(|i| Z_MAX * i as f64 / BASE_PANELS as f64)
            .collect();
        if let Some((u, width)) = self.transition() {
            let (t, w) = (u / sd, width / sd);
            for k in [-40.0, -12.0, -4.0, -1.5, 0.0, 1.5, 4.0, 12.0, 40.0] {
                let b = t + k * w;
                if b > 0.0 && b < Z_MAX {
                    breaks.push(b);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let rule = legendre_rule();
        let norm = (2.0 / std::f64::consts::PI).sqrt();
        breaks
            .windows(2)
            .map(|p| rule.integrate(p[0], p[1], |z| (-0.5 * z * z).exp() * self.posterior(sd * z).var))
            .sum::<f64>()
            * norm
    }
}

fn legendre_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(PANEL_NODES).unwrap()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(BernoulliGaussian::new(0.0).is_err());
        assert!(BernoulliGaussian::new(1.5).is_err());
        let p = BernoulliGaussian::new(0.1).unwrap();
        assert!(p.posterior_mean(1.0, 0.0).is_err());
        assert!(p.posterior_var(1.0, -1.0).is_err());
        assert!(p.mmse(0.0).is_err());
        assert!(p.denoise_vector(&[1.0], 0.0).is_err());
    }

    #[test]
    fn gaussian_prior_is_wiener() {
        let p = BernoulliGaussian::new(1.0).unwrap();
        for v in [1e-3, 0.1, 1.0, 7.5] {
            for u in [-3.0, 0.0, 0.4, 12.0] {
                assert!((p.posterior_mean(u, v).unwrap() - u / (1.0 + v)).abs() < 1e-14);
                assert!((p.posterior_var(u, v).unwrap() - v / (1.0 + v)).abs() < 1e-14);
            }
            assert!((p.mmse(v).unwrap() - v / (1.0 + v)).abs() < 1e-13);
        }
    }

    #[test]
    fn symmetry_and_zero() {
        let p = BernoulliGaussian::new(0.1).unwrap();
        for v in [1e-4, 0.05, 2.0] {
            assert_eq!(p.posterior_mean(0.0, v).unwrap(), 0.0);
            for u in [0.01, 0.3, 1.7, 40.0] {
                assert_eq!(p.posterior_mean(-u, v).unwrap(), -p.posterior_mean(u, v).unwrap());
                assert_eq!(p.posterior_var(-u, v).unwrap(), p.posterior_var(u, v).unwrap());
                assert!(p.posterior_var(u, v).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn stable_at_extreme_snr() {
        let p = BernoulliGaussian::new(0.05).unwrap();
        for (u, v) in [(1e3, 1e-6), (1e-3, 1e-9), (50.0, 1e-12), (1e6, 1e6)] {
            let post = p.channel(v).unwrap().posterior(u);
            assert!(post.mean.is_finite() && post.var.is_finite(), "{u} {v}");
        }
    }

    #[test]
    fn mmse_limits_and_monotone() {
        let p = BernoulliGaussian::new(0.1).unwrap();
        assert!(p.mmse(1e-8).unwrap() < 1e-8);
        assert!(p.mmse(1e6).unwrap() > 0.999);
        let mut last = 0.0;
        for k in -40..=20 {
            let v = 10f64.powf(k as f64 / 10.0);
            let m = p.mmse(v).unwrap();
            assert!(m >= last - 1e-15, "mmse not monotone at v={v}");
            assert!(m <= v.min(1.0));
            last = m;
        }
    }

    #[test]
    fn denoise_vector_basics() {
        let p = BernoulliGaussian::new(0.1).unwrap();
        let (m, _) = p.denoise_vector(&[0.0; 5], 0.3).unwrap();
        assert!(m.iter().all(|x| *x == 0.0));
        let (m, var) = p.denoise_vector(&[0.8], 0.3).unwrap();
        assert_eq!(m[0], p.posterior_mean(0.8, 0.3).unwrap());
        assert_eq!(var, p.posterior_var(0.8, 0.3).unwrap());
    }

    #[test]
    fn tweedie_derivative() {
        let p = BernoulliGaussian::new(0.1).unwrap();
        for v in [0.01, 0.2, 1.5] {
            for u in [-2.0, -0.3, 0.0, 0.1, 0.5, 3.0] {
                let h = 1e-5;
                let d = (p.posterior_mean(u + h, v).unwrap() - p.posterior_mean(u - h, v).unwrap()) / (2.0 * h);
                let want = p.posterior_var(u, v).unwrap() / v;
                assert!((d - want).abs() < 1e-6 * want.max(1.0), "u={u} v={v}: {d} vs {want}");
            }
        }
    }
}
