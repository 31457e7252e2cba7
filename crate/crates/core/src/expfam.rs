//! Exponential-family building blocks: Dirichlet and Beta factors, and the
//! Gaussian emission family with its conjugate normal–inverse-gamma (d = 1)
//! or normal–inverse-Wishart (d > 1) prior.
//!
//! Emission natural parameters share one flat layout for both families:
//!
//! ```text
//! [ κ·m (d) | Ψ + κ·m·mᵀ (d×d, row-major) | κ | ν + d + 2 ]
//! ```
//!
//! paired with the parameter statistics
//! `[Σ⁻¹μ, −½Σ⁻¹, −½μᵀΣ⁻¹μ, −½ln|Σ|]`. A single observation contributes the
//! sufficient statistics `[y, y·yᵀ, 1, 1]` in the same coordinates, so a
//! conjugate update is plain vector addition. For d = 1 the inverse-Wishart
//! `(Ψ, ν)` corresponds to the inverse-gamma `(shape, rate) = (ν/2, Ψ/2)`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{digamma, ln_gamma, ln_multigamma, multidigamma_sum};

/// Parameters of a Dirichlet factor. Under the truncated layout the last
/// coordinate carries the "rest" mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    concentration: Vec<f64>,
}

impl DirichletParams {
    pub fn new(concentration: Vec<f64>) -> Result<Self> {
        if concentration.is_empty() {
            return Err(Error::invalid("Dirichlet needs at least one coordinate"));
        }
        if let Some(bad) = concentration.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::Domain(format!(
                "Dirichlet concentration must be positive and finite, found {bad}"
            )));
        }
        Ok(Self { concentration })
    }

    pub fn concentration(&self) -> &[f64] {
        &self.concentration
    }

    pub fn len(&self) -> usize {
        self.concentration.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concentration.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.concentration.iter().sum()
    }

    pub fn mean(&self) -> Vec<f64> {
        let total = self.total();
        self.concentration.iter().map(|a| a / total).collect()
    }

    /// E[ln π_j] = ψ(α_j) − ψ(Σ_k α_k).
    pub fn expected_log(&self) -> Vec<f64> {
        let psi_total = digamma(self.total());
        self.concentration
            .iter()
            .map(|&a| digamma(a) - psi_total)
            .collect()
    }

    /// E_{q=self}[ln Dir(π | prior)] for an arbitrary positive `prior` vector.
    pub fn expected_log_density(&self, prior: &[f64]) -> f64 {
        debug_assert_eq!(prior.len(), self.len());
        let e_log = self.expected_log();
        let total: f64 = prior.iter().sum();
        ln_gamma(total)
            + prior
                .iter()
                .zip(&e_log)
                .map(|(&a, &el)| (a - 1.0) * el - ln_gamma(a))
                .sum::<f64>()
    }

    /// KL(self ‖ prior).
    pub fn kl_divergence(&self, prior: &[f64]) -> f64 {
        debug_assert_eq!(prior.len(), self.len());
        let q = &self.concentration;
        let q_total = self.total();
        let p_total: f64 = prior.iter().sum();
        let psi_total = digamma(q_total);
        let mut kl = ln_gamma(q_total) - ln_gamma(p_total);
        for (&qa, &pa) in q.iter().zip(prior) {
            kl += ln_gamma(pa) - ln_gamma(qa) + (qa - pa) * (digamma(qa) - psi_total);
        }
        kl
    }
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(p: DirichletParams) -> Self {
        p.concentration
    }
}

/// E[ln π] under a Dirichlet factor.
pub fn dirichlet_expected_log(p: &DirichletParams) -> Vec<f64> {
    p.expected_log()
}

/// Beta(a, b) with both shapes strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "Beta shapes must be positive, got ({a}, {b})"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() + ln_gamma(self.a + self.b)
            - ln_gamma(self.a)
            - ln_gamma(self.b)
    }

    /// d/dx ln pdf(x).
    pub fn ln_pdf_grad(&self, x: f64) -> f64 {
        (self.a - 1.0) / x - (self.b - 1.0) / (1.0 - x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmissionFamily {
    /// Univariate Gaussian with a normal–inverse-gamma prior.
    UnivariateNig,
    /// Multivariate Gaussian with a normal–inverse-Wishart prior.
    MultivariateNiw,
}

/// Standard parameters of a normal–inverse-gamma distribution:
/// σ² ~ IG(shape, rate), μ | σ² ~ N(mean, σ²/kappa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub mean: f64,
    pub kappa: f64,
    pub shape: f64,
    pub rate: f64,
}

/// Standard parameters of a normal–inverse-Wishart distribution:
/// Σ ~ IW(scale, dof), μ | Σ ~ N(mean, Σ/kappa).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiwParams {
    pub mean: Vec<f64>,
    pub kappa: f64,
    /// Row-major d×d scale matrix Ψ.
    pub scale: Vec<f64>,
    pub dof: f64,
}

/// Plug-in Gaussian parameters: posterior expectations of the mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMean {
    pub mean: Vec<f64>,
    /// Row-major d×d covariance (a 1×1 variance for the univariate family).
    pub cov: Vec<f64>,
}

/// Length of the flat natural-parameter / sufficient-statistic vector.
pub const fn stat_len(dim: usize) -> usize {
    dim + dim * dim + 2
}

/// Sufficient statistics `[y, y·yᵀ, 1, 1]` of one observation.
pub fn sufficient_stats(y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; stat_len(y.len())];
    write_sufficient_stats(y, &mut out);
    out
}

pub(crate) fn write_sufficient_stats(y: &[f64], out: &mut [f64]) {
    let d = y.len();
    out[..d].copy_from_slice(y);
    for i in 0..d {
        for j in 0..d {
            out[d + i * d + j] = y[i] * y[j];
        }
    }
    out[d + d * d] = 1.0;
    out[d + d * d + 1] = 1.0;
}

/// (1−ρ)·current + ρ·(prior + m·stats), coordinate-wise.
pub fn natural_gradient_blend(
    prior: &[f64],
    current: &[f64],
    stats: &[f64],
    m: f64,
    rho: f64,
) -> Vec<f64> {
    debug_assert!(prior.len() == current.len() && prior.len() == stats.len());
    prior
        .iter()
        .zip(current)
        .zip(stats)
        .map(|((&p, &c), &s)| (1.0 - rho) * c + rho * (p + m * s))
        .collect()
}

/// Natural parameters of a Gaussian-emission posterior (or prior).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmission")]
pub struct EmissionNatural {
    family: EmissionFamily,
    dim: usize,
    eta: Vec<f64>,
}

#[derive(Deserialize)]
struct RawEmission {
    family: EmissionFamily,
    dim: usize,
    eta: Vec<f64>,
}

impl TryFrom<RawEmission> for EmissionNatural {
    type Error = Error;

    fn try_from(raw: RawEmission) -> Result<Self> {
        EmissionNatural::new(raw.family, raw.dim, raw.eta)
    }
}

/// Internal decoded view: m, κ, Ψ, ν.
struct Decoded {
    mean: Vec<f64>,
    kappa: f64,
    scale: Vec<f64>,
    dof: f64,
    chol: Vec<f64>,
}

impl EmissionNatural {
    /// Validates `eta` against the family's natural domain.
    pub fn new(family: EmissionFamily, dim: usize, eta: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("emission dimension must be positive"));
        }
        if family == EmissionFamily::UnivariateNig && dim != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: dim,
                context: "univariate NIG family",
            });
        }
        if eta.len() != stat_len(dim) {
            return Err(Error::DimensionMismatch {
                expected: stat_len(dim),
                got: eta.len(),
                context: "emission natural parameter length",
            });
        }
        let out = Self { family, dim, eta };
        out.decode()?;
        Ok(out)
    }

    pub fn from_nig(p: NigParams) -> Result<Self> {
        let eta = vec![
            p.kappa * p.mean,
            2.0 * p.rate + p.kappa * p.mean * p.mean,
            p.kappa,
            2.0 * p.shape + 3.0,
        ];
        Self::new(EmissionFamily::UnivariateNig, 1, eta)
    }

    pub fn from_niw(p: &NiwParams) -> Result<Self> {
        let d = p.mean.len();
        if p.scale.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: p.scale.len(),
                context: "NIW scale matrix",
            });
        }
        let mut eta = vec![0.0; stat_len(d)];
        for i in 0..d {
            eta[i] = p.kappa * p.mean[i];
            for j in 0..d {
                eta[d + i * d + j] = p.scale[i * d + j] + p.kappa * p.mean[i] * p.mean[j];
            }
        }
        eta[d + d * d] = p.kappa;
        eta[d + d * d + 1] = p.dof + d as f64 + 2.0;
        Self::new(EmissionFamily::MultivariateNiw, d, eta)
    }

    pub fn family(&self) -> EmissionFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn natural(&self) -> &[f64] {
        &self.eta
    }

    fn decode(&self) -> Result<Decoded> {
        let d = self.dim;
        let kappa = self.eta[d + d * d];
        let dof = self.eta[d + d * d + 1] - d as f64 - 2.0;
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("pseudo-count κ must be positive, got {kappa}")));
        }
        if !(dof > d as f64 - 1.0) || !dof.is_finite() {
            return Err(Error::Domain(format!(
                "degrees of freedom must exceed {}, got {dof}",
                d as f64 - 1.0
            )));
        }
        let mean: Vec<f64> = self.eta[..d].iter().map(|v| v / kappa).collect();
        let mut scale = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                // symmetrize so round-off in accumulated statistics cannot skew Ψ
                let s = 0.5 * (self.eta[d + i * d + j] + self.eta[d + j * d + i]);
                scale[i * d + j] = s - kappa * mean[i] * mean[j];
            }
        }
        let chol = linalg::cholesky(&scale, d).ok_or_else(|| {
            Error::Domain(format!("scale matrix is not positive definite: {scale:?}"))
        })?;
        Ok(Decoded {
            mean,
            kappa,
            scale,
            dof,
            chol,
        })
    }

    fn decoded(&self) -> Decoded {
        self.decode()
            .expect("EmissionNatural invariant: parameters validated at construction")
    }

    pub fn to_nig(&self) -> Option<NigParams> {
        if self.dim != 1 {
            return None;
        }
        let dec = self.decoded();
        Some(NigParams {
            mean: dec.mean[0],
            kappa: dec.kappa,
            shape: 0.5 * dec.dof,
            rate: 0.5 * dec.scale[0],
        })
    }

    pub fn to_niw(&self) -> NiwParams {
        let dec = self.decoded();
        NiwParams {
            mean: dec.mean,
            kappa: dec.kappa,
            scale: dec.scale,
            dof: dec.dof,
        }
    }

    /// E_q[t_φ(φ)] in the natural-parameter layout:
    /// `[E Σ⁻¹μ, −½ E Σ⁻¹, −½ E μᵀΣ⁻¹μ, −½ E ln|Σ|]`.
    pub fn expected_stats(&self) -> Vec<f64> {
        let d = self.dim;
        let dec = self.decoded();
        let scale_inv = linalg::chol_inverse(&dec.chol, d);
        let mut out = vec![0.0; stat_len(d)];
        let mut quad = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                let prec = dec.dof * scale_inv[i * d + j];
                out[d + i * d + j] = -0.5 * prec;
                row += prec * dec.mean[j];
            }
            out[i] = row;
            quad += row * dec.mean[i];
        }
        out[d + d * d] = -0.5 * (quad + d as f64 / dec.kappa);
        let e_logdet = linalg::chol_logdet(&dec.chol, d) - multidigamma_sum(dec.dof, d)
            - d as f64 * LN_2;
        out[d + d * d + 1] = -0.5 * e_logdet;
        out
    }

    /// Log normalizer A(η) of the prior/posterior density over (μ, Σ).
    pub fn log_partition(&self) -> f64 {
        let d = self.dim;
        let df = d as f64;
        let dec = self.decoded();
        let logdet = linalg::chol_logdet(&dec.chol, d);
        0.5 * df * (2.0 * PI).ln() - 0.5 * df * dec.kappa.ln() - 0.5 * dec.dof * logdet
            + 0.5 * dec.dof * df * LN_2
            + ln_multigamma(0.5 * dec.dof, d)
    }

    /// KL(self ‖ prior) between two members of the same family.
    pub fn kl_divergence(&self, prior: &EmissionNatural) -> f64 {
        debug_assert_eq!(self.eta.len(), prior.eta.len());
        let e_t = self.expected_stats();
        let cross: f64 = self
            .eta
            .iter()
            .zip(&prior.eta)
            .zip(&e_t)
            .map(|((q, p), t)| (q - p) * t)
            .sum();
        cross - self.log_partition() + prior.log_partition()
    }

    /// E_q[ln N(y | μ, Σ)].
    pub fn expected_loglik(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
                context: "observation vs emission dimension",
            });
        }
        Ok(ExpectedLoglik::new(self).eval(y))
    }

    /// Posterior expectations of the mean and covariance.
    ///
    /// When the covariance expectation does not exist (ν ≤ d + 1) the mode
    /// Ψ/(ν + d + 1) is returned instead.
    pub fn posterior_mean(&self) -> PosteriorMean {
        let d = self.dim;
        let dec = self.decoded();
        let denom = if dec.dof > d as f64 + 1.0 {
            dec.dof - d as f64 - 1.0
        } else {
            dec.dof + d as f64 + 1.0
        };
        PosteriorMean {
            mean: dec.mean,
            cov: dec.scale.iter().map(|s| s / denom).collect(),
        }
    }

    /// (1−ρ)·current + ρ·(prior + m·stats), validated.
    pub fn blend(
        prior: &EmissionNatural,
        current: &EmissionNatural,
        stats: &[f64],
        m: f64,
        rho: f64,
    ) -> Result<EmissionNatural> {
        if prior.eta.len() != current.eta.len() || stats.len() != prior.eta.len() {
            return Err(Error::DimensionMismatch {
                expected: prior.eta.len(),
                got: stats.len(),
                context: "natural-gradient blend",
            });
        }
        let eta = natural_gradient_blend(&prior.eta, &current.eta, stats, m, rho);
        EmissionNatural::new(prior.family, prior.dim, eta)
            .map_err(|e| Error::Domain(format!("blend with m={m}, ρ={rho}: {e}")))
    }
}

/// E_q[ln N(y|φ)] for the given posterior.
pub fn emission_expected_loglik(q: &EmissionNatural, y: &[f64]) -> Result<f64> {
    q.expected_loglik(y)
}

/// Plug-in posterior mean and covariance.
pub fn emission_posterior_mean(q: &EmissionNatural) -> PosteriorMean {
    q.posterior_mean()
}

/// Precomputed evaluator for E_q[ln N(y|φ)] = ⟨E t_φ, t(y)⟩ − (d/2) ln 2π.
#[derive(Debug, Clone)]
pub(crate) struct ExpectedLoglik {
    dim: usize,
    e_stats: Vec<f64>,
    offset: f64,
}

impl ExpectedLoglik {
    pub(crate) fn new(q: &EmissionNatural) -> Self {
        let d = q.dim;
        let e_stats = q.expected_stats();
        // the two trailing sufficient statistics are constant 1
        let offset = e_stats[d + d * d] + e_stats[d + d * d + 1] - 0.5 * d as f64 * (2.0 * PI).ln();
        Self {
            dim: d,
            e_stats,
            offset,
        }
    }

    #[inline]
    pub(crate) fn eval(&self, y: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = self.offset;
        for i in 0..d {
            acc += self.e_stats[i] * y[i];
            let row = &self.e_stats[d + i * d..d + (i + 1) * d];
            for j in 0..d {
                acc += row[j] * y[i] * y[j];
            }
        }
        acc
    }
}
