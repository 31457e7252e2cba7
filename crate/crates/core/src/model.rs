//! Global state and hyperparameters of the segmented iHMM, the segmentation
//! head for each model variant, and construction of the tilted quantities
//! consumed by message passing.
//!
//! Every transition row is a truncated Dirichlet of length K + 1 whose final
//! coordinate holds the "rest" mass. When building tilted transitions the
//! rest column is dropped and the remaining `exp E[ln π]` values are used
//! unnormalized; the forward pass renormalizes through its log partition.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{DataSummary, Sequence};
use crate::error::{Error, Result};
use crate::expfam::{
    self, BetaParams, DirichletParams, EmissionNatural, ExpectedLoglik, NigParams, NiwParams,
};
use crate::special::{log_logistic_pair, logistic};

/// Lower/upper clamp for the feature-independent segmentation probability.
pub const OMEGA_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// s_t ~ Bern(ω_{z_t}) with a Beta(a₀, b₀) prior on ω.
    FeatureIndependent,
    /// s_t ~ Bern(σ(θ·f(y_t) + ω_{z_t})).
    FeatureBased,
    /// Plain (optionally sticky) iHMM: s_t ≡ 0.
    IhmmBaseline,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "feature-independent" => Some(Variant::FeatureIndependent),
            "feature-based" => Some(Variant::FeatureBased),
            "ihmm-baseline" | "ihmm" => Some(Variant::IhmmBaseline),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::FeatureIndependent => "feature-independent",
            Variant::FeatureBased => "feature-based",
            Variant::IhmmBaseline => "ihmm-baseline",
        }
    }
}

/// Observation feature function f(y) for the feature-based segmentation head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FeatureMap {
    /// f(y) = y.
    Raw,
    /// f(y) = (1, y).
    BiasRaw,
    /// One-hot encoding of the category index stored in y[0].
    OneHot { categories: usize },
}

impl FeatureMap {
    pub fn len(&self, dim: usize) -> usize {
        match self {
            FeatureMap::Raw => dim,
            FeatureMap::BiasRaw => dim + 1,
            FeatureMap::OneHot { categories } => *categories,
        }
    }

    pub fn write(&self, y: &[f64], out: &mut [f64]) {
        match self {
            FeatureMap::Raw => out.copy_from_slice(y),
            FeatureMap::BiasRaw => {
                out[0] = 1.0;
                out[1..].copy_from_slice(y);
            }
            FeatureMap::OneHot { categories } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let c = y[0].round();
                if c >= 0.0 && (c as usize) < *categories {
                    out[c as usize] = 1.0;
                }
            }
        }
    }

    pub fn features(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len(y.len())];
        self.write(y, &mut out);
        out
    }
}

/// Conjugate prior over the Gaussian emission parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum EmissionPrior {
    Nig(NigParams),
    Niw(NiwParams),
}

impl EmissionPrior {
    pub fn dim(&self) -> usize {
        match self {
            EmissionPrior::Nig(_) => 1,
            EmissionPrior::Niw(p) => p.mean.len(),
        }
    }

    pub fn natural(&self) -> Result<EmissionNatural> {
        match self {
            EmissionPrior::Nig(p) => EmissionNatural::from_nig(*p),
            EmissionPrior::Niw(p) => EmissionNatural::from_niw(p),
        }
    }

    /// NIW prior centred on the empirical mean, with Ψ chosen so that the
    /// prior's expected covariance equals the empirical covariance.
    pub fn niw_from_data(summary: &DataSummary, kappa: f64, dof: f64) -> Self {
        let d = summary.dim as f64;
        let factor = (dof - d - 1.0).max(1.0);
        EmissionPrior::Niw(NiwParams {
            mean: summary.mean.clone(),
            kappa,
            scale: summary.cov.iter().map(|c| c * factor).collect(),
            dof,
        })
    }
}

/// Model hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// GEM concentration γ.
    pub gamma: f64,
    /// DP concentration α.
    pub alpha: f64,
    /// Truncation level K.
    pub k: usize,
    /// Beta prior on ω (feature-independent variant).
    pub a0: f64,
    pub b0: f64,
    /// Sticky self-transition bias κ.
    pub kappa: f64,
    pub emission_prior: EmissionPrior,
    pub variant: Variant,
    pub features: FeatureMap,
    /// Standard deviation of the initial pseudo-mean jitter, as a fraction
    /// of the empirical standard deviation.
    #[serde(default = "default_init_spread")]
    pub init_spread: f64,
}

fn default_init_spread() -> f64 {
    1.0
}

impl Hyperparams {
    /// Univariate feature-independent model with an NIG emission prior.
    pub fn univariate(k: usize, alpha: f64, gamma: f64, prior: NigParams) -> Self {
        Self {
            gamma,
            alpha,
            k,
            a0: 1.0,
            b0: 1.0,
            kappa: 0.0,
            emission_prior: EmissionPrior::Nig(prior),
            variant: Variant::FeatureIndependent,
            features: FeatureMap::Raw,
            init_spread: default_init_spread(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("alpha", self.alpha)?;
        positive("a0", self.a0)?;
        positive("b0", self.b0)?;
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if self.k == 0 {
            return Err(Error::invalid("truncation level K must be at least 1"));
        }
        if !(self.init_spread >= 0.0) {
            return Err(Error::invalid("init_spread must be >= 0"));
        }
        self.emission_prior.natural()?;
        Ok(())
    }

    pub fn omega_prior(&self) -> BetaParams {
        BetaParams::new(self.a0, self.b0).expect("validated hyperparameters")
    }

    /// Prior concentration αβ (+κ on entry `sticky`) for one truncated row.
    pub fn row_prior(&self, beta: &[f64], sticky: Option<usize>) -> Vec<f64> {
        let mut row: Vec<f64> = beta.iter().map(|b| self.alpha * b).collect();
        if let Some(i) = sticky {
            row[i] += self.kappa;
        }
        row
    }

    pub fn theta_len(&self, dim: usize) -> usize {
        match self.variant {
            Variant::FeatureBased => self.features.len(dim),
            _ => 0,
        }
    }
}

/// All variational global factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    /// Point estimate β* (K entries plus the rest mass).
    pub beta: Vec<f64>,
    /// q(π_i) = Dir(α̃_i), one per state, each of length K + 1.
    pub trans: Vec<DirichletParams>,
    /// q(π₀) = Dir(α̃₀).
    pub init: DirichletParams,
    /// q(φ_i), one per state.
    pub emissions: Vec<EmissionNatural>,
    /// ω*: probabilities in (0,1) for the feature-independent variant,
    /// unconstrained logits for the feature-based variant.
    pub omega: Vec<f64>,
    /// θ* (feature-based variant only).
    pub theta: Vec<f64>,
}

impl GlobalState {
    pub fn k(&self) -> usize {
        self.trans.len()
    }

    pub fn dim(&self) -> usize {
        self.emissions[0].dim()
    }

    /// Checks shape invariants against the hyperparameters.
    pub fn validate(&self, h: &Hyperparams) -> Result<()> {
        let k = h.k;
        let shape_err = |what: &str| Error::invalid(format!("global state shape mismatch: {what}"));
        if self.beta.len() != k + 1 {
            return Err(shape_err("beta length"));
        }
        let total: f64 = self.beta.iter().sum();
        if self.beta.iter().any(|b| !(*b >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("beta must lie on the simplex"));
        }
        if self.trans.len() != k || self.trans.iter().any(|r| r.len() != k + 1) {
            return Err(shape_err("transition rows"));
        }
        if self.init.len() != k + 1 {
            return Err(shape_err("initial distribution"));
        }
        if self.emissions.len() != k || self.omega.len() != k {
            return Err(shape_err("per-state parameters"));
        }
        let dim = self.dim();
        if self.emissions.iter().any(|e| e.dim() != dim) {
            return Err(shape_err("emission dimensions"));
        }
        if self.theta.len() != h.theta_len(dim) {
            return Err(shape_err("feature weights"));
        }
        Ok(())
    }
}

/// Stick-breaking mean of GEM(γ) truncated to K sticks plus the rest mass.
pub fn gem_mean(gamma: f64, k: usize) -> Vec<f64> {
    let v = 1.0 / (1.0 + gamma);
    let mut remaining = 1.0;
    let mut beta = Vec::with_capacity(k + 1);
    for _ in 0..k {
        beta.push(remaining * v);
        remaining *= 1.0 - v;
    }
    beta.push(remaining);
    beta
}

/// Initial global state.
///
/// Emission posteriors start at the prior with each pseudo-mean jittered by
/// `init_spread × empirical std`; this is the only source of asymmetry
/// between states.
pub fn init_global(h: &Hyperparams, summary: &DataSummary, seed: u64) -> Result<GlobalState> {
    h.validate()?;
    let dim = h.emission_prior.dim();
    if dim != summary.dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: summary.dim,
            context: "emission prior vs data dimension",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let k = h.k;
    let beta = gem_mean(h.gamma, k);
    let trans = (0..k)
        .map(|i| DirichletParams::new(h.row_prior(&beta, Some(i))))
        .collect::<Result<Vec<_>>>()?;
    let init = DirichletParams::new(h.row_prior(&beta, None))?;

    let spread: Vec<f64> = summary.std().iter().map(|s| h.init_spread * s).collect();
    let mut emissions = Vec::with_capacity(k);
    for _ in 0..k {
        let q = match &h.emission_prior {
            EmissionPrior::Nig(p) => {
                let mut p = *p;
                p.mean += spread[0] * std_normal.sample(&mut rng);
                EmissionNatural::from_nig(p)?
            }
            EmissionPrior::Niw(p) => {
                let mut p = p.clone();
                for (m, s) in p.mean.iter_mut().zip(&spread) {
                    *m += s * std_normal.sample(&mut rng);
                }
                EmissionNatural::from_niw(&p)?
            }
        };
        emissions.push(q);
    }

    let (omega, theta) = match h.variant {
        Variant::FeatureIndependent => (vec![h.a0 / (h.a0 + h.b0); k], Vec::new()),
        Variant::FeatureBased => {
            let omega = (0..k).map(|_| std_normal.sample(&mut rng)).collect();
            let theta = (0..h.features.len(dim))
                .map(|_| std_normal.sample(&mut rng))
                .collect();
            (omega, theta)
        }
        Variant::IhmmBaseline => (vec![0.0; k], Vec::new()),
    };
    Ok(GlobalState {
        beta,
        trans,
        init,
        emissions,
        omega,
        theta,
    })
}

/// `(ln p_seg, ln(1 − p_seg))` for state `z`.
///
/// For the iHMM baseline p_seg is exactly zero and the pair is `(−∞, 0)`;
/// message passing never consumes that representation (see
/// [`Segmentation::Never`]).
pub fn segmentation_logprob(
    variant: Variant,
    omega: &[f64],
    theta: &[f64],
    f_y: &[f64],
    z: usize,
) -> Result<(f64, f64)> {
    match variant {
        Variant::FeatureIndependent => {
            let w = omega[z].clamp(OMEGA_CLAMP, 1.0 - OMEGA_CLAMP);
            Ok((w.ln(), (-w).ln_1p()))
        }
        Variant::FeatureBased => {
            if f_y.len() != theta.len() {
                return Err(Error::DimensionMismatch {
                    expected: theta.len(),
                    got: f_y.len(),
                    context: "feature vector vs feature weights",
                });
            }
            let x: f64 = theta.iter().zip(f_y).map(|(a, b)| a * b).sum::<f64>() + omega[z];
            Ok(log_logistic_pair(x))
        }
        Variant::IhmmBaseline => Ok((f64::NEG_INFINITY, 0.0)),
    }
}

/// Per-timestep segmentation log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum Segmentation {
    /// p_seg ≡ 0: the chain never resets through π₀ after t = 1.
    Never,
    /// `T × K` tables of ln p(s_t=1 | z_t, y_t) and ln p(s_t=0 | z_t, y_t).
    LogProbs { ln_p: Vec<f64>, ln_q: Vec<f64> },
}

/// Tilted (mean-field substituted) quantities for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedModel {
    k: usize,
    len: usize,
    /// K×K, E[ln π_ij] with the rest column dropped.
    pub ln_trans: Vec<f64>,
    /// K, E[ln π₀_j] with the rest entry dropped.
    pub ln_init: Vec<f64>,
    /// T×K, E[ln f(y_t | φ_i)].
    pub ln_lik: Vec<f64>,
    pub seg: Segmentation,
    /// T × stat_len sufficient statistics of the observations, when known.
    obs_stats: Option<(usize, Vec<f64>)>,
}

impl TiltedModel {
    /// Assembles a tilted model from raw log tables, validating shapes and finiteness.
    pub fn new(
        k: usize,
        ln_trans: Vec<f64>,
        ln_init: Vec<f64>,
        ln_lik: Vec<f64>,
        seg: Segmentation,
    ) -> Result<Self> {
        if k == 0 || ln_lik.is_empty() || !ln_lik.len().is_multiple_of(k) {
            return Err(Error::invalid("likelihood table must be a non-empty T×K array"));
        }
        let len = ln_lik.len() / k;
        let check = |name: &'static str, v: &[f64], n: usize| -> Result<()> {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                    context: name,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
            Ok(())
        };
        check("ln_trans", &ln_trans, k * k)?;
        check("ln_init", &ln_init, k)?;
        check("ln_lik", &ln_lik, len * k)?;
        if let Segmentation::LogProbs { ln_p, ln_q } = &seg {
            check("ln_p", ln_p, len * k)?;
            check("ln_q", ln_q, len * k)?;
            if ln_p.iter().chain(ln_q).any(|v| *v > 0.0) {
                return Err(Error::invalid("segmentation log-probabilities must be <= 0"));
            }
        }
        Ok(Self {
            k,
            len,
            ln_trans,
            ln_init,
            ln_lik,
            seg,
            obs_stats: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub(crate) fn obs_stats(&self) -> Option<(usize, &[f64])> {
        self.obs_stats.as_ref().map(|(n, v)| (*n, v.as_slice()))
    }
}

/// Quantities shared by every sequence under one global state.
#[derive(Debug, Clone)]
pub struct TiltedGlobals {
    k: usize,
    dim: usize,
    variant: Variant,
    features: FeatureMap,
    ln_trans: Vec<f64>,
    ln_init: Vec<f64>,
    lik: Vec<ExpectedLoglik>,
    omega: Vec<f64>,
    theta: Vec<f64>,
}

impl TiltedGlobals {
    pub fn new(g: &GlobalState, h: &Hyperparams) -> Self {
        let k = g.k();
        let mut ln_trans = Vec::with_capacity(k * k);
        for row in &g.trans {
            ln_trans.extend_from_slice(&row.expected_log()[..k]);
        }
        let ln_init = g.init.expected_log()[..k].to_vec();
        Self {
            k,
            dim: g.dim(),
            variant: h.variant,
            features: h.features,
            ln_trans,
            ln_init,
            lik: g.emissions.iter().map(ExpectedLoglik::new).collect(),
            omega: g.omega.clone(),
            theta: g.theta.clone(),
        }
    }

    pub fn for_sequence(&self, seq: &Sequence) -> Result<TiltedModel> {
        if seq.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: seq.dim(),
                context: "sequence vs emission dimension",
            });
        }
        let (k, len) = (self.k, seq.len());
        let mut ln_lik = Vec::with_capacity(len * k);
        for y in seq.rows() {
            ln_lik.extend(self.lik.iter().map(|e| e.eval(y)));
        }
        let seg = self.segmentation(seq)?;
        let n_stats = expfam::stat_len(self.dim);
        let mut stats = vec![0.0; len * n_stats];
        for (y, out) in seq.rows().zip(stats.chunks_exact_mut(n_stats)) {
            expfam::write_sufficient_stats(y, out);
        }
        Ok(TiltedModel {
            k,
            len,
            ln_trans: self.ln_trans.clone(),
            ln_init: self.ln_init.clone(),
            ln_lik,
            seg,
            obs_stats: Some((n_stats, stats)),
        })
    }

    fn segmentation(&self, seq: &Sequence) -> Result<Segmentation> {
        let (k, len) = (self.k, seq.len());
        match self.variant {
            Variant::IhmmBaseline => Ok(Segmentation::Never),
            Variant::FeatureIndependent => {
                let pairs: Vec<(f64, f64)> = (0..k)
                    .map(|z| segmentation_logprob(self.variant, &self.omega, &[], &[], z))
                    .collect::<Result<_>>()?;
                let mut ln_p = Vec::with_capacity(len * k);
                let mut ln_q = Vec::with_capacity(len * k);
                for _ in 0..len {
                    ln_p.extend(pairs.iter().map(|p| p.0));
                    ln_q.extend(pairs.iter().map(|p| p.1));
                }
                Ok(Segmentation::LogProbs { ln_p, ln_q })
            }
            Variant::FeatureBased => {
                let mut f = vec![0.0; self.theta.len()];
                let mut ln_p = Vec::with_capacity(len * k);
                let mut ln_q = Vec::with_capacity(len * k);
                for y in seq.rows() {
                    self.features.write(y, &mut f);
                    let base: f64 = self.theta.iter().zip(&f).map(|(a, b)| a * b).sum();
                    for w in &self.omega {
                        let (p, q) = log_logistic_pair(base + w);
                        ln_p.push(p);
                        ln_q.push(q);
                    }
                }
                Ok(Segmentation::LogProbs { ln_p, ln_q })
            }
        }
    }
}

/// Tilted quantities for one sequence under the current global state.
pub fn build_tilted(g: &GlobalState, h: &Hyperparams, seq: &Sequence) -> Result<TiltedModel> {
    TiltedGlobals::new(g, h).for_sequence(seq)
}

/// Plug-in transition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanTransition {
    /// K×K row-stochastic matrix.
    pub trans: Vec<f64>,
    /// Length-K simplex vector.
    pub init: Vec<f64>,
    /// Per-state segmentation probability with the observation features
    /// zeroed: ω* for the feature-independent variant, σ(ω*) for the
    /// feature-based variant, 0 for the baseline.
    pub seg: Vec<f64>,
}

fn normalized_head(row: &[f64], k: usize) -> Vec<f64> {
    let total: f64 = row[..k].iter().sum();
    row[..k].iter().map(|a| a / total).collect()
}

/// Dirichlet means with the rest mass renormalized away.
pub fn mean_transition(g: &GlobalState, h: &Hyperparams) -> MeanTransition {
    let k = g.k();
    let trans = g
        .trans
        .iter()
        .flat_map(|row| normalized_head(row.concentration(), k))
        .collect();
    let init = normalized_head(g.init.concentration(), k);
    let seg = match h.variant {
        Variant::FeatureIndependent => g
            .omega
            .iter()
            .map(|w| w.clamp(OMEGA_CLAMP, 1.0 - OMEGA_CLAMP))
            .collect(),
        Variant::FeatureBased => g.omega.iter().map(|&w| logistic(w)).collect(),
        Variant::IhmmBaseline => vec![0.0; k],
    };
    MeanTransition { trans, init, seg }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn prior() -> NigParams {
        NigParams {
            mean: 0.0,
            kappa: 0.1,
            shape: 2.0,
            rate: 1.0,
        }
    }

    fn summary() -> DataSummary {
        DataSummary {
            dim: 1,
            count: 10,
            mean: vec![0.0],
            cov: vec![4.0],
        }
    }

    #[test]
    fn gem_degenerate_stick() {
        let b = gem_mean(1e-9, 5);
        assert!((b[0] - 1.0).abs() < 1e-8);
        assert!(b[1..].iter().all(|v| *v < 1e-8));
        assert!((gem_mean(3.0, 7).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn init_rows_exchangeable_without_stickiness() {
        let h = Hyperparams::univariate(4, 2.5, 1.5, prior());
        let g = init_global(&h, &summary(), 1).unwrap();
        for row in &g.trans[1..] {
            assert_eq!(row, &g.trans[0]);
        }
        assert_eq!(g.init, g.trans[0]);
        g.validate(&h).unwrap();
    }

    #[test]
    fn sticky_bias_only_touches_diagonal() {
        let mut h = Hyperparams::univariate(3, 2.0, 1.0, prior());
        let base = init_global(&h, &summary(), 0).unwrap();
        h.kappa = 5.0;
        let sticky = init_global(&h, &summary(), 0).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let diff = sticky.trans[i].concentration()[j] - base.trans[i].concentration()[j];
                if i == j {
                    assert!((diff - 5.0).abs() < 1e-12);
                } else {
                    assert_eq!(diff, 0.0);
                }
            }
        }
        assert_eq!(sticky.init, base.init);
    }

    #[test]
    fn init_is_deterministic() {
        let mut h = Hyperparams::univariate(5, 1.0, 1.0, prior());
        h.variant = Variant::FeatureBased;
        let a = init_global(&h, &summary(), 42).unwrap();
        let b = init_global(&h, &summary(), 42).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
        assert_eq!(a.theta.len(), 1);
        let c = init_global(&h, &summary(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn segmentation_examples() {
        let (p, q) =
            segmentation_logprob(Variant::FeatureIndependent, &[0.5], &[], &[], 0).unwrap();
        assert!((p - 0.5f64.ln()).abs() < 1e-15 && (q - 0.5f64.ln()).abs() < 1e-15);
        let (p, q) = segmentation_logprob(Variant::FeatureBased, &[0.0], &[0.0], &[3.0], 0).unwrap();
        assert!((p - 0.5f64.ln()).abs() < 1e-15 && (q - 0.5f64.ln()).abs() < 1e-15);
        let (p, _) =
            segmentation_logprob(Variant::FeatureBased, &[0.5], &[2.0, -1.0], &[1.0, 1.0], 0)
                .unwrap();
        // 1/(1+e^{-1.5}) evaluated in extended precision
        assert!((p.exp() - 0.817_574_476_193_643_7).abs() < 1e-12);
        assert!(matches!(
            segmentation_logprob(Variant::FeatureBased, &[0.5], &[2.0, -1.0], &[1.0], 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn segmentation_pair_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let w: f64 = rng.random_range(-40.0..40.0);
            let th: f64 = rng.random_range(-5.0..5.0);
            let f: f64 = rng.random_range(-5.0..5.0);
            let (p, q) = segmentation_logprob(Variant::FeatureBased, &[w], &[th], &[f], 0).unwrap();
            assert!((p.exp() + q.exp() - 1.0).abs() < 1e-12);
            let u: f64 = rng.random_range(0.0..1.0);
            let (p, q) = segmentation_logprob(Variant::FeatureIndependent, &[u], &[], &[], 0).unwrap();
            assert!((p.exp() + q.exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tilted_matches_pointwise_segmentation() {
        let mut h = Hyperparams::univariate(3, 1.0, 1.0, prior());
        h.variant = Variant::FeatureBased;
        h.features = FeatureMap::BiasRaw;
        let g = init_global(&h, &summary(), 9).unwrap();
        let seq = Sequence::from_scalars(vec![0.3, -1.2, 2.2, 0.0]).unwrap();
        let tilted = build_tilted(&g, &h, &seq).unwrap();
        let Segmentation::LogProbs { ln_p, ln_q } = &tilted.seg else {
            panic!("feature-based model must carry segmentation tables");
        };
        for t in 0..seq.len() {
            let f = h.features.features(seq.row(t));
            for z in 0..3 {
                let (p, q) = segmentation_logprob(h.variant, &g.omega, &g.theta, &f, z).unwrap();
                assert_eq!(ln_p[t * 3 + z], p);
                assert_eq!(ln_q[t * 3 + z], q);
                let direct = g.emissions[z].expected_loglik(seq.row(t)).unwrap();
                assert!((tilted.ln_lik[t * 3 + z] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tilted_delta_emissions_equal_gaussian_logpdf() {
        let h = Hyperparams::univariate(2, 1.0, 1.0, prior());
        let mut g = init_global(&h, &summary(), 0).unwrap();
        let params = [(0.0, 1.0), (2.0, 0.5)];
        for (q, (m, v)) in g.emissions.iter_mut().zip(params) {
            *q = EmissionNatural::from_nig(NigParams {
                mean: m,
                kappa: 1e10,
                shape: 1e10,
                rate: 1e10 * v,
            })
            .unwrap();
        }
        let seq = Sequence::from_scalars(vec![0.5, 1.5, -1.0]).unwrap();
        let tilted = build_tilted(&g, &h, &seq).unwrap();
        for t in 0..3 {
            for (z, (m, v)) in params.iter().enumerate() {
                let y = seq.row(t)[0];
                let exact = -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * (y - m).powi(2) / v;
                assert!((tilted.ln_lik[t * 2 + z] - exact).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn baseline_uses_never_segmentation() {
        let mut h = Hyperparams::univariate(2, 1.0, 1.0, prior());
        h.variant = Variant::IhmmBaseline;
        let g = init_global(&h, &summary(), 0).unwrap();
        let seq = Sequence::from_scalars(vec![0.5]).unwrap();
        assert_eq!(build_tilted(&g, &h, &seq).unwrap().seg, Segmentation::Never);
    }

    #[test]
    fn mean_transition_examples() {
        let h = Hyperparams::univariate(2, 1.0, 1.0, prior());
        let mut g = init_global(&h, &summary(), 0).unwrap();
        g.trans[0] = DirichletParams::new(vec![1.0, 1.0, 1e-300]).unwrap();
        let mt = mean_transition(&g, &h);
        assert!((mt.trans[0] - 0.5).abs() < 1e-15 && (mt.trans[1] - 0.5).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = Hyperparams::univariate(4, 1.0, 1.0, prior());
        let mut g = init_global(&h, &summary(), 0).unwrap();
        for row in g.trans.iter_mut() {
            *row = DirichletParams::new((0..5).map(|_| rng.random_range(0.1..10.0)).collect())
                .unwrap();
        }
        let mt = mean_transition(&g, &h);
        for (i, row) in g.trans.iter().enumerate() {
            let c = row.concentration();
            let total: f64 = c[..4].iter().sum();
            let row_sum: f64 = mt.trans[i * 4..(i + 1) * 4].iter().sum();
            assert!((row_sum - 1.0).abs() < 1e-12);
            for j in 0..4 {
                assert!((mt.trans[i * 4 + j] - c[j] / total).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_state_has_identical_rows() {
        let h = Hyperparams::univariate(3, 2.0, 2.0, prior());
        let g = init_global(&h, &summary(), 0).unwrap();
        let mt = mean_transition(&g, &h);
        assert_eq!(&mt.trans[0..3], &mt.trans[3..6]);
        assert_eq!(&mt.trans[0..3], &mt.trans[6..9]);
    }
}
