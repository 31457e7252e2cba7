//! Stochastic variational inference for the truncated model.
//!
//! Each update draws a minibatch, computes exact local posteriors under the
//! current global state, blends the conjugate global factors along the
//! natural gradient, then takes one softmax-coordinate gradient step on β* and one
//! plain gradient step on θ*/ω*. Minibatch statistics are scaled by
//! m = S / |batch|.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataSummary, Sequence};
use crate::error::{Error, Result};
use crate::expfam::{self, DirichletParams, EmissionNatural};
use crate::messages::{self, LocalStats};
use crate::model::{
    init_global, GlobalState, Hyperparams, TiltedGlobals, Variant, OMEGA_CLAMP,
};
use crate::special::{digamma, logistic};

/// Floor applied to every β* coordinate after projection.
pub const BETA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StepSchedule {
    /// ρ_n = (n + τ)^{−κ}.
    Decay { tau: f64, kappa: f64 },
    Fixed { rho: f64 },
}

impl StepSchedule {
    pub fn rho(&self, n: usize) -> f64 {
        match *self {
            StepSchedule::Decay { tau, kappa } => (n as f64 + tau).powf(-kappa),
            StepSchedule::Fixed { rho } => rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Decay { tau, kappa } => {
                if !(tau >= 0.0) || !(kappa > 0.5 && kappa <= 1.0) {
                    return Err(Error::invalid(format!(
                        "step schedule needs tau >= 0 and kappa in (0.5, 1], got tau={tau}, kappa={kappa}"
                    )));
                }
                if tau == 0.0 {
                    return Err(Error::invalid("tau = 0 gives an infinite first step"));
                }
            }
            StepSchedule::Fixed { rho } => {
                if !(0.0..=1.0).contains(&rho) {
                    return Err(Error::invalid(format!("fixed rho must lie in [0, 1], got {rho}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SviConfig {
    pub batch_size: usize,
    pub passes: usize,
    pub schedule: StepSchedule,
    pub beta_lr: f64,
    pub theta_lr: f64,
    pub omega_lr: f64,
    pub seed: u64,
    /// Stop when the pass-averaged ELBO estimate changes by less than this
    /// fraction of its magnitude.
    pub tolerance: Option<f64>,
}

impl Default for SviConfig {
    fn default() -> Self {
        Self {
            batch_size: 2,
            passes: 100,
            schedule: StepSchedule::Decay { tau: 1.0, kappa: 0.6 },
            beta_lr: 1e-3,
            theta_lr: 1e-3,
            omega_lr: 1e-3,
            seed: 0,
            tolerance: None,
        }
    }
}

impl SviConfig {
    pub fn validate(&self, n_sequences: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > n_sequences {
            return Err(Error::invalid(format!(
                "batch size {} must lie in [1, {n_sequences}]",
                self.batch_size
            )));
        }
        self.schedule.validate()?;
        for (name, v) in [
            ("beta_lr", self.beta_lr),
            ("theta_lr", self.theta_lr),
            ("omega_lr", self.omega_lr),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be a finite value >= 0")));
            }
        }
        if let Some(tol) = self.tolerance {
            if !(tol >= 0.0) {
                return Err(Error::invalid("tolerance must be >= 0"));
            }
        }
        Ok(())
    }
}

/// One SVI update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub pass: usize,
    pub rho: f64,
    /// ELBO estimate from this minibatch under the pre-update global state.
    pub elbo: f64,
    /// Euclidean norm of the change in all global parameters.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
    pub state: GlobalState,
    /// Full-data ELBO of the final state.
    pub final_elbo: f64,
    pub wall_seconds: f64,
}

/// Summed local statistics of a minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub k: usize,
    /// K×K.
    pub trans: Vec<f64>,
    pub init: Vec<f64>,
    /// K × stat_len.
    pub emission: Vec<f64>,
    pub stat_len: usize,
    /// Σ ln Z over the batch.
    pub ln_z: f64,
    pub per_sequence: Vec<LocalStats>,
}

impl BatchStats {
    fn empty(k: usize, stat_len: usize) -> Self {
        Self {
            k,
            trans: vec![0.0; k * k],
            init: vec![0.0; k],
            emission: vec![0.0; k * stat_len],
            stat_len,
            ln_z: 0.0,
            per_sequence: Vec::new(),
        }
    }

    fn add(&mut self, s: LocalStats) {
        for (a, b) in self.trans.iter_mut().zip(&s.trans) {
            *a += b;
        }
        for (a, b) in self.init.iter_mut().zip(&s.init) {
            *a += b;
        }
        for (a, b) in self.emission.iter_mut().zip(&s.emission) {
            *a += b;
        }
        self.ln_z += s.ln_z;
        self.per_sequence.push(s);
    }
}

/// Local posteriors for every sequence of the batch, summed.
pub fn local_step(g: &GlobalState, h: &Hyperparams, batch: &[&Sequence]) -> Result<BatchStats> {
    if batch.is_empty() {
        return Err(Error::invalid("minibatch must contain at least one sequence"));
    }
    let tilted = TiltedGlobals::new(g, h);
    let mut out = BatchStats::empty(g.k(), expfam::stat_len(g.dim()));
    for seq in batch {
        let m = tilted.for_sequence(seq)?;
        out.add(messages::local_stats(&m));
    }
    Ok(out)
}

/// Transition-row priors α_i = αβ* + κe_i followed by α₀ = αβ*.
fn dirichlet_priors(g: &GlobalState, h: &Hyperparams) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows = (0..g.k()).map(|i| h.row_prior(&g.beta, Some(i))).collect();
    (rows, h.row_prior(&g.beta, None))
}

/// Conjugate natural-gradient update of the transition and emission factors.
pub fn global_step(
    g: &GlobalState,
    h: &Hyperparams,
    stats: &BatchStats,
    m: f64,
    rho: f64,
) -> Result<GlobalState> {
    let k = g.k();
    let (row_priors, init_prior) = dirichlet_priors(g, h);
    let mut padded = vec![0.0; k + 1];
    let mut trans = Vec::with_capacity(k);
    for (i, (q, prior)) in g.trans.iter().zip(&row_priors).enumerate() {
        padded[..k].copy_from_slice(&stats.trans[i * k..(i + 1) * k]);
        let blended = expfam::natural_gradient_blend(prior, q.concentration(), &padded, m, rho);
        trans.push(DirichletParams::new(blended).map_err(|e| Error::Domain(e.to_string()))?);
    }
    padded[..k].copy_from_slice(&stats.init);
    let init = DirichletParams::new(expfam::natural_gradient_blend(
        &init_prior,
        g.init.concentration(),
        &padded,
        m,
        rho,
    ))
    .map_err(|e| Error::Domain(e.to_string()))?;

    let prior = h.emission_prior.natural()?;
    let n = stats.stat_len;
    let emissions = g
        .emissions
        .iter()
        .enumerate()
        .map(|(i, q)| EmissionNatural::blend(&prior, q, &stats.emission[i * n..(i + 1) * n], m, rho))
        .collect::<Result<Vec<_>>>()?;
    Ok(GlobalState {
        beta: g.beta.clone(),
        trans,
        init,
        emissions,
        omega: g.omega.clone(),
        theta: g.theta.clone(),
    })
}

/// ln p(β) under GEM(γ) truncated to K sticks, in the free coordinates
/// β_1..β_K with the rest mass β_{K+1} = 1 − Σβ_k.
pub fn gem_log_density(beta: &[f64], gamma: f64) -> f64 {
    let k = beta.len() - 1;
    let rest = beta[k];
    let mut remaining = 1.0;
    let mut acc = k as f64 * gamma.ln() + (gamma - 1.0) * rest.ln();
    for b in &beta[..k.saturating_sub(1)] {
        remaining -= b;
        acc -= remaining.ln();
    }
    acc
}

/// Gradient of [`gem_log_density`] in the free coordinates.
pub fn gem_log_density_grad(beta: &[f64], gamma: f64) -> Vec<f64> {
    let k = beta.len() - 1;
    let rest = beta[k];
    // suffix[j] = Σ_{i=j}^{K−2} 1/R_{i+1} with R_{i+1} = 1 − Σ_{l≤i} β_l
    let mut inv_r = Vec::with_capacity(k);
    let mut remaining = 1.0;
    for b in &beta[..k.saturating_sub(1)] {
        remaining -= b;
        inv_r.push(1.0 / remaining);
    }
    let mut grad = vec![0.0; k];
    let mut suffix = 0.0;
    for j in (0..k).rev() {
        if j < inv_r.len() {
            suffix += inv_r[j];
        }
        grad[j] = -(gamma - 1.0) / rest + suffix;
    }
    grad
}

/// β-dependent part of the ELBO: ln p(β*) + Σ_rows E_q ln p(π | β*).
pub fn beta_objective(g: &GlobalState, h: &Hyperparams) -> f64 {
    let (row_priors, init_prior) = dirichlet_priors(g, h);
    let rows: f64 = g
        .trans
        .iter()
        .zip(&row_priors)
        .map(|(q, p)| q.expected_log_density(p))
        .sum();
    gem_log_density(&g.beta, h.gamma) + rows + g.init.expected_log_density(&init_prior)
}

/// Gradient of [`beta_objective`] in the free coordinates β_1..β_K.
pub fn beta_gradient(g: &GlobalState, h: &Hyperparams) -> Vec<f64> {
    let k = g.k();
    let mut grad = gem_log_density_grad(&g.beta, h.gamma);
    let (row_priors, init_prior) = dirichlet_priors(g, h);
    let rows = g.trans.iter().zip(row_priors.iter()).chain(std::iter::once((&g.init, &init_prior)));
    for (q, prior) in rows {
        let e = q.expected_log();
        let d: Vec<f64> = e.iter().zip(prior).map(|(el, a)| el - digamma(*a)).collect();
        for j in 0..k {
            grad[j] += h.alpha * (d[j] - d[k]);
        }
    }
    grad
}

/// Euclidean projection onto {x : Σx = 1, x_i ≥ floor}.
pub fn project_simplex(v: &[f64], floor: f64) -> Vec<f64> {
    let n = v.len();
    let target = 1.0 - n as f64 * floor;
    debug_assert!(target > 0.0, "floor too large for the simplex dimension");
    let shifted: Vec<f64> = v.iter().map(|x| x - floor).collect();
    let mut sorted = shifted.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - target) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = shifted.iter().map(|x| (x - theta).max(0.0) + floor).collect();
    // absorb rounding so the result sums to one
    let total: f64 = out.iter().sum();
    let (imax, _) = out
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b });
    out[imax] += 1.0 - total;
    out
}

/// Gradient of [`beta_objective`] with respect to u = ln β* under
/// β* = softmax(u), all K + 1 coordinates: β_j (g_j − Σ_l β_l g_l) with the
/// rest coordinate's free gradient taken as zero.
pub fn beta_log_gradient(g: &GlobalState, h: &Hyperparams) -> Vec<f64> {
    let mut full = beta_gradient(g, h);
    full.push(0.0);
    let mean: f64 = g.beta.iter().zip(&full).map(|(b, x)| b * x).sum();
    g.beta.iter().zip(&full).map(|(b, x)| b * (x - mean)).collect()
}

/// One gradient-ascent step on β* in softmax coordinates, then projection
/// onto the floored simplex.
pub fn beta_step(g: &GlobalState, h: &Hyperparams, lr: f64) -> Vec<f64> {
    if lr == 0.0 {
        return g.beta.clone();
    }
    let grad = beta_log_gradient(g, h);
    let u: Vec<f64> = g.beta.iter().zip(&grad).map(|(b, d)| b.ln() + lr * d).collect();
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = u.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    project_simplex(&v, BETA_FLOOR)
}

/// Gradients of the θ*/ω*-dependent ELBO terms.
///
/// For the feature-independent variant the ω gradient is taken with respect
/// to logit(ω) and includes the Beta(a₀, b₀) log-prior.
pub fn theta_omega_gradient(
    g: &GlobalState,
    h: &Hyperparams,
    batch: &[&Sequence],
    stats: &BatchStats,
    m: f64,
) -> (Vec<f64>, Vec<f64>) {
    let k = g.k();
    let mut g_theta = vec![0.0; g.theta.len()];
    let mut g_omega = vec![0.0; k];
    match h.variant {
        Variant::IhmmBaseline => {}
        Variant::FeatureIndependent => {
            let w: Vec<f64> = g.omega.iter().map(|w| w.clamp(OMEGA_CLAMP, 1.0 - OMEGA_CLAMP)).collect();
            for s in &stats.per_sequence {
                for (joint, state) in s.seg_joint.chunks_exact(k).zip(s.state_marginal.chunks_exact(k)) {
                    for i in 0..k {
                        g_omega[i] += joint[i] - state[i] * w[i];
                    }
                }
            }
            let (a0, b0) = (h.a0, h.b0);
            for i in 0..k {
                g_omega[i] = m * g_omega[i] + (a0 - 1.0) * (1.0 - w[i]) - (b0 - 1.0) * w[i];
            }
        }
        Variant::FeatureBased => {
            let mut f = vec![0.0; g.theta.len()];
            for (seq, s) in batch.iter().zip(&stats.per_sequence) {
                for t in 0..seq.len() {
                    h.features.write(seq.row(t), &mut f);
                    let base: f64 = g.theta.iter().zip(&f).map(|(a, b)| a * b).sum();
                    let joint = &s.seg_joint[t * k..(t + 1) * k];
                    let state = &s.state_marginal[t * k..(t + 1) * k];
                    let mut expected = 0.0;
                    for i in 0..k {
                        let sig = logistic(base + g.omega[i]);
                        g_omega[i] += joint[i] - state[i] * sig;
                        expected += state[i] * sig;
                    }
                    let resid = s.seg_marginal[t] - expected;
                    for (gt, fv) in g_theta.iter_mut().zip(&f) {
                        *gt += fv * resid;
                    }
                }
            }
            g_theta.iter_mut().for_each(|v| *v *= m);
            g_omega.iter_mut().for_each(|v| *v *= m);
        }
    }
    (g_theta, g_omega)
}

/// One gradient-ascent step on (θ*, ω*).
pub fn theta_omega_step(
    g: &GlobalState,
    h: &Hyperparams,
    batch: &[&Sequence],
    stats: &BatchStats,
    m: f64,
    theta_lr: f64,
    omega_lr: f64,
) -> (Vec<f64>, Vec<f64>) {
    if h.variant == Variant::IhmmBaseline || (theta_lr == 0.0 && omega_lr == 0.0) {
        return (g.theta.clone(), g.omega.clone());
    }
    let (g_theta, g_omega) = theta_omega_gradient(g, h, batch, stats, m);
    let theta = g.theta.iter().zip(&g_theta).map(|(t, d)| t + theta_lr * d).collect();
    let omega = match h.variant {
        Variant::FeatureIndependent => g
            .omega
            .iter()
            .zip(&g_omega)
            .map(|(&w, d)| {
                let w = w.clamp(OMEGA_CLAMP, 1.0 - OMEGA_CLAMP);
                let u = (w / (1.0 - w)).ln() + omega_lr * d;
                logistic(u).clamp(OMEGA_CLAMP, 1.0 - OMEGA_CLAMP)
            })
            .collect(),
        _ => g.omega.iter().zip(&g_omega).map(|(w, d)| w + omega_lr * d).collect(),
    };
    (theta, omega)
}

/// Global ELBO terms: −KL for every conjugate factor plus the point-estimate priors.
pub fn global_elbo_terms(g: &GlobalState, h: &Hyperparams) -> Result<f64> {
    let (row_priors, init_prior) = dirichlet_priors(g, h);
    let mut acc = 0.0;
    for (q, p) in g.trans.iter().zip(&row_priors) {
        acc -= q.kl_divergence(p);
    }
    acc -= g.init.kl_divergence(&init_prior);
    let prior = h.emission_prior.natural()?;
    for q in &g.emissions {
        acc -= q.kl_divergence(&prior);
    }
    acc += gem_log_density(&g.beta, h.gamma);
    if h.variant == Variant::FeatureIndependent {
        let beta = h.omega_prior();
        acc += g
            .omega
            .iter()
            .map(|w| beta.ln_pdf(w.clamp(OMEGA_CLAMP, 1.0 - OMEGA_CLAMP)))
            .sum::<f64>();
    }
    Ok(acc)
}

/// Minibatch ELBO estimate m·Σ ln Z + global terms.
pub fn elbo_estimate(g: &GlobalState, h: &Hyperparams, batch: &[&Sequence], m: f64) -> Result<f64> {
    let stats = local_step(g, h, batch)?;
    Ok(m * stats.ln_z + global_elbo_terms(g, h)?)
}

fn flatten(g: &GlobalState) -> impl Iterator<Item = f64> + '_ {
    g.beta
        .iter()
        .chain(g.trans.iter().flat_map(|r| r.concentration()))
        .chain(g.init.concentration())
        .chain(g.emissions.iter().flat_map(|e| e.natural()))
        .chain(&g.omega)
        .chain(&g.theta)
        .copied()
}

fn delta_norm(a: &GlobalState, b: &GlobalState) -> f64 {
    flatten(a)
        .zip(flatten(b))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// One full SVI update on `batch`; returns the new state and the
/// pre-update ELBO estimate.
pub fn svi_update(
    g: &GlobalState,
    h: &Hyperparams,
    cfg: &SviConfig,
    batch: &[&Sequence],
    m: f64,
    rho: f64,
) -> Result<(GlobalState, f64)> {
    let stats = local_step(g, h, batch)?;
    let elbo = m * stats.ln_z + global_elbo_terms(g, h)?;
    let mut next = global_step(g, h, &stats, m, rho)?;
    next.beta = beta_step(&next, h, cfg.beta_lr);
    let (theta, omega) = theta_omega_step(&next, h, batch, &stats, m, cfg.theta_lr, cfg.omega_lr);
    next.theta = theta;
    next.omega = omega;
    Ok((next, elbo))
}

/// Runs SVI from `init_global(h, ·, cfg.seed)`.
pub fn fit(data: &[Sequence], h: &Hyperparams, cfg: &SviConfig) -> Result<FitTrace> {
    let summary = DataSummary::from_sequences(data)?;
    let g = init_global(h, &summary, cfg.seed)?;
    fit_from(data, h, cfg, g)
}

/// Runs SVI from a given starting state.
pub fn fit_from(data: &[Sequence], h: &Hyperparams, cfg: &SviConfig, init: GlobalState) -> Result<FitTrace> {
    let start = Instant::now();
    h.validate()?;
    cfg.validate(data.len())?;
    init.validate(h)?;
    let s = data.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed_5eed));
    let mut order: Vec<usize> = (0..s).collect();
    let mut g = init;
    let mut records = Vec::new();
    let mut n = 0usize;
    let mut last_pass_mean: Option<f64> = None;

    'passes: for pass in 0..cfg.passes {
        order.shuffle(&mut rng);
        let mut pass_sum = 0.0;
        let mut pass_updates = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &data[i]).collect();
            let m = s as f64 / batch.len() as f64;
            let rho = cfg.schedule.rho(n);
            let (next, elbo) = svi_update(&g, h, cfg, &batch, m, rho)?;
            records.push(TraceRecord {
                iteration: n,
                pass,
                rho,
                elbo,
                delta: delta_norm(&g, &next),
            });
            log::debug!("update {n}: rho={rho:.4} elbo={elbo:.4}");
            g = next;
            n += 1;
            pass_sum += elbo;
            pass_updates += 1;
        }
        let mean = pass_sum / pass_updates as f64;
        log::debug!("pass {pass}: mean minibatch ELBO {mean:.4}");
        if let (Some(tol), Some(prev)) = (cfg.tolerance, last_pass_mean) {
            if (mean - prev).abs() <= tol * mean.abs() {
                break 'passes;
            }
        }
        last_pass_mean = Some(mean);
    }

    let all: Vec<&Sequence> = data.iter().collect();
    let final_elbo = elbo_estimate(&g, h, &all, 1.0)?;
    Ok(FitTrace {
        records,
        state: g,
        final_elbo,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Local statistics of every sequence under a fixed global state.
pub fn posterior(g: &GlobalState, h: &Hyperparams, data: &[Sequence]) -> Result<Vec<LocalStats>> {
    let tilted = TiltedGlobals::new(g, h);
    data.iter()
        .map(|seq| Ok(messages::local_stats(&tilted.for_sequence(seq)?)))
        .collect()
}
