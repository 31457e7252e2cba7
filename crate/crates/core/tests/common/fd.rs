//! Random point-estimate instances and finite-difference helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sihmm::data::{DataSummary, Sequence};
use sihmm::expfam::{DirichletParams, NigParams};
use sihmm::model::{self, GlobalState, Hyperparams, Variant};
use sihmm::svi;

pub const H: f64 = 1e-5;
pub const INSTANCES: u64 = 25;

pub fn rel_err(a: f64, fd: f64) -> f64 {
    (a - fd).abs() / a.abs().max(fd.abs()).max(1.0)
}

pub fn max_rel_err(a: &[f64], fd: &[f64]) -> f64 {
    assert_eq!(a.len(), fd.len());
    a.iter().zip(fd).map(|(x, y)| rel_err(*x, *y)).fold(0.0, f64::max)
}

pub struct Instance {
    pub h: Hyperparams,
    pub g: GlobalState,
    pub data: Vec<Sequence>,
    pub m: f64,
}

pub fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

pub fn instance(seed: u64, variant: Variant) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=5);
    let prior = NigParams {
        mean: 0.0,
        kappa: rng.random_range(0.05..1.0),
        shape: rng.random_range(1.0..5.0),
        rate: rng.random_range(0.5..2.0),
    };
    let mut h = Hyperparams::univariate(k, rng.random_range(0.5..6.0), rng.random_range(0.5..6.0), prior);
    h.variant = variant;
    h.a0 = rng.random_range(1.0..3.0);
    h.b0 = rng.random_range(1.0..3.0);
    h.kappa = rng.random_range(0.0..2.0);
    let data: Vec<Sequence> = (0..3)
        .map(|_| {
            let len = rng.random_range(5..30);
            Sequence::from_scalars((0..len).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
        })
        .collect();
    let summary = DataSummary::from_sequences(&data).unwrap();
    let mut g = model::init_global(&h, &summary, seed).unwrap();
    g.beta = random_simplex(&mut rng, k + 1);
    for row in g.trans.iter_mut().chain(std::iter::once(&mut g.init)) {
        *row = DirichletParams::new((0..=k).map(|_| rng.random_range(0.3..15.0)).collect()).unwrap();
    }
    g.omega = match variant {
        Variant::FeatureBased => (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
        _ => (0..k).map(|_| rng.random_range(0.05..0.95)).collect(),
    };
    if variant == Variant::FeatureBased {
        g.theta = (0..g.theta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    }
    g.validate(&h).unwrap();
    let m = rng.random_range(1.0..4.0);
    Instance { h, g, data, m }
}

pub fn elbo(inst: &Instance, g: &GlobalState) -> f64 {
    let batch: Vec<&Sequence> = inst.data.iter().collect();
    svi::elbo_estimate(g, &inst.h, &batch, inst.m).unwrap()
}

/// Moves `eps` of mass from the rest coordinate to free coordinate `j`.
pub fn shift_beta(g: &GlobalState, j: usize, eps: f64) -> GlobalState {
    let mut out = g.clone();
    let k = out.beta.len() - 1;
    out.beta[j] += eps;
    out.beta[k] -= eps;
    out
}

pub fn softmax_shift(g: &GlobalState, j: usize, eps: f64) -> GlobalState {
    let mut out = g.clone();
    let u: Vec<f64> = g.beta.iter().enumerate().map(|(i, b)| b.ln() + if i == j { eps } else { 0.0 }).collect();
    let total: f64 = u.iter().map(|x| x.exp()).sum();
    out.beta = u.iter().map(|x| x.exp() / total).collect();
    out
}


/// Central difference of `f` at step `H`.
pub fn central(f: impl Fn(f64) -> f64) -> f64 {
    (f(H) - f(-H)) / (2.0 * H)
}

/// Free-coordinate β gradient against differences of both the β objective
/// and the full ELBO estimate.
pub fn beta_fd_error(inst: &Instance) -> f64 {
    let (g, h) = (&inst.g, &inst.h);
    let analytic = svi::beta_gradient(g, h);
    let fd_obj: Vec<f64> = (0..g.k())
        .map(|j| central(|e| svi::beta_objective(&shift_beta(g, j, e), h)))
        .collect();
    let fd_elbo: Vec<f64> = (0..g.k()).map(|j| central(|e| elbo(inst, &shift_beta(g, j, e)))).collect();
    max_rel_err(&analytic, &fd_obj).max(max_rel_err(&analytic, &fd_elbo))
}

/// Softmax-coordinate β gradient, all K + 1 coordinates.
pub fn beta_log_fd_error(inst: &Instance) -> f64 {
    let (g, h) = (&inst.g, &inst.h);
    let analytic = svi::beta_log_gradient(g, h);
    let fd: Vec<f64> = (0..=g.k())
        .map(|j| central(|e| svi::beta_objective(&softmax_shift(g, j, e), h)))
        .collect();
    max_rel_err(&analytic, &fd)
}

fn theta_omega_analytic(inst: &Instance) -> (Vec<f64>, Vec<f64>) {
    let batch: Vec<&Sequence> = inst.data.iter().collect();
    let stats = svi::local_step(&inst.g, &inst.h, &batch).unwrap();
    svi::theta_omega_gradient(&inst.g, &inst.h, &batch, &stats, inst.m)
}

/// θ gradient against differences of the ELBO estimate.
pub fn theta_fd_error(inst: &Instance) -> f64 {
    let (analytic, _) = theta_omega_analytic(inst);
    let fd: Vec<f64> = (0..inst.g.theta.len())
        .map(|j| {
            central(|e| {
                let mut g = inst.g.clone();
                g.theta[j] += e;
                elbo(inst, &g)
            })
        })
        .collect();
    max_rel_err(&analytic, &fd)
}

/// ω gradient against differences of the ELBO estimate; the
/// feature-independent gradient is with respect to logit ω.
pub fn omega_fd_error(inst: &Instance) -> f64 {
    let (_, analytic) = theta_omega_analytic(inst);
    let fd: Vec<f64> = (0..inst.g.k())
        .map(|j| {
            central(|e| {
                let mut g = inst.g.clone();
                g.omega[j] = match inst.h.variant {
                    Variant::FeatureIndependent => {
                        let w = g.omega[j];
                        sihmm::special::logistic((w / (1.0 - w)).ln() + e)
                    }
                    _ => g.omega[j] + e,
                };
                elbo(inst, &g)
            })
        })
        .collect();
    max_rel_err(&analytic, &fd)
}
