//! Exhaustive-enumeration and textbook-HMM oracles shared by the
//! message-passing tests.

#![allow(dead_code)]

pub mod fd;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sihmm::messages::{LocalStats, Messages};
use sihmm::model::{Segmentation, TiltedModel};
use sihmm::special::log_sum_exp;

pub fn lse(xs: &[f64]) -> f64 {
    log_sum_exp(xs)
}

pub fn seg_ln(m: &TiltedModel, t: usize, z: usize, s: usize) -> f64 {
    match &m.seg {
        Segmentation::Never => {
            if s == 1 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        }
        Segmentation::LogProbs { ln_p, ln_q } => {
            if s == 1 {
                ln_p[t * m.k() + z]
            } else {
                ln_q[t * m.k() + z]
            }
        }
    }
}

/// Every (z, s) path with its log weight.
pub fn enumerate(m: &TiltedModel) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let (k, len) = (m.k(), m.len());
    let n_z = k.pow(len as u32);
    let n_s = 1usize << len;
    let mut out = Vec::with_capacity(n_z * n_s);
    for zc in 0..n_z {
        let z: Vec<usize> = (0..len).map(|t| (zc / k.pow(t as u32)) % k).collect();
        for sc in 0..n_s {
            let s: Vec<usize> = (0..len).map(|t| (sc >> t) & 1).collect();
            let mut w = m.ln_init[z[0]];
            for t in 0..len {
                w += m.ln_lik[t * k + z[t]] + seg_ln(m, t, z[t], s[t]);
                if t > 0 {
                    w += if s[t - 1] == 0 {
                        m.ln_trans[z[t - 1] * k + z[t]]
                    } else {
                        m.ln_init[z[t]]
                    };
                }
            }
            out.push((z.clone(), s, w));
        }
    }
    out
}

pub struct Oracle {
    pub ln_z: f64,
    pub ln_f: Vec<f64>,
    pub ln_b: Vec<f64>,
    pub trans: Vec<f64>,
    pub init: Vec<f64>,
    pub state: Vec<f64>,
    pub seg: Vec<f64>,
    pub seg_joint: Vec<f64>,
}

pub fn oracle(m: &TiltedModel) -> Oracle {
    let (k, len) = (m.k(), m.len());
    let paths = enumerate(m);
    let ln_z = lse(&paths.iter().map(|p| p.2).collect::<Vec<_>>());

    // F(t,z,s) collects the weight of steps 1..t; B(t,z,s) the rest.
    let mut f_terms = vec![Vec::new(); len * k * 2];
    let mut b_terms = vec![Vec::new(); len * k * 2];
    for (z, s, _) in &paths {
        let mut prefix = m.ln_init[z[0]];
        let mut step = vec![0.0; len];
        for t in 0..len {
            let mut w = m.ln_lik[t * k + z[t]] + seg_ln(m, t, z[t], s[t]);
            if t > 0 {
                w += if s[t - 1] == 0 {
                    m.ln_trans[z[t - 1] * k + z[t]]
                } else {
                    m.ln_init[z[t]]
                };
            }
            step[t] = w;
        }
        for t in 0..len {
            prefix += step[t];
            let suffix: f64 = step[t + 1..].iter().sum();
            let idx = (t * k + z[t]) * 2 + s[t];
            f_terms[idx].push(prefix);
            b_terms[idx].push(suffix);
        }
    }
    // Each prefix appears once per suffix and vice versa; correct for the
    // multiplicity by dividing out the count of distinct completions.
    let ln_f = (0..len * k * 2)
        .map(|idx| {
            let t = idx / (2 * k);
            let completions = ((k * 2) as f64).powi((len - 1 - t) as i32);
            lse(&f_terms[idx]) - completions.ln()
        })
        .collect();
    let ln_b = (0..len * k * 2)
        .map(|idx| {
            let t = idx / (2 * k);
            let histories = ((k * 2) as f64).powi(t as i32);
            lse(&b_terms[idx]) - histories.ln()
        })
        .collect();

    let mut trans = vec![0.0; k * k];
    let mut init = vec![0.0; k];
    let mut state = vec![0.0; len * k];
    let mut seg = vec![0.0; len];
    let mut seg_joint = vec![0.0; len * k];
    for (z, s, w) in &paths {
        let p = (w - ln_z).exp();
        init[z[0]] += p;
        for t in 0..len {
            state[t * k + z[t]] += p;
            if s[t] == 1 {
                seg[t] += p;
                seg_joint[t * k + z[t]] += p;
            }
            if t > 0 {
                if s[t - 1] == 0 {
                    trans[z[t - 1] * k + z[t]] += p;
                } else {
                    init[z[t]] += p;
                }
            }
        }
    }
    Oracle {
        ln_z,
        ln_f,
        ln_b,
        trans,
        init,
        state,
        seg,
        seg_joint,
    }
}

pub fn random_model(rng: &mut ChaCha8Rng, k: usize, len: usize, seg: bool) -> TiltedModel {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let ln_trans = (0..k * k).map(|_| u(-3.0, 0.5)).collect();
    let ln_init = (0..k).map(|_| u(-3.0, 0.5)).collect();
    let ln_lik = (0..len * k).map(|_| u(-6.0, 1.0)).collect();
    let seg = if seg {
        let p: Vec<f64> = (0..len * k).map(|_| u(0.01, 0.99)).collect();
        Segmentation::LogProbs {
            ln_p: p.iter().map(|v| v.ln()).collect(),
            ln_q: p.iter().map(|v| (1.0 - v).ln()).collect(),
        }
    } else {
        Segmentation::Never
    };
    TiltedModel::new(k, ln_trans, ln_init, ln_lik, seg).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return a == b;
    }
    (a - b).abs() <= tol * (1.0 + b.abs())
}

pub fn assert_matches(m: &TiltedModel, msg: &Messages, stats: &LocalStats, tol: f64) {
    let o = oracle(m);
    let (k, len) = (m.k(), m.len());
    assert!(close(msg.ln_z(), o.ln_z, tol), "lnZ {} vs {}", msg.ln_z(), o.ln_z);
    assert!(close(msg.ln_z_backward(), o.ln_z, tol));
    let scale_sum: f64 = msg.ln_scale().iter().sum();
    assert!(close(scale_sum, msg.ln_z(), 1e-12));
    for t in 0..len {
        for z in 0..k {
            for s in 0..2 {
                let idx = (t * k + z) * 2 + s;
                assert!(
                    close(msg.ln_forward(t, z, s), o.ln_f[idx], tol),
                    "lnF({t},{z},{s}) {} vs {}",
                    msg.ln_forward(t, z, s),
                    o.ln_f[idx]
                );
                assert!(
                    close(msg.ln_backward(t, z, s), o.ln_b[idx], tol),
                    "lnB({t},{z},{s}) {} vs {}",
                    msg.ln_backward(t, z, s),
                    o.ln_b[idx]
                );
            }
        }
    }
    let pairs = [
        (&stats.trans, &o.trans, "trans"),
        (&stats.init, &o.init, "init"),
        (&stats.state_marginal, &o.state, "state"),
        (&stats.seg_marginal, &o.seg, "seg"),
        (&stats.seg_joint, &o.seg_joint, "seg_joint"),
    ];
    for (got, want, name) in pairs {
        assert_eq!(got.len(), want.len(), "{name}");
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < tol, "{name}: {g} vs {w}");
        }
    }
    let total: f64 = stats.trans.iter().sum::<f64>() + stats.init.iter().sum::<f64>();
    assert!((total - len as f64).abs() < 1e-8);
}

/// Textbook log-space HMM forward-backward.
pub struct PlainHmm {
    pub ln_z: f64,
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
}

pub fn plain_hmm(k: usize, ln_trans: &[f64], ln_init: &[f64], ln_lik: &[f64]) -> PlainHmm {
    let len = ln_lik.len() / k;
    let mut a = vec![0.0; len * k];
    for j in 0..k {
        a[j] = ln_init[j] + ln_lik[j];
    }
    for t in 1..len {
        for j in 0..k {
            let terms: Vec<f64> = (0..k).map(|i| a[(t - 1) * k + i] + ln_trans[i * k + j]).collect();
            a[t * k + j] = lse(&terms) + ln_lik[t * k + j];
        }
    }
    let mut b = vec![0.0; len * k];
    for t in (0..len - 1).rev() {
        for i in 0..k {
            let terms: Vec<f64> = (0..k)
                .map(|j| ln_trans[i * k + j] + ln_lik[(t + 1) * k + j] + b[(t + 1) * k + j])
                .collect();
            b[t * k + i] = lse(&terms);
        }
    }
    let ln_z = lse(&a[(len - 1) * k..]);
    let gamma = (0..len * k).map(|i| (a[i] + b[i] - ln_z).exp()).collect();
    let mut xi = vec![0.0; k * k];
    for t in 1..len {
        for i in 0..k {
            for j in 0..k {
                xi[i * k + j] += (a[(t - 1) * k + i] + ln_trans[i * k + j] + ln_lik[t * k + j]
                    + b[t * k + j]
                    - ln_z)
                    .exp();
            }
        }
    }
    PlainHmm { ln_z, gamma, xi }
}

/// Largest absolute deviation of lnZ, the forward/backward log messages
/// (relative to 1 + |oracle|) and every posterior statistic from enumeration.
pub fn max_deviation(m: &TiltedModel, msg: &Messages, stats: &LocalStats) -> f64 {
    let o = oracle(m);
    let (k, len) = (m.k(), m.len());
    let rel = |a: f64, b: f64| {
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            if a == b { 0.0 } else { f64::INFINITY }
        } else {
            (a - b).abs() / (1.0 + b.abs())
        }
    };
    let mut worst = rel(msg.ln_z(), o.ln_z);
    for t in 0..len {
        for z in 0..k {
            for s in 0..2 {
                let idx = (t * k + z) * 2 + s;
                worst = worst.max(rel(msg.ln_forward(t, z, s), o.ln_f[idx]));
                worst = worst.max(rel(msg.ln_backward(t, z, s), o.ln_b[idx]));
            }
        }
    }
    let pairs = [
        (&stats.trans, &o.trans),
        (&stats.init, &o.init),
        (&stats.state_marginal, &o.state),
        (&stats.seg_marginal, &o.seg),
        (&stats.seg_joint, &o.seg_joint),
    ];
    for (got, want) in pairs {
        if got.len() != want.len() {
            return f64::INFINITY;
        }
        for (g, w) in got.iter().zip(want.iter()) {
            worst = worst.max((g - w).abs());
        }
    }
    worst
}
