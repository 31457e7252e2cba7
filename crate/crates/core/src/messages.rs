//! Forward-backward over the augmented `(z_t, s_t)` chain.
//!
//! The 2K×2K augmented transition operator is never built. Its upper half
//! (s_{t−1} = 0) is the K×K matrix Π̃; its lower half (s_{t−1} = 1) has every
//! row equal to π̃₀, so it reduces to the scalar mass `Σ_i F(i, 1)` times π̃₀.
//! One step then costs K² + 2K multiply-adds forward and K² + K backward.
//!
//! The fast path keeps messages in probability space: emission
//! log-likelihoods are shifted by their per-step maximum and every forward
//! and backward step is normalized to sum to one. If any step normalizer or
//! any forward-backward product underflows, the whole sequence is recomputed
//! in the log domain.

use crate::model::{Segmentation, TiltedModel};
use crate::special::log_sum_exp;

/// Multiply-add accounting hook for the message-passing kernels.
pub trait OpCounter {
    /// Products in the transition recursions.
    fn core(&mut self, n: u64);
    /// Emission and segmentation weighting and normalization.
    fn bookkeeping(&mut self, n: u64);
}

/// Counter used in production; compiles away.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoCount;

impl OpCounter for NoCount {
    #[inline(always)]
    fn core(&mut self, _: u64) {}
    #[inline(always)]
    fn bookkeeping(&mut self, _: u64) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub core: u64,
    pub bookkeeping: u64,
}

impl OpCounter for OpCount {
    fn core(&mut self, n: u64) {
        self.core += n;
    }
    fn bookkeeping(&mut self, n: u64) {
        self.bookkeeping += n;
    }
}

/// Normalizers below this are treated as underflowed.
const MIN_NORMALIZER: f64 = 1e-280;

/// Probability-space view of a tilted model.
struct Potentials {
    k: usize,
    len: usize,
    trans: Vec<f64>,
    init: Vec<f64>,
    /// exp(ln L̃ − m_t).
    lik: Vec<f64>,
    /// Per-step maxima m_t of ln L̃.
    shift: Vec<f64>,
    /// p(s_t = 1 | z_t) and p(s_t = 0 | z_t), T×K.
    p1: Vec<f64>,
    p0: Vec<f64>,
}

impl Potentials {
    fn new(m: &TiltedModel) -> Self {
        let (k, len) = (m.k(), m.len());
        let mut lik = Vec::with_capacity(len * k);
        let mut shift = Vec::with_capacity(len);
        for row in m.ln_lik.chunks_exact(k) {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            shift.push(mx);
            lik.extend(row.iter().map(|v| (v - mx).exp()));
        }
        let (p1, p0) = match &m.seg {
            Segmentation::Never => (vec![0.0; len * k], vec![1.0; len * k]),
            Segmentation::LogProbs { ln_p, ln_q } => (
                ln_p.iter().map(|v| v.exp()).collect(),
                ln_q.iter().map(|v| v.exp()).collect(),
            ),
        };
        Self {
            k,
            len,
            trans: m.ln_trans.iter().map(|v| v.exp()).collect(),
            init: m.ln_init.iter().map(|v| v.exp()).collect(),
            lik,
            shift,
            p1,
            p0,
        }
    }
}

/// `(ln p(s_t=1 | z_t=j), ln p(s_t=0 | z_t=j))`.
fn ln_seg(m: &TiltedModel, t: usize, j: usize) -> (f64, f64) {
    match &m.seg {
        Segmentation::Never => (f64::NEG_INFINITY, 0.0),
        Segmentation::LogProbs { ln_p, ln_q } => (ln_p[t * m.k() + j], ln_q[t * m.k() + j]),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    /// Per-step normalized probabilities.
    Scaled {
        /// T×K×2, each step summing to one.
        alpha: Vec<f64>,
        beta: Vec<f64>,
        /// ln of each backward step's raw sum.
        ln_bnorm: Vec<f64>,
        /// ln of the factor restoring the unscaled backward message.
        ln_tail: Vec<f64>,
    },
    /// Unscaled log messages.
    Log { ln_f: Vec<f64>, ln_b: Vec<f64> },
}

/// Forward and backward messages of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    k: usize,
    len: usize,
    repr: Repr,
    /// ln C_t with ln Z = Σ_t ln C_t.
    ln_scale: Vec<f64>,
    ln_z: f64,
}

impl Messages {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn ln_z(&self) -> f64 {
        self.ln_z
    }

    /// Per-step log normalizers; they sum to ln Z.
    pub fn ln_scale(&self) -> &[f64] {
        &self.ln_scale
    }

    /// True when the log-domain fallback produced these messages.
    pub fn used_log_domain(&self) -> bool {
        matches!(self.repr, Repr::Log { .. })
    }

    /// ln F(t, z, s) = ln p(y_{1..t}, z_t, s_t) under the tilted potentials.
    pub fn ln_forward(&self, t: usize, z: usize, s: usize) -> f64 {
        let idx = (t * self.k + z) * 2 + s;
        match &self.repr {
            Repr::Scaled { alpha, .. } => alpha[idx].ln() + self.ln_scale[..=t].iter().sum::<f64>(),
            Repr::Log { ln_f, .. } => ln_f[idx],
        }
    }

    /// ln B(t, z, s) = ln p(y_{t+1..T} | z_t, s_t) under the tilted potentials.
    pub fn ln_backward(&self, t: usize, z: usize, s: usize) -> f64 {
        let idx = (t * self.k + z) * 2 + s;
        match &self.repr {
            Repr::Scaled { beta, ln_tail, .. } => beta[idx].ln() + ln_tail[t],
            Repr::Log { ln_b, .. } => ln_b[idx],
        }
    }

    /// ln Z recovered from the first step's forward-backward product.
    pub fn ln_z_backward(&self) -> f64 {
        let terms: Vec<f64> = (0..self.k)
            .flat_map(|z| (0..2).map(move |s| (z, s)))
            .map(|(z, s)| self.ln_forward(0, z, s) + self.ln_backward(0, z, s))
            .collect();
        log_sum_exp(&terms)
    }
}

/// Posterior expectations of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    pub k: usize,
    /// K×K: Σ_{t≥2} q(z_{t−1}=i, s_{t−1}=0, z_t=j).
    pub trans: Vec<f64>,
    /// K: q(z_1=j) + Σ_{t≥2} q(z_t=j, s_{t−1}=1).
    pub init: Vec<f64>,
    /// K × `stat_len`: Σ_t q(z_t=j) t(y_t); empty when the tilted model
    /// carries no observation statistics.
    pub emission: Vec<f64>,
    pub stat_len: usize,
    /// T: q(s_t=1).
    pub seg_marginal: Vec<f64>,
    /// T×K: q(z_t=i).
    pub state_marginal: Vec<f64>,
    /// T×K: q(z_t=i, s_t=1).
    pub seg_joint: Vec<f64>,
    pub ln_z: f64,
}

impl LocalStats {
    pub fn len(&self) -> usize {
        self.seg_marginal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seg_marginal.is_empty()
    }

    pub fn state_row(&self, t: usize) -> &[f64] {
        &self.state_marginal[t * self.k..(t + 1) * self.k]
    }

    /// argmax_i q(z_t = i) for each t, lowest index on ties.
    pub fn map_states(&self) -> Vec<usize> {
        self.state_marginal
            .chunks_exact(self.k)
            .map(|row| {
                let mut best = 0;
                for (i, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// Forward and backward passes.
pub fn messages(m: &TiltedModel) -> Messages {
    messages_counted(m, &mut NoCount)
}

/// [`messages`] with multiply-add accounting. The core count does not depend
/// on which numerical path ran.
pub fn messages_counted<C: OpCounter>(m: &TiltedModel, counter: &mut C) -> Messages {
    let pot = Potentials::new(m);
    count_core(m, counter);
    scaled_messages(&pot, counter)
        .filter(products_ok)
        .unwrap_or_else(|| log_domain_messages(m))
}

/// ln Z from a forward pass alone.
pub fn log_normalizer(m: &TiltedModel) -> f64 {
    let pot = Potentials::new(m);
    match scaled_forward(&pot, &mut NoCount) {
        Some((_, ln_norm)) => pot.shift.iter().zip(&ln_norm).map(|(a, b)| a + b).sum(),
        None => log_domain_messages(m).ln_z,
    }
}

fn count_core<C: OpCounter>(m: &TiltedModel, counter: &mut C) {
    let k = m.k() as u64;
    let steps = m.len().saturating_sub(1) as u64;
    // forward: Π̃ product, lower-half mass, rank-one π̃₀ update
    counter.core(steps * (k * k + 2 * k));
    // backward: Π̃ product, π̃₀ inner product
    counter.core(steps * (k * k + k));
}

/// Scaled forward pass: normalized messages and ln n_t, or `None` on underflow.
fn scaled_forward<C: OpCounter>(pot: &Potentials, counter: &mut C) -> Option<(Vec<f64>, Vec<f64>)> {
    let (k, len) = (pot.k, pot.len);
    let ku = k as u64;
    let mut alpha = vec![0.0; len * k * 2];
    let mut ln_norm = vec![0.0; len];
    let mut pred = vec![0.0; k];

    for t in 0..len {
        if t == 0 {
            pred.copy_from_slice(&pot.init);
        } else {
            let prev = &alpha[(t - 1) * k * 2..t * k * 2];
            pred.iter_mut().for_each(|p| *p = 0.0);
            let mut reset = 0.0;
            for i in 0..k {
                let a0 = prev[2 * i];
                reset += prev[2 * i + 1];
                if a0 != 0.0 {
                    let row = &pot.trans[i * k..(i + 1) * k];
                    for (p, &r) in pred.iter_mut().zip(row) {
                        *p += a0 * r;
                    }
                }
            }
            for (p, &q) in pred.iter_mut().zip(&pot.init) {
                *p += reset * q;
            }
        }

        let cur = &mut alpha[t * k * 2..(t + 1) * k * 2];
        let mut n = 0.0;
        for j in 0..k {
            let idx = t * k + j;
            let l = pred[j] * pot.lik[idx];
            cur[2 * j] = l * pot.p0[idx];
            cur[2 * j + 1] = l * pot.p1[idx];
            n += cur[2 * j] + cur[2 * j + 1];
        }
        if !(n >= MIN_NORMALIZER && n.is_finite()) {
            return None;
        }
        let inv = 1.0 / n;
        cur.iter_mut().for_each(|v| *v *= inv);
        ln_norm[t] = n.ln();
        counter.bookkeeping(5 * ku);
    }
    Some((alpha, ln_norm))
}

fn scaled_messages<C: OpCounter>(pot: &Potentials, counter: &mut C) -> Option<Messages> {
    let (k, len) = (pot.k, pot.len);
    let ku = k as u64;
    let (alpha, ln_fnorm) = scaled_forward(pot, counter)?;

    let mut beta = vec![0.0; len * k * 2];
    beta[(len - 1) * k * 2..].iter_mut().for_each(|b| *b = 1.0);
    let mut ln_bnorm = vec![0.0; len];
    let mut w = vec![0.0; k];
    for t in (0..len.saturating_sub(1)).rev() {
        let u = t + 1;
        let (head, tail) = beta.split_at_mut(u * k * 2);
        let next = &tail[..k * 2];
        let cur = &mut head[t * k * 2..];
        for j in 0..k {
            let idx = u * k + j;
            w[j] = pot.lik[idx] * (pot.p0[idx] * next[2 * j] + pot.p1[idx] * next[2 * j + 1]);
        }
        let reset: f64 = pot.init.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut n = 0.0;
        for i in 0..k {
            let row = &pot.trans[i * k..(i + 1) * k];
            let v: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            cur[2 * i] = v;
            cur[2 * i + 1] = reset;
            n += v + reset;
        }
        if !(n >= MIN_NORMALIZER && n.is_finite()) {
            return None;
        }
        let inv = 1.0 / n;
        cur.iter_mut().for_each(|v| *v *= inv);
        ln_bnorm[t] = n.ln();
        counter.bookkeeping(5 * ku);
    }

    let mut ln_tail = vec![0.0; len];
    for t in (0..len.saturating_sub(1)).rev() {
        ln_tail[t] = ln_tail[t + 1] + pot.shift[t + 1] + ln_bnorm[t];
    }
    let ln_scale: Vec<f64> = pot.shift.iter().zip(&ln_fnorm).map(|(a, b)| a + b).collect();
    let ln_z = ln_scale.iter().sum();
    Some(Messages {
        k,
        len,
        repr: Repr::Scaled {
            alpha,
            beta,
            ln_bnorm,
            ln_tail,
        },
        ln_scale,
        ln_z,
    })
}

/// Every step's forward-backward product must have representable mass.
fn products_ok(msg: &Messages) -> bool {
    let Repr::Scaled { alpha, beta, .. } = &msg.repr else {
        return true;
    };
    alpha.chunks_exact(2 * msg.k).zip(beta.chunks_exact(2 * msg.k)).all(|(a, b)| {
        let total: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        total >= MIN_NORMALIZER && total.is_finite()
    })
}

/// Exact log-domain forward-backward; O(TK²) log-sum-exps.
pub fn log_domain_messages(m: &TiltedModel) -> Messages {
    let (k, len) = (m.k(), m.len());
    let mut ln_f = vec![0.0; len * k * 2];
    let mut ln_b = vec![0.0; len * k * 2];
    let mut terms = vec![0.0; k];
    let mut pred = vec![0.0; k];

    for t in 0..len {
        if t == 0 {
            pred.copy_from_slice(&m.ln_init);
        } else {
            let prev = &ln_f[(t - 1) * k * 2..t * k * 2];
            for (i, v) in terms.iter_mut().enumerate() {
                *v = prev[2 * i + 1];
            }
            let ln_reset = log_sum_exp(&terms);
            for j in 0..k {
                for (i, v) in terms.iter_mut().enumerate() {
                    *v = prev[2 * i] + m.ln_trans[i * k + j];
                }
                pred[j] = log_sum_exp(&[log_sum_exp(&terms), ln_reset + m.ln_init[j]]);
            }
        }
        for j in 0..k {
            let (lp, lq) = ln_seg(m, t, j);
            let base = pred[j] + m.ln_lik[t * k + j];
            ln_f[(t * k + j) * 2] = base + lq;
            ln_f[(t * k + j) * 2 + 1] = base + lp;
        }
    }

    let mut ln_w = vec![0.0; k];
    for t in (0..len.saturating_sub(1)).rev() {
        let u = t + 1;
        for (j, w) in ln_w.iter_mut().enumerate() {
            let (lp, lq) = ln_seg(m, u, j);
            let b0 = ln_b[(u * k + j) * 2];
            let b1 = ln_b[(u * k + j) * 2 + 1];
            *w = m.ln_lik[u * k + j] + log_sum_exp(&[lq + b0, lp + b1]);
        }
        for (j, v) in terms.iter_mut().enumerate() {
            *v = m.ln_init[j] + ln_w[j];
        }
        let ln_reset = log_sum_exp(&terms);
        for i in 0..k {
            for (j, v) in terms.iter_mut().enumerate() {
                *v = m.ln_trans[i * k + j] + ln_w[j];
            }
            ln_b[(t * k + i) * 2] = log_sum_exp(&terms);
            ln_b[(t * k + i) * 2 + 1] = ln_reset;
        }
    }

    let mut ln_scale = Vec::with_capacity(len);
    let mut prev_total = 0.0;
    for t in 0..len {
        let total = log_sum_exp(&ln_f[t * k * 2..(t + 1) * k * 2]);
        ln_scale.push(total - prev_total);
        prev_total = total;
    }
    Messages {
        k,
        len,
        repr: Repr::Log { ln_f, ln_b },
        ln_scale,
        ln_z: prev_total,
    }
}

/// Posterior marginals and expected sufficient statistics.
pub fn marginals_and_stats(m: &TiltedModel, msg: &Messages) -> LocalStats {
    match &msg.repr {
        Repr::Scaled { .. } => scaled_stats(m, &Potentials::new(m), msg),
        Repr::Log { .. } => log_stats(m, msg),
    }
}

fn scaled_stats(m: &TiltedModel, pot: &Potentials, msg: &Messages) -> LocalStats {
    let Repr::Scaled {
        alpha,
        beta,
        ln_bnorm,
        ..
    } = &msg.repr
    else {
        unreachable!("scaled statistics need scaled messages");
    };
    let (k, len) = (pot.k, pot.len);

    let mut state_marginal = vec![0.0; len * k];
    let mut seg_joint = vec![0.0; len * k];
    let mut seg_marginal = vec![0.0; len];
    let mut totals = vec![0.0; len];
    for t in 0..len {
        let base = t * k * 2;
        let mut total = 0.0;
        for j in 0..k {
            let g0 = alpha[base + 2 * j] * beta[base + 2 * j];
            let g1 = alpha[base + 2 * j + 1] * beta[base + 2 * j + 1];
            state_marginal[t * k + j] = g0 + g1;
            seg_joint[t * k + j] = g1;
            total += g0 + g1;
        }
        totals[t] = total;
        let inv = 1.0 / total;
        let mut seg = 0.0;
        for j in 0..k {
            state_marginal[t * k + j] *= inv;
            seg_joint[t * k + j] *= inv;
            seg += seg_joint[t * k + j];
        }
        seg_marginal[t] = seg.clamp(0.0, 1.0);
    }

    // The pairwise term at step t is α̂(t−1,i,s)·T_{(i,s)→j}·w_j over the
    // normalizer Σ α̂(t−1)·b_raw(t−1) = n_bwd(t−1)·Σ α̂β̂(t−1). Outer
    // products are accumulated and Π̃, π̃₀ applied once at the end.
    let mut acc = vec![0.0; k * k];
    let mut acc0 = vec![0.0; k];
    let mut v = vec![0.0; k];
    for t in 1..len {
        let prev = &alpha[(t - 1) * k * 2..t * k * 2];
        let cur_b = &beta[t * k * 2..(t + 1) * k * 2];
        let reset: f64 = (0..k).map(|i| prev[2 * i + 1]).sum();
        let inv = 1.0 / (ln_bnorm[t - 1].exp() * totals[t - 1]);
        for j in 0..k {
            let idx = t * k + j;
            v[j] = pot.lik[idx] * (pot.p0[idx] * cur_b[2 * j] + pot.p1[idx] * cur_b[2 * j + 1]) * inv;
        }
        for i in 0..k {
            let a0 = prev[2 * i];
            if a0 != 0.0 {
                for (a, &vj) in acc[i * k..(i + 1) * k].iter_mut().zip(&v) {
                    *a += a0 * vj;
                }
            }
        }
        for (a, &vj) in acc0.iter_mut().zip(&v) {
            *a += reset * vj;
        }
    }
    let trans = acc.iter().zip(&pot.trans).map(|(a, p)| a * p).collect();
    let init = (0..k)
        .map(|j| state_marginal[j] + acc0[j] * pot.init[j])
        .collect();
    finish_stats(m, trans, init, state_marginal, seg_joint, seg_marginal, msg.ln_z)
}

fn log_stats(m: &TiltedModel, msg: &Messages) -> LocalStats {
    let Repr::Log { ln_f, ln_b } = &msg.repr else {
        unreachable!("log statistics need log messages");
    };
    let (k, len, ln_z) = (m.k(), m.len(), msg.ln_z);

    let mut state_marginal = vec![0.0; len * k];
    let mut seg_joint = vec![0.0; len * k];
    let mut seg_marginal = vec![0.0; len];
    for t in 0..len {
        let mut total = 0.0;
        for j in 0..k {
            let idx = (t * k + j) * 2;
            let g0 = (ln_f[idx] + ln_b[idx] - ln_z).exp();
            let g1 = (ln_f[idx + 1] + ln_b[idx + 1] - ln_z).exp();
            state_marginal[t * k + j] = g0 + g1;
            seg_joint[t * k + j] = g1;
            total += g0 + g1;
        }
        let mut seg = 0.0;
        for j in 0..k {
            state_marginal[t * k + j] /= total;
            seg_joint[t * k + j] /= total;
            seg += seg_joint[t * k + j];
        }
        seg_marginal[t] = seg.clamp(0.0, 1.0);
    }

    let mut trans = vec![0.0; k * k];
    let mut init: Vec<f64> = state_marginal[..k].to_vec();
    let mut ln_w = vec![0.0; k];
    let mut terms = vec![0.0; k];
    for t in 1..len {
        for (j, w) in ln_w.iter_mut().enumerate() {
            let (lp, lq) = ln_seg(m, t, j);
            let idx = (t * k + j) * 2;
            *w = m.ln_lik[t * k + j] + log_sum_exp(&[lq + ln_b[idx], lp + ln_b[idx + 1]]) - ln_z;
        }
        let prev = &ln_f[(t - 1) * k * 2..t * k * 2];
        for (i, v) in terms.iter_mut().enumerate() {
            *v = prev[2 * i + 1];
        }
        let ln_reset = log_sum_exp(&terms);
        for j in 0..k {
            init[j] += (ln_reset + m.ln_init[j] + ln_w[j]).exp();
        }
        for i in 0..k {
            for j in 0..k {
                trans[i * k + j] += (prev[2 * i] + m.ln_trans[i * k + j] + ln_w[j]).exp();
            }
        }
    }
    finish_stats(m, trans, init, state_marginal, seg_joint, seg_marginal, ln_z)
}

fn finish_stats(
    m: &TiltedModel,
    trans: Vec<f64>,
    init: Vec<f64>,
    state_marginal: Vec<f64>,
    seg_joint: Vec<f64>,
    seg_marginal: Vec<f64>,
    ln_z: f64,
) -> LocalStats {
    let k = m.k();
    let (emission, stat_len) = match m.obs_stats() {
        Some((n, stats)) => {
            let mut out = vec![0.0; k * n];
            for (row, ts) in state_marginal.chunks_exact(k).zip(stats.chunks_exact(n)) {
                for (j, &q) in row.iter().enumerate() {
                    if q != 0.0 {
                        for (o, &s) in out[j * n..(j + 1) * n].iter_mut().zip(ts) {
                            *o += q * s;
                        }
                    }
                }
            }
            (out, n)
        }
        None => (Vec::new(), 0),
    };
    LocalStats {
        k,
        trans,
        init,
        emission,
        stat_len,
        seg_marginal,
        state_marginal,
        seg_joint,
        ln_z,
    }
}

/// Full local inference for one sequence.
pub fn infer(m: &TiltedModel) -> (Messages, LocalStats) {
    let pot = Potentials::new(m);
    let msg = scaled_messages(&pot, &mut NoCount).filter(products_ok);
    match msg {
        Some(msg) => {
            let stats = scaled_stats(m, &pot, &msg);
            (msg, stats)
        }
        None => {
            let msg = log_domain_messages(m);
            let stats = log_stats(m, &msg);
            (msg, stats)
        }
    }
}

/// Local statistics only.
pub fn local_stats(m: &TiltedModel) -> LocalStats {
    infer(m).1
}

/// Boundary indices: `t + 1` for every 0-based `t` with q(s_t = 1) above
/// `threshold`. Each index is the first time step of the segment that starts
/// after the reset.
pub fn segment_boundaries(seg_marginal: &[f64], threshold: f64) -> Vec<usize> {
    seg_marginal
        .iter()
        .enumerate()
        .filter(|(_, q)| **q > threshold)
        .map(|(t, _)| t + 1)
        .collect()
}

/// Core multiply-add count of one forward+backward pass on a K-state,
/// length-T chain.
pub fn op_count_probe(k: usize, t: usize) -> OpCount {
    let m = probe_model(k, t);
    let mut count = OpCount::default();
    messages_counted(&m, &mut count);
    count
}

/// Multiply-add count of the same pass with the augmented 2K×2K operator
/// applied densely in both directions.
pub fn dense_reference_count(k: usize, t: usize) -> u64 {
    let k2 = 2 * k as u64;
    2 * (t.saturating_sub(1) as u64) * k2 * k2
}

fn probe_model(k: usize, t: usize) -> TiltedModel {
    let unit = |i: usize| ((i as f64 * 0.618_033_988_75).fract() - 0.5) * 0.2;
    let ln_trans = (0..k * k).map(|i| -(k as f64).ln() + unit(i)).collect();
    let ln_init = (0..k).map(|i| -(k as f64).ln() + unit(i + 7)).collect();
    let ln_lik = (0..t * k).map(|i| -1.0 + unit(i + 13)).collect();
    let ln_p: Vec<f64> = (0..t * k).map(|i| (0.1 + unit(i + 17).abs()).ln()).collect();
    let ln_q = ln_p.iter().map(|v| (-v.exp()).ln_1p()).collect();
    TiltedModel::new(k, ln_trans, ln_init, ln_lik, Segmentation::LogProbs { ln_p, ln_q })
        .expect("probe model is well formed")
}
