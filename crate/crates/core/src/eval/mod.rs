//! Scoring against ground truth and held-out data.

mod kmeans;
mod munkres;

pub use kmeans::{kmeans, KMeans};
pub use munkres::{munkres_assign, Assignment};

use crate::data::Sequence;
use crate::error::{Error, Result};
use crate::linalg;
use crate::messages::{self, LocalStats};
use crate::model::{mean_transition, GlobalState, Hyperparams, Segmentation, TiltedModel, Variant};
use crate::special::log_logistic_pair;
use crate::svi;

/// Compacts arbitrary labels to 0..n, preserving first-appearance order.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(*l).or_insert(next)
        })
        .collect();
    (out, seen.len())
}

/// Label-overlap contingency table, rows indexed by `inferred`.
pub fn contingency(truth: &[usize], inferred: &[usize]) -> (Vec<f64>, usize, usize) {
    let (t, nt) = compact(truth);
    let (i, ni) = compact(inferred);
    let mut table = vec![0.0; ni * nt];
    for (a, b) in i.iter().zip(&t) {
        table[a * nt + b] += 1.0;
    }
    (table, ni, nt)
}

/// 1 − (maximum matched overlap)/T over injective relabelings.
pub fn normalized_hamming(truth: &[usize], inferred: &[usize]) -> Result<f64> {
    if truth.len() != inferred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: inferred.len(),
            context: "true vs inferred label sequences",
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let (table, rows, cols) = contingency(truth, inferred);
    let a = munkres_assign(&table, rows, cols);
    Ok(1.0 - a.total / truth.len() as f64)
}

/// Inferred state → true state map maximizing overlap; inferred labels
/// are `0..k`, true labels `0..n_true`.
pub fn match_states(truth: &[usize], inferred: &[usize], k: usize, n_true: usize) -> Assignment {
    let mut table = vec![0.0; k * n_true];
    for (&i, &t) in inferred.iter().zip(truth) {
        table[i * n_true + t] += 1.0;
    }
    munkres_assign(&table, k, n_true)
}

fn gaussian_logpdf(mean: &[f64], chol: &[f64], logdet: f64, y: &[f64]) -> f64 {
    let d = mean.len();
    let diff: Vec<f64> = y.iter().zip(mean).map(|(a, b)| a - b).collect();
    let sol = linalg::chol_solve(chol, d, &diff);
    let quad: f64 = diff.iter().zip(&sol).map(|(a, b)| a * b).sum();
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
}

/// Plug-in model for one sequence: posterior-mean transitions and
/// Gaussian emissions, exact segmentation head.
pub fn plugin_model(g: &GlobalState, h: &Hyperparams, seq: &Sequence) -> Result<TiltedModel> {
    let k = g.k();
    if seq.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: seq.dim(),
            context: "held-out sequence vs emission dimension",
        });
    }
    let mt = mean_transition(g, h);
    let d = g.dim();
    let gauss: Vec<(Vec<f64>, Vec<f64>, f64)> = g
        .emissions
        .iter()
        .map(|e| {
            let pm = e.posterior_mean();
            let chol = linalg::cholesky(&pm.cov, d)
                .ok_or_else(|| Error::Domain("posterior-mean covariance is not positive definite".into()))?;
            let logdet = linalg::chol_logdet(&chol, d);
            Ok((pm.mean, chol, logdet))
        })
        .collect::<Result<_>>()?;
    let mut ln_lik = Vec::with_capacity(seq.len() * k);
    for y in seq.rows() {
        ln_lik.extend(gauss.iter().map(|(m, c, ld)| gaussian_logpdf(m, c, *ld, y)));
    }
    let seg = match h.variant {
        Variant::IhmmBaseline => Segmentation::Never,
        Variant::FeatureIndependent => {
            let mut ln_p = Vec::with_capacity(seq.len() * k);
            let mut ln_q = Vec::with_capacity(seq.len() * k);
            for _ in 0..seq.len() {
                ln_p.extend(mt.seg.iter().map(|w| w.ln()));
                ln_q.extend(mt.seg.iter().map(|w| (-w).ln_1p()));
            }
            Segmentation::LogProbs { ln_p, ln_q }
        }
        Variant::FeatureBased => {
            let mut ln_p = Vec::with_capacity(seq.len() * k);
            let mut ln_q = Vec::with_capacity(seq.len() * k);
            for y in seq.rows() {
                let f = h.features.features(y);
                let base: f64 = g.theta.iter().zip(&f).map(|(a, b)| a * b).sum();
                for w in &g.omega {
                    let (p, q) = log_logistic_pair(base + w);
                    ln_p.push(p);
                    ln_q.push(q);
                }
            }
            Segmentation::LogProbs { ln_p, ln_q }
        }
    };
    TiltedModel::new(
        k,
        mt.trans.iter().map(|v| v.ln()).collect(),
        mt.init.iter().map(|v| v.ln()).collect(),
        ln_lik,
        seg,
    )
}

/// Σ over held-out sequences of the plug-in forward log normalizer.
pub fn predictive_loglik(g: &GlobalState, h: &Hyperparams, heldout: &[Sequence]) -> Result<f64> {
    heldout
        .iter()
        .map(|seq| Ok(messages::log_normalizer(&plugin_model(g, h, seq)?)))
        .sum()
}

/// Segment starts inferred from q(s_t = 1) > `threshold`, restricted to
/// steps inside the sequence.
pub fn inferred_boundaries(stats: &LocalStats, threshold: f64) -> Vec<usize> {
    let len = stats.len();
    messages::segment_boundaries(&stats.seg_marginal, threshold)
        .into_iter()
        .filter(|&b| b < len)
        .collect()
}

/// Boundary indices `t > 0` where a segment starts.
pub fn true_boundaries(flags: &[bool]) -> Vec<usize> {
    flags
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, f)| **f)
        .map(|(t, _)| t)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Greedy one-to-one matching of inferred to true boundaries within ±w.
/// Each inferred boundary, in ascending order, takes the closest unmatched
/// true boundary (earlier on ties).
pub fn boundary_f1(truth: &[usize], inferred: &[usize], w: usize) -> BoundaryScore {
    if truth.is_empty() && inferred.is_empty() {
        return BoundaryScore {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        };
    }
    let mut truth: Vec<usize> = truth.to_vec();
    truth.sort_unstable();
    let mut inferred: Vec<usize> = inferred.to_vec();
    inferred.sort_unstable();
    let mut used = vec![false; truth.len()];
    let mut hits = 0usize;
    for &b in &inferred {
        let mut best: Option<(usize, usize)> = None;
        for (i, &t) in truth.iter().enumerate() {
            let dist = t.abs_diff(b);
            if !used[i] && dist <= w && best.is_none_or(|(_, d)| dist < d) {
                best = Some((i, dist));
            }
        }
        if let Some((i, _)) = best {
            used[i] = true;
            hits += 1;
        }
    }
    let precision = if inferred.is_empty() {
        0.0
    } else {
        hits as f64 / inferred.len() as f64
    };
    let recall = if truth.is_empty() {
        0.0
    } else {
        hits as f64 / truth.len() as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    BoundaryScore {
        precision,
        recall,
        f1,
    }
}

/// A contiguous inferred segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDescriptor {
    pub sequence: usize,
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    /// Row-normalized, smoothed K×K transition frequencies.
    pub transitions: Vec<f64>,
    pub cluster: usize,
}

/// Pseudo-count added to every transition cell before normalization.
pub const SEGMENT_SMOOTHING: f64 = 1e-3;
pub const KMEANS_RESTARTS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub segments: Vec<SegmentDescriptor>,
    /// Per sequence, per timestep cluster id.
    pub labels: Vec<Vec<usize>>,
    /// Munkres-matched label error when truth was supplied.
    pub error: Option<f64>,
    /// Fewer segments than requested clusters; every segment is its own cluster.
    pub degenerate: bool,
}

fn describe(states: &[usize], start: usize, end: usize, k: usize) -> Vec<f64> {
    if end - start < 2 {
        return vec![1.0 / k as f64; k * k];
    }
    let mut counts = vec![SEGMENT_SMOOTHING; k * k];
    for w in states[start..end].windows(2) {
        counts[w[0] * k + w[1]] += 1.0;
    }
    for row in counts.chunks_exact_mut(k) {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    counts
}

/// Segments from posterior boundaries, clustered by their empirical
/// transition matrices under the MAP state path.
pub fn label_from_posterior(
    stats: &[LocalStats],
    k: usize,
    n_labels: usize,
    threshold: f64,
    truth: Option<&[Vec<usize>]>,
    seed: u64,
) -> Result<Labeling> {
    if n_labels == 0 {
        return Err(Error::invalid("n_labels must be at least 1"));
    }
    let mut segments = Vec::new();
    for (si, s) in stats.iter().enumerate() {
        let states = s.map_states();
        let len = states.len();
        let mut start = 0;
        let cuts = inferred_boundaries(s, threshold).into_iter().chain(std::iter::once(len));
        for end in cuts {
            if end > start {
                segments.push(SegmentDescriptor {
                    sequence: si,
                    start,
                    end,
                    transitions: describe(&states, start, end, k),
                    cluster: 0,
                });
                start = end;
            }
        }
    }
    let degenerate = segments.len() < n_labels;
    if degenerate {
        log::warn!(
            "{} segments for {n_labels} labels; each segment becomes its own cluster",
            segments.len()
        );
        for (i, seg) in segments.iter_mut().enumerate() {
            seg.cluster = i;
        }
    } else {
        let points: Vec<Vec<f64>> = segments.iter().map(|s| s.transitions.clone()).collect();
        let km = kmeans(&points, n_labels, KMEANS_RESTARTS, seed);
        for (seg, c) in segments.iter_mut().zip(km.assignment) {
            seg.cluster = c;
        }
    }
    let mut labels: Vec<Vec<usize>> = stats.iter().map(|s| vec![0; s.len()]).collect();
    for seg in &segments {
        labels[seg.sequence][seg.start..seg.end].iter_mut().for_each(|l| *l = seg.cluster);
    }
    let error = match truth {
        Some(t) => Some(normalized_hamming(&t.concat(), &labels.concat())?),
        None => None,
    };
    Ok(Labeling {
        segments,
        labels,
        error,
        degenerate,
    })
}

/// Posterior inference followed by [`label_from_posterior`].
pub fn label_segments(
    g: &GlobalState,
    h: &Hyperparams,
    sequences: &[Sequence],
    n_labels: usize,
    truth: Option<&[Vec<usize>]>,
    seed: u64,
) -> Result<Labeling> {
    let stats = svi::posterior(g, h, sequences)?;
    label_from_posterior(&stats, g.k(), n_labels, 0.5, truth, seed)
}

/// Hamming distance of the MAP state path against true states.
pub fn posterior_hamming(stats: &[LocalStats], truth: &[Vec<usize>]) -> Result<f64> {
    let inferred: Vec<usize> = stats.iter().flat_map(|s| s.map_states()).collect();
    normalized_hamming(&truth.concat(), &inferred)
}
