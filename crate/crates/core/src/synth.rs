//! Multi-regime synthetic sequences with known states, segment starts and
//! regime labels.
//!
//! A single walk runs over `n_regimes` block transition matrices. At every
//! step after the first, with probability `hazard` the walk jumps to a
//! uniformly chosen different regime and a uniform state inside it;
//! otherwise it moves within the current regime. The walk is cut into
//! contiguous training sequences, and a held-out continuation is generated
//! from where training ends.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Sequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_regimes: usize,
    pub states_per_regime: usize,
    pub total_points: usize,
    pub hazard: f64,
    /// Symmetric Dirichlet concentration of each transition row.
    pub row_concentration: f64,
    /// Pseudo-mass added to the diagonal before row normalization.
    pub self_bias: f64,
    /// Variance of the zero-mean normal prior on emission means.
    pub mean_prior_var: f64,
    /// Inverse-gamma shape and scale of the emission variances.
    pub var_shape: f64,
    pub var_scale: f64,
    pub n_sequences: usize,
    /// Length of the held-out continuation.
    pub heldout_points: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_regimes: 3,
            states_per_regime: 3,
            total_points: 5000,
            hazard: 0.05,
            row_concentration: 1.0,
            self_bias: 1.0,
            mean_prior_var: 10.0,
            var_shape: 2.0,
            var_scale: 1.0,
            n_sequences: 20,
            heldout_points: 750,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_regimes == 0 || self.states_per_regime == 0 || self.n_sequences == 0 {
            return Err(Error::invalid("regime, state and sequence counts must be positive"));
        }
        if self.total_points < self.n_sequences {
            return Err(Error::invalid(format!(
                "{} points cannot fill {} sequences",
                self.total_points, self.n_sequences
            )));
        }
        if !(0.0..=1.0).contains(&self.hazard) {
            return Err(Error::invalid(format!("hazard must lie in [0, 1], got {}", self.hazard)));
        }
        for (name, v) in [
            ("row_concentration", self.row_concentration),
            ("mean_prior_var", self.mean_prior_var),
            ("var_shape", self.var_shape),
            ("var_scale", self.var_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.self_bias >= 0.0) {
            return Err(Error::invalid("self_bias must be >= 0"));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_regimes * self.states_per_regime
    }
}

/// Generator parameters drawn once per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDraws {
    /// One row-major k×k matrix per regime.
    pub regime_trans: Vec<Vec<f64>>,
    /// Per global state.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Observations with per-timestep ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub sequences: Vec<Sequence>,
    /// Global state index `regime · k + local`.
    pub states: Vec<Vec<usize>>,
    /// True at the first step of every regime run and of every sequence.
    pub segment_start: Vec<Vec<bool>>,
    pub regimes: Vec<Vec<usize>>,
}

impl LabeledDataset {
    pub fn total_points(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    pub fn flat_states(&self) -> Vec<usize> {
        self.states.concat()
    }

    pub fn flat_regimes(&self) -> Vec<usize> {
        self.regimes.concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub train: LabeledDataset,
    pub heldout: LabeledDataset,
    pub draws: SynthDraws,
}

/// One step of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkStep {
    pub regime: usize,
    pub state: usize,
    pub switched: bool,
}

fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn draw_parameters<R: Rng>(c: &SynthConfig, rng: &mut R) -> SynthDraws {
    let k = c.states_per_regime;
    let gamma = Gamma::new(c.row_concentration, 1.0).expect("validated concentration");
    let regime_trans = (0..c.n_regimes)
        .map(|_| {
            let mut a = vec![0.0; k * k];
            for i in 0..k {
                let row = &mut a[i * k..(i + 1) * k];
                row.iter_mut().for_each(|v| *v = gamma.sample(rng));
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= total);
                row[i] += c.self_bias;
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= total);
            }
            a
        })
        .collect();
    let mean_dist = Normal::new(0.0, c.mean_prior_var.sqrt()).expect("validated variance");
    let precision = Gamma::new(c.var_shape, 1.0 / c.var_scale).expect("validated shape");
    let n = c.n_states();
    let means = (0..n).map(|_| mean_dist.sample(rng)).collect();
    let variances = (0..n).map(|_| 1.0 / precision.sample(rng)).collect();
    SynthDraws {
        regime_trans,
        means,
        variances,
    }
}

/// Advances the walk by `steps`, starting after `prev` (or fresh when `None`).
pub fn simulate_walk<R: Rng>(
    c: &SynthConfig,
    draws: &SynthDraws,
    prev: Option<WalkStep>,
    steps: usize,
    rng: &mut R,
) -> Vec<WalkStep> {
    let k = c.states_per_regime;
    let n = c.n_regimes;
    let mut out = Vec::with_capacity(steps);
    let mut cur = prev;
    for _ in 0..steps {
        let next = match cur {
            None => WalkStep {
                regime: rng.random_range(0..n),
                state: rng.random_range(0..k),
                switched: true,
            },
            Some(p) => {
                if c.hazard > 0.0 && rng.random::<f64>() < c.hazard {
                    let regime = if n > 1 {
                        let r = rng.random_range(0..n - 1);
                        if r >= p.regime {
                            r + 1
                        } else {
                            r
                        }
                    } else {
                        p.regime
                    };
                    WalkStep {
                        regime,
                        state: rng.random_range(0..k),
                        switched: true,
                    }
                } else {
                    let row = &draws.regime_trans[p.regime][p.state * k..(p.state + 1) * k];
                    WalkStep {
                        regime: p.regime,
                        state: sample_categorical(rng, row),
                        switched: false,
                    }
                }
            }
        };
        out.push(next);
        cur = Some(next);
    }
    out
}

fn emit<R: Rng>(c: &SynthConfig, draws: &SynthDraws, walk: &[WalkStep], rng: &mut R) -> Vec<f64> {
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    walk.iter()
        .map(|w| {
            let g = w.regime * c.states_per_regime + w.state;
            draws.means[g] + draws.variances[g].sqrt() * std_normal.sample(rng)
        })
        .collect()
}

fn label(c: &SynthConfig, walk: &[WalkStep], ys: &[f64], lengths: &[usize]) -> Result<LabeledDataset> {
    let mut out = LabeledDataset::default();
    let mut offset = 0;
    for &len in lengths {
        let part = &walk[offset..offset + len];
        out.sequences.push(Sequence::from_scalars(ys[offset..offset + len].to_vec())?);
        out.states.push(part.iter().map(|w| w.regime * c.states_per_regime + w.state).collect());
        out.segment_start.push(
            part.iter()
                .enumerate()
                .map(|(t, w)| t == 0 || w.switched)
                .collect(),
        );
        out.regimes.push(part.iter().map(|w| w.regime).collect());
        offset += len;
    }
    Ok(out)
}

/// Contiguous split of `total` points into `parts` near-equal lengths.
pub fn split_lengths(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// Generates the training corpus and the held-out continuation.
pub fn generate(c: &SynthConfig) -> Result<SynthOutput> {
    c.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let draws = draw_parameters(c, &mut rng);
    let walk = simulate_walk(c, &draws, None, c.total_points, &mut rng);
    let ys = emit(c, &draws, &walk, &mut rng);
    let train = label(c, &walk, &ys, &split_lengths(c.total_points, c.n_sequences))?;

    let heldout = if c.heldout_points > 0 {
        let cont = simulate_walk(c, &draws, walk.last().copied(), c.heldout_points, &mut rng);
        let ys = emit(c, &draws, &cont, &mut rng);
        label(c, &cont, &ys, &[c.heldout_points])?
    } else {
        LabeledDataset::default()
    };
    Ok(SynthOutput {
        train,
        heldout,
        draws,
    })
}

/// Global (n·k)×(n·k) transition matrix of the walk: (1 − h)·A_r inside
/// each regime block and h spread uniformly over the other regimes' states.
pub fn true_transition_render(c: &SynthConfig, draws: &SynthDraws) -> Vec<f64> {
    let k = c.states_per_regime;
    let n = c.n_regimes;
    let size = n * k;
    let h = c.hazard;
    let mut out = vec![0.0; size * size];
    for r in 0..n {
        let a = &draws.regime_trans[r];
        for i in 0..k {
            let row = &mut out[(r * k + i) * size..(r * k + i + 1) * size];
            for j in 0..k {
                row[r * k + j] = (1.0 - h) * a[i * k + j];
            }
            if n > 1 {
                let off = h / ((n - 1) * k) as f64;
                for (col, v) in row.iter_mut().enumerate() {
                    if col / k != r {
                        *v = off;
                    }
                }
            } else {
                for v in row.iter_mut() {
                    *v += h / k as f64;
                }
            }
        }
    }
    out
}
