//! Hyperparameter grid search with selection by final ELBO.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EmissionSection, ModelSection, SviSection, SweepSection};
use crate::data::{DataSummary, Sequence};
use crate::error::{Error, Result};
use crate::eval;
use crate::io::Truth;
use crate::model::{GlobalState, Hyperparams};
use crate::svi;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Inverse-gamma shape and rate of the emission variance prior.
    pub shape: f64,
    pub rate: f64,
}

/// One fitted grid cell. Exactly one of `final_elbo` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub params: CellParams,
    pub seed: u64,
    pub final_elbo: Option<f64>,
    pub hamming: Option<f64>,
    pub predictive_ll: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    /// Index of the cell with the highest final ELBO.
    pub selected: Option<usize>,
}

impl SweepResult {
    pub fn selected_cell(&self) -> Option<&SweepCell> {
        self.selected.map(|i| &self.cells[i])
    }
}

/// Wall-clock seconds per cell, kept apart from the reproducible result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTimings {
    pub cell_seconds: Vec<f64>,
    pub total_seconds: f64,
    pub jobs: usize,
}

pub struct SweepOutcome {
    pub result: SweepResult,
    pub timings: SweepTimings,
    /// Hyperparameters and fitted state of the selected cell.
    pub best: Option<(Hyperparams, GlobalState)>,
}

pub struct SweepData<'a> {
    pub train: &'a [Sequence],
    pub truth: Option<&'a Truth>,
    pub heldout: Option<&'a [Sequence]>,
}

/// Grid cells in nested order k, α, γ, shape, rate, seed. Cell `i` fits
/// with seed `master_seed + i`.
pub fn grid_cells(sweep: &SweepSection) -> Vec<(CellParams, u64)> {
    let mut out = Vec::new();
    for &k in &sweep.k {
        for &alpha in &sweep.alpha {
            for &gamma in &sweep.gamma {
                for &shape in &sweep.shape {
                    for &rate in &sweep.rate {
                        for _ in 0..sweep.seeds {
                            let seed = sweep.master_seed.wrapping_add(out.len() as u64);
                            out.push((
                                CellParams {
                                    k,
                                    alpha,
                                    gamma,
                                    shape,
                                    rate,
                                },
                                seed,
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Model section for one cell: grid values replace K, α, γ and the NIG
/// variance prior of `base`.
pub fn cell_model(base: &ModelSection, p: &CellParams) -> Result<ModelSection> {
    let mut m = base.clone();
    m.k = p.k;
    m.alpha = p.alpha;
    m.gamma = p.gamma;
    m.emission = match &base.emission {
        EmissionSection::Nig { mean, mean_var, .. } => EmissionSection::Nig {
            mean: *mean,
            kappa: None,
            shape: p.shape,
            rate: p.rate,
            mean_var: *mean_var,
        },
        EmissionSection::Niw { .. } => {
            return Err(Error::Config(
                "sweep grids over the inverse-gamma prior require the nig emission family".into(),
            ))
        }
    };
    Ok(m)
}

/// Highest ELBO wins; ties go to lower K, then lexicographically smaller
/// (α, γ, shape, rate, seed), then lower index.
pub fn select(cells: &[SweepCell]) -> Option<usize> {
    let key = |c: &SweepCell| {
        (
            c.params.k,
            c.params.alpha,
            c.params.gamma,
            c.params.shape,
            c.params.rate,
            c.seed,
            c.index,
        )
    };
    let mut best: Option<(&SweepCell, f64)> = None;
    for c in cells.iter().filter(|c| c.error.is_none()) {
        let Some(elbo) = c.final_elbo.filter(|e| e.is_finite()) else {
            continue;
        };
        let wins = match best {
            None => true,
            Some((b, be)) => elbo > be || (elbo == be && key(c).partial_cmp(&key(b)).is_some_and(|o| o.is_lt())),
        };
        if wins {
            best = Some((c, elbo));
        }
    }
    best.map(|(c, _)| c.index)
}

/// Final ELBO, Hamming, held-out LL and the fitted model of one cell.
type CellFit = (f64, Option<f64>, Option<f64>, Hyperparams, GlobalState);

struct CellRun {
    cell: SweepCell,
    seconds: f64,
    fitted: Option<(Hyperparams, GlobalState)>,
}

fn run_cell(
    index: usize,
    params: CellParams,
    seed: u64,
    model: &ModelSection,
    svi_section: &SviSection,
    summary: &DataSummary,
    data: &SweepData<'_>,
) -> CellRun {
    let start = Instant::now();
    let outcome = (|| -> Result<CellFit> {
        let h = cell_model(model, &params)?.hyperparams(summary)?;
        let mut cfg = svi_section.svi_config()?;
        cfg.seed = seed;
        let trace = svi::fit(data.train, &h, &cfg)?;
        if !trace.final_elbo.is_finite() {
            return Err(Error::Domain("final ELBO is not finite".into()));
        }
        let hamming = match data.truth {
            Some(t) => {
                let stats = svi::posterior(&trace.state, &h, data.train)?;
                Some(eval::posterior_hamming(&stats, &t.states)?)
            }
            None => None,
        };
        let pll = match data.heldout {
            Some(held) => Some(eval::predictive_loglik(&trace.state, &h, held)?),
            None => None,
        };
        Ok((trace.final_elbo, hamming, pll, h, trace.state))
    })();
    let seconds = start.elapsed().as_secs_f64();
    let mut cell = SweepCell {
        index,
        params,
        seed,
        final_elbo: None,
        hamming: None,
        predictive_ll: None,
        error: None,
    };
    let fitted = match outcome {
        Ok((elbo, hamming, pll, h, state)) => {
            cell.final_elbo = Some(elbo);
            cell.hamming = hamming;
            cell.predictive_ll = pll;
            Some((h, state))
        }
        Err(e) => {
            log::warn!("sweep cell {index} failed: {e}");
            cell.error = Some(e.to_string());
            None
        }
    };
    log::info!(
        "cell {index}: K={} alpha={} gamma={} shape={} rate={} seed={seed} elbo={:?}",
        params.k,
        params.alpha,
        params.gamma,
        params.shape,
        params.rate,
        cell.final_elbo
    );
    CellRun { cell, seconds, fitted }
}

/// Fits every cell on a pool of `jobs` workers (0 = all cores).
pub fn run_sweep(
    model: &ModelSection,
    svi_section: &SviSection,
    sweep: &SweepSection,
    data: &SweepData<'_>,
    jobs: usize,
) -> Result<SweepOutcome> {
    sweep.validate()?;
    if let Some(t) = data.truth {
        let lens: Vec<usize> = data.train.iter().map(Sequence::len).collect();
        if t.lengths() != lens {
            return Err(Error::invalid("truth table does not match the training sequences"));
        }
    }
    let summary = DataSummary::from_sequences(data.train)?;
    let cells = grid_cells(sweep);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let runs: Vec<CellRun> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, (p, seed))| run_cell(i, *p, *seed, model, svi_section, &summary, data))
            .collect()
    });
    let total_seconds = start.elapsed().as_secs_f64();
    let mut out_cells = Vec::with_capacity(runs.len());
    let mut cell_seconds = Vec::with_capacity(runs.len());
    let mut fitted = Vec::with_capacity(runs.len());
    for r in runs {
        out_cells.push(r.cell);
        cell_seconds.push(r.seconds);
        fitted.push(r.fitted);
    }
    let selected = select(&out_cells);
    let best = selected.and_then(|i| fitted[i].take());
    Ok(SweepOutcome {
        result: SweepResult {
            cells: out_cells,
            selected,
        },
        timings: SweepTimings {
            cell_seconds,
            total_seconds,
            jobs: pool.current_num_threads(),
        },
        best,
    })
}
