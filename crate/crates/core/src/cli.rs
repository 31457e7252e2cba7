//! `sihmm` command-line surface: `synth`, `fit`, `eval`, `sweep`.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error. Every output
//! except the `*_meta.json` files is byte-reproducible for a fixed seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::{DataSummary, Sequence};
use crate::error::{Error, Result};
use crate::eval::{self, BoundaryScore};
use crate::io::{self, ModelFile, Truth};
use crate::model::{mean_transition, GlobalState, Hyperparams};
use crate::svi;
use crate::sweep::{self, SweepData};
use crate::synth;

#[derive(Debug, Parser)]
#[command(name = "sihmm", version, about = "Segmented infinite HMM with stochastic variational inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the command's configuration section.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Log errors only.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic corpus and its held-out continuation.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model to a data CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score a fitted model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Truth CSV for the sequences in `--data`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Held-out data CSV for the predictive log-likelihood.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        n_labels: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Grid search with selection by final ELBO.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        heldout: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Synth { common }
            | Command::Fit { common, .. }
            | Command::Eval { common, .. }
            | Command::Sweep { common, .. } => common,
        }
    }
}

fn require_exists(paths: &[Option<&Path>]) -> Result<()> {
    for p in paths.iter().flatten() {
        if !p.exists() {
            return Err(Error::io(*p, std::io::Error::from(std::io::ErrorKind::NotFound)));
        }
    }
    Ok(())
}

fn load_config(common: &Common) -> Result<RunConfig> {
    RunConfig::load_or_default(common.config.as_deref())
}

fn check_truth(truth: &Truth, data: &[Sequence]) -> Result<()> {
    let lens: Vec<usize> = data.iter().map(Sequence::len).collect();
    if truth.lengths() != lens {
        return Err(Error::invalid("truth CSV does not match the data CSV sequence lengths"));
    }
    Ok(())
}

pub fn cmd_synth(common: &Common) -> Result<()> {
    require_exists(&[common.config.as_deref()])?;
    let mut cfg = load_config(common)?;
    if let Some(seed) = common.seed {
        cfg.synth.seed = seed;
    }
    let out = synth::generate(&cfg.synth)?;
    let dir = &common.out;
    io::write_data_csv(&dir.join("data.csv"), &out.train.sequences)?;
    io::write_truth_csv(&dir.join("truth.csv"), &Truth::from(&out.train))?;
    if !out.heldout.sequences.is_empty() {
        io::write_data_csv(&dir.join("heldout.csv"), &out.heldout.sequences)?;
        io::write_truth_csv(&dir.join("heldout_truth.csv"), &Truth::from(&out.heldout))?;
    }
    #[derive(Serialize)]
    struct Generator<'a> {
        draws: &'a synth::SynthDraws,
        /// Row-major (n·k)×(n·k).
        true_transition: Vec<f64>,
    }
    io::write_json(
        &dir.join("generator.json"),
        &Generator {
            draws: &out.draws,
            true_transition: synth::true_transition_render(&cfg.synth, &out.draws),
        },
    )?;
    io::write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    log::info!(
        "wrote {} points in {} sequences to {}",
        out.train.total_points(),
        out.train.sequences.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct FitSummary {
    final_elbo: f64,
    updates: usize,
    k: usize,
    dim: usize,
}

#[derive(Serialize)]
struct FitMeta {
    wall_seconds: f64,
}

pub fn cmd_fit(data_path: &Path, common: &Common) -> Result<()> {
    require_exists(&[Some(data_path), common.config.as_deref()])?;
    let cfg = load_config(common)?;
    let data = io::read_data_csv(data_path)?;
    let summary = DataSummary::from_sequences(&data)?;
    let h = cfg.model.hyperparams(&summary)?;
    let mut svi_cfg = cfg.svi.svi_config()?;
    if let Some(seed) = common.seed {
        svi_cfg.seed = seed;
    }
    let trace = svi::fit(&data, &h, &svi_cfg)?;
    let dir = &common.out;
    io::save_model(&dir.join("model.json"), &ModelFile::new(h, trace.state.clone()))?;
    io::write_text(&dir.join("trace.jsonl"), &io::json_lines(&trace.records))?;
    io::write_json(
        &dir.join("fit_summary.json"),
        &FitSummary {
            final_elbo: trace.final_elbo,
            updates: trace.records.len(),
            k: trace.state.k(),
            dim: trace.state.dim(),
        },
    )?;
    io::write_json(
        &dir.join("fit_meta.json"),
        &FitMeta {
            wall_seconds: trace.wall_seconds,
        },
    )?;
    log::info!(
        "{} updates, final ELBO {:.4}, {:.2}s",
        trace.records.len(),
        trace.final_elbo,
        trace.wall_seconds
    );
    Ok(())
}

/// Scores written by `eval`. Supervised fields are omitted without truth.
#[derive(Debug, Serialize)]
pub struct Metrics {
    pub n_sequences: usize,
    pub n_points: usize,
    pub elbo: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamming: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_f1: Option<BoundaryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labeling_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictive_ll: Option<f64>,
    pub threshold: f64,
    pub inferred_boundaries: Vec<Vec<usize>>,
    /// Per sequence, q(s_t = 1) for every step.
    pub segment_probability: Vec<Vec<f64>>,
    pub map_states: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_labels: Option<Vec<Vec<usize>>>,
    /// Row-major K×K posterior-mean transition matrix.
    pub mean_transition: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct BoundaryReport {
    pub window: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub struct EvalInputs<'a> {
    pub data: &'a [Sequence],
    pub truth: Option<&'a Truth>,
    pub heldout: Option<&'a [Sequence]>,
    pub threshold: f64,
    pub n_labels: usize,
    pub window: usize,
    pub seed: u64,
}

pub fn evaluate(g: &GlobalState, h: &Hyperparams, inp: &EvalInputs<'_>) -> Result<Metrics> {
    if !(0.0..=1.0).contains(&inp.threshold) {
        return Err(Error::invalid(format!("threshold must lie in [0, 1], got {}", inp.threshold)));
    }
    if let Some(t) = inp.truth {
        check_truth(t, inp.data)?;
    }
    let stats = svi::posterior(g, h, inp.data)?;
    let all: Vec<&Sequence> = inp.data.iter().collect();
    let elbo = svi::elbo_estimate(g, h, &all, 1.0)?;
    let boundaries: Vec<Vec<usize>> = stats.iter().map(|s| eval::inferred_boundaries(s, inp.threshold)).collect();

    let hamming = match inp.truth {
        Some(t) => Some(eval::posterior_hamming(&stats, &t.states)?),
        None => None,
    };
    let boundary_f1 = inp.truth.map(|t| {
        let lens: Vec<usize> = inp.data.iter().map(Sequence::len).collect();
        let per_seq: Vec<Vec<usize>> = t.segment_start.iter().map(|f| eval::true_boundaries(f)).collect();
        let truth_b = flatten_positions(&per_seq, &lens);
        let inferred = flatten_positions(&boundaries, &lens);
        let BoundaryScore {
            precision,
            recall,
            f1,
        } = eval::boundary_f1(&truth_b, &inferred, inp.window);
        BoundaryReport {
            window: inp.window,
            precision,
            recall,
            f1,
        }
    });
    let labeling = if inp.n_labels > 0 {
        let truth_regimes = inp.truth.map(|t| t.regimes.as_slice());
        Some(eval::label_from_posterior(
            &stats,
            g.k(),
            inp.n_labels,
            inp.threshold,
            truth_regimes,
            inp.seed,
        )?)
    } else {
        None
    };
    let predictive_ll = match inp.heldout {
        Some(held) => Some(eval::predictive_loglik(g, h, held)?),
        None => None,
    };
    Ok(Metrics {
        n_sequences: inp.data.len(),
        n_points: inp.data.iter().map(Sequence::len).sum(),
        elbo,
        hamming,
        boundary_f1,
        labeling_error: labeling.as_ref().and_then(|l| l.error),
        predictive_ll,
        threshold: inp.threshold,
        inferred_boundaries: boundaries,
        segment_probability: stats.iter().map(|s| s.seg_marginal.clone()).collect(),
        map_states: stats.iter().map(|s| s.map_states()).collect(),
        segment_labels: labeling.map(|l| l.labels),
        mean_transition: mean_transition(g, h).trans,
    })
}

/// Per-sequence positions shifted onto one time axis with a gap wider
/// than any matching window, so boundaries never match across sequences.
fn flatten_positions(per_seq: &[Vec<usize>], lens: &[usize]) -> Vec<usize> {
    let mut base = 0;
    let mut out = Vec::new();
    for (b, len) in per_seq.iter().zip(lens) {
        out.extend(b.iter().map(|x| x + base));
        base += len + BOUNDARY_GAP;
    }
    out
}

/// Spacing between sequences on the global axis; exceeds any sane window.
const BOUNDARY_GAP: usize = 1 << 20;

pub fn cmd_eval(
    model_path: &Path,
    data_path: &Path,
    truth_path: Option<&Path>,
    heldout_path: Option<&Path>,
    threshold: Option<f64>,
    n_labels: Option<usize>,
    common: &Common,
) -> Result<()> {
    require_exists(&[
        Some(model_path),
        Some(data_path),
        truth_path,
        heldout_path,
        common.config.as_deref(),
    ])?;
    let cfg = load_config(common)?;
    cfg.eval.validate()?;
    let model = io::load_model(model_path)?;
    let data = io::read_data_csv(data_path)?;
    let truth = truth_path.map(io::read_truth_csv).transpose()?;
    let heldout = heldout_path.map(io::read_data_csv).transpose()?;
    let metrics = evaluate(
        &model.state,
        &model.hyperparams,
        &EvalInputs {
            data: &data,
            truth: truth.as_ref(),
            heldout: heldout.as_deref(),
            threshold: threshold.unwrap_or(cfg.eval.threshold),
            n_labels: n_labels.unwrap_or(cfg.eval.n_labels),
            window: cfg.eval.boundary_window,
            seed: common.seed.unwrap_or(cfg.eval.seed),
        },
    )?;
    io::write_json(&common.out.join("metrics.json"), &metrics)?;
    if let Some(hm) = metrics.hamming {
        log::info!("hamming {hm:.4}");
    }
    Ok(())
}

pub fn cmd_sweep(
    data_path: &Path,
    truth_path: Option<&Path>,
    heldout_path: Option<&Path>,
    jobs: usize,
    common: &Common,
) -> Result<()> {
    require_exists(&[Some(data_path), truth_path, heldout_path, common.config.as_deref()])?;
    let mut cfg = load_config(common)?;
    if let Some(seed) = common.seed {
        cfg.sweep.master_seed = seed;
    }
    let data = io::read_data_csv(data_path)?;
    let truth = truth_path.map(io::read_truth_csv).transpose()?;
    let heldout = heldout_path.map(io::read_data_csv).transpose()?;
    let outcome = sweep::run_sweep(
        &cfg.model,
        &cfg.svi,
        &cfg.sweep,
        &SweepData {
            train: &data,
            truth: truth.as_ref(),
            heldout: heldout.as_deref(),
        },
        jobs,
    )?;
    let dir = &common.out;
    io::write_json(&dir.join("sweep.json"), &outcome.result)?;
    io::write_json(&dir.join("sweep_meta.json"), &outcome.timings)?;
    match (&outcome.best, outcome.result.selected_cell()) {
        (Some((h, state)), Some(cell)) => {
            io::save_model(&dir.join("best_model.json"), &ModelFile::new(h.clone(), state.clone()))?;
            log::info!("selected cell {} with ELBO {:?}", cell.index, cell.final_elbo);
            Ok(())
        }
        _ => Err(Error::invalid("every sweep cell failed")),
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { common } => cmd_synth(common),
        Command::Fit { data, common } => cmd_fit(data, common),
        Command::Eval {
            model,
            data,
            truth,
            heldout,
            threshold,
            n_labels,
            common,
        } => cmd_eval(
            model,
            data,
            truth.as_deref(),
            heldout.as_deref(),
            *threshold,
            *n_labels,
            common,
        ),
        Command::Sweep {
            data,
            truth,
            heldout,
            jobs,
            common,
        } => cmd_sweep(data, truth.as_deref(), heldout.as_deref(), *jobs, common),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        2
    } else {
        1
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.command.common().quiet { "error" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
