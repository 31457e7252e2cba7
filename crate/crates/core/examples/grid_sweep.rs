//! Grid search on the synthetic corpus with ELBO-based selection.
//!
//! Usage: `cargo run --release --example grid_sweep -- [variant] [seeds per cell] [dataset seed]`

use sihmm::config::{ModelSection, SviSection, SweepSection};
use sihmm::io::Truth;
use sihmm::model::Variant;
use sihmm::sweep::{run_sweep, SweepData};
use sihmm::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant = Variant::parse(args.first().map_or("feature-independent", String::as_str)).ok_or("unknown variant")?;
    let seeds: usize = args.get(1).map_or(Ok(10), |s| s.parse())?;
    let data_seed: u64 = args.get(2).map_or(Ok(0), |s| s.parse())?;

    let corpus = synth::generate(&SynthConfig {
        seed: data_seed,
        ..SynthConfig::default()
    })?;
    let truth = Truth::from(&corpus.train);
    let model = ModelSection {
        variant,
        ..ModelSection::default()
    };
    let grid = SweepSection {
        seeds,
        ..SweepSection::default()
    };
    let data = SweepData {
        train: &corpus.train.sequences,
        truth: Some(&truth),
        heldout: Some(&corpus.heldout.sequences),
    };
    let outcome = run_sweep(&model, &SviSection::default(), &grid, &data, 0)?;
    let cells = &outcome.result.cells;
    let best = outcome.result.selected_cell().ok_or("every cell failed")?;
    let min_ham = cells.iter().filter_map(|c| c.hamming).fold(f64::INFINITY, f64::min);
    println!(
        "{} cells in {:.1}s; best-ELBO cell {}: K={} alpha={} gamma={} shape={} rate={} seed={}",
        cells.len(),
        outcome.timings.total_seconds,
        best.index,
        best.params.k,
        best.params.alpha,
        best.params.gamma,
        best.params.shape,
        best.params.rate,
        best.seed
    );
    println!(
        "elbo={:.2} hamming={:.4} heldout_ll={:.2} (lowest hamming over all cells {min_ham:.4})",
        best.final_elbo.unwrap_or(f64::NAN),
        best.hamming.unwrap_or(f64::NAN),
        best.predictive_ll.unwrap_or(f64::NAN)
    );
    Ok(())
}
