//! The on-disk workflow as a library user would run it: write a synthetic
//! corpus to CSV, read it back, fit, save and reload the model, and score
//! the held-out split with the reloaded model.
//!
//! Usage: `cargo run --release --example file_pipeline -- [out_dir]`

use std::path::PathBuf;

use sihmm::config::ModelSection;
use sihmm::data::DataSummary;
use sihmm::eval;
use sihmm::io::{self, ModelFile, Truth};
use sihmm::svi::{self, SviConfig};
use sihmm::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("sihmm_pipeline"), PathBuf::from);
    std::fs::create_dir_all(&dir)?;

    let corpus = synth::generate(&SynthConfig::default())?;
    io::write_data_csv(&dir.join("data.csv"), &corpus.train.sequences)?;
    io::write_data_csv(&dir.join("heldout.csv"), &corpus.heldout.sequences)?;
    io::write_truth_csv(&dir.join("truth.csv"), &Truth::from(&corpus.train))?;

    let train = io::read_data_csv(&dir.join("data.csv"))?;
    let heldout = io::read_data_csv(&dir.join("heldout.csv"))?;
    let truth = io::read_truth_csv(&dir.join("truth.csv"))?;
    assert_eq!(train, corpus.train.sequences, "CSV round trip is exact");

    let h = ModelSection::default().hyperparams(&DataSummary::from_sequences(&train)?)?;
    let cfg = SviConfig {
        passes: 20,
        ..SviConfig::default()
    };
    let trace = svi::fit(&train, &h, &cfg)?;
    let path = dir.join("model.json");
    io::save_model(&path, &ModelFile::new(h, trace.state))?;

    let loaded = io::load_model(&path)?;
    let stats = svi::posterior(&loaded.state, &loaded.hyperparams, &train)?;
    let hamming = eval::posterior_hamming(&stats, &truth.states)?;
    let pll = eval::predictive_loglik(&loaded.state, &loaded.hyperparams, &heldout)?;
    println!("files in {}", dir.display());
    println!(
        "final ELBO {:.2}, hamming {hamming:.4}, held-out LL {pll:.2}",
        trace.final_elbo
    );
    Ok(())
}
