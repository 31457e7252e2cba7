//! Fits the default synthetic corpus, then labels inferred segments by
//! clustering their transition matrices into regimes, at several boundary
//! thresholds. Reports label error against the true regimes and boundary F1.
//!
//! Usage: `cargo run --release --example regime_labeling -- [passes] [seed]`

use sihmm::config::nig_kappa_for;
use sihmm::eval;
use sihmm::expfam::NigParams;
use sihmm::model::Hyperparams;
use sihmm::svi::{self, SviConfig};
use sihmm::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let passes: usize = args.first().map_or(Ok(100), |s| s.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(0), |s| s.parse())?;

    let config = SynthConfig::default();
    let data = synth::generate(&config)?;
    let train = &data.train.sequences;
    let prior = NigParams {
        mean: 0.0,
        kappa: nig_kappa_for(1.0, 1.0, 10.0),
        shape: 1.0,
        rate: 1.0,
    };
    let h = Hyperparams::univariate(20, 5.0, 5.0, prior);
    let cfg = SviConfig {
        passes,
        seed,
        ..SviConfig::default()
    };
    let trace = svi::fit(train, &h, &cfg)?;
    let stats = svi::posterior(&trace.state, &h, train)?;
    let true_cuts: Vec<usize> = data
        .train
        .segment_start
        .iter()
        .flat_map(|s| eval::true_boundaries(s))
        .collect();
    println!(
        "{passes} passes, final ELBO {:.2}, {} true boundaries",
        trace.final_elbo,
        true_cuts.len()
    );

    println!("{:>9} {:>9} {:>11} {:>8}", "threshold", "segments", "label error", "F1");
    for threshold in [0.5, 0.3, 0.1] {
        let labeling = eval::label_from_posterior(
            &stats,
            h.k,
            config.n_regimes,
            threshold,
            Some(&data.train.regimes),
            seed,
        )?;
        let inferred: Vec<usize> = stats.iter().flat_map(|s| eval::inferred_boundaries(s, threshold)).collect();
        let score = eval::boundary_f1(&true_cuts, &inferred, 5);
        println!(
            "{threshold:>9} {:>9} {:>11.4} {:>8.3}",
            labeling.segments.len(),
            labeling.error.unwrap_or(f64::NAN),
            score.f1
        );
    }
    Ok(())
}
