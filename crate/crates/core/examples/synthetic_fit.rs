//! Fits the default synthetic corpus once and reports state recovery,
//! held-out predictive log-likelihood and runtime.
//!
//! Usage: `cargo run --release --example synthetic_fit -- [variant] [K] [alpha] [gamma] [shape] [rate] [seed]`

use sihmm::eval;
use sihmm::expfam::NigParams;
use sihmm::model::{FeatureMap, Hyperparams, Variant};
use sihmm::svi::{self, SviConfig};
use sihmm::synth::{self, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let variant = Variant::parse(&arg(0, "feature-independent")).ok_or("unknown variant")?;
    let k: usize = arg(1, "20").parse()?;
    let alpha: f64 = arg(2, "5").parse()?;
    let gamma: f64 = arg(3, "5").parse()?;
    let shape: f64 = arg(4, "1").parse()?;
    let rate: f64 = arg(5, "1").parse()?;
    let seed: u64 = arg(6, "0").parse()?;

    let data = synth::generate(&SynthConfig::default())?;
    let prior = NigParams {
        mean: 0.0,
        kappa: rate / (shape + 1.0) / 10.0,
        shape,
        rate,
    };
    let mut h = Hyperparams::univariate(k, alpha, gamma, prior);
    h.variant = variant;
    if variant == Variant::FeatureBased {
        h.features = FeatureMap::Raw;
    }
    let cfg = SviConfig {
        seed,
        ..SviConfig::default()
    };
    let trace = svi::fit(&data.train.sequences, &h, &cfg)?;
    let stats = svi::posterior(&trace.state, &h, &data.train.sequences)?;
    let hamming = eval::posterior_hamming(&stats, &data.train.states)?;
    let pll = eval::predictive_loglik(&trace.state, &h, &data.heldout.sequences)?;
    println!(
        "variant={} K={k} alpha={alpha} gamma={gamma} a={shape} b={rate} seed={seed}",
        variant.as_str()
    );
    println!(
        "final_elbo={:.3} hamming={hamming:.4} heldout_ll={pll:.2} seconds={:.2}",
        trace.final_elbo, trace.wall_seconds
    );
    Ok(())
}
