//! Runs the segmented forward-backward pass on a random tilted model,
//! compares the scaled recursion with the log-domain one, and prints the
//! instrumented operation counts next to the dense 2K-state reference.
//!
//! Usage: `cargo run --release --example message_passing -- [K] [T] [seed]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sihmm::messages;
use sihmm::model::{Segmentation, TiltedModel};

fn ln_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|v| (v / total).ln()).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let k: usize = arg(0, "8").parse()?;
    let t: usize = arg(1, "500").parse()?;
    let seed: u64 = arg(2, "0").parse()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ln_trans: Vec<f64> = (0..k).flat_map(|_| ln_simplex(&mut rng, k)).collect();
    let ln_init = ln_simplex(&mut rng, k);
    let ln_lik: Vec<f64> = (0..t * k).map(|_| rng.random_range(-8.0..0.0)).collect();
    let p: Vec<f64> = (0..t * k).map(|_| rng.random_range(0.001..0.2)).collect();
    let seg = Segmentation::LogProbs {
        ln_p: p.iter().map(|v| v.ln()).collect(),
        ln_q: p.iter().map(|v| (1.0 - v).ln()).collect(),
    };
    let model = TiltedModel::new(k, ln_trans, ln_init, ln_lik, seg)?;

    let (msg, stats) = messages::infer(&model);
    let reference = messages::log_domain_messages(&model);
    let expected_boundaries: f64 = stats.seg_marginal.iter().sum();
    println!("K={k} T={t}: ln Z = {:.6} (log-domain {:.6})", msg.ln_z(), reference.ln_z());
    println!("expected number of segment boundaries {expected_boundaries:.2}");
    println!(
        "boundaries with q(s_t=1) > 0.5: {:?}",
        messages::segment_boundaries(&stats.seg_marginal, 0.5)
    );

    println!("{:>4} {:>14} {:>14} {:>14}", "K", "core ops", "2T(2K^2+3K)", "dense 2Kx2K");
    for kk in [2, 4, 6, 8, 16, 32] {
        let core = messages::op_count_probe(kk, t).core;
        let bound = 2 * t * (2 * kk * kk + 3 * kk);
        println!("{kk:>4} {core:>14} {bound:>14} {:>14}", messages::dense_reference_count(kk, t));
    }
    Ok(())
}
