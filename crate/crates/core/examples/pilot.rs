//! Trains on the default synthetic dataset and prints the headline numbers,
//! the ablation table and the τ/ground-truth agreement on noiseless data.
//!
//! `cargo run --release --example pilot [seed]`

use msdn_core::ablation::{ablation_csv, run_ablation};
use msdn_core::data::{generate_synthetic, SynthSpec};
use msdn_core::eval::{accuracy_over, evaluate, tau_region_agreement, PredictConfig};
use msdn_core::training::{train, TrainConfig};

fn main() -> msdn_core::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let spec = SynthSpec {
        seed,
        ..SynthSpec::default()
    };
    let ds = generate_synthetic(&spec)?;
    let cfg = TrainConfig::default();
    let out = train(&ds, &cfg)?;
    let predict = PredictConfig::default();
    let train_acc = accuracy_over(&out.params, &ds, &ds.train_idx, &ds.seen_classes, &predict)?;
    let report = evaluate(&out.params, &ds, &predict)?;
    println!("train seen acc {train_acc:.4}");
    println!(
        "czsl acc {:.4}  U {:.4} S {:.4} H {:.4}",
        report.acc, report.unseen, report.seen, report.harmonic
    );
    print!("{}", ablation_csv(&run_ablation(&ds, &cfg, predict)?));

    let clean = generate_synthetic(&SynthSpec {
        noise_std: 0.0,
        ..spec
    })?;
    let trained = train(&clean, &cfg)?;
    println!(
        "tau agreement (noiseless) {:.4}",
        tau_region_agreement(&trained.params, &clean)?
    );
    Ok(())
}
