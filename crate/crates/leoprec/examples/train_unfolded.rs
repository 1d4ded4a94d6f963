//! Desk-scale training of the Taylor-unfolded precoder: negative mean EE
//! loss, Adam, truncated backprop through the final subproblem.
//!
//! Run with: cargo run --release --example train_unfolded

use leoprec::experiments::SystemConfig;
use leoprec::training::{evaluate, make_datasets, train, Checkpoint, Precoder, TrainConfig};
use leoprec::unfolded::UnfoldedParams;

fn main() {
    let system = SystemConfig::desk_scale();
    let cfg = TrainConfig {
        train_draws: 256,
        test_draws: 64,
        batch_size: 64,
        epochs: 5,
        seed: 1,
        ..TrainConfig::default()
    };
    let (train_set, test_set) = make_datasets(
        &system.geometry(),
        system.n_users,
        &system.dist,
        system.noise_power(),
        &cfg,
    );
    let pm = system.power_model();
    let model = Precoder::Unfolded(UnfoldedParams::warm_start(6));

    let before = evaluate(&model, &test_set, &pm, system.bandwidth_hz, system.p_max, 0.1)
        .expect("eval")
        .mean_ee;
    println!("warm-start test EE: {:.4e} bits/J", before);

    let out = train(&model, &cfg, &train_set, &test_set, &pm, system.bandwidth_hz, system.p_max)
        .expect("train");
    println!("epochs run: {}", out.epochs_run);
    for (e, ee) in out.test_ee_per_epoch.iter().enumerate() {
        println!("  epoch {:2}: test EE {:.4e}", e, ee);
    }

    let path = std::env::temp_dir().join("leoprec_example_unfolded.json");
    Checkpoint::from_precoder(&out.model).save(&path).expect("save");
    println!("checkpoint written to {}", path.display());
    std::fs::remove_file(&path).ok();
}
