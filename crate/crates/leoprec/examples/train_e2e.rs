//! Desk-scale training of the end-to-end bipartite edge-GNN precoder.
//!
//! Run with: cargo run --release --example train_e2e

use leoprec::e2e::E2eParams;
use leoprec::experiments::SystemConfig;
use leoprec::training::{evaluate, make_datasets, train, Precoder, TrainConfig};

fn main() {
    let system = SystemConfig::desk_scale();
    let cfg = TrainConfig {
        train_draws: 512,
        test_draws: 64,
        batch_size: 64,
        epochs: 10,
        seed: 2,
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
    let model = Precoder::EndToEnd(E2eParams::init(2, 7));

    let before = evaluate(&model, &test_set, &pm, system.bandwidth_hz, system.p_max, 0.1)
        .expect("eval")
        .mean_ee;
    println!("untrained test EE: {:.4e} bits/J", before);

    let out = train(&model, &cfg, &train_set, &test_set, &pm, system.bandwidth_hz, system.p_max)
        .expect("train");
    for (e, ee) in out.test_ee_per_epoch.iter().enumerate() {
        println!("  epoch {:2}: test EE {:.4e}", e, ee);
    }
    let first = out.loss_curve.first().unwrap().loss;
    let last = out.loss_curve.last().unwrap().loss;
    println!("loss: {:.4e} -> {:.4e} over {} steps", first, last, out.loss_curve.len());
}
