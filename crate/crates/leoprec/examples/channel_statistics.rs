//! Draws statistical channel sets, checks the fading-power law empirically,
//! and round-trips a dataset file.
//!
//! Run with: cargo run --release --example channel_statistics

use leoprec::channel::{
    draw_channel_set, draw_fast_fading, noise_power_from_snr_db, ChannelDataset,
    ChannelDistributionSpec,
};
use leoprec::channel::ArrayGeometry;
use leoprec::rng::child_seed;

fn main() {
    let geom = ArrayGeometry::new(4, 4);
    let dist = ChannelDistributionSpec::default();
    let n0 = noise_power_from_snr_db(10.0, 1.0, 4, 0.0);
    let cs = draw_channel_set(&geom, 4, 42, &dist, n0);

    println!("channel set: {} antennas, {} users, N0 = {}", cs.n_antennas(), cs.n_users(), cs.n0);
    for (k, u) in cs.users.iter().enumerate() {
        println!(
            "  user {}: angles ({:+.3}, {:+.3}) rad, gamma {}, ||v|| = {:.12}",
            k, u.angles.0, u.angles.1, u.gamma, u.v.norm()
        );
    }

    // fast-fading gain power converges to gamma
    let draws = 50_000u64;
    let mut acc = vec![0.0; cs.n_users()];
    for i in 0..draws {
        let f = draw_fast_fading(&cs, dist.paths_per_user, child_seed(7, i));
        for (a, g) in acc.iter_mut().zip(&f.gains) {
            *a += g.norm_sqr();
        }
    }
    println!("\nmean |g_k|^2 over {} draws (target = gamma_k):", draws);
    for (k, a) in acc.iter().enumerate() {
        println!("  user {}: {:.4}", k, a / draws as f64);
    }

    // versioned dataset round trip
    let ds = ChannelDataset::generate(&geom, 4, &dist, 42, n0, 16);
    let path = std::env::temp_dir().join("leoprec_example_dataset.json");
    ds.save(&path).expect("save");
    let back = ChannelDataset::load(&path).expect("load");
    println!("\ndataset: {} draws, magic {:?}, round-trip ok = {}", back.draws.len(), back.magic, back.draws == ds.draws);
    std::fs::remove_file(&path).ok();
}
