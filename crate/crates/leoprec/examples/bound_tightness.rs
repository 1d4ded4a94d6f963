//! Monte-Carlo ergodic rates against the statistical upper bound the
//! optimizer uses: the bound dominates every user's sampled mean within
//! three standard errors, and tightly.
//!
//! Run with: cargo run --release --example bound_tightness

use leoprec::channel::{draw_channel_set, noise_power_from_snr_db, ArrayGeometry, ChannelDistributionSpec};
use leoprec::system::{rate_ergodic_mc, rate_upper};
use leoprec::wmmse::uniform_power_init;

fn main() {
    let geom = ArrayGeometry::new(4, 4);
    let k = 4;
    let dist = ChannelDistributionSpec::default();
    let n0 = noise_power_from_snr_db(10.0, 1.0, k, 0.0);
    let cs = draw_channel_set(&geom, k, 99, &dist, n0);
    let b = uniform_power_init(&cs, 10.0);

    let upper = rate_upper(&cs, &b);
    let mc = rate_ergodic_mc(&cs, &b, dist.paths_per_user, 10_000, 1);
    println!("user |  MC mean +- stderr       |  upper bound |  gap");
    for kk in 0..k {
        println!(
            "{:4} |  {:.5} +- {:.5}  |  {:10.5} |  {:+.5}",
            kk,
            mc[kk].mean,
            mc[kk].stderr,
            upper[kk],
            upper[kk] - mc[kk].mean
        );
    }
}
