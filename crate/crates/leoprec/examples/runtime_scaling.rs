//! Wall-clock scaling of the three precoders in the antenna count, with
//! fitted log-log slopes: the exact solver pays for its Cholesky
//! factorizations, the unfolded network stays quadratic.
//!
//! Run with: cargo run --release --example runtime_scaling

use leoprec::e2e::E2eParams;
use leoprec::experiments::{
    timing_benchmark, Method, MethodContext, SystemConfig, DEFAULT_E2E_LAYERS,
    DEFAULT_UNFOLDED_LAYERS,
};
use leoprec::unfolded::UnfoldedParams;

fn main() {
    let base = SystemConfig::desk_scale();
    let ctx = MethodContext {
        unfolded: Some(UnfoldedParams::warm_start(DEFAULT_UNFOLDED_LAYERS)),
        e2e: Some(E2eParams::init(DEFAULT_E2E_LAYERS, 5)),
    };
    let methods = [Method::Wmmse, Method::Unfolded, Method::E2e];
    let (records, slopes) =
        timing_benchmark(&methods, &[16, 32, 64], 9, 5, &base, &ctx, 3).expect("bench");
    println!("method    |  N_t | median call time");
    for r in &records {
        println!("{:9} | {:4} | {:12.6} s", r.method, r.n_antennas, r.median_s);
    }
    println!();
    for (m, s) in &slopes {
        println!("{:9} : log(time) vs log(N_t) slope = {:+.3}", m.as_str(), s);
    }
}
