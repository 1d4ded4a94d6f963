//! Degradation under channel estimation error: precoders see corrupted
//! direction vectors, performance is scored on the true channel.
//!
//! Run with: cargo run --release --example csi_error_robustness

use leoprec::channel::NO_CSI_ERROR;
use leoprec::e2e::E2eParams;
use leoprec::experiments::{robustness_sweep, Method, MethodContext, SystemConfig};
use leoprec::unfolded::UnfoldedParams;

fn main() {
    let mut base = SystemConfig::desk_scale();
    base.nx = 4;
    base.ny = 2;
    base.n_users = 3;
    let ctx = MethodContext {
        unfolded: Some(UnfoldedParams::warm_start(6)),
        e2e: Some(E2eParams::init(2, 9)),
    };
    let grid = [NO_CSI_ERROR, -30.0, -20.0, -10.0];
    let methods = [Method::Wmmse, Method::Unfolded, Method::E2e];
    let records = robustness_sweep(&methods, &grid, 30, &base, &ctx, 17).expect("sweep");

    println!("error dB |       wmmse |    unfolded |         e2e   [mean EE, bits/J]");
    for &e in &grid {
        let label = if e == NO_CSI_ERROR { "   clean".to_string() } else { format!("{:8.0}", e) };
        print!("{} |", label);
        for m in ["wmmse", "unfolded", "e2e"] {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.method == m && r.sweep_value.to_bits() == e.to_bits())
                .map(|r| r.ee)
                .collect();
            print!(" {:11.4e} |", v.iter().sum::<f64>() / v.len() as f64);
        }
        println!();
    }
}
