//! Runs the exact Dinkelbach+WMMSE solver on one instance and prints the
//! outer-loop trace: the ratio climbs monotonically while the subproblem
//! value falls to the stopping threshold.
//!
//! Run with: cargo run --release --example exact_solver_convergence

use leoprec::channel::{draw_channel_set, noise_power_from_snr_db, ArrayGeometry, ChannelDistributionSpec};
use leoprec::system::{energy_efficiency, PowerModel};
use leoprec::wmmse::{dinkelbach_solve, DEFAULT_EPS};

fn main() {
    let geom = ArrayGeometry::new(4, 4);
    let k = 4;
    let dist = ChannelDistributionSpec::default();
    let n0 = noise_power_from_snr_db(10.0, 1.0, k, 0.0);
    let cs = draw_channel_set(&geom, k, 2024, &dist, n0);
    let pm = PowerModel::with_defaults(cs.n_antennas());
    let bw = 2e7;

    let (b, trace) = dinkelbach_solve(&cs, &pm, bw, 10.0, DEFAULT_EPS, DEFAULT_EPS).expect("solve");
    println!("iter |        rho [bits/J] |        F(rho)");
    println!("-----+---------------------+--------------");
    for s in &trace.states {
        println!("{:4} | {:19.6e} | {:12.3e}", s.iteration, s.rho, s.f_value);
    }
    let e = energy_efficiency(&cs, &b, &pm, bw);
    println!(
        "\nconverged: {} | EE {:.4e} bits/J | radiated power {:.3} W of {} W budget",
        trace.converged,
        e.ee,
        b.total_tx_power(),
        10.0
    );
    println!("\ntrace as JSON lines:\n{}", trace.to_jsonl());
}
