use leoprec::channel::{draw_channel_set, noise_power_from_snr_db, ArrayGeometry, ChannelDistributionSpec};
use leoprec::system::{energy_efficiency, PowerModel};
use leoprec::unfolded::{precode_unfolded, UnfoldedParams};
use leoprec::wmmse::{dinkelbach_solve, DEFAULT_EPS};

fn main() {
    let dist = ChannelDistributionSpec::default();
    let k = 3;
    let n0 = noise_power_from_snr_db(10.0, 1.0, k, 0.0);
    let geom = ArrayGeometry::new(4, 2);
    let pm = PowerModel::with_defaults(8);
    let params = UnfoldedParams::taylor_embedding(12);
    for seed in 0..5u64 {
        let cs = draw_channel_set(&geom, k, 900 + seed, &dist, n0);
        let (b, tr, _) = precode_unfolded(&cs, &pm, 2e7, 10.0, &params, DEFAULT_EPS, DEFAULT_EPS).unwrap();
        let (be, _) = dinkelbach_solve(&cs, &pm, 2e7, 10.0, DEFAULT_EPS, DEFAULT_EPS).unwrap();
        let eu = energy_efficiency(&cs, &b, &pm, 2e7).ee;
        let ee = energy_efficiency(&cs, &be, &pm, 2e7).ee;
        println!("seed {}: ratio {:.4} conv {} outers {}", seed, eu / ee, tr.converged, tr.states.len());
        for s in &tr.states {
            println!("   it {} rho {:.5e} F {:.3e}", s.iteration, s.rho, s.f_value);
        }
    }
}
