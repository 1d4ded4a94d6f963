use leoprec::experiments::SystemConfig;
use leoprec::training::{make_datasets, train, Precoder, TrainConfig};
use leoprec::unfolded::{precode_unfolded, UnfoldedParams};
use leoprec::wmmse::{dinkelbach_solve, DEFAULT_EPS};
use leoprec::system::energy_efficiency;
use std::time::Instant;

fn probe(tag: &str, params: &UnfoldedParams) {
    for nt in [16usize, 32, 64, 128] {
        let (nx, ny) = leoprec::experiments::squarish_factors(nt).unwrap();
        let mut cfg = SystemConfig::desk_scale();
        cfg.nx = nx; cfg.ny = ny; cfg.n_users = 9;
        let cs = cfg.draw(42);
        let pm = cfg.power_model();
        let t0 = Instant::now();
        let (b, tr) = dinkelbach_solve(&cs, &pm, cfg.bandwidth_hz, cfg.p_max, DEFAULT_EPS, DEFAULT_EPS).unwrap();
        let dt_w = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        let (bu, tru, _) = precode_unfolded(&cs, &pm, cfg.bandwidth_hz, cfg.p_max, params, DEFAULT_EPS, DEFAULT_EPS).unwrap();
        let dt_u = t0.elapsed().as_secs_f64();
        let ee_w = energy_efficiency(&cs, &b, &pm, cfg.bandwidth_hz).ee;
        let ee_u = energy_efficiency(&cs, &bu, &pm, cfg.bandwidth_hz).ee;
        println!("[{}] nt {:3}: wmmse {:.4}s ({} outer) | unfolded {:.4}s ({} outer, conv {}) | EE ratio {:.3}",
            tag, nt, dt_w, tr.states.len(), dt_u, tru.states.len(), tru.converged, ee_u / ee_w);
    }
}

fn main() {
    probe("warm", &UnfoldedParams::warm_start(6));
    // quick desk training at N16 K4
    let system = SystemConfig::desk_scale();
    let cfg = TrainConfig { train_draws: 512, test_draws: 64, batch_size: 64, epochs: 6, seed: 1, ..TrainConfig::default() };
    let (tr, te) = make_datasets(&system.geometry(), system.n_users, &system.dist, system.noise_power(), &cfg);
    let pm = system.power_model();
    let out = train(&Precoder::Unfolded(UnfoldedParams::warm_start(6)), &cfg, &tr, &te, &pm, system.bandwidth_hz, system.p_max).unwrap();
    println!("trained test EE per epoch: {:?}", out.test_ee_per_epoch);
    if let Precoder::Unfolded(p) = &out.model { probe("trained", p); }
}
