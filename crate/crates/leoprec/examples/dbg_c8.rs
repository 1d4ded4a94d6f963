// offline validation of the learned-performance protocol before freezing it
use leoprec::e2e::E2eParams;
use leoprec::experiments::SystemConfig;
use leoprec::system::energy_efficiency;
use leoprec::training::{evaluate, make_datasets, train, Precoder, TrainConfig};
use leoprec::unfolded::UnfoldedParams;
use leoprec::wmmse::{dinkelbach_solve, DEFAULT_EPS};
use std::time::Instant;

fn main() {
    let system = SystemConfig::desk_scale(); // 4x4, K=4
    let cfg = TrainConfig {
        train_draws: 2000,
        test_draws: 200,
        epochs: 20,
        seed: 7,
        ..TrainConfig::default()
    };
    let (train_set, test_set) = make_datasets(
        &system.geometry(), system.n_users, &system.dist, system.noise_power(), &cfg,
    );
    let pm = system.power_model();
    let t0 = Instant::now();
    let mut wmmse_mean = 0.0;
    for cs in &test_set {
        let (b, _) = dinkelbach_solve(cs, &pm, system.bandwidth_hz, system.p_max, DEFAULT_EPS, DEFAULT_EPS).unwrap();
        wmmse_mean += energy_efficiency(cs, &b, &pm, system.bandwidth_hz).ee;
    }
    wmmse_mean /= test_set.len() as f64;
    println!("wmmse mean {:.5e}  ({:.1}s)", wmmse_mean, t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let unf = train(
        &Precoder::Unfolded(UnfoldedParams::warm_start(6)),
        &cfg, &train_set, &test_set, &pm, system.bandwidth_hz, system.p_max,
    ).unwrap();
    let unf_mean = evaluate(&unf.model, &test_set, &pm, system.bandwidth_hz, system.p_max, 0.1).unwrap().mean_ee;
    println!("unfolded mean {:.5e} ratio {:.4}  (epochs {}, {:.1}s)", unf_mean, unf_mean / wmmse_mean, unf.epochs_run, t0.elapsed().as_secs_f64());

    let t0 = Instant::now();
    let e2e = train(
        &Precoder::EndToEnd(E2eParams::init(2, 1234)),
        &cfg, &train_set, &test_set, &pm, system.bandwidth_hz, system.p_max,
    ).unwrap();
    let e2e_mean = evaluate(&e2e.model, &test_set, &pm, system.bandwidth_hz, system.p_max, 0.1).unwrap().mean_ee;
    println!("e2e mean {:.5e} ratio {:.4}  (epochs {}, {:.1}s)", e2e_mean, e2e_mean / wmmse_mean, e2e.epochs_run, t0.elapsed().as_secs_f64());
}
