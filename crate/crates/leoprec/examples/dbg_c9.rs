use leoprec::experiments::{timing_benchmark, Method, MethodContext, SystemConfig};
use leoprec::training::{make_datasets, train, Checkpoint, Precoder, TrainConfig};
use leoprec::unfolded::UnfoldedParams;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(15);
    let ckpt_path = std::env::temp_dir().join("leoprec_c9_trained.json");
    let trained: UnfoldedParams = if ckpt_path.exists() {
        match Checkpoint::load(&ckpt_path).unwrap().into_precoder().unwrap() {
            Precoder::Unfolded(p) => p,
            _ => unreachable!(),
        }
    } else {
        let system = SystemConfig::desk_scale();
        let cfg = TrainConfig { train_draws: 2000, test_draws: 200, epochs: 20, seed: 7, ..TrainConfig::default() };
        let (tr, te) = make_datasets(&system.geometry(), system.n_users, &system.dist, system.noise_power(), &cfg);
        let pm = system.power_model();
        let out = train(&Precoder::Unfolded(UnfoldedParams::warm_start(6)), &cfg, &tr, &te, &pm, system.bandwidth_hz, system.p_max).unwrap();
        Checkpoint::from_precoder(&out.model).save(&ckpt_path).unwrap();
        match out.model { Precoder::Unfolded(p) => p, _ => unreachable!() }
    };
    let base = SystemConfig::desk_scale();
    for seed in [0xC9u64, 77, 5] {
        let ctx = MethodContext { unfolded: Some(trained.clone()), e2e: None };
        let (records, slopes) = timing_benchmark(&[Method::Wmmse, Method::Unfolded], &[16, 32, 64, 128], 9, reps, &base, &ctx, seed).unwrap();
        print!("seed {:5} reps {:2}: ", seed, reps);
        for r in &records { print!("{}@{}={:.4}s ", &r.method[..2], r.n_antennas, r.median_s); }
        let w = slopes.iter().find(|(m, _)| *m == Method::Wmmse).unwrap().1;
        let u = slopes.iter().find(|(m, _)| *m == Method::Unfolded).unwrap().1;
        println!("| slopes w {:.2} u {:.2} gap {:.2}", w, u, w - u);
    }
}
