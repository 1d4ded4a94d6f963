//! Sweeps the power budget and compares the exact solver against the
//! matched-filter floor and the RZF/MMSE instantaneous-CSI curves.
//!
//! Run with: cargo run --release --example ee_vs_power_budget

use leoprec::experiments::{
    export, run_experiment, ExperimentSpec, ExportFormat, Method, MethodContext, SweepVariable,
    SystemConfig,
};

fn main() {
    let mut base = SystemConfig::desk_scale();
    base.baseline_fading_draws = 20;
    let spec = ExperimentSpec {
        id: "ee_vs_power".into(),
        methods: vec![Method::Wmmse, Method::Mf, Method::Rzf, Method::Mmse],
        variable: SweepVariable::PowerBudget,
        grid: vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
        base,
        base_seed: 11,
        repetitions: 10,
    };
    let records = run_experiment(&spec, &MethodContext::default(), &[]).expect("run");

    println!("P_max |       wmmse |          mf |         rzf |        mmse   [mean EE, bits/J]");
    for &p in &spec.grid {
        print!("{:5.1} |", p);
        for m in ["wmmse", "mf", "rzf", "mmse"] {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.method == m && r.sweep_value == p)
                .map(|r| r.ee)
                .collect();
            print!(" {:11.4e} |", v.iter().sum::<f64>() / v.len() as f64);
        }
        println!();
    }

    let path = std::env::temp_dir().join("leoprec_example_power_sweep.csv");
    export(&records, ExportFormat::Csv, &path).expect("export");
    println!("\nfull records in {}", path.display());
    std::fs::remove_file(&path).ok();
}
