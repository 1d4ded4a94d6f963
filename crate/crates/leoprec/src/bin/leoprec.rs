//! Experiment harness CLI. All heavy lifting lives in the library; this
//! binary parses flags, loads the optional config file, and dispatches.
//!
//! Relative output paths resolve under `$LEOPREC_OUT` when it is set.
//! The process exits nonzero if any run-time invariant (power feasibility,
//! solver health, file schema) fails.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use leoprec::channel::ChannelDataset;
use leoprec::e2e::E2eParams;
use leoprec::error::{Error, Result};
use leoprec::experiments::{
    export, export_histogram, import, robustness_sweep, run_experiment, timing_benchmark,
    ExperimentSpec, ExportFormat, Method, MethodContext, SweepVariable, SystemConfig,
    DEFAULT_E2E_LAYERS, DEFAULT_UNFOLDED_LAYERS,
};
use leoprec::rng::child_seed;
use leoprec::training::{
    evaluate, make_datasets, test_base_seed, train, Checkpoint, Precoder, TrainConfig,
};
use leoprec::unfolded::UnfoldedParams;

#[derive(Parser)]
#[command(name = "leoprec", about = "Energy-efficient LEO satellite precoding experiments")]
struct Cli {
    /// JSON config file overriding the built-in desk-scale defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
struct FileConfig {
    #[serde(default)]
    system: Option<SystemConfig>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a channel dataset (versioned JSON, magic LEOCH1).
    GenerateData(GenerateArgs),
    /// Train a learned precoder and write its checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the exact solver) on fresh test draws.
    Evaluate(EvaluateArgs),
    /// Run a sweep over one variable; resumable via config-hash dedup.
    Sweep(SweepArgs),
    /// Wall-clock scaling benchmark with fitted log-log slopes.
    Bench(BenchArgs),
    /// CSI-error robustness curves.
    Robustness(RobustnessArgs),
    /// Convert result files between CSV and JSONL, optionally histogram.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 100)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// `unfolded` or `e2e`.
    #[arg(long)]
    model: String,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    train_draws: Option<usize>,
    #[arg(long)]
    test_draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Start the unfolded model from zero parameters instead of the
    /// single-Taylor-step warm start.
    #[arg(long, default_value_t = false)]
    zero_init: bool,
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV dump of the loss curve.
    #[arg(long)]
    loss_curve: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint file; omit and set --method wmmse to score the exact solver.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional JSONL of per-draw records.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    id: String,
    /// `power_budget`, `n_users`, `n_antennas` or `csi_error_db`.
    #[arg(long)]
    variable: String,
    /// Comma-separated grid values.
    #[arg(long)]
    grid: String,
    /// Comma-separated method names.
    #[arg(long)]
    methods: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    checkpoint_unfolded: Option<PathBuf>,
    #[arg(long)]
    checkpoint_e2e: Option<PathBuf>,
    /// JSONL results file, appended to and deduplicated.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "wmmse,unfolded,e2e")]
    methods: String,
    /// Comma-separated antenna counts.
    #[arg(long, default_value = "16,32,64,128")]
    nt: String,
    #[arg(long, default_value_t = 9)]
    users: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    checkpoint_unfolded: Option<PathBuf>,
    #[arg(long)]
    checkpoint_e2e: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long, default_value = "unfolded,e2e,wmmse")]
    methods: String,
    /// Comma-separated error powers in dB (use `-inf` for the clean case).
    #[arg(long, default_value = "-30,-20,-10")]
    error_db: String,
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    checkpoint_unfolded: Option<PathBuf>,
    #[arg(long)]
    checkpoint_e2e: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    /// `csv` or `jsonl`.
    #[arg(long)]
    format: String,
    #[arg(long)]
    out: PathBuf,
    /// Also write an EE histogram with this relative bin width.
    #[arg(long)]
    histogram: Option<f64>,
    #[arg(long)]
    histogram_out: Option<PathBuf>,
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os("LEOPREC_OUT") {
        Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn load_file_config(path: &Option<PathBuf>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').map(|m| Method::parse(m.trim())).collect()
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            let v = v.trim();
            if v == "-inf" {
                Ok(f64::NEG_INFINITY)
            } else {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad grid value {:?}", v)))
            }
        })
        .collect()
}

fn load_context(
    unfolded: &Option<PathBuf>,
    e2e: &Option<PathBuf>,
) -> Result<MethodContext> {
    let mut ctx = MethodContext::default();
    if let Some(p) = unfolded {
        match Checkpoint::load(p)?.into_precoder()? {
            Precoder::Unfolded(params) => ctx.unfolded = Some(params),
            other => {
                return Err(Error::Config(format!(
                    "{} holds a {} checkpoint, expected taylor_unfolded",
                    p.display(),
                    other.architecture_id()
                )))
            }
        }
    }
    if let Some(p) = e2e {
        match Checkpoint::load(p)?.into_precoder()? {
            Precoder::EndToEnd(params) => ctx.e2e = Some(params),
            other => {
                return Err(Error::Config(format!(
                    "{} holds a {} checkpoint, expected end_to_end",
                    p.display(),
                    other.architecture_id()
                )))
            }
        }
    }
    Ok(ctx)
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_cfg = load_file_config(&cli.config)?;
    let system = file_cfg.system.clone().unwrap_or_else(SystemConfig::desk_scale);
    let train_cfg = file_cfg.train.clone().unwrap_or_default();

    match cli.command {
        Command::GenerateData(a) => {
            let ds = ChannelDataset::generate(
                &system.geometry(),
                system.n_users,
                &system.dist,
                a.seed,
                system.noise_power(),
                a.draws,
            );
            let path = out_path(&a.out);
            ds.save(&path)?;
            println!("wrote {} draws to {}", a.draws, path.display());
        }
        Command::Train(a) => {
            let mut cfg = train_cfg;
            if let Some(e) = a.epochs {
                cfg.epochs = e;
            }
            if let Some(n) = a.train_draws {
                cfg.train_draws = n;
            }
            if let Some(n) = a.test_draws {
                cfg.test_draws = n;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let model = match a.model.as_str() {
                "unfolded" => {
                    let layers = a.layers.unwrap_or(DEFAULT_UNFOLDED_LAYERS);
                    Precoder::Unfolded(if a.zero_init {
                        UnfoldedParams::zeros(layers)
                    } else {
                        UnfoldedParams::warm_start(layers)
                    })
                }
                "e2e" => Precoder::EndToEnd(E2eParams::init(
                    a.layers.unwrap_or(DEFAULT_E2E_LAYERS),
                    child_seed(cfg.seed, 0xE2E),
                )),
                other => return Err(Error::Config(format!("unknown model {:?}", other))),
            };
            let (train_set, test_set) = make_datasets(
                &system.geometry(),
                system.n_users,
                &system.dist,
                system.noise_power(),
                &cfg,
            );
            let pm = system.power_model();
            let out = train(
                &model,
                &cfg,
                &train_set,
                &test_set,
                &pm,
                system.bandwidth_hz,
                system.p_max,
            )?;
            let path = out_path(&a.out);
            Checkpoint::from_precoder(&out.model).save(&path)?;
            println!(
                "trained {} for {} epochs; test EE per epoch: {:?}",
                a.model, out.epochs_run, out.test_ee_per_epoch
            );
            println!("checkpoint written to {}", path.display());
            if let Some(curve_path) = a.loss_curve {
                let p = out_path(&curve_path);
                let mut text = String::from("step,loss\n");
                for pt in &out.loss_curve {
                    text.push_str(&format!("{},{}\n", pt.step, pt.loss));
                }
                std::fs::write(&p, text)?;
                println!("loss curve written to {}", p.display());
            }
        }
        Command::Evaluate(a) => {
            let model = match (&a.checkpoint, a.method.as_deref()) {
                (Some(p), _) => Checkpoint::load(p)?.into_precoder()?,
                (None, Some("wmmse")) => {
                    // exact solver has no checkpoint; score it directly
                    let pm = system.power_model();
                    let seeds = test_base_seed(a.seed);
                    let mut ees = Vec::with_capacity(a.draws);
                    for i in 0..a.draws {
                        let cs = system.draw(child_seed(seeds, i as u64));
                        let (b, _) = leoprec::wmmse::dinkelbach_solve(
                            &cs,
                            &pm,
                            system.bandwidth_hz,
                            system.p_max,
                            leoprec::wmmse::DEFAULT_EPS,
                            leoprec::wmmse::DEFAULT_EPS,
                        )?;
                        ees.push(
                            leoprec::system::energy_efficiency(&cs, &b, &pm, system.bandwidth_hz)
                                .ee,
                        );
                    }
                    let mean = ees.iter().sum::<f64>() / ees.len() as f64;
                    println!("wmmse mean EE over {} draws: {:.4e} bits/J", a.draws, mean);
                    return Ok(());
                }
                _ => {
                    return Err(Error::Config(
                        "provide --checkpoint, or --method wmmse".into(),
                    ))
                }
            };
            let seeds = test_base_seed(a.seed);
            let test_set: Vec<_> = (0..a.draws)
                .map(|i| system.draw(child_seed(seeds, i as u64)))
                .collect();
            let pm = system.power_model();
            let summary = evaluate(
                &model,
                &test_set,
                &pm,
                system.bandwidth_hz,
                system.p_max,
                0.1,
            )?;
            println!(
                "{}: mean EE {:.4e} bits/J, std {:.4e}, {} draws",
                model.architecture_id(),
                summary.mean_ee,
                summary.std_ee,
                a.draws
            );
            if let Some(out) = a.out {
                let path = out_path(&out);
                let text: String = summary
                    .per_draw
                    .iter()
                    .map(|e| serde_json::to_string(e).expect("serializes"))
                    .collect::<Vec<_>>()
                    .join("\n");
                std::fs::write(&path, text)?;
                println!("per-draw records written to {}", path.display());
            }
        }
        Command::Sweep(a) => {
            let variable = match a.variable.as_str() {
                "power_budget" => SweepVariable::PowerBudget,
                "n_users" => SweepVariable::NUsers,
                "n_antennas" => SweepVariable::NAntennas,
                "csi_error_db" => SweepVariable::CsiErrorDb,
                other => return Err(Error::Config(format!("unknown variable {:?}", other))),
            };
            let spec = ExperimentSpec {
                id: a.id,
                methods: parse_methods(&a.methods)?,
                variable,
                grid: parse_grid(&a.grid)?,
                base: system,
                base_seed: a.seed,
                repetitions: a.reps,
            };
            let ctx = load_context(&a.checkpoint_unfolded, &a.checkpoint_e2e)?;
            let path = out_path(&a.out);
            let existing = if path.exists() { import(&path)? } else { Vec::new() };
            let fresh = run_experiment(&spec, &ctx, &existing)?;
            let n_new = fresh.len();
            let mut all = existing;
            all.extend(fresh);
            export(&all, ExportFormat::Jsonl, &path)?;
            println!(
                "{} new records ({} total) in {}",
                n_new,
                all.len(),
                path.display()
            );
        }
        Command::Bench(a) => {
            let methods = parse_methods(&a.methods)?;
            let nt: Vec<usize> = a
                .nt
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad antenna count {:?}", v)))
                })
                .collect::<Result<_>>()?;
            let mut ctx = load_context(&a.checkpoint_unfolded, &a.checkpoint_e2e)?;
            // timing does not depend on trained weights; fall back to
            // deterministic initializations when no checkpoint is given
            if ctx.unfolded.is_none() {
                ctx.unfolded = Some(UnfoldedParams::warm_start(DEFAULT_UNFOLDED_LAYERS));
            }
            if ctx.e2e.is_none() {
                ctx.e2e = Some(E2eParams::init(DEFAULT_E2E_LAYERS, child_seed(a.seed, 0xE2E)));
            }
            let (records, slopes) =
                timing_benchmark(&methods, &nt, a.users, a.reps, &system, &ctx, a.seed)?;
            for r in &records {
                println!(
                    "{:>9}  N_t {:>4}  K {:>3}  median {:>12.6} s",
                    r.method, r.n_antennas, r.n_users, r.median_s
                );
            }
            for (m, s) in &slopes {
                println!("{:>9}  log-log slope {:.3}", m.as_str(), s);
            }
            if let Some(out) = a.out {
                let path = out_path(&out);
                let mut text = String::from("method,n_antennas,n_users,median_s,reps\n");
                for r in &records {
                    text.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.method, r.n_antennas, r.n_users, r.median_s, r.reps
                    ));
                }
                std::fs::write(&path, text)?;
                println!("benchmark written to {}", path.display());
            }
        }
        Command::Robustness(a) => {
            let methods = parse_methods(&a.methods)?;
            let grid = parse_grid(&a.error_db)?;
            let ctx = load_context(&a.checkpoint_unfolded, &a.checkpoint_e2e)?;
            let records = robustness_sweep(&methods, &grid, a.seeds, &system, &ctx, a.seed)?;
            let path = out_path(&a.out);
            export(&records, ExportFormat::Jsonl, &path)?;
            println!("{} records in {}", records.len(), path.display());
        }
        Command::Export(a) => {
            let records = import(&a.input)?;
            let format = match a.format.as_str() {
                "csv" => ExportFormat::Csv,
                "jsonl" => ExportFormat::Jsonl,
                other => return Err(Error::Config(format!("unknown format {:?}", other))),
            };
            let path = out_path(&a.out);
            export(&records, format, &path)?;
            println!("{} records written to {}", records.len(), path.display());
            if let Some(width) = a.histogram {
                let hp = a
                    .histogram_out
                    .map(|p| out_path(&p))
                    .unwrap_or_else(|| path.with_extension("hist.csv"));
                let total = export_histogram(&records, width, &hp)?;
                println!("histogram of {} records in {}", total, hp.display());
            }
        }
    }
    Ok(())
}
