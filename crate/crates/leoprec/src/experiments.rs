//! Desk-scale experiment harness: sweeps, runtime benchmarks, robustness
//! curves, and result persistence.
//!
//! Every run is keyed by a hash of its full configuration, so re-running a
//! finished experiment appends nothing and interrupted grids resume where
//! they stopped. Records carry enough to regenerate any figure: method, seed,
//! sweep value, achieved efficiency, rate, power, wall time and convergence.

use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{precode_baseline, BaselineSpec};
use crate::channel::{
    draw_channel_set, draw_fast_fading, noise_power_from_snr_db, perturb_csi, ArrayGeometry,
    ChannelDistributionSpec, ChannelSet,
};
use crate::error::{Error, Result};
use crate::rng::child_seed;
use crate::system::{energy_efficiency, rate_upper, total_power, PowerModel, PrecodingMatrix};

use crate::wmmse::{dinkelbach_solve, DEFAULT_EPS};

/// Schema version stamped into every exported record.
pub const RESULT_SCHEMA_VERSION: u32 = 1;

/// Default layer counts for the learned models.
pub const DEFAULT_UNFOLDED_LAYERS: usize = 6;
pub const DEFAULT_E2E_LAYERS: usize = 2;

/// Full physical configuration of one experiment point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemConfig {
    pub nx: usize,
    pub ny: usize,
    pub n_users: usize,
    pub bandwidth_hz: f64,
    pub xi: f64,
    pub p_rfc: f64,
    pub p_lo: f64,
    pub p_bb: f64,
    pub p_max: f64,
    pub snr_db: f64,
    /// Carrier frequency, recorded for provenance (the statistical model is
    /// expressed in wavelengths, so it does not enter the math).
    pub carrier_hz: f64,
    pub dist: ChannelDistributionSpec,
    /// Fast-fading draws averaged per channel set for instantaneous-CSI
    /// baselines.
    pub baseline_fading_draws: usize,
}

impl SystemConfig {
    /// The full-scale parameter set: 8x8 array, ten users, 20 MHz.
    pub fn paper_scale() -> Self {
        Self {
            nx: 8,
            ny: 8,
            n_users: 10,
            bandwidth_hz: 2e7,
            xi: 2.0,
            p_rfc: 0.3,
            p_lo: 0.1,
            p_bb: 0.2,
            p_max: 10.0,
            snr_db: 0.0,
            carrier_hz: 2e9,
            dist: ChannelDistributionSpec::default(),
            baseline_fading_draws: 50,
        }
    }

    /// CPU-friendly default: 4x4 array, four users.
    pub fn desk_scale() -> Self {
        Self {
            nx: 4,
            ny: 4,
            n_users: 4,
            ..Self::paper_scale()
        }
    }

    pub fn geometry(&self) -> ArrayGeometry {
        ArrayGeometry::new(self.nx, self.ny)
    }

    pub fn n_antennas(&self) -> usize {
        self.nx * self.ny
    }

    pub fn power_model(&self) -> PowerModel {
        PowerModel {
            xi: self.xi,
            p_rfc: self.p_rfc,
            p_lo: self.p_lo,
            p_bb: self.p_bb,
            n_t: self.n_antennas(),
        }
    }

    pub fn noise_power(&self) -> f64 {
        noise_power_from_snr_db(self.p_max, self.dist.gamma.mean(), self.n_users, self.snr_db)
    }

    pub fn draw(&self, seed: u64) -> ChannelSet {
        draw_channel_set(
            &self.geometry(),
            self.n_users,
            seed,
            &self.dist,
            self.noise_power(),
        )
    }
}

/// Precoding methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wmmse,
    Unfolded,
    E2e,
    Rzf,
    Mmse,
    Mf,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Wmmse => "wmmse",
            Method::Unfolded => "unfolded",
            Method::E2e => "e2e",
            Method::Rzf => "rzf",
            Method::Mmse => "mmse",
            Method::Mf => "mf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "wmmse" => Ok(Method::Wmmse),
            "unfolded" => Ok(Method::Unfolded),
            "e2e" => Ok(Method::E2e),
            "rzf" => Ok(Method::Rzf),
            "mmse" => Ok(Method::Mmse),
            "mf" => Ok(Method::Mf),
            other => Err(Error::Config(format!("unknown method {:?}", other))),
        }
    }
}

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PowerBudget,
    NUsers,
    NAntennas,
    CsiErrorDb,
}

/// Declarative description of one experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub methods: Vec<Method>,
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub base: SystemConfig,
    pub base_seed: u64,
    pub repetitions: usize,
}

impl ExperimentSpec {
    /// Stable hash of the full configuration (FNV-1a over canonical JSON).
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Trained parameters for the learned methods.
#[derive(Debug, Clone, Default)]
pub struct MethodContext {
    pub unfolded: Option<crate::unfolded::UnfoldedParams>,
    pub e2e: Option<crate::e2e::E2eParams>,
}

/// One persisted result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    pub sweep_value: f64,
    /// Headline efficiency in bits/joule. For instantaneous-CSI baselines
    /// this is the Monte-Carlo average over fading draws; for statistical
    /// methods it is the bound-based objective they optimize.
    pub ee: f64,
    /// Bound-based efficiency for every method (equals `ee` for the
    /// statistical ones).
    pub ee_stat: f64,
    pub sum_rate: f64,
    pub power_used: f64,
    pub wall_time_s: f64,
    pub converged: bool,
}

impl ResultRecord {
    fn dedup_key(&self) -> (String, String, u64, u64) {
        (
            self.config_hash.clone(),
            self.method.clone(),
            self.seed,
            self.sweep_value.to_bits(),
        )
    }
}

fn apply_sweep(base: &SystemConfig, variable: SweepVariable, value: f64) -> Result<SystemConfig> {
    let mut cfg = base.clone();
    match variable {
        SweepVariable::PowerBudget => {
            if value <= 0.0 {
                return Err(Error::Config("power budget must be positive".into()));
            }
            cfg.p_max = value;
        }
        SweepVariable::NUsers => {
            cfg.n_users = value as usize;
            if cfg.n_users == 0 {
                return Err(Error::Config("user count must be positive".into()));
            }
        }
        SweepVariable::NAntennas => {
            let (nx, ny) = squarish_factors(value as usize)?;
            cfg.nx = nx;
            cfg.ny = ny;
        }
        SweepVariable::CsiErrorDb => {}
    }
    Ok(cfg)
}

/// Factors `n` into the most square `(nx, ny)` grid.
pub fn squarish_factors(n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::Config("antenna count must be positive".into()));
    }
    let mut best = (n, 1);
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            best = (n / d, d);
        }
        d += 1;
    }
    Ok(best)
}

/// Runs one method on one channel set, timing the precoder call.
pub fn run_method(
    method: Method,
    cs: &ChannelSet,
    cfg: &SystemConfig,
    ctx: &MethodContext,
) -> Result<(f64, f64, f64, f64, f64, bool)> {
    let pm = cfg.power_model();
    let bw = cfg.bandwidth_hz;
    let p_max = cfg.p_max;
    match method {
        Method::Wmmse => {
            let start = Instant::now();
            let (b, trace) = dinkelbach_solve(cs, &pm, bw, p_max, DEFAULT_EPS, DEFAULT_EPS)?;
            let dt = start.elapsed().as_secs_f64();
            check_feasible(&b, p_max)?;
            let e = energy_efficiency(cs, &b, &pm, bw);
            Ok((e.ee, e.ee, e.sum_rate, e.total_power, dt, trace.converged))
        }
        Method::Unfolded => {
            let params = ctx.unfolded.as_ref().ok_or(Error::MissingCheckpoint {
                method: "unfolded".into(),
            })?;
            let start = Instant::now();
            let (b, trace, _) =
                crate::unfolded::precode_unfolded(cs, &pm, bw, p_max, params, DEFAULT_EPS, DEFAULT_EPS)?;
            let dt = start.elapsed().as_secs_f64();
            check_feasible(&b, p_max)?;
            let e = energy_efficiency(cs, &b, &pm, bw);
            Ok((e.ee, e.ee, e.sum_rate, e.total_power, dt, trace.converged))
        }
        Method::E2e => {
            let params = ctx.e2e.as_ref().ok_or(Error::MissingCheckpoint {
                method: "e2e".into(),
            })?;
            let start = Instant::now();
            let b = crate::e2e::precode_e2e(cs, params, p_max)?;
            let dt = start.elapsed().as_secs_f64();
            check_feasible(&b, p_max)?;
            let e = energy_efficiency(cs, &b, &pm, bw);
            Ok((e.ee, e.ee, e.sum_rate, e.total_power, dt, true))
        }
        Method::Rzf | Method::Mmse | Method::Mf => {
            let spec = match method {
                Method::Rzf => BaselineSpec::rzf(cs.n_users() as f64 * cs.n0 / p_max),
                Method::Mmse => BaselineSpec::mmse(),
                _ => BaselineSpec::mf(),
            };
            let draws = cfg.baseline_fading_draws.max(1);
            let mut acc_inst = 0.0;
            let mut acc_stat = 0.0;
            let mut acc_rate = 0.0;
            let mut acc_power = 0.0;
            let start = Instant::now();
            for d in 0..draws {
                let fading = draw_fast_fading(cs, cfg.dist.paths_per_user, child_seed(cs.seed, d as u64));
                let h = fading.channel_matrix(cs.n_antennas());
                let b = precode_baseline(&h, &spec, p_max, cs.n0)?;
                check_feasible(&b, p_max)?;
                // instantaneous-rate efficiency for this draw
                let mut inst_rate = 0.0;
                for k in 0..cs.n_users() {
                    let hk = &fading.channels[k];
                    let mut sig = 0.0;
                    let mut intf = cs.n0;
                    for l in 0..cs.n_users() {
                        let cross = hk.dot_h(&b.column(l)).norm_sqr();
                        if l == k {
                            sig = cross;
                        } else {
                            intf += cross;
                        }
                    }
                    inst_rate += (1.0 + sig / intf).log2();
                }
                let p = total_power(&pm, &b);
                acc_inst += bw * inst_rate / p;
                let stat: f64 = rate_upper(cs, &b).iter().sum();
                acc_stat += bw * stat / p;
                acc_rate += bw * inst_rate;
                acc_power += p;
            }
            let dt = start.elapsed().as_secs_f64() / draws as f64;
            let n = draws as f64;
            Ok((
                acc_inst / n,
                acc_stat / n,
                acc_rate / n,
                acc_power / n,
                dt,
                true,
            ))
        }
    }
}

fn check_feasible(b: &PrecodingMatrix, p_max: f64) -> Result<()> {
    if !b.is_feasible(p_max, 1e-9) {
        return Err(Error::Config(format!(
            "precoder exceeds the power budget: {} > {}",
            b.total_tx_power(),
            p_max
        )));
    }
    Ok(())
}

/// Runs the full grid, skipping rows already present in `existing`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    ctx: &MethodContext,
    existing: &[ResultRecord],
) -> Result<Vec<ResultRecord>> {
    if spec.grid.is_empty() || spec.methods.is_empty() {
        return Err(Error::Config("experiment grid and methods must be nonempty".into()));
    }
    let hash = spec.config_hash();
    let done: std::collections::HashSet<_> =
        existing.iter().map(|r| r.dedup_key()).collect();
    let mut out = Vec::new();
    for (vi, &value) in spec.grid.iter().enumerate() {
        let cfg = apply_sweep(&spec.base, spec.variable, value)?;
        for rep in 0..spec.repetitions {
            let seed = child_seed(child_seed(spec.base_seed, vi as u64), rep as u64);
            let clean = cfg.draw(seed);
            for &method in &spec.methods {
                let key = (hash.clone(), method.as_str().to_string(), seed, value.to_bits());
                if done.contains(&key) {
                    continue;
                }
                let observed = if spec.variable == SweepVariable::CsiErrorDb {
                    perturb_csi(&clean, value, child_seed(seed, 0xE44))?
                } else {
                    clean.clone()
                };
                let (ee, ee_stat, sum_rate, power, dt, converged) = if spec.variable
                    == SweepVariable::CsiErrorDb
                {
                    // precoders see the corrupted directions, performance is
                    // scored on the true channel
                    run_method_mismatched(method, &observed, &clean, &cfg, ctx)?
                } else {
                    run_method(method, &observed, &cfg, ctx)?
                };
                out.push(ResultRecord {
                    schema_version: RESULT_SCHEMA_VERSION,
                    config_hash: hash.clone(),
                    experiment: spec.id.clone(),
                    method: method.as_str().to_string(),
                    seed,
                    sweep_value: value,
                    ee,
                    ee_stat,
                    sum_rate,
                    power_used: power,
                    wall_time_s: dt,
                    converged,
                });
            }
        }
    }
    Ok(out)
}

/// Precoders computed on `observed` (corrupted CSI), efficiency scored on
/// `truth`.
pub fn run_method_mismatched(
    method: Method,
    observed: &ChannelSet,
    truth: &ChannelSet,
    cfg: &SystemConfig,
    ctx: &MethodContext,
) -> Result<(f64, f64, f64, f64, f64, bool)> {
    let pm = cfg.power_model();
    let bw = cfg.bandwidth_hz;
    let p_max = cfg.p_max;
    let start = Instant::now();
    let (b, converged) = match method {
        Method::Wmmse => {
            let (b, t) = dinkelbach_solve(observed, &pm, bw, p_max, DEFAULT_EPS, DEFAULT_EPS)?;
            (b, t.converged)
        }
        Method::Unfolded => {
            let params = ctx.unfolded.as_ref().ok_or(Error::MissingCheckpoint {
                method: "unfolded".into(),
            })?;
            let (b, t, _) = crate::unfolded::precode_unfolded(
                observed, &pm, bw, p_max, params, DEFAULT_EPS, DEFAULT_EPS,
            )?;
            (b, t.converged)
        }
        Method::E2e => {
            let params = ctx.e2e.as_ref().ok_or(Error::MissingCheckpoint {
                method: "e2e".into(),
            })?;
            (crate::e2e::precode_e2e(observed, params, p_max)?, true)
        }
        _ => {
            // baselines re-estimate from fading draws of the observed set
            return run_method(method, observed, cfg, ctx);
        }
    };
    let dt = start.elapsed().as_secs_f64();
    check_feasible(&b, p_max)?;
    let e = energy_efficiency(truth, &b, &pm, bw);
    Ok((e.ee, e.ee, e.sum_rate, e.total_power, dt, converged))
}

// ---------------------------------------------------------------------------
// Runtime benchmark
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRecord {
    pub method: String,
    pub n_antennas: usize,
    pub n_users: usize,
    pub median_s: f64,
    pub reps: usize,
}

/// Median wall-clock per precoder call over `reps` fresh channel draws, for
/// each antenna count, plus the fitted log-log slope per method.
pub fn timing_benchmark(
    methods: &[Method],
    nt_grid: &[usize],
    n_users: usize,
    reps: usize,
    base: &SystemConfig,
    ctx: &MethodContext,
    base_seed: u64,
) -> Result<(Vec<TimingRecord>, Vec<(Method, f64)>)> {
    assert!(reps >= 5, "medians need at least five repetitions");
    let mut records = Vec::new();
    for &method in methods {
        let mut points = Vec::new();
        for (gi, &nt) in nt_grid.iter().enumerate() {
            let (nx, ny) = squarish_factors(nt)?;
            let cfg = SystemConfig {
                nx,
                ny,
                n_users,
                ..base.clone()
            };
            let mut times = Vec::with_capacity(reps);
            for rep in 0..reps {
                let seed = child_seed(child_seed(base_seed, gi as u64), rep as u64);
                let cs = cfg.draw(seed);
                let (_, _, _, _, dt, _) = run_method(method, &cs, &cfg, ctx)?;
                times.push(dt);
            }
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = times[times.len() / 2];
            points.push((nt as f64, median));
            records.push(TimingRecord {
                method: method.as_str().to_string(),
                n_antennas: nt,
                n_users,
                median_s: median,
                reps,
            });
        }
    }
    let mut slopes = Vec::new();
    for &method in methods {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.method == method.as_str())
            .map(|r| ((r.n_antennas as f64).ln(), r.median_s.ln()))
            .collect();
        slopes.push((method, least_squares_slope(&pts)));
    }
    Ok((records, slopes))
}

/// Slope of the least-squares line through `(x, y)` points.
pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Robustness sweep: precode on CSI corrupted at each error level, score on
/// the truth.
pub fn robustness_sweep(
    methods: &[Method],
    error_db_grid: &[f64],
    n_seeds: usize,
    base: &SystemConfig,
    ctx: &MethodContext,
    base_seed: u64,
) -> Result<Vec<ResultRecord>> {
    let spec = ExperimentSpec {
        id: "robustness".into(),
        methods: methods.to_vec(),
        variable: SweepVariable::CsiErrorDb,
        grid: error_db_grid.to_vec(),
        base: base.clone(),
        base_seed,
        repetitions: n_seeds,
    };
    run_experiment(&spec, ctx, &[])
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

const CSV_HEADER: &str = "schema_version,config_hash,experiment,method,seed,sweep_value,ee,ee_stat,sum_rate,power_used,wall_time_s,converged";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

/// Writes records with a stable column order; the schema version rides in
/// every row.
pub fn export(records: &[ResultRecord], format: ExportFormat, path: &std::path::Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        ExportFormat::Csv => {
            writeln!(w, "{}", CSV_HEADER)?;
            for r in records {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.schema_version,
                    r.config_hash,
                    r.experiment,
                    r.method,
                    r.seed,
                    r.sweep_value,
                    r.ee,
                    r.ee_stat,
                    r.sum_rate,
                    r.power_used,
                    r.wall_time_s,
                    r.converged
                )?;
            }
        }
        ExportFormat::Jsonl => {
            for r in records {
                writeln!(w, "{}", serde_json::to_string(r)?)?;
            }
        }
    }
    Ok(())
}

/// Reads records back from either format (detected by extension).
pub fn import(path: &std::path::Path) -> Result<Vec<ResultRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let is_csv = path.extension().map(|e| e == "csv").unwrap_or(false);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if is_csv {
            if i == 0 {
                if line != CSV_HEADER {
                    return Err(Error::Config(format!(
                        "unexpected CSV header: {:?}",
                        line
                    )));
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(Error::Config(format!("bad CSV row: {:?}", line)));
            }
            let parse_f = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::Config(format!("bad number {:?}", s)))
            };
            out.push(ResultRecord {
                schema_version: f[0]
                    .parse()
                    .map_err(|_| Error::Config("bad schema version".into()))?,
                config_hash: f[1].to_string(),
                experiment: f[2].to_string(),
                method: f[3].to_string(),
                seed: f[4]
                    .parse()
                    .map_err(|_| Error::Config("bad seed".into()))?,
                sweep_value: parse_f(f[5])?,
                ee: parse_f(f[6])?,
                ee_stat: parse_f(f[7])?,
                sum_rate: parse_f(f[8])?,
                power_used: parse_f(f[9])?,
                wall_time_s: parse_f(f[10])?,
                converged: f[11] == "true",
            });
        } else {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Histogram of the `ee` column, bins sized as a fraction of the mean;
/// exported as `bin_lower,count` CSV.
pub fn export_histogram(
    records: &[ResultRecord],
    rel_bin_width: f64,
    path: &std::path::Path,
) -> Result<usize> {
    let values: Vec<f64> = records.iter().map(|r| r.ee).collect();
    if values.is_empty() {
        std::fs::write(path, "bin_lower,count\n")?;
        return Ok(0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let width = (rel_bin_width * mean.abs()).max(f64::MIN_POSITIVE);
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for v in &values {
        *counts.entry((v / width).floor() as i64).or_default() += 1;
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "bin_lower,count")?;
    let mut total = 0;
    for (bin, c) in counts {
        writeln!(w, "{},{}", bin as f64 * width, c)?;
        total += c;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unfolded::UnfoldedParams;

    fn tiny_spec() -> ExperimentSpec {
        let mut base = SystemConfig::desk_scale();
        base.nx = 2;
        base.ny = 2;
        base.n_users = 2;
        base.baseline_fading_draws = 3;
        ExperimentSpec {
            id: "tiny".into(),
            methods: vec![Method::Wmmse, Method::Mf],
            variable: SweepVariable::PowerBudget,
            grid: vec![5.0, 10.0],
            base,
            base_seed: 1,
            repetitions: 2,
        }
    }

    #[test]
    fn produces_grid_times_seeds_times_methods_records() {
        let spec = tiny_spec();
        let records = run_experiment(&spec, &MethodContext::default(), &[]).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        for r in &records {
            assert_eq!(r.config_hash, spec.config_hash());
            assert!(r.wall_time_s > 0.0);
            assert!(r.ee >= 0.0);
        }
    }

    #[test]
    fn rerun_with_same_spec_adds_nothing() {
        let spec = tiny_spec();
        let first = run_experiment(&spec, &MethodContext::default(), &[]).unwrap();
        let second = run_experiment(&spec, &MethodContext::default(), &first).unwrap();
        assert!(second.is_empty());
    }

    #[test]
    fn solver_dominates_matched_filter_on_average() {
        let mut spec = tiny_spec();
        spec.grid = vec![10.0];
        spec.repetitions = 20;
        let records = run_experiment(&spec, &MethodContext::default(), &[]).unwrap();
        let mean = |m: &str| -> f64 {
            let v: Vec<f64> = records
                .iter()
                .filter(|r| r.method == m)
                .map(|r| r.ee_stat)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(
            mean("wmmse") > mean("mf"),
            "wmmse {} vs mf {}",
            mean("wmmse"),
            mean("mf")
        );
    }

    #[test]
    fn missing_checkpoint_is_a_config_error() {
        let mut spec = tiny_spec();
        spec.methods = vec![Method::Unfolded];
        match run_experiment(&spec, &MethodContext::default(), &[]) {
            Err(Error::MissingCheckpoint { method }) => assert_eq!(method, "unfolded"),
            other => panic!("expected MissingCheckpoint, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn csv_jsonl_round_trip_preserves_fields() {
        let spec = tiny_spec();
        let records = run_experiment(&spec, &MethodContext::default(), &[]).unwrap();
        let dir = std::env::temp_dir();
        let csv = dir.join("leoprec_test_results.csv");
        let jsonl = dir.join("leoprec_test_results.jsonl");
        export(&records, ExportFormat::Csv, &csv).unwrap();
        let from_csv = import(&csv).unwrap();
        export(&from_csv, ExportFormat::Jsonl, &jsonl).unwrap();
        let from_jsonl = import(&jsonl).unwrap();
        let csv2 = dir.join("leoprec_test_results2.csv");
        export(&from_jsonl, ExportFormat::Csv, &csv2).unwrap();
        let final_records = import(&csv2).unwrap();
        assert_eq!(final_records, records);
        for p in [csv, jsonl, csv2] {
            std::fs::remove_file(p).ok();
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let path = std::env::temp_dir().join("leoprec_test_empty.csv");
        export(&[], ExportFormat::Csv, &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.trim(), CSV_HEADER);
        assert!(import(&path).unwrap().is_empty());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn histogram_counts_sum_to_record_count() {
        let spec = tiny_spec();
        let records = run_experiment(&spec, &MethodContext::default(), &[]).unwrap();
        let path = std::env::temp_dir().join("leoprec_test_hist.csv");
        let total = export_histogram(&records, 0.1, &path).unwrap();
        assert_eq!(total, records.len());
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn robustness_no_error_matches_clean() {
        let mut base = SystemConfig::desk_scale();
        base.nx = 2;
        base.ny = 2;
        base.n_users = 2;
        let ctx = MethodContext {
            unfolded: Some(UnfoldedParams::warm_start(3)),
            e2e: None,
        };
        let records = robustness_sweep(
            &[Method::Unfolded],
            &[crate::channel::NO_CSI_ERROR],
            2,
            &base,
            &ctx,
            7,
        )
        .unwrap();
        // same seeds, no corruption: must match a clean evaluation exactly
        for r in &records {
            let cs = base.draw(r.seed);
            let (ee, _, _, _, _, _) = run_method(Method::Unfolded, &cs, &base, &ctx).unwrap();
            assert_eq!(r.ee, ee);
        }
    }

    #[test]
    fn squarish_factorization() {
        assert_eq!(squarish_factors(16).unwrap(), (4, 4));
        assert_eq!(squarish_factors(32).unwrap(), (8, 4));
        assert_eq!(squarish_factors(128).unwrap(), (16, 8));
        assert_eq!(squarish_factors(7).unwrap(), (7, 1));
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [16.0f64, 32.0, 64.0]
            .iter()
            .map(|&n| (n.ln(), (3.0 * n.powi(3)).ln()))
            .collect();
        assert!((least_squares_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = tiny_spec();
        let mut b = tiny_spec();
        assert_eq!(a.config_hash(), b.config_hash());
        b.grid.push(20.0);
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
