//! Batch experiment runner.
//!
//! Loads a scenario plus named sweep definitions from one TOML file, runs
//! seeded Monte-Carlo trials over the sweep points, and writes one result row
//! per (point, trial) as CSV or JSON lines.
//!
//! Determinism: trial i of a sweep draws from an RNG stream keyed by
//! (master seed, sweep index, i). Points of one sweep share the per-trial
//! stream on purpose, so curves across M, power, or surface position are
//! paired comparisons on common channel randomness. Rows are emitted in
//! canonical order (point index, then trial) regardless of which worker
//! finished first, and floats are printed with 17 significant digits, so
//! re-running a command reproduces the output byte for byte except the
//! wall-time columns.

use std::collections::BTreeMap;
use std::io::Write as IoWrite;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channels, ChannelSet, ScenarioConfig};
use crate::error::{Error, Result};
use crate::joint::joint_min_il;
use crate::leakage::{effective_channels, interference_leakage, Beamformers};
use crate::linalg::{derive_seed, random_unitary, seeded_rng};
use crate::metrics::delta_inr_db;
use crate::optim::{
    minimize_il_diag, minimize_il_group, minimize_il_mo, minimize_il_rtp, GroupInner,
    OptimizerOptions,
};
use crate::precoding::{
    max_sinr_beamformers, max_sr_beamformers, min_il_beamformers, rate_of_user, svd_precoders,
};

/// Cap the BLAS backend's own threading; trials already run in parallel.
pub fn limit_blas_threads(n: usize) {
    extern "C" {
        fn openblas_set_num_threads(num: i32);
    }
    std::env::set_var("OPENBLAS_NUM_THREADS", n.to_string());
    unsafe { openblas_set_num_threads(n as i32) }
}

// ---------- choices ----------

/// Stage-one solver selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage1Choice {
    Mo,
    Rtp,
    Group(usize),
    Diag,
    Joint,
}

impl std::fmt::Display for Stage1Choice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage1Choice::Mo => write!(f, "mo"),
            Stage1Choice::Rtp => write!(f, "rtp"),
            Stage1Choice::Group(mg) => write!(f, "group:{}", mg),
            Stage1Choice::Diag => write!(f, "diag"),
            Stage1Choice::Joint => write!(f, "joint"),
        }
    }
}

impl std::str::FromStr for Stage1Choice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mo" => Ok(Stage1Choice::Mo),
            "rtp" => Ok(Stage1Choice::Rtp),
            "diag" => Ok(Stage1Choice::Diag),
            "joint" => Ok(Stage1Choice::Joint),
            _ => {
                if let Some(rest) = s.strip_prefix("group:") {
                    let mg: usize = rest
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad group size in stage1 '{}'", s)))?;
                    if mg == 0 {
                        return Err(Error::Parse("group size must be >= 1".into()));
                    }
                    Ok(Stage1Choice::Group(mg))
                } else {
                    Err(Error::Parse(format!(
                        "unknown stage1 '{}', expected mo|rtp|group:<Mg>|diag|joint",
                        s
                    )))
                }
            }
        }
    }
}

/// Stage-two precoder selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage2Choice {
    Svd,
    MinIl,
    MaxSinr,
    MaxSr,
}

impl std::fmt::Display for Stage2Choice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage2Choice::Svd => "svd",
            Stage2Choice::MinIl => "minil",
            Stage2Choice::MaxSinr => "maxsinr",
            Stage2Choice::MaxSr => "maxsr",
        };
        write!(f, "{}", s)
    }
}

impl std::str::FromStr for Stage2Choice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" => Ok(Stage2Choice::Svd),
            "minil" => Ok(Stage2Choice::MinIl),
            "maxsinr" => Ok(Stage2Choice::MaxSinr),
            "maxsr" => Ok(Stage2Choice::MaxSr),
            _ => Err(Error::Parse(format!(
                "unknown stage2 '{}', expected svd|minil|maxsinr|maxsr",
                s
            ))),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
                ser.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}
string_serde!(Stage1Choice);
string_serde!(Stage2Choice);
string_serde!(SweepKind);

/// What varies across the sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Surface position over an (x, y) grid at fixed height.
    PositionGrid,
    /// Number of surface elements.
    MSweep,
    /// Transmit power in dBm.
    PtSweep,
    /// Solver convergence study across element counts.
    ConvergenceTrace,
    /// Wall-time study across element counts (median of 3 solver repeats).
    RuntimeBench,
}

impl std::fmt::Display for SweepKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepKind::PositionGrid => "position_grid",
            SweepKind::MSweep => "m_sweep",
            SweepKind::PtSweep => "pt_sweep",
            SweepKind::ConvergenceTrace => "convergence_trace",
            SweepKind::RuntimeBench => "runtime_bench",
        };
        write!(f, "{}", s)
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "position_grid" => Ok(SweepKind::PositionGrid),
            "m_sweep" => Ok(SweepKind::MSweep),
            "pt_sweep" => Ok(SweepKind::PtSweep),
            "convergence_trace" => Ok(SweepKind::ConvergenceTrace),
            "runtime_bench" => Ok(SweepKind::RuntimeBench),
            _ => Err(Error::Parse(format!(
                "unknown sweep kind '{}', expected position_grid|m_sweep|pt_sweep|convergence_trace|runtime_bench",
                s
            ))),
        }
    }
}

/// One named experiment definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Element counts for m_sweep, convergence_trace, runtime_bench.
    #[serde(default)]
    pub m_values: Vec<usize>,
    /// Power points for pt_sweep.
    #[serde(default)]
    pub pt_values_dbm: Vec<f64>,
    /// Grid spacing in meters for position_grid.
    #[serde(default = "default_grid_step")]
    pub grid_step_m: f64,
    /// Inclusive x range of the grid.
    #[serde(default = "default_grid_range")]
    pub grid_x: [f64; 2],
    /// Inclusive y range of the grid.
    #[serde(default = "default_grid_range")]
    pub grid_y: [f64; 2],
    #[serde(default = "default_stage1")]
    pub stage1: Stage1Choice,
    #[serde(default = "default_stage2")]
    pub stage2: Stage2Choice,
}

fn default_grid_step() -> f64 {
    10.0
}
fn default_grid_range() -> [f64; 2] {
    [5.0, 45.0]
}
fn default_stage1() -> Stage1Choice {
    Stage1Choice::Mo
}
fn default_stage2() -> Stage2Choice {
    Stage2Choice::Svd
}

impl SweepSpec {
    /// Fill kind-dependent defaults and check the values are usable with the
    /// given scenario.
    pub fn normalized(&self, scenario: &ScenarioConfig) -> Result<SweepSpec> {
        let mut s = self.clone();
        match s.kind {
            SweepKind::MSweep | SweepKind::ConvergenceTrace | SweepKind::RuntimeBench => {
                if s.m_values.is_empty() {
                    s.m_values = vec![scenario.m];
                }
            }
            SweepKind::PtSweep => {
                if s.pt_values_dbm.is_empty() {
                    return Err(Error::InvalidConfig("pt_sweep needs pt_values_dbm".into()));
                }
            }
            SweepKind::PositionGrid => {
                if !(s.grid_step_m > 0.0) {
                    return Err(Error::InvalidConfig("grid_step_m must be positive".into()));
                }
                if s.grid_x[1] < s.grid_x[0] || s.grid_y[1] < s.grid_y[0] {
                    return Err(Error::InvalidConfig("grid ranges must be ascending".into()));
                }
            }
        }
        if let Stage1Choice::Group(mg) = s.stage1 {
            for &m in s.m_values.iter().chain(std::iter::once(&scenario.m)) {
                if m % mg != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "group size {} does not divide m = {}",
                        mg, m
                    )));
                }
            }
        }
        Ok(s)
    }
}

/// A full experiment file: scenario fields at the top level, sweeps below.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub sweeps: BTreeMap<String, SweepSpec>,
}

/// Load and validate a TOML experiment file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let cfg: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {}", path.display(), e)))?;
    cfg.scenario.validate()?;
    Ok(cfg)
}

/// Parse just the scenario keys from TOML text (sweep tables are ignored);
/// used by the C bindings.
pub fn parse_scenario_toml(text: &str) -> Result<ScenarioConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.scenario.validate()?;
    Ok(cfg.scenario)
}

/// Index of a named sweep in the lexicographic sweep order; used as the
/// sweep component of the per-trial seed so the same file always maps the
/// same name to the same streams.
pub fn sweep_index(cfg: &RunConfig, name: &str) -> Result<u64> {
    cfg.sweeps
        .keys()
        .position(|k| k == name)
        .map(|i| i as u64)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "sweep '{}' not found; available: {}",
                name,
                cfg.sweeps.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
}

// ---------- rows ----------

/// One (sweep point, trial) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_kind: String,
    pub sweep_value: String,
    pub trial: usize,
    pub seed: u64,
    pub stage1: String,
    pub stage2: String,
    pub m: usize,
    /// Group size; 0 when the solver has no group structure.
    pub mg: usize,
    pub pt_dbm: f64,
    pub il: f64,
    pub delta_inr_db: f64,
    pub sum_rate: f64,
    pub rates: Vec<f64>,
    pub iters_stage1: usize,
    pub wall_ms_stage1: f64,
    pub wall_ms_stage2: f64,
}

/// Result of one sweep run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<ResultRow>,
    /// Number of rows whose solve failed (their metric columns are NaN).
    pub failures: usize,
}

#[derive(Debug, Clone)]
struct SweepPoint {
    index: usize,
    label: String,
    scenario: ScenarioConfig,
}

fn sweep_points(scenario: &ScenarioConfig, sweep: &SweepSpec) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    match sweep.kind {
        SweepKind::PositionGrid => {
            let mut idx = 0;
            let nx = ((sweep.grid_x[1] - sweep.grid_x[0]) / sweep.grid_step_m).round() as usize + 1;
            let ny = ((sweep.grid_y[1] - sweep.grid_y[0]) / sweep.grid_step_m).round() as usize + 1;
            for ix in 0..nx {
                let x = sweep.grid_x[0] + ix as f64 * sweep.grid_step_m;
                for iy in 0..ny {
                    let y = sweep.grid_y[0] + iy as f64 * sweep.grid_step_m;
                    let mut sc = scenario.clone();
                    sc.ris_position = [x, y, scenario.ris_position[2]];
                    points.push(SweepPoint {
                        index: idx,
                        label: format!("({:.3},{:.3})", x, y),
                        scenario: sc,
                    });
                    idx += 1;
                }
            }
        }
        SweepKind::MSweep | SweepKind::ConvergenceTrace | SweepKind::RuntimeBench => {
            for (i, &m) in sweep.m_values.iter().enumerate() {
                let mut sc = scenario.clone();
                sc.m = m;
                points.push(SweepPoint { index: i, label: format!("{}", m), scenario: sc });
            }
        }
        SweepKind::PtSweep => {
            for (i, &pt) in sweep.pt_values_dbm.iter().enumerate() {
                let mut sc = scenario.clone();
                sc.pt_dbm = pt;
                points.push(SweepPoint { index: i, label: fmt_g17(pt), scenario: sc });
            }
        }
    }
    points
}

struct StageOneOutcome {
    theta: ndarray::Array2<ndarray_linalg::c64>,
    iters: usize,
    /// Beamformers produced by the solver itself (joint design only).
    bf: Option<Beamformers>,
}

fn run_stage1(
    ch: &ChannelSet,
    scenario: &ScenarioConfig,
    choice: Stage1Choice,
    q0: &ndarray::Array2<ndarray_linalg::c64>,
) -> Result<StageOneOutcome> {
    match choice {
        Stage1Choice::Mo => {
            let r = minimize_il_mo(ch, q0, &OptimizerOptions::default())?;
            Ok(StageOneOutcome { theta: r.scattering.theta, iters: r.trace.iterations, bf: None })
        }
        Stage1Choice::Rtp => {
            let (s, _diag) = minimize_il_rtp(ch, &OptimizerOptions::default())?;
            Ok(StageOneOutcome { theta: s.theta, iters: 1, bf: None })
        }
        Stage1Choice::Group(mg) => {
            let (s, tr) =
                minimize_il_group(ch, mg, GroupInner::Mo, &OptimizerOptions::group_default())?;
            Ok(StageOneOutcome { theta: s.theta, iters: tr.iterations, bf: None })
        }
        Stage1Choice::Diag => {
            let (s, tr) = minimize_il_diag(ch, &OptimizerOptions::diag_default())?;
            Ok(StageOneOutcome { theta: s.theta, iters: tr.iterations, bf: None })
        }
        Stage1Choice::Joint => {
            let opts = OptimizerOptions { max_iters: 100, rel_tol: 1e-4, ..Default::default() };
            let r = joint_min_il(ch, scenario.d, scenario.pt_mw(), &opts)?;
            Ok(StageOneOutcome {
                theta: r.scattering.theta,
                iters: r.trace.iterations,
                bf: Some(r.beamformers),
            })
        }
    }
}

fn run_stage2(
    ch: &ChannelSet,
    scenario: &ScenarioConfig,
    choice: Stage2Choice,
    theta: &ndarray::Array2<ndarray_linalg::c64>,
) -> Result<Beamformers> {
    let eff = effective_channels(ch, theta)?;
    let pt = scenario.pt_mw();
    let s2 = ch.noise_power;
    match choice {
        Stage2Choice::Svd => svd_precoders(&eff, pt, s2, scenario.d),
        Stage2Choice::MinIl => {
            Ok(min_il_beamformers(&eff, scenario.d, pt, 200, None, 1e-9)?.0)
        }
        Stage2Choice::MaxSinr => max_sinr_beamformers(&eff, scenario.d, pt, s2, 50),
        Stage2Choice::MaxSr => Ok(max_sr_beamformers(&eff, None, pt, s2, 100, scenario.d)?.0),
    }
}

/// Run one trial end to end; shared by the sweep loop and the C bindings.
pub fn run_trial(
    scenario: &ScenarioConfig,
    stage1: Stage1Choice,
    stage2: Stage2Choice,
    trial_seed: u64,
    stage1_repeats: usize,
) -> Result<(crate::metrics::TrialResult, usize, f64, f64)> {
    let mut rng = seeded_rng(trial_seed);
    let ch = draw_channels(scenario, &mut rng)?;
    let q0 = random_unitary(scenario.m, &mut rng)?;

    let mut walls = Vec::with_capacity(stage1_repeats.max(1));
    let mut outcome = None;
    for _ in 0..stage1_repeats.max(1) {
        let t0 = Instant::now();
        let o = run_stage1(&ch, scenario, stage1, &q0)?;
        walls.push(t0.elapsed().as_secs_f64() * 1e3);
        outcome = Some(o);
    }
    walls.sort_by(|a, b| a.partial_cmp(b).expect("finite wall times"));
    let wall1 = walls[walls.len() / 2];
    let outcome = outcome.expect("at least one repeat");

    let t1 = Instant::now();
    let bf = match (&outcome.bf, stage2) {
        // the joint design already carries leakage-minimizing beamformers
        (Some(b), Stage2Choice::MinIl) => b.clone(),
        _ => run_stage2(&ch, scenario, stage2, &outcome.theta)?,
    };
    let wall2 = t1.elapsed().as_secs_f64() * 1e3;

    let eff = effective_channels(&ch, &outcome.theta)?;
    let mut rates = Vec::with_capacity(scenario.k);
    for k in 0..scenario.k {
        rates.push(rate_of_user(&eff, &bf.v, ch.noise_power, k)?);
    }
    let sum_rate: f64 = rates.iter().sum();
    let il = interference_leakage(&ch, &outcome.theta)?;
    let delta = delta_inr_db(&ch, &outcome.theta)?;
    bf.validate(scenario.pt_mw(), 1e-8)?;
    Ok((
        crate::metrics::TrialResult { il, delta_inr_db: delta, rates, sum_rate, trace: None },
        outcome.iters,
        wall1,
        wall2,
    ))
}

/// Execute a sweep: all points times all trials, in parallel, with rows
/// returned in canonical order. Failed trials produce NaN metric rows and
/// are counted, not fatal.
pub fn run_sweep(
    scenario: &ScenarioConfig,
    sweep: &SweepSpec,
    sweep_idx: u64,
    trials_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<RunReport> {
    let sweep = sweep.normalized(scenario)?;
    let master_seed = seed_override.unwrap_or(scenario.seed);
    let trials = trials_override.unwrap_or(scenario.trials);
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be >= 1".into()));
    }
    let points = sweep_points(scenario, &sweep);
    let repeats = if sweep.kind == SweepKind::RuntimeBench { 3 } else { 1 };
    let mg = match sweep.stage1 {
        Stage1Choice::Group(mg) => mg,
        _ => 0,
    };

    let jobs: Vec<(usize, usize)> = points
        .iter()
        .flat_map(|p| (0..trials).map(move |t| (p.index, t)))
        .collect();
    let outcomes: Vec<(usize, usize, ResultRow, bool)> = jobs
        .par_iter()
        .map(|&(pi, trial)| {
            let point = &points[pi];
            let seed = derive_seed(&[master_seed, sweep_idx, trial as u64]);
            let base = ResultRow {
                sweep_kind: sweep.kind.to_string(),
                sweep_value: point.label.clone(),
                trial,
                seed,
                stage1: sweep.stage1.to_string(),
                stage2: sweep.stage2.to_string(),
                m: point.scenario.m,
                mg,
                pt_dbm: point.scenario.pt_dbm,
                il: f64::NAN,
                delta_inr_db: f64::NAN,
                sum_rate: f64::NAN,
                rates: vec![f64::NAN; point.scenario.k],
                iters_stage1: 0,
                wall_ms_stage1: 0.0,
                wall_ms_stage2: 0.0,
            };
            match run_trial(&point.scenario, sweep.stage1, sweep.stage2, seed, repeats) {
                Ok((res, iters, w1, w2)) => {
                    let row = ResultRow {
                        il: res.il,
                        delta_inr_db: res.delta_inr_db,
                        sum_rate: res.sum_rate,
                        rates: res.rates,
                        iters_stage1: iters,
                        wall_ms_stage1: w1,
                        wall_ms_stage2: w2,
                        ..base
                    };
                    (pi, trial, row, false)
                }
                Err(_) => (pi, trial, base, true),
            }
        })
        .collect();

    let mut sorted = outcomes;
    sorted.sort_by_key(|(pi, trial, _, _)| (*pi, *trial));
    let failures = sorted.iter().filter(|(_, _, _, failed)| *failed).count();
    let rows = sorted.into_iter().map(|(_, _, row, _)| row).collect();
    Ok(RunReport { rows, failures })
}

// ---------- output files ----------

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "jsonl" => Ok(OutputFormat::Jsonl),
            _ => Err(Error::Parse(format!("unknown format '{}', expected csv|jsonl", s))),
        }
    }
}

/// 17 significant digits; exact round trip for every finite double.
pub fn fmt_g17(x: f64) -> String {
    format!("{:.16e}", x)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io { path: path.display().to_string(), source: e }
}

/// Number of users a row batch describes (from the rate columns).
fn rate_count(rows: &[ResultRow]) -> usize {
    rows.first().map(|r| r.rates.len()).unwrap_or(0)
}

/// Write rows at `path`. CSV gets a header with one rate column per user;
/// an empty batch writes a header-only file with no rate columns.
pub fn write_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, path),
        OutputFormat::Jsonl => write_jsonl(rows, path),
    }
}

fn header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = [
        "sweep_kind",
        "sweep_value",
        "trial",
        "seed",
        "stage1",
        "stage2",
        "m",
        "mg",
        "pt_dbm",
        "il",
        "delta_inr_db",
        "sum_rate",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 1..=k {
        h.push(format!("rate_{}", i));
    }
    h.extend(["iters_stage1", "wall_ms_stage1", "wall_ms_stage2"].iter().map(|s| s.to_string()));
    h
}

fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let k = rate_count(rows);
    w.write_record(header(k)).map_err(|e| Error::Parse(e.to_string()))?;
    for r in rows {
        let mut rec: Vec<String> = vec![
            r.sweep_kind.clone(),
            r.sweep_value.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.stage1.clone(),
            r.stage2.clone(),
            r.m.to_string(),
            r.mg.to_string(),
            fmt_g17(r.pt_dbm),
            fmt_g17(r.il),
            fmt_g17(r.delta_inr_db),
            fmt_g17(r.sum_rate),
        ];
        for v in &r.rates {
            rec.push(fmt_g17(*v));
        }
        rec.push(r.iters_stage1.to_string());
        rec.push(format!("{:.3}", r.wall_ms_stage1));
        rec.push(format!("{:.3}", r.wall_ms_stage2));
        w.write_record(rec).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_jsonl(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    for r in rows {
        let line = serde_json::to_string(r).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(file, "{}", line).map_err(io_err(path))?;
    }
    Ok(())
}

/// Read back a CSV result file written by [`write_results`].
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let k = headers.iter().filter(|h| h.starts_with("rate_")).count();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Parse(format!("missing column {}", i)))
        };
        let pf = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|e| Error::Parse(format!("column {}: {}", i, e)))
        };
        let pu = |i: usize| -> Result<usize> {
            field(i)?.parse().map_err(|e| Error::Parse(format!("column {}: {}", i, e)))
        };
        let mut rates = Vec::with_capacity(k);
        for i in 0..k {
            rates.push(pf(12 + i)?);
        }
        rows.push(ResultRow {
            sweep_kind: field(0)?.to_string(),
            sweep_value: field(1)?.to_string(),
            trial: pu(2)?,
            seed: field(3)?.parse().map_err(|e| Error::Parse(format!("seed: {}", e)))?,
            stage1: field(4)?.to_string(),
            stage2: field(5)?.to_string(),
            m: pu(6)?,
            mg: pu(7)?,
            pt_dbm: pf(8)?,
            il: pf(9)?,
            delta_inr_db: pf(10)?,
            sum_rate: pf(11)?,
            rates,
            iters_stage1: pu(12 + k)?,
            wall_ms_stage1: pf(13 + k)?,
            wall_ms_stage2: pf(14 + k)?,
        });
    }
    Ok(rows)
}
