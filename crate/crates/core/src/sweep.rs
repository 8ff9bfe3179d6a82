//! Sweep configuration, execution, and plot-ready aggregates.
//!
//! A sweep varies exactly one axis (`k0`, `rho`, or `epsilon`) over a list
//! of values, repeats every cell across seeds and algorithms, and reports
//! per-cell mean/median/quartiles of the run metrics. Configuration is a
//! flat TOML document; any key can be overridden through the environment
//! with the `FEDEPM_` prefix (e.g. `FEDEPM_RHO=0.8`).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::algorithms::{AlgorithmKind, BaselineConfig, ClientHyper, StepRule};
use crate::data::{self, PartitionPolicy};
use crate::elastic_net::PenaltyConfig;
use crate::harness::{run_experiment, ExperimentConfig, SelectionPolicy};
use crate::numkit::{DataShard, ModelVector};
use crate::privacy::DpConfig;
use crate::rng::{mix, splitmix64, stream, tags};
use crate::{Error, Result};

pub const METRICS: [&str; 5] = ["f_over_m", "cr", "tct", "lct", "snr"];

/// The swept axis and its values.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    K0(Vec<usize>),
    Rho(Vec<f64>),
    Epsilon(Vec<f64>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::K0(_) => "k0",
            SweepAxis::Rho(_) => "rho",
            SweepAxis::Epsilon(_) => "epsilon",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::K0(v) => v.iter().map(|&x| x as f64).collect(),
            SweepAxis::Rho(v) | SweepAxis::Epsilon(v) => v.clone(),
        }
    }
}

/// Where the client shards come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSpec {
    /// Synthetic logistic data with the given dimension, row count, and
    /// logit scale (std of the generating logits).
    Synthetic { n: usize, d: usize, w_scale: f64 },
    Adult(PathBuf),
}

/// A fully validated sweep description.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub algorithms: Vec<AlgorithmKind>,
    pub axis: SweepAxis,
    pub seeds: Vec<u64>,
    pub m: usize,
    pub k0: usize,
    pub rho: f64,
    pub epsilon: f64,
    pub dp_enabled: bool,
    pub selection: SelectionPolicy,
    pub s0: Option<usize>,
    pub max_iterations: usize,
    pub beta: f64,
    pub hyper: ClientHyper,
    pub baseline: BaselineConfig,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub data: DataSpec,
    pub partition: PartitionPolicy,
    pub parallel_clients: bool,
    pub wall_clock: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            algorithms: vec![AlgorithmKind::FedEpm],
            axis: SweepAxis::K0(vec![12]),
            seeds: vec![0],
            m: 50,
            k0: 12,
            rho: 0.5,
            epsilon: 0.1,
            dp_enabled: true,
            selection: SelectionPolicy::Iid,
            s0: None,
            max_iterations: 20_000,
            beta: 0.001,
            hyper: ClientHyper::default(),
            baseline: BaselineConfig::default(),
            lambda: None,
            eta: None,
            data: DataSpec::Synthetic { n: 14, d: 2000, w_scale: 2.0 },
            partition: PartitionPolicy::Even,
            parallel_clients: false,
            wall_clock: false,
        }
    }
}

// Keys accepted in config files and FEDEPM_* environment overrides.
const KNOWN_KEYS: [&str; 28] = [
    "algorithm",
    "algorithms",
    "m",
    "k0",
    "rho",
    "epsilon",
    "dp",
    "selection",
    "s0",
    "max_iterations",
    "seed",
    "seeds",
    "trials",
    "beta",
    "mu0",
    "c",
    "alpha",
    "prox_mu",
    "inner_steps",
    "step_rule",
    "step_gamma",
    "lambda",
    "eta",
    "data",
    "n",
    "d",
    "w_scale",
    "partition",
];

/// Parse a flat TOML configuration into a [`SweepSpec`], applying the
/// experiment defaults for missing keys and `FEDEPM_*` environment
/// overrides on top of the file.
pub fn parse_config(contents: &str) -> Result<SweepSpec> {
    let mut table: toml::Table = contents
        .parse()
        .map_err(|e| Error::Config(format!("not valid TOML: {e}")))?;
    for key in table.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
    }
    // Environment overrides: FEDEPM_<KEY>=<toml value>.
    for (name, raw) in std::env::vars() {
        let Some(key) = name.strip_prefix("FEDEPM_") else { continue };
        let key = key.to_ascii_lowercase();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            continue;
        }
        let value = match format!("x = {raw}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("x").unwrap(),
            Err(_) => toml::Value::String(raw),
        };
        table.insert(key, value);
    }
    build_spec(&table)
}

fn want_int(key: &str, v: &toml::Value) -> Result<usize> {
    v.as_integer()
        .filter(|&x| x >= 0)
        .map(|x| x as usize)
        .ok_or_else(|| Error::Config(format!("key `{key}` must be a nonnegative integer")))
}

fn want_float(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("key `{key}` must be a number"))),
    }
}

fn want_bool(key: &str, v: &toml::Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::Config(format!("key `{key}` must be a boolean")))
}

fn want_str<'v>(key: &str, v: &'v toml::Value) -> Result<&'v str> {
    v.as_str().ok_or_else(|| Error::Config(format!("key `{key}` must be a string")))
}

fn build_spec(table: &toml::Table) -> Result<SweepSpec> {
    let mut spec = SweepSpec::default();

    // The sweep axis: exactly one of k0/rho/epsilon may be a list.
    let list_keys: Vec<&str> = ["k0", "rho", "epsilon"]
        .into_iter()
        .filter(|k| matches!(table.get(*k), Some(toml::Value::Array(_))))
        .collect();
    if list_keys.len() > 1 {
        return Err(Error::Config(format!(
            "only one sweep axis is allowed, found lists for {}",
            list_keys.join(" and ")
        )));
    }

    for (key, value) in table {
        match key.as_str() {
            "algorithm" => spec.algorithms = vec![AlgorithmKind::parse(want_str(key, value)?)?],
            "algorithms" => {
                let arr = value
                    .as_array()
                    .ok_or_else(|| Error::Config("key `algorithms` must be a list".into()))?;
                spec.algorithms = arr
                    .iter()
                    .map(|v| AlgorithmKind::parse(want_str("algorithms", v)?))
                    .collect::<Result<_>>()?;
                if spec.algorithms.is_empty() {
                    return Err(Error::Config("key `algorithms` must not be empty".into()));
                }
            }
            "m" => spec.m = want_int(key, value)?,
            "k0" => match value {
                toml::Value::Array(arr) => {
                    let vals = arr.iter().map(|v| want_int("k0", v)).collect::<Result<Vec<_>>>()?;
                    spec.axis = SweepAxis::K0(vals);
                }
                _ => spec.k0 = want_int(key, value)?,
            },
            "rho" => match value {
                toml::Value::Array(arr) => {
                    let vals =
                        arr.iter().map(|v| want_float("rho", v)).collect::<Result<Vec<_>>>()?;
                    spec.axis = SweepAxis::Rho(vals);
                }
                _ => spec.rho = want_float(key, value)?,
            },
            "epsilon" => match value {
                toml::Value::Array(arr) => {
                    let vals = arr
                        .iter()
                        .map(|v| want_float("epsilon", v))
                        .collect::<Result<Vec<_>>>()?;
                    spec.axis = SweepAxis::Epsilon(vals);
                }
                _ => spec.epsilon = want_float(key, value)?,
            },
            "dp" => spec.dp_enabled = want_bool(key, value)?,
            "selection" => {
                spec.selection = match want_str(key, value)? {
                    "iid" => SelectionPolicy::Iid,
                    "coverage" => SelectionPolicy::Coverage,
                    other => {
                        return Err(Error::Config(format!(
                            "key `selection` must be `iid` or `coverage`, got `{other}`"
                        )))
                    }
                }
            }
            "s0" => spec.s0 = Some(want_int(key, value)?),
            "max_iterations" => spec.max_iterations = want_int(key, value)?,
            "seed" | "trials" | "seeds" => {} // handled below
            "beta" => spec.beta = want_float(key, value)?,
            "mu0" => spec.hyper.mu0 = want_float(key, value)?,
            "c" => spec.hyper.c = want_float(key, value)?,
            "alpha" => spec.hyper.alpha = want_float(key, value)?,
            "prox_mu" => spec.baseline.prox_mu = want_float(key, value)?,
            "inner_steps" => spec.baseline.inner_steps = want_int(key, value)?.max(1),
            "step_rule" => match want_str(key, value)? {
                "decaying" => spec.baseline.step_rule = StepRule::Decaying,
                "fixed" => {} // resolved after the loop with step_gamma
                other => {
                    return Err(Error::Config(format!(
                        "key `step_rule` must be `decaying` or `fixed`, got `{other}`"
                    )))
                }
            },
            "step_gamma" => {} // paired with step_rule below
            "lambda" => spec.lambda = Some(want_float(key, value)?),
            "eta" => spec.eta = Some(want_float(key, value)?),
            "data" => {
                let s = want_str(key, value)?;
                if s == "synthetic" {
                    // keep defaults; n/d/w_scale keys refine them
                } else if let Some(path) = s.strip_prefix("adult:") {
                    spec.data = DataSpec::Adult(PathBuf::from(path));
                } else {
                    return Err(Error::Config(format!(
                        "key `data` must be `synthetic` or `adult:<path>`, got `{s}`"
                    )));
                }
            }
            "n" | "d" | "w_scale" => {} // folded into DataSpec below
            "partition" => match want_str(key, value)? {
                "even" => spec.partition = PartitionPolicy::Even,
                "dirichlet" => spec.partition = PartitionPolicy::Dirichlet(0.5),
                other => {
                    return Err(Error::Config(format!(
                        "key `partition` must be `even` or `dirichlet`, got `{other}`"
                    )))
                }
            },
            _ => unreachable!("unknown keys rejected above"),
        }
    }

    // Synthetic data dimensions.
    if let DataSpec::Synthetic { n, d, w_scale } = &mut spec.data {
        if let Some(v) = table.get("n") {
            *n = want_int("n", v)?;
        }
        if let Some(v) = table.get("d") {
            *d = want_int("d", v)?;
        }
        if let Some(v) = table.get("w_scale") {
            *w_scale = want_float("w_scale", v)?;
        }
    }

    // Fixed step rule needs its gamma.
    if matches!(table.get("step_rule"), Some(v) if v.as_str() == Some("fixed")) {
        let gamma = table
            .get("step_gamma")
            .ok_or_else(|| Error::Config("step_rule `fixed` requires `step_gamma`".into()))
            .and_then(|v| want_float("step_gamma", v))?;
        spec.baseline.step_rule = StepRule::Fixed(gamma);
    } else if table.contains_key("step_gamma") {
        return Err(Error::Config("`step_gamma` requires step_rule = \"fixed\"".into()));
    }

    // Seed fan-out: an explicit list wins, otherwise `trials` seeds derived
    // from the base seed.
    let base_seed = table.get("seed").map(|v| want_int("seed", v)).transpose()?.unwrap_or(0) as u64;
    if let Some(v) = table.get("seeds") {
        let arr =
            v.as_array().ok_or_else(|| Error::Config("key `seeds` must be a list".into()))?;
        spec.seeds = arr
            .iter()
            .map(|v| want_int("seeds", v).map(|x| x as u64))
            .collect::<Result<_>>()?;
        if spec.seeds.is_empty() {
            return Err(Error::Config("key `seeds` must not be empty".into()));
        }
    } else {
        let trials = table.get("trials").map(|v| want_int("trials", v)).transpose()?.unwrap_or(1);
        if trials == 0 {
            return Err(Error::Config("key `trials` must be positive".into()));
        }
        spec.seeds = (0..trials as u64).map(|r| base_seed.wrapping_add(r)).collect();
    }

    validate_spec(&spec)?;
    Ok(spec)
}

fn validate_spec(spec: &SweepSpec) -> Result<()> {
    if spec.m == 0 {
        return Err(Error::Config("m must be positive".into()));
    }
    if spec.axis.values().is_empty() {
        return Err(Error::Config("sweep axis must have at least one value".into()));
    }
    if !(spec.rho > 0.0 && spec.rho <= 1.0) {
        return Err(Error::Config(format!("rho must lie in (0, 1], got {}", spec.rho)));
    }
    if let SweepAxis::Rho(vals) = &spec.axis {
        if vals.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("rho values must lie in (0, 1]".into()));
        }
    }
    if spec.dp_enabled && spec.epsilon <= 0.0 {
        return Err(Error::Config("epsilon must be positive while dp = true".into()));
    }
    if spec.selection == SelectionPolicy::Coverage && spec.s0.is_none() {
        return Err(Error::Config("selection = \"coverage\" requires s0".into()));
    }
    Ok(())
}

/// The experiment configuration for one sweep cell.
fn experiment_for(spec: &SweepSpec, alg: AlgorithmKind, axis_value: f64) -> Result<ExperimentConfig> {
    let (k0, rho, epsilon) = match spec.axis {
        SweepAxis::K0(_) => (axis_value as usize, spec.rho, spec.epsilon),
        SweepAxis::Rho(_) => (spec.k0, axis_value, spec.epsilon),
        SweepAxis::Epsilon(_) => (spec.k0, spec.rho, axis_value),
    };
    let mut cfg = ExperimentConfig::new(alg, spec.m, k0, rho)?;
    cfg.dp = if spec.dp_enabled { DpConfig::enabled(epsilon) } else { DpConfig::off() };
    cfg.selection = spec.selection;
    cfg.s0 = spec.s0;
    cfg.max_iterations = spec.max_iterations.max(k0);
    cfg.baseline = spec.baseline;
    cfg.hyper = spec.hyper;
    cfg.parallel_clients = spec.parallel_clients;
    cfg.wall_clock = spec.wall_clock;
    let eta = spec.eta.unwrap_or(cfg.penalty.eta);
    let lambda = spec.lambda.unwrap_or(eta / 2.0);
    cfg.penalty = PenaltyConfig::new(lambda, eta, k0)?;
    Ok(cfg)
}

fn shards_for_trial(
    spec: &SweepSpec,
    adult: Option<&data::Dataset>,
    trial_seed: u64,
) -> Result<Vec<DataShard>> {
    match &spec.data {
        DataSpec::Synthetic { n, d, w_scale } => {
            // ||w_true|| = w_scale * sqrt(d) makes the generating logits
            // roughly N(0, w_scale^2) after column normalization.
            let entry = w_scale * (*d as f64).sqrt() / (*n as f64).sqrt();
            let w_true = ModelVector::new(vec![entry; *n]);
            let mut rng = stream(trial_seed, tags::SYNTH_DATA);
            data::synth_logistic(*n, *d, spec.m, &w_true, spec.beta, &mut rng)
        }
        DataSpec::Adult(_) => {
            let ds = adult.expect("adult dataset preloaded");
            let mut rng = stream(trial_seed, tags::PARTITION);
            data::partition_with(ds, spec.m, spec.beta, spec.partition, &mut rng)
        }
    }
}

/// One aggregate statistic row: a (algorithm, axis value, metric) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub algorithm: String,
    pub axis: String,
    pub value: f64,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n_runs: usize,
}

/// Aggregated sweep output plus any per-cell errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<CellStats>,
    pub errors: Vec<String>,
}

/// Execution options for [`run_sweep_with`].
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads for sweep cells; 0 uses the default pool.
    pub threads: usize,
    /// If set, per-run trace CSVs are written under `<dir>/runs/`.
    pub out_dir: Option<PathBuf>,
}

/// Run a sweep with the default options.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    run_sweep_with(spec, &SweepOptions::default())
}

/// Run every (algorithm, axis value, seed) cell, aggregate the metrics, and
/// optionally write per-run traces. Per-run failures are recorded in the
/// table and do not abort the sweep.
pub fn run_sweep_with(spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepTable> {
    let adult = match &spec.data {
        DataSpec::Adult(path) => Some(data::load_adult(path)?),
        DataSpec::Synthetic { .. } => None,
    };
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir.join("runs"))?;
    }

    let values = spec.axis.values();
    let mut tasks = Vec::new();
    for (ai, alg) in spec.algorithms.iter().enumerate() {
        for (vi, &value) in values.iter().enumerate() {
            for (si, &seed) in spec.seeds.iter().enumerate() {
                tasks.push((ai, vi, si, *alg, value, seed));
            }
        }
    }

    let run_task = |&(_, _, _, alg, value, seed): &(usize, usize, usize, AlgorithmKind, f64, u64)|
     -> std::result::Result<[f64; 5], String> {
        // Cell seeding: the trial seed mixed with a hash of the cell
        // identity, so cells are independent but reproducible. Data depends
        // only on the trial seed and is shared across cells.
        let cell_tag = splitmix64(
            mix(tags::SWEEP_CELL, alg.as_str().len() as u64 ^ value.to_bits())
                ^ splitmix64(alg as u64),
        );
        let shards = shards_for_trial(spec, adult.as_ref(), seed).map_err(|e| e.to_string())?;
        let mut cfg = experiment_for(spec, alg, value).map_err(|e| e.to_string())?;
        cfg.seed = mix(seed, cell_tag);
        let result = run_experiment(&cfg, &shards).map_err(|e| e.to_string())?;
        if let Some(dir) = &opts.out_dir {
            let name = format!(
                "{}_{}-{}_seed{}.csv",
                alg.as_str(),
                spec.axis.name(),
                value,
                seed
            );
            std::fs::write(dir.join("runs").join(name), result.trace_csv())
                .map_err(|e| e.to_string())?;
        }
        let m = result.metrics;
        Ok([m.f_over_m, m.cr as f64, m.tct, m.lct_mean, m.snr])
    };

    let outcomes: Vec<std::result::Result<[f64; 5], String>> = if opts.threads == 1 {
        tasks.iter().map(run_task).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_task).collect())
    };

    // Group by (algorithm, value) preserving the configured order.
    let mut table = SweepTable::default();
    for (ai, alg) in spec.algorithms.iter().enumerate() {
        for (vi, &value) in values.iter().enumerate() {
            let mut per_metric: [Vec<f64>; 5] = Default::default();
            for (ti, task) in tasks.iter().enumerate() {
                if task.0 != ai || task.1 != vi {
                    continue;
                }
                match &outcomes[ti] {
                    Ok(ms) => {
                        for (dst, &v) in per_metric.iter_mut().zip(ms.iter()) {
                            dst.push(v);
                        }
                    }
                    Err(e) => table.errors.push(format!(
                        "{} {}={} seed={}: {e}",
                        alg.as_str(),
                        spec.axis.name(),
                        value,
                        task.5
                    )),
                }
            }
            for (mi, name) in METRICS.iter().enumerate() {
                let xs = &mut per_metric[mi];
                xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
                table.rows.push(CellStats {
                    algorithm: alg.as_str().to_string(),
                    axis: spec.axis.name().to_string(),
                    value,
                    metric: name.to_string(),
                    mean: mean(xs),
                    median: quantile(xs, 0.5),
                    q25: quantile(xs, 0.25),
                    q75: quantile(xs, 0.75),
                    n_runs: xs.len(),
                });
            }
        }
    }
    Ok(table)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

// Linear-interpolation quantile on sorted data, with a guard so runs of
// identical (possibly infinite) values do not produce inf - inf.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[lo] == sorted[hi] {
        return sorted[lo];
    }
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format `{other}`"))),
        }
    }
}

pub const TABLE_HEADER: &str = "algorithm,axis,value,metric,mean,median,q25,q75,n_runs";

/// Serialize the aggregate table. CSV uses the fixed column order; JSON uses
/// the same schema with one object per row (non-finite numbers are encoded
/// as strings).
pub fn emit(table: &SweepTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(TABLE_HEADER);
            out.push('\n');
            for r in &table.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    r.algorithm, r.axis, r.value, r.metric, r.mean, r.median, r.q25, r.q75,
                    r.n_runs
                ));
            }
            out
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "algorithm": r.algorithm,
                        "axis": r.axis,
                        "value": json_number(r.value),
                        "metric": r.metric,
                        "mean": json_number(r.mean),
                        "median": json_number(r.median),
                        "q25": json_number(r.q25),
                        "q75": json_number(r.q75),
                        "n_runs": r.n_runs,
                    })
                })
                .collect();
            let doc = serde_json::json!({ "rows": rows, "errors": table.errors });
            serde_json::to_string_pretty(&doc).expect("static schema")
        }
    }
}

fn json_number(x: f64) -> serde_json::Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => serde_json::Value::Number(n),
        None => serde_json::Value::String(x.to_string()),
    }
}

fn field_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Config(format!("cannot parse `{s}` as a number")))
}

/// Parse a table previously written by [`emit`] with [`OutputFormat::Csv`].
pub fn parse_table_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TABLE_HEADER => {}
        other => return Err(Error::Config(format!("bad table header: {other:?}"))),
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(Error::Config(format!("bad table row: `{line}`")));
        }
        rows.push(CellStats {
            algorithm: f[0].to_string(),
            axis: f[1].to_string(),
            value: field_f64(f[2])?,
            metric: f[3].to_string(),
            mean: field_f64(f[4])?,
            median: field_f64(f[5])?,
            q25: field_f64(f[6])?,
            q75: field_f64(f[7])?,
            n_runs: f[8]
                .parse()
                .map_err(|_| Error::Config(format!("bad n_runs `{}`", f[8])))?,
        });
    }
    Ok(SweepTable { rows, errors: Vec::new() })
}

/// Parse a table previously written by [`emit`] with [`OutputFormat::Json`].
pub fn parse_table_json(text: &str) -> Result<SweepTable> {
    let doc: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad JSON: {e}")))?;
    let rows = doc
        .get("rows")
        .and_then(|r| r.as_array())
        .ok_or_else(|| Error::Config("missing `rows` array".into()))?;
    let num = |v: &serde_json::Value, key: &str| -> Result<f64> {
        match v.get(key) {
            Some(serde_json::Value::Number(n)) => Ok(n.as_f64().unwrap()),
            Some(serde_json::Value::String(s)) => field_f64(s),
            _ => Err(Error::Config(format!("missing numeric field `{key}`"))),
        }
    };
    let text_field = |v: &serde_json::Value, key: &str| -> Result<String> {
        v.get(key)
            .and_then(|x| x.as_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Config(format!("missing string field `{key}`")))
    };
    let mut out = Vec::with_capacity(rows.len());
    for v in rows {
        out.push(CellStats {
            algorithm: text_field(v, "algorithm")?,
            axis: text_field(v, "axis")?,
            value: num(v, "value")?,
            metric: text_field(v, "metric")?,
            mean: num(v, "mean")?,
            median: num(v, "median")?,
            q25: num(v, "q25")?,
            q75: num(v, "q75")?,
            n_runs: v
                .get("n_runs")
                .and_then(|x| x.as_u64())
                .ok_or_else(|| Error::Config("missing field `n_runs`".into()))?
                as usize,
        });
    }
    let errors = doc
        .get("errors")
        .and_then(|e| e.as_array())
        .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
        .unwrap_or_default();
    Ok(SweepTable { rows: out, errors })
}

/// Fetch the per-seed values of one metric from a table row lookup; helper
/// for tests and the CLI summary.
pub fn table_lookup<'t>(
    table: &'t SweepTable,
    algorithm: &str,
    value: f64,
    metric: &str,
) -> Option<&'t CellStats> {
    table.rows.iter().find(|r| {
        r.algorithm == algorithm && r.metric == metric && (r.value - value).abs() < 1e-12
    })
}

/// Write the aggregate table (and return the path) under `dir`.
pub fn write_table(table: &SweepTable, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    let name = match format {
        OutputFormat::Csv => "aggregate.csv",
        OutputFormat::Json => "aggregate.json",
    };
    let path = dir.join(name);
    std::fs::write(&path, emit(table, format))?;
    Ok(path)
}

/// Names of all algorithms appearing in a table, in first-appearance order.
pub fn table_algorithms(table: &SweepTable) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in &table.rows {
        if seen.insert(r.algorithm.clone()) {
            out.push(r.algorithm.clone());
        }
    }
    out
}
