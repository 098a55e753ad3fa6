use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use corinfomax::experiment::{cell_seed, run_experiment, ExperimentConfig, RunResult, SweepAxis};
use corinfomax::verify::{run_suite, CheckOutcome, Suite};
use corinfomax::Error;

use crate::output::{fmt_num, fmt_opt, unix_seconds, write_meta, write_result, write_trace};
use crate::{load_config, resolve_seed, CliError, CliResult};

fn ensure_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn config_echo(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// Single run: writes `result.csv`, `trace.csv` and `meta.json` under `out`.
pub fn cmd_run(config: &Path, out: &Path, seed: Option<u64>, env_seed: Option<&str>) -> CliResult<RunResult> {
    let mut cfg = load_config(config)?;
    cfg.seed = resolve_seed(cfg.seed, seed, env_seed)?;
    if cfg.samples == 0 {
        eprintln!("warning: N = 0, nothing to learn; writing an empty trace");
    }
    ensure_dir(out)?;
    let started = unix_seconds();
    let run = run_experiment(&cfg)?;
    let r = run.result;
    write_result(&out.join("result.csv"), &r)?;
    write_trace(&out.join("trace.csv"), &r.trace)?;
    write_meta(
        &out.join("meta.json"),
        &serde_json::json!({
            "command": "run",
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix_s": started,
            "finished_unix_s": unix_seconds(),
            "wall_s": r.wall_s,
            "config": config_echo(&cfg),
        }),
    )?;
    Ok(r)
}

/// Parameters of [`cmd_sweep`].
#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub config: PathBuf,
    pub axis: String,
    pub values: Vec<String>,
    pub realizations: usize,
    pub out: PathBuf,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

/// One sweep cell.
#[derive(Debug, Clone)]
pub struct Cell {
    pub axis_index: usize,
    pub axis_value: String,
    pub realization: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, Error>,
}

impl Cell {
    pub fn status(&self) -> &'static str {
        match &self.outcome {
            Ok(_) => "ok",
            Err(Error::Divergence { .. }) => "diverged",
            Err(_) => "failed",
        }
    }
}

/// Mean and sample standard deviation of one metric over successful cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

fn moments(v: &[f64]) -> Option<Moments> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        f64::NAN
    };
    Some(Moments { mean, std })
}

/// Aggregate row for one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub axis_value: String,
    pub cells: usize,
    pub ok: usize,
    pub mean_sinr_db: Option<Moments>,
    pub final_sinr_db: Option<Moments>,
    pub ser: Option<Moments>,
    pub wall_s: Option<Moments>,
}

pub fn aggregate(values: &[String], cells: &[Cell]) -> Vec<Aggregate> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.axis_index == i).collect();
            let ok: Vec<&RunResult> = mine.iter().filter_map(|c| c.outcome.as_ref().ok()).collect();
            let pick = |f: &dyn Fn(&RunResult) -> Option<f64>| {
                let xs: Vec<f64> = ok.iter().filter_map(|r| f(r)).filter(|x| x.is_finite()).collect();
                moments(&xs)
            };
            Aggregate {
                axis_value: v.clone(),
                cells: mine.len(),
                ok: ok.len(),
                mean_sinr_db: pick(&|r| Some(r.mean_sinr_db)),
                final_sinr_db: pick(&|r| Some(r.final_sinr_db)),
                ser: pick(&|r| r.ser),
                wall_s: pick(&|r| Some(r.wall_s)),
            }
        })
        .collect()
}

/// Runs every `(value, realization)` cell. Cell seeds depend only on the
/// base seed and the cell's indices, so results do not depend on scheduling.
pub fn run_cells(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[String],
    realizations: usize,
    jobs: Option<usize>,
) -> CliResult<Vec<Cell>> {
    let configs = values
        .iter()
        .map(|v| axis.apply(base, v))
        .collect::<Result<Vec<_>, _>>()?;
    let specs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|i| (0..realizations).map(move |r| (i, r)))
        .collect();
    let work = || {
        specs
            .par_iter()
            .map(|&(i, r)| {
                let mut cfg = configs[i].clone();
                cfg.seed = cell_seed(base.seed, i, r);
                Cell {
                    axis_index: i,
                    axis_value: values[i].clone(),
                    realization: r,
                    seed: cfg.seed,
                    outcome: run_experiment(&cfg).map(|o| o.result),
                }
            })
            .collect::<Vec<_>>()
    };
    let mut cells = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| CliError {
                code: CliError::OTHER,
                message: format!("thread pool: {e}"),
            })?
            .install(work),
        None => work(),
    };
    cells.sort_by_key(|c| (c.axis_index, c.realization));
    Ok(cells)
}

pub const SWEEP_HEADER: [&str; 8] = [
    "axis_value",
    "realization",
    "seed",
    "mean_sinr_db",
    "final_sinr_db",
    "ser",
    "wall_s",
    "status",
];

pub const AGG_HEADER: [&str; 11] = [
    "axis_value",
    "cells",
    "ok",
    "mean_sinr_db_mean",
    "mean_sinr_db_std",
    "final_sinr_db_mean",
    "final_sinr_db_std",
    "ser_mean",
    "ser_std",
    "wall_s_mean",
    "wall_s_std",
];

fn write_sweep(path: &Path, cells: &[Cell]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SWEEP_HEADER)?;
    for c in cells {
        let (mean, fin, ser, wall) = match &c.outcome {
            Ok(r) => (fmt_num(r.mean_sinr_db), fmt_num(r.final_sinr_db), fmt_opt(r.ser), fmt_num(r.wall_s)),
            Err(_) => Default::default(),
        };
        w.write_record([
            c.axis_value.clone(),
            c.realization.to_string(),
            c.seed.to_string(),
            mean,
            fin,
            ser,
            wall,
            c.status().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_aggregate(path: &Path, rows: &[Aggregate]) -> CliResult<()> {
    let pair = |m: Option<Moments>| match m {
        Some(m) => [fmt_num(m.mean), fmt_num(m.std)],
        None => [String::new(), String::new()],
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGG_HEADER)?;
    for a in rows {
        let mut rec = vec![a.axis_value.clone(), a.cells.to_string(), a.ok.to_string()];
        for m in [a.mean_sinr_db, a.final_sinr_db, a.ser, a.wall_s] {
            rec.extend(pair(m));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Sweep over one axis: writes `sweep.csv`, `sweep_agg.csv` and `meta.json`.
/// Failed cells are recorded and the sweep continues.
pub fn cmd_sweep(req: &SweepRequest, env_seed: Option<&str>) -> CliResult<Vec<Cell>> {
    let mut base = load_config(&req.config)?;
    base.seed = resolve_seed(base.seed, req.seed, env_seed)?;
    let axis = SweepAxis::parse(&req.axis).map_err(|e| CliError::schema(e.to_string()))?;
    if req.values.is_empty() {
        return Err(CliError::schema("--values needs at least one value"));
    }
    if req.realizations == 0 {
        return Err(CliError::schema("--realizations must be positive"));
    }
    ensure_dir(&req.out)?;
    let started = unix_seconds();
    let cells = run_cells(&base, axis, &req.values, req.realizations, req.jobs)?;
    for c in &cells {
        if let Err(e) = &c.outcome {
            eprintln!("cell {}={} r{}: {e}", axis.name(), c.axis_value, c.realization);
        }
    }
    write_sweep(&req.out.join("sweep.csv"), &cells)?;
    write_aggregate(&req.out.join("sweep_agg.csv"), &aggregate(&req.values, &cells))?;
    write_meta(
        &req.out.join("meta.json"),
        &serde_json::json!({
            "command": "sweep",
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix_s": started,
            "finished_unix_s": unix_seconds(),
            "axis": axis.name(),
            "values": req.values,
            "realizations": req.realizations,
            "config": config_echo(&base),
        }),
    )?;
    Ok(cells)
}

/// Runs a check suite, printing one line per invariant. Fails with the
/// first failing invariant.
pub fn cmd_check(suite: &str, out: &mut impl Write) -> CliResult<Vec<CheckOutcome>> {
    let suite = Suite::parse(suite).map_err(|e| CliError::schema(e.to_string()))?;
    let results = run_suite(suite);
    for c in &results {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{verdict} {}: {} {}", c.suite, c.name, c.detail)?;
    }
    match results.iter().find(|c| !c.passed) {
        Some(c) => Err(CliError {
            code: CliError::CHECK,
            message: format!("{}: {} failed ({})", c.suite, c.name, c.detail),
        }),
        None => Ok(results),
    }
}
