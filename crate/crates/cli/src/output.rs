//! CSV and metadata writers. Numbers carry 12 significant digits with a `.`
//! decimal point; missing or non-finite values are written as empty fields.

use std::path::Path;

use corinfomax::experiment::RunResult;

use crate::CliResult;

/// `x` rounded to 12 significant digits, shortest form, no thousands separators.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..12).contains(&e) {
        let decimals = (11 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_fraction(&s).to_owned()
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        format!("{}e{exp}", trim_fraction(mantissa))
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub const RESULT_HEADER: [&str; 11] = [
    "seed",
    "samples",
    "window",
    "mean_sinr_db",
    "final_sinr_db",
    "separator_sinr_db",
    "ser",
    "separator_ser",
    "nu_mean",
    "nu_max",
    "converged_fraction",
];

/// One-row `result.csv`. Wall time goes to `meta.json` so the body is
/// reproducible.
pub fn write_result(path: &Path, r: &RunResult) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_HEADER)?;
    w.write_record([
        r.seed.to_string(),
        r.samples.to_string(),
        r.window.to_string(),
        fmt_num(r.mean_sinr_db),
        fmt_num(r.final_sinr_db),
        fmt_num(r.separator_sinr_db),
        fmt_opt(r.ser),
        fmt_opt(r.separator_ser),
        fmt_num(r.nu_mean),
        r.nu_max_used.to_string(),
        fmt_num(r.converged_fraction),
    ])?;
    w.flush()?;
    Ok(())
}

/// `trace.csv` with 1-based window indices.
pub fn write_trace(path: &Path, trace: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window", "sinr_db"])?;
    for (i, v) in trace.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn unix_seconds() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn write_meta(path: &Path, meta: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}
