//! Separation quality: permutation and scale alignment, SINR, 4-PAM symbol
//! error rate and PSNR.
//!
//! SINR convention: output `i` is matched to source `pi(i)` by maximizing the
//! total absolute Pearson correlation, scaled by the least-squares factor
//! `alpha_i = <y_i, s> / <s, s>`, and scored as
//! `10 log10(|alpha_i s|^2 / |y_i - alpha_i s|^2)`, capped at 150 dB. The mean
//! averages the per-source dB values.

use nalgebra::DMatrix;

use crate::datagen::PAM4_LEVELS;
use crate::error::{check_dim, Error, Result};

pub const SINR_CAP_DB: f64 = 150.0;
const CAP_RATIO: f64 = 1e-15;
const MAX_ASSIGNMENT_DIM: usize = 20;

/// Output `i` estimates source `perm[i]` scaled by `scales[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub perm: Vec<usize>,
    pub scales: Vec<f64>,
}

impl Alignment {
    /// Rows reordered to source order and divided by their scales.
    pub fn apply(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(y.nrows(), y.ncols());
        for (i, (&p, &a)) in self.perm.iter().zip(&self.scales).enumerate() {
            out.row_mut(p).copy_from(&(y.row(i) / a));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    /// Indexed by source.
    pub per_source: Vec<f64>,
    pub mean: f64,
}

fn centered_norm(row: &[f64]) -> (Vec<f64>, f64) {
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    let c: Vec<f64> = row.iter().map(|v| v - mean).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (c, norm)
}

/// `|corr[i][j]|` between output `i` and source `j`; `None` for a constant row.
fn abs_correlations(y: &DMatrix<f64>, s: &DMatrix<f64>) -> Vec<Vec<Option<f64>>> {
    let rows = |m: &DMatrix<f64>| -> Vec<(Vec<f64>, f64)> {
        (0..m.nrows())
            .map(|i| centered_norm(&m.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    };
    let (yr, sr) = (rows(y), rows(s));
    yr.iter()
        .map(|(yc, yn)| {
            sr.iter()
                .map(|(sc, sn)| {
                    if *yn == 0.0 || *sn == 0.0 {
                        None
                    } else {
                        let dot: f64 = yc.iter().zip(sc).map(|(a, b)| a * b).sum();
                        Some((dot / (yn * sn)).abs())
                    }
                })
                .collect()
        })
        .collect()
}

/// Assignment maximizing the total weight, by dynamic programming over subsets.
fn best_assignment(weight: &[Vec<f64>]) -> Vec<usize> {
    let n = weight.len();
    let full = 1usize << n;
    let mut best = vec![f64::NEG_INFINITY; full];
    let mut choice = vec![usize::MAX; full];
    best[0] = 0.0;
    for mask in 0..full {
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == n {
            continue;
        }
        for j in 0..n {
            if mask & (1 << j) == 0 {
                let next = mask | (1 << j);
                let v = best[mask] + weight[i][j];
                if v > best[next] {
                    best[next] = v;
                    choice[next] = j;
                }
            }
        }
    }
    let mut perm = vec![0; n];
    let mut mask = full - 1;
    for i in (0..n).rev() {
        let j = choice[mask];
        perm[i] = j;
        mask &= !(1 << j);
    }
    perm
}

fn ls_scale(y: &[f64], s: &[f64]) -> f64 {
    let ss: f64 = s.iter().map(|v| v * v).sum();
    y.iter().zip(s).map(|(a, b)| a * b).sum::<f64>() / ss
}

fn check_shapes(y: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<()> {
    check_dim(s.nrows(), y.nrows(), "output rows")?;
    check_dim(s.ncols(), y.ncols(), "output samples")?;
    if y.nrows() == 0 {
        return Err(Error::EmptyData("no signals to align"));
    }
    if y.nrows() > MAX_ASSIGNMENT_DIM {
        return Err(Error::invalid(format!(
            "alignment supports at most {MAX_ASSIGNMENT_DIM} signals"
        )));
    }
    if y.ncols() < 2 {
        return Err(Error::EmptyData("alignment needs at least two samples"));
    }
    Ok(())
}

fn align_with(y: &DMatrix<f64>, s: &DMatrix<f64>, corr: &[Vec<Option<f64>>]) -> Alignment {
    let weight: Vec<Vec<f64>> = corr
        .iter()
        .map(|r| r.iter().map(|c| c.unwrap_or(0.0)).collect())
        .collect();
    let perm = best_assignment(&weight);
    let scales = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let yr: Vec<f64> = y.row(i).iter().copied().collect();
            let sr: Vec<f64> = s.row(j).iter().copied().collect();
            ls_scale(&yr, &sr)
        })
        .collect();
    Alignment { perm, scales }
}

/// Resolves the permutation and scale ambiguity of `y` against the sources `s`.
pub fn resolve_alignment(y: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<Alignment> {
    check_shapes(y, s)?;
    let corr = abs_correlations(y, s);
    for (i, r) in corr.iter().enumerate() {
        if r.iter().any(|c| c.is_none()) {
            return Err(Error::DegenerateSignal(format!(
                "constant row among output {} or the sources",
                i + 1
            )));
        }
    }
    Ok(align_with(y, s, &corr))
}

fn sinr_of_pair(y: &[f64], s: &[f64], alpha: f64) -> f64 {
    let signal: f64 = s.iter().map(|v| (alpha * v).powi(2)).sum();
    let resid: f64 = y.iter().zip(s).map(|(a, b)| (a - alpha * b).powi(2)).sum();
    if signal == 0.0 {
        return -SINR_CAP_DB;
    }
    if resid <= CAP_RATIO * signal {
        return SINR_CAP_DB;
    }
    (10.0 * (signal / resid).log10()).clamp(-SINR_CAP_DB, SINR_CAP_DB)
}

fn report(y: &DMatrix<f64>, s: &DMatrix<f64>, a: &Alignment) -> SinrReport {
    let mut per_source = vec![0.0; s.nrows()];
    for (i, (&j, &alpha)) in a.perm.iter().zip(&a.scales).enumerate() {
        let yr: Vec<f64> = y.row(i).iter().copied().collect();
        let sr: Vec<f64> = s.row(j).iter().copied().collect();
        per_source[j] = sinr_of_pair(&yr, &sr, alpha);
    }
    let mean = per_source.iter().sum::<f64>() / per_source.len() as f64;
    SinrReport { per_source, mean }
}

/// Per-source and mean SINR in dB after alignment.
pub fn sinr_db(y: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<SinrReport> {
    let a = resolve_alignment(y, s)?;
    Ok(report(y, s, &a))
}

/// SINR that tolerates constant output rows (they score as uncorrelated);
/// used for convergence traces where early outputs may still be flat.
pub fn sinr_db_lenient(y: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<SinrReport> {
    check_shapes(y, s)?;
    let corr = abs_correlations(y, s);
    let a = align_with(y, s, &corr);
    Ok(report(y, s, &a))
}

/// Fraction of entries whose nearest 4-PAM symbol differs from the truth.
pub fn ser_pam4(y_aligned: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<f64> {
    check_dim(s.nrows(), y_aligned.nrows(), "symbol rows")?;
    check_dim(s.ncols(), y_aligned.ncols(), "symbol samples")?;
    if s.is_empty() {
        return Ok(0.0);
    }
    let decide = |v: f64| {
        PAM4_LEVELS
            .iter()
            .copied()
            .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()))
            .expect("nonempty alphabet")
    };
    let errors = y_aligned
        .iter()
        .zip(s.iter())
        .filter(|(&y, &t)| decide(y) != t)
        .count();
    Ok(errors as f64 / s.len() as f64)
}

/// `10 log10(peak^2 / MSE)`; `+inf` when the estimate is exact.
pub fn psnr_db(est: &DMatrix<f64>, reference: &DMatrix<f64>, peak: f64) -> Result<f64> {
    check_dim(reference.nrows(), est.nrows(), "image rows")?;
    check_dim(reference.ncols(), est.ncols(), "image cols")?;
    if !(peak > 0.0) {
        return Err(Error::invalid("peak must be positive"));
    }
    if est.is_empty() {
        return Err(Error::EmptyData("empty image"));
    }
    let mse = (est - reference).norm_squared() / est.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean SINR over consecutive windows of `window` samples (last one may be short).
pub fn sinr_trace(y: &DMatrix<f64>, s: &DMatrix<f64>, window: usize) -> Result<Vec<f64>> {
    check_dim(s.nrows(), y.nrows(), "output rows")?;
    check_dim(s.ncols(), y.ncols(), "output samples")?;
    if window == 0 {
        return Err(Error::invalid("window must be positive"));
    }
    let total = y.ncols();
    let mut out = Vec::with_capacity(total.div_ceil(window));
    let mut start = 0;
    while start < total {
        let len = window.min(total - start);
        if len < 2 {
            // A single-sample tail has no variance; reuse the previous window.
            out.push(out.last().copied().unwrap_or(-SINR_CAP_DB));
        } else {
            let yw = y.columns(start, len).into_owned();
            let sw = s.columns(start, len).into_owned();
            out.push(sinr_db_lenient(&yw, &sw)?.mean);
        }
        start += len;
    }
    Ok(out)
}
