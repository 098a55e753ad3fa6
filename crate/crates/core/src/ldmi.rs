//! Log-determinant (correlative) information measures and a small batch
//! projected-gradient solver used to cross-check the online learner.
//!
//! `ld_mutual_info` omits the additive constant `(m + n)/2 log(2 pi e)`;
//! `ld_entropy` keeps its `d/2 log(2 pi e)`.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};

use crate::domains::{project, DomainSpec};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{asymmetry, inv_spd, logdet_spd, min_eigenvalue};

/// Slack allowed on the negative side of PSD checks.
const PSD_SLACK: f64 = 1e-8;
const SYM_TOL: f64 = 1e-10;

/// Second-order sample statistics of an (input, output) pair of signals.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats {
    /// `m x m`
    pub r_x: DMatrix<f64>,
    /// `n x n`
    pub r_y: DMatrix<f64>,
    /// `m x n`
    pub r_xy: DMatrix<f64>,
    pub samples: usize,
}

impl SampleStats {
    /// `[[R_x, R_xy], [R_xy^T, R_y]]`.
    pub fn joint(&self) -> DMatrix<f64> {
        let m = self.r_x.nrows();
        let n = self.r_y.nrows();
        let mut j = DMatrix::zeros(m + n, m + n);
        j.view_mut((0, 0), (m, m)).copy_from(&self.r_x);
        j.view_mut((m, m), (n, n)).copy_from(&self.r_y);
        j.view_mut((0, m), (m, n)).copy_from(&self.r_xy);
        j.view_mut((m, 0), (n, m)).copy_from(&self.r_xy.transpose());
        j
    }
}

fn centered_copy(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = a.clone();
    for mut row in c.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    c
}

/// Sample auto- and cross-correlations `(1/N) sum v v^T`, optionally after
/// removing the sample means.
pub fn sample_stats(x: &DMatrix<f64>, y: &DMatrix<f64>, centered: bool) -> Result<SampleStats> {
    let n_samples = x.ncols();
    check_dim(n_samples, y.ncols(), "sample count")?;
    if n_samples == 0 {
        return Err(Error::EmptyData("sample_stats needs at least one sample"));
    }
    let (xc, yc);
    let (x, y) = if centered {
        xc = centered_copy(x);
        yc = centered_copy(y);
        (&xc, &yc)
    } else {
        (x, y)
    };
    let s = 1.0 / n_samples as f64;
    Ok(SampleStats {
        r_x: x * x.transpose() * s,
        r_y: y * y.transpose() * s,
        r_xy: x * y.transpose() * s,
        samples: n_samples,
    })
}

fn check_psd(r: &DMatrix<f64>, what: &str) -> Result<()> {
    if !r.is_square() {
        return Err(Error::invalid(format!("{what} must be square")));
    }
    if asymmetry(r) > SYM_TOL * (1.0 + r.amax()) {
        return Err(Error::invalid(format!("{what} is not symmetric")));
    }
    if r.nrows() > 0 && min_eigenvalue(r) < -PSD_SLACK {
        return Err(Error::invalid(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

fn shifted(r: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let mut a = r.clone();
    for i in 0..a.nrows() {
        a[(i, i)] += eps;
    }
    a
}

/// `1/2 log det(R + eps I) + d/2 log(2 pi e)`.
pub fn ld_entropy(r: &DMatrix<f64>, eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::invalid("eps must be nonnegative"));
    }
    check_psd(r, "correlation matrix")?;
    let d = r.nrows() as f64;
    Ok(0.5 * logdet_spd(&shifted(r, eps))? + 0.5 * d * (2.0 * PI * E).ln())
}

/// Joint LD-entropy of the stacked signal `[x; y]`.
pub fn ld_joint_entropy(stats: &SampleStats, eps: f64) -> Result<f64> {
    ld_entropy(&stats.joint(), eps)
}

/// `R_y - R_xy^T (R_x + eps I)^-1 R_xy`: the error correlation of the best
/// linear estimate of `y` from `x` (exactly so at `eps = 0`).
pub fn error_correlation(stats: &SampleStats, eps: f64) -> Result<DMatrix<f64>> {
    let g = inv_spd(&shifted(&stats.r_x, eps))?;
    let mut re = &stats.r_y - stats.r_xy.transpose() * g * &stats.r_xy;
    crate::linalg::symmetrize(&mut re);
    Ok(re)
}

fn mi_form(r_a: &DMatrix<f64>, inner: &DMatrix<f64>, eps: f64) -> Result<f64> {
    if inner.nrows() > 0 && min_eigenvalue(inner) < -PSD_SLACK {
        return Err(Error::NumericalDegeneracy(
            "error correlation is indefinite beyond tolerance".into(),
        ));
    }
    Ok(0.5 * logdet_spd(&shifted(r_a, eps))? - 0.5 * logdet_spd(&shifted(inner, eps))?)
}

fn check_stats(stats: &SampleStats, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    check_dim(stats.r_x.nrows(), stats.r_xy.nrows(), "R_xy rows")?;
    check_dim(stats.r_y.nrows(), stats.r_xy.ncols(), "R_xy cols")?;
    check_psd(&stats.r_x, "R_x")?;
    check_psd(&stats.r_y, "R_y")
}

/// `1/2 log det(R_y + eps I) - 1/2 log det(R_y - R_xy^T (R_x + eps I)^-1 R_xy + eps I)`.
pub fn ld_mutual_info(stats: &SampleStats, eps: f64) -> Result<f64> {
    check_stats(stats, eps)?;
    let re = error_correlation(stats, eps)?;
    mi_form(&stats.r_y, &re, eps)
}

/// The same quantity written around `x`:
/// `1/2 log det(R_x + eps I) - 1/2 log det(R_x - R_xy (R_y + eps I)^-1 R_xy^T + eps I)`.
pub fn ld_mutual_info_x_form(stats: &SampleStats, eps: f64) -> Result<f64> {
    check_stats(stats, eps)?;
    let g = inv_spd(&shifted(&stats.r_y, eps))?;
    let mut inner = &stats.r_x - &stats.r_xy * g * stats.r_xy.transpose();
    crate::linalg::symmetrize(&mut inner);
    mi_form(&stats.r_x, &inner, eps)
}

/// `((1 - zeta)/(1 - zeta^k)) sum_{i<=k} zeta^(k-i) v(i) v(i)^T` over the first
/// `k` samples.
pub fn weighted_corr(samples: &[DVector<f64>], zeta: f64, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || samples.is_empty() {
        return Err(Error::EmptyData("weighted correlation needs k >= 1"));
    }
    if k > samples.len() {
        return Err(Error::invalid(format!("k = {k} exceeds {} samples", samples.len())));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::invalid("zeta must lie in (0, 1)"));
    }
    let d = samples[0].len();
    let mut r = DMatrix::zeros(d, d);
    let mut w = 1.0;
    for v in samples[..k].iter().rev() {
        check_dim(d, v.len(), "sample")?;
        r.ger(w, v, v, 1.0);
        w *= zeta;
    }
    // 1 - zeta and 1 - zeta^k via expm1 to stay accurate for zeta near 1.
    let ln_z = zeta.ln();
    r *= ln_z.exp_m1() / (k as f64 * ln_z).exp_m1();
    Ok(r)
}

/// LD mutual information between mixtures `X` and outputs `Y` from raw
/// (uncentered) correlations.
pub fn batch_objective(x: &DMatrix<f64>, y: &DMatrix<f64>, eps: f64) -> Result<f64> {
    ld_mutual_info(&sample_stats(x, y, false)?, eps)
}

/// Controls of [`batch_solver_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOracleConfig {
    pub eps: f64,
    pub iters: usize,
    /// Initial trial step; halved on each rejected trial.
    pub step: f64,
    pub max_backtracks: usize,
    /// Starting point; defaults to the principal-subspace start below.
    pub init: Option<DMatrix<f64>>,
    /// Stop once the relative objective gain of an accepted step drops below this.
    pub rel_tol: f64,
}

impl Default for BatchOracleConfig {
    fn default() -> Self {
        BatchOracleConfig {
            eps: 1e-3,
            iters: 2000,
            step: 1.0,
            max_backtracks: 40,
            init: None,
            rel_tol: 1e-12,
        }
    }
}

/// Result of [`batch_solver_oracle`].
#[derive(Debug, Clone)]
pub struct BatchOracleResult {
    pub y: DMatrix<f64>,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
    /// Set when no trial step improved the objective within the backtracking budget.
    pub stalled: bool,
}

/// Gradient of [`batch_objective`] with respect to `Y`:
/// `(1/N) [(R_y + eps I)^-1 Y - (R_e + eps I)^-1 (Y - R_xy^T (R_x + eps I)^-1 X)]`.
pub fn batch_gradient(x: &DMatrix<f64>, y: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let stats = sample_stats(x, y, false)?;
    let g = inv_spd(&shifted(&stats.r_x, eps))?;
    let p = inv_spd(&shifted(&stats.r_y, eps))?;
    let re = error_correlation(&stats, eps)?;
    let q = inv_spd(&shifted(&re, eps))?;
    let proj = stats.r_xy.transpose() * g * x;
    let resid = y - proj;
    Ok((p * y - q * resid) / x.ncols() as f64)
}

fn project_columns(domain: &DomainSpec, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = y.clone();
    for (j, col) in y.column_iter().enumerate() {
        out.set_column(j, &project(domain, &col.into_owned())?);
    }
    Ok(out)
}

/// Start on the span of the top-`n` principal directions of `X`, scaled so
/// the largest entry has magnitude one, then projected onto the domain.
fn principal_start(x: &DMatrix<f64>, domain: &DomainSpec) -> Result<DMatrix<f64>> {
    let n = domain.dim();
    let r = x * x.transpose();
    let eig = r.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut u = DMatrix::zeros(n, x.nrows());
    for (i, &c) in order.iter().take(n).enumerate() {
        u.set_row(i, &eig.eigenvectors.column(c).transpose());
    }
    let mut y = u * x;
    let amax = y.amax();
    if amax > 0.0 {
        y /= amax;
    }
    project_columns(domain, &y)
}

/// Projected-gradient ascent of [`batch_objective`] over `Y`, each column
/// kept in `domain`. Steps are accepted only if they do not lower the
/// objective, so the trace is nondecreasing.
pub fn batch_solver_oracle(
    x: &DMatrix<f64>,
    domain: &DomainSpec,
    cfg: &BatchOracleConfig,
) -> Result<BatchOracleResult> {
    if x.ncols() == 0 {
        return Err(Error::EmptyData("batch oracle needs samples"));
    }
    if !(cfg.eps > 0.0) || !(cfg.step > 0.0) {
        return Err(Error::invalid("batch oracle eps and step must be positive"));
    }
    let mut y = match &cfg.init {
        Some(y0) => {
            check_dim(domain.dim(), y0.nrows(), "oracle init rows")?;
            check_dim(x.ncols(), y0.ncols(), "oracle init cols")?;
            project_columns(domain, y0)?
        }
        None => principal_start(x, domain)?,
    };
    let mut f = batch_objective(x, &y, cfg.eps)?;
    let mut trace = vec![f];
    let mut step = cfg.step;
    let mut stalled = false;
    for _ in 0..cfg.iters {
        let g = batch_gradient(x, &y, cfg.eps)?;
        let mut accepted = None;
        let mut t = step;
        for _ in 0..=cfg.max_backtracks {
            let cand = project_columns(domain, &(&y + &g * t))?;
            if let Ok(fc) = batch_objective(x, &cand, cfg.eps) {
                if fc >= f {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let gain = fc - f;
                y = cand;
                f = fc;
                trace.push(f);
                // Let the step grow back after a successful trial.
                step = (t * 2.0).min(cfg.step * 1e6);
                if gain <= cfg.rel_tol * f.abs().max(1.0) {
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    Ok(BatchOracleResult { y, trace, stalled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn randn(r: usize, c: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 0);
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn stats_of_one_hot_columns() {
        let x = DMatrix::<f64>::identity(2, 2);
        let s = sample_stats(&x, &x, false).unwrap();
        assert_eq!(s.r_x, DMatrix::identity(2, 2) * 0.5);
        assert_eq!(s.r_y, s.r_x);
        assert_eq!(s.r_xy, s.r_x);
    }

    #[test]
    fn stats_match_naive_loops() {
        let x = randn(3, 40, 1);
        let y = randn(2, 40, 2);
        for centered in [false, true] {
            let s = sample_stats(&x, &y, centered).unwrap();
            let mx: Vec<f64> = (0..3).map(|i| if centered { x.row(i).mean() } else { 0.0 }).collect();
            let my: Vec<f64> = (0..2).map(|i| if centered { y.row(i).mean() } else { 0.0 }).collect();
            for i in 0..3 {
                for j in 0..2 {
                    let mut acc = 0.0;
                    for t in 0..40 {
                        acc += (x[(i, t)] - mx[i]) * (y[(j, t)] - my[j]);
                    }
                    assert!((acc / 40.0 - s.r_xy[(i, j)]).abs() < 1e-12);
                }
            }
        }
        assert!(sample_stats(&DMatrix::zeros(2, 0), &DMatrix::zeros(2, 0), false).is_err());
    }

    #[test]
    fn entropy_examples() {
        let h = ld_entropy(&DMatrix::identity(2, 2), 0.0).unwrap();
        assert!((h - (2.0 * PI * E).ln()).abs() < 1e-12);
        assert!((h - 2.837877).abs() < 1e-6);
        let h = ld_entropy(&DMatrix::zeros(1, 1), 1.0).unwrap();
        assert!((h - 0.5 * (2.0 * PI * E).ln()).abs() < 1e-12);
        let a = randn(3, 10, 3);
        let r = &a * a.transpose() / 10.0;
        let c = 2.5;
        let d = ld_entropy(&(&r * c), 0.0).unwrap() - ld_entropy(&r, 0.0).unwrap();
        assert!((d - 1.5 * c.ln()).abs() < 1e-10);
        assert!(ld_entropy(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), 0.1).is_err());
        assert!(ld_entropy(&DMatrix::from_row_slice(1, 1, &[-1.0]), 0.1).is_err());
    }

    #[test]
    fn uncorrelated_output_carries_no_information() {
        // Orthogonal rows: R_xy = 0.
        let x = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, -1.0, -1.0]);
        let y = DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 1.0, -1.0]);
        let s = sample_stats(&x, &y, false).unwrap();
        assert_eq!(s.r_xy[(0, 0)], 0.0);
        assert_eq!(ld_mutual_info(&s, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn dual_forms_agree() {
        for seed in 0..10 {
            let x = randn(4, 50, seed);
            let y = randn(3, 4, seed + 100) * &x + randn(3, 50, seed + 200) * 0.3;
            let s = sample_stats(&x, &y, false).unwrap();
            let a = ld_mutual_info(&s, 1e-3).unwrap();
            let b = ld_mutual_info_x_form(&s, 1e-3).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            assert!(a >= -1e-9);
        }
    }

    #[test]
    fn information_grows_as_eps_shrinks() {
        let x = randn(3, 60, 9);
        let s = sample_stats(&x, &x, false).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for p in 1..=6 {
            let v = ld_mutual_info(&s, 10f64.powi(-p)).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn error_correlation_is_the_mmse_residual() {
        let x = randn(4, 50, 5);
        let y = randn(3, 50, 6) + randn(3, 4, 7) * &x;
        let s = sample_stats(&x, &y, false).unwrap();
        let re = error_correlation(&s, 0.0).unwrap();
        let w = s.r_xy.transpose() * s.r_x.clone().try_inverse().unwrap();
        let e = &y - w * &x;
        let direct = &e * e.transpose() / 50.0;
        assert!((re - direct).amax() < 1e-10);
    }

    #[test]
    fn weighted_corr_examples() {
        let v = vec![DVector::from_vec(vec![1.0, -2.0]); 7];
        let vv = &v[0] * v[0].transpose();
        assert!((weighted_corr(&v, 0.9, 1).unwrap() - &vv).amax() < 1e-15);
        assert!((weighted_corr(&v, 0.7, 7).unwrap() - &vv).amax() < 1e-13);
        let stream: Vec<DVector<f64>> = (0..100).map(|i| randn(3, 1, i).column(0).into_owned()).collect();
        let zeta: f64 = 0.95;
        let k = 60;
        let mut direct = DMatrix::zeros(3, 3);
        for i in 1..=k {
            direct += &stream[i - 1] * stream[i - 1].transpose() * zeta.powi((k - i) as i32);
        }
        direct *= (1.0 - zeta) / (1.0 - zeta.powi(k as i32));
        assert!((weighted_corr(&stream, zeta, k).unwrap() - direct).amax() < 1e-12);
        let flat = stream.iter().fold(DMatrix::zeros(3, 3), |a, v| a + v * v.transpose()) / 100.0;
        assert!((weighted_corr(&stream, 1.0 - 1e-9, 100).unwrap() - flat).amax() < 1e-6);
        assert!(weighted_corr(&stream, 0.5, 0).is_err());
        assert!(weighted_corr(&stream, 0.5, 101).is_err());
    }

    #[test]
    fn batch_gradient_matches_differences() {
        let x = randn(4, 30, 11);
        let y = randn(3, 30, 12) * 0.5;
        let eps = 1e-2;
        let g = batch_gradient(&x, &y, eps).unwrap();
        let h = 1e-6;
        for (i, j) in [(0, 0), (1, 7), (2, 29)] {
            let mut p = y.clone();
            p[(i, j)] += h;
            let mut m = y.clone();
            m[(i, j)] -= h;
            let fd = (batch_objective(&x, &p, eps).unwrap() - batch_objective(&x, &m, eps).unwrap()) / (2.0 * h);
            assert!((fd - g[(i, j)]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", g[(i, j)]);
        }
    }

    #[test]
    fn oracle_trace_is_nondecreasing_and_feasible() {
        let d = DomainSpec::antisparse(3);
        let s = crate::datagen::gen_uniform_polytope(&d, 200, &mut stream_rng(4, 0)).unwrap();
        let x = randn(5, 3, 8) * &s;
        let r = batch_solver_oracle(&x, &d, &BatchOracleConfig { iters: 200, ..Default::default() }).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.y.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn oracle_started_at_vertex_sources_stays_optimal() {
        // Sources on the vertices of the box: no feasible move adds volume.
        let d = DomainSpec::antisparse(2);
        let mut rng = stream_rng(2, 0);
        let s = DMatrix::from_fn(2, 100, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let cfg = BatchOracleConfig { init: Some(s.clone()), iters: 50, ..Default::default() };
        let r = batch_solver_oracle(&s, &d, &cfg).unwrap();
        let sup = r.trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(sup - r.trace[0] < 1e-6, "{} vs {sup}", r.trace[0]);
        assert!((batch_objective(&s, &s, 1e-3).unwrap() - r.trace[0]).abs() < 1e-12);
    }
}
