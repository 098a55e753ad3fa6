//! Built-in invariant suites with fixed seeds. Each oracle here is computed
//! independently of the code path it checks (dense inverses, finite
//! differences, grid search, exhaustive enumeration).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};

use crate::datagen::{add_awgn, gen_copula_t, gen_uniform_polytope, stream_rng, Marginal};
use crate::domains::{
    clip_nonneg, clip_signed, feature_to_hrep, membership, prox_feature, soft_threshold, DomainSpec,
    FeaturePolytope,
};
use crate::dynamics::{
    gammas_for_state, grad_j, grad_j_two_layer, update_by, ErrorCorrelation, ForgettingConfig, NetworkState,
    UpdateMode,
};
use crate::error::{Error, Result};
use crate::ldmi::{error_correlation, ld_mutual_info, ld_mutual_info_x_form, sample_stats, weighted_corr};
use crate::metrics::{resolve_alignment, sinr_db};

/// Outcome of one named invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    Ldmi,
    Dynamics,
    Domains,
    Datagen,
    Metrics,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "ldmi" => Suite::Ldmi,
            "dynamics" => Suite::Dynamics,
            "domains" => Suite::Domains,
            "datagen" => Suite::Datagen,
            "metrics" => Suite::Metrics,
            _ => return Err(Error::invalid(format!("unknown suite `{s}`"))),
        })
    }
}

fn randn(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = randn(n, n, rng);
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn dense_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().lu().try_inverse().expect("oracle matrix is invertible")
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Largest relative Frobenius errors of (exact `B_y` vs the dense inverse of
/// the weighted correlation, steady vs exact once `zeta^k < 1e-12`).
pub fn recursion_fidelity(seed: u64) -> Result<(f64, f64)> {
    let n = 5;
    let (zeta, eps) = (0.99f64, 1e-3);
    let f = ForgettingConfig::new(zeta, 0.99, eps)?;
    let mut rng = stream_rng(seed, 7);
    let init = DMatrix::identity(n, n) * 5.0;
    let mut exact = NetworkState::new(DMatrix::identity(n, n), init.clone(), ErrorCorrelation::from_eps(eps), UpdateMode::Exact)?;
    let mut steady = NetworkState::new(DMatrix::identity(n, n), init, ErrorCorrelation::from_eps(eps), UpdateMode::Steady)?;

    // Dense oracle over the first 200 steps.
    let mut corr_sum = DMatrix::zeros(n, n);
    let mut worst_exact: f64 = 0.0;
    let mut worst_steady: f64 = 0.0;
    let total: usize = 3000;
    for k in 1..=total {
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        update_by(&mut exact, &y, &f, UpdateMode::Exact)?;
        update_by(&mut steady, &y, &f, UpdateMode::Steady)?;
        if k <= 200 {
            corr_sum = corr_sum * zeta + &y * y.transpose();
            let norm = (1.0 - zeta) / (1.0 - zeta.powi(k as i32));
            let eps_k = if k == 1 {
                eps
            } else {
                eps * zeta.powi(k as i32 - 1) * (1.0 - zeta) / (1.0 - zeta.powi(k as i32))
            };
            let oracle = dense_inverse(&(&corr_sum * norm + DMatrix::identity(n, n) * eps_k));
            worst_exact = worst_exact.max(rel(exact.b_y(), &oracle));
        }
        if zeta.powi(k as i32) < 1e-12 {
            worst_steady = worst_steady.max(rel(steady.b_y(), exact.b_y()));
        }
    }
    Ok((worst_exact, worst_steady))
}

/// `1/2 log det(a P + b v v^T)` through an LU determinant.
fn half_logdet_update(p: &DMatrix<f64>, a: f64, b: f64, v: &DVector<f64>) -> f64 {
    let m = p * a + v * v.transpose() * b;
    0.5 * m.determinant().ln()
}

/// Coefficients of `R(k) = a R(k-1) + b v v^T` for the given mode.
fn recursion_coeffs(mode: UpdateMode, zeta: f64, k: usize) -> (f64, f64) {
    match mode {
        UpdateMode::Exact => {
            let zk = zeta.powi(k as i32);
            ((zeta - zk) / (1.0 - zk), (1.0 - zeta) / (1.0 - zk))
        }
        _ => (zeta, 1.0 - zeta),
    }
}

/// Largest relative error between `grad_j` and central differences of the
/// recursion-defined online objective, over random instances with `n <= 4`.
pub fn gradient_fd_error(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 11);
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for t in 0..instances {
        let n = 2 + t % 3;
        let m = n + rng.random_range(0..3);
        let mode = if t % 2 == 0 { UpdateMode::Exact } else { UpdateMode::Steady };
        let k = rng.random_range(2..60);
        let zeta_y = rng.random_range(0.8..0.999);
        let zeta_e = rng.random_range(0.8..0.999);
        let eps = 10f64.powf(rng.random_range(-3.0..-1.0));
        let f = ForgettingConfig::new(zeta_y, zeta_e, eps)?;
        let b_y = dense_inverse(&random_spd(n, &mut rng));
        let exact_be = t % 4 >= 2;
        let p_e = if exact_be { random_spd(n, &mut rng) } else { DMatrix::identity(n, n) * eps };
        let b_e = if exact_be {
            ErrorCorrelation::ExactMatrix(dense_inverse(&p_e))
        } else {
            ErrorCorrelation::from_eps(eps)
        };
        let w = randn(n, m, &mut rng);
        let mut state = NetworkState::new(w.clone(), b_y.clone(), b_e, mode)?;
        state.set_counter(k)?;
        let x = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let wx = &w * &x;

        let p_y = dense_inverse(&b_y);
        let (ay, by) = recursion_coeffs(mode, zeta_y, k);
        let (ae, be) = recursion_coeffs(mode, zeta_e, k);
        let objective = |y: &DVector<f64>| {
            let e = y - &wx;
            half_logdet_update(&p_y, ay, by, y) - half_logdet_update(&p_e, ae, be, &e)
        };
        let fd = DVector::from_fn(n, |i, _| {
            let mut yp = y.clone();
            yp[i] += h;
            let mut ym = y.clone();
            ym[i] -= h;
            (objective(&yp) - objective(&ym)) / (2.0 * h)
        });
        let e = &y - &wx;
        let (gy, ge) = gammas_for_state(&state, &y, &e, &f)?;
        let g = grad_j(&state, &y, &e, gy, ge)?;
        worst = worst.max((&g - &fd).norm() / g.norm().max(1e-300));
    }
    Ok(worst)
}

/// Largest gap between the two forms of the gradient (direct and two-layer).
pub fn two_layer_gap(seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 12);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, m) = (3, 5);
        let eps = 1e-3;
        let f = ForgettingConfig::new(0.99, 0.99, eps)?;
        let state = NetworkState::new(randn(n, m, &mut rng), dense_inverse(&random_spd(n, &mut rng)), ErrorCorrelation::from_eps(eps), UpdateMode::Steady)?;
        let x = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = &y - state.w() * &x;
        let (gy, ge) = gammas_for_state(&state, &y, &e, &f)?;
        let a = grad_j(&state, &y, &e, gy, ge)?;
        let b = grad_j_two_layer(&state, &y, &x, gy, ge)?;
        worst = worst.max((a - &b).amax() / b.amax().max(1.0));
    }
    Ok(worst)
}

/// (dual-form gap, MMSE identity gap) on random data with `n = 3, m = 4, N = 50`.
pub fn ldmi_identities(seed: u64) -> Result<(f64, f64)> {
    let mut rng = stream_rng(seed, 13);
    let mut dual: f64 = 0.0;
    let mut mmse: f64 = 0.0;
    for _ in 0..10 {
        let x = randn(4, 50, &mut rng);
        let y = randn(3, 4, &mut rng) * &x + randn(3, 50, &mut rng) * 0.5;
        let s = sample_stats(&x, &y, false)?;
        dual = dual.max((ld_mutual_info(&s, 1e-3)? - ld_mutual_info_x_form(&s, 1e-3)?).abs());
        // Explicit best linear estimator and its residual correlation.
        let w_hat = &s.r_xy.transpose() * dense_inverse(&s.r_x);
        let resid = &y - w_hat * &x;
        let direct = &resid * resid.transpose() / 50.0;
        mmse = mmse.max((error_correlation(&s, 0.0)? - direct).amax());
    }
    Ok((dual, mmse))
}

fn grid_argmin(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
    let count = ((hi - lo) / step).round() as usize;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=count {
        let q = lo + step * i as f64;
        let v = f(q);
        if v < best.0 {
            best = (v, q);
        }
    }
    best.1
}

/// Largest error of `soft_threshold` against a grid search of
/// `1/2 (v - q)^2 + lambda |q|` on random 3-vectors.
pub fn soft_threshold_grid_error(cases: usize, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 14);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let v = DVector::from_fn(3, |_, _| rng.random_range(-1.8..1.8));
        let lambda = rng.random_range(0.0..1.0);
        let st = soft_threshold(&v, lambda)?;
        for i in 0..3 {
            let q = grid_argmin(-2.0, 2.0, 1e-3, |q| 0.5 * (v[i] - q).powi(2) + lambda * q.abs());
            worst = worst.max((q - st[i]).abs());
        }
    }
    Ok(worst)
}

/// Largest error of `prox_feature` against a grid search of
/// `1/2 |v - q|^2 + sum_l lambda_l |q_{J_l}|_1` subject to `q_{I+} >= 0`
/// (`n = 3`). The objective separates over coordinates, so each coordinate is
/// searched on its own grid with the full objective evaluated.
pub fn prox_grid_error(cases: usize, seed: u64) -> Result<f64> {
    let mut rng = stream_rng(seed, 15);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let signed: Vec<usize> = (0..3).filter(|_| rng.random_bool(0.5)).collect();
        let mut groups = vec![(0..3).filter(|_| rng.random_bool(0.7)).collect::<Vec<_>>()];
        if groups[0].is_empty() {
            groups[0].push(rng.random_range(0..3));
        }
        if rng.random_bool(0.5) {
            groups.push(vec![rng.random_range(0..3)]);
        }
        let fp = FeaturePolytope::new(3, &signed, groups.clone())?;
        let lambda: Vec<f64> = groups.iter().map(|_| rng.random_range(0.0..0.8)).collect();
        let v = DVector::from_fn(3, |_, _| rng.random_range(-1.5..1.5));
        let got = prox_feature(&v, &lambda, &fp)?;

        let objective = |q: &DVector<f64>| -> f64 {
            if (0..3).any(|j| !fp.is_signed(j) && q[j] < 0.0) {
                return f64::INFINITY;
            }
            let fit = 0.5 * (&v - q).norm_squared();
            let pen: f64 = groups
                .iter()
                .zip(&lambda)
                .map(|(g, l)| l * g.iter().map(|&j| q[j].abs()).sum::<f64>())
                .sum();
            fit + pen
        };
        let mut q = DVector::zeros(3);
        for j in 0..3 {
            let base = q.clone();
            q[j] = grid_argmin(-2.0, 2.0, 1e-3, |t| {
                let mut c = base.clone();
                c[j] = t;
                objective(&c)
            });
        }
        worst = worst.max((&q - &got).amax());
    }
    Ok(worst)
}

/// Disagreements between feature and H-representation membership of `P_ex`
/// on uniform points of `[-1, 1]^5`, plus the H row count.
pub fn hrep_agreement(points: usize, seed: u64) -> Result<(usize, usize)> {
    let fp = FeaturePolytope::p_ex();
    let h = feature_to_hrep(&fp);
    let hd = DomainSpec::hpolytope(h.clone());
    let fd = DomainSpec::feature(fp.clone());
    let mut rng = stream_rng(seed, 16);
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let mut bad = 0;
    for _ in 0..points {
        let y = DVector::from_fn(5, |_, _| rng.sample(u));
        if membership(&hd, &y, 0.0)? != membership(&fd, &y, 0.0)? {
            bad += 1;
        }
    }
    Ok((bad, h.rows()))
}

fn check(suite: &'static str, name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        suite,
        name,
        passed,
        detail,
    }
}

fn measured(suite: &'static str, name: &'static str, value: Result<f64>, tol: f64) -> CheckOutcome {
    match value {
        Ok(v) => check(suite, name, v < tol, format!("{v:.3e} (< {tol:e})")),
        Err(e) => check(suite, name, false, e.to_string()),
    }
}

fn ldmi_suite() -> Vec<CheckOutcome> {
    const S: &str = "ldmi";
    let mut out = Vec::new();
    match ldmi_identities(1) {
        Ok((dual, mmse)) => {
            out.push(check(S, "dual forms agree", dual < 1e-8, format!("{dual:.3e} (< 1e-8)")));
            out.push(check(S, "MMSE error correlation", mmse < 1e-10, format!("{mmse:.3e} (< 1e-10)")));
        }
        Err(e) => out.push(check(S, "identities", false, e.to_string())),
    }
    let nonneg = (|| -> Result<f64> {
        let mut rng = stream_rng(2, 17);
        let mut lowest = f64::INFINITY;
        for _ in 0..50 {
            let x = randn(4, 30, &mut rng);
            let y = randn(3, 30, &mut rng) + randn(3, 4, &mut rng) * &x * rng.random_range(0.0..2.0);
            lowest = lowest.min(ld_mutual_info(&sample_stats(&x, &y, false)?, 1e-3)?);
        }
        Ok(lowest)
    })();
    match nonneg {
        Ok(v) => out.push(check(S, "information is nonnegative", v >= -1e-9, format!("min {v:.3e}"))),
        Err(e) => out.push(check(S, "information is nonnegative", false, e.to_string())),
    }
    let limit = (|| -> Result<f64> {
        let mut rng = stream_rng(3, 18);
        let v: Vec<DVector<f64>> = (0..100)
            .map(|_| DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let flat = v.iter().fold(DMatrix::zeros(3, 3), |a, x| a + x * x.transpose()) / 100.0;
        Ok((weighted_corr(&v, 1.0 - 1e-9, 100)? - flat).amax())
    })();
    out.push(measured(S, "weighted correlation at zeta -> 1", limit, 1e-6));
    out
}

fn dynamics_suite() -> Vec<CheckOutcome> {
    const S: &str = "dynamics";
    let mut out = Vec::new();
    match recursion_fidelity(1) {
        Ok((exact, steady)) => {
            out.push(check(S, "exact B_y tracks dense inverse", exact < 1e-8, format!("{exact:.3e} (< 1e-8)")));
            out.push(check(S, "steady agrees with exact", steady < 1e-6, format!("{steady:.3e} (< 1e-6)")));
        }
        Err(e) => out.push(check(S, "recursion fidelity", false, e.to_string())),
    }
    out.push(measured(S, "gradient matches finite differences", gradient_fd_error(50, 1), 1e-5));
    out.push(measured(S, "two-layer gradient form", two_layer_gap(1), 1e-12));
    out
}

fn domains_suite() -> Vec<CheckOutcome> {
    const S: &str = "domains";
    let mut out = Vec::new();
    out.push(measured(S, "soft threshold is the l1 prox", soft_threshold_grid_error(20, 1), 1e-3));
    out.push(measured(S, "feature prox matches grid search", prox_grid_error(20, 1), 1e-3));
    match hrep_agreement(100_000, 1) {
        Ok((bad, rows)) => {
            out.push(check(S, "P_ex has 10 half-spaces", rows == 10, format!("{rows} rows")));
            out.push(check(S, "H and feature membership agree", bad == 0, format!("{bad} disagreements")));
        }
        Err(e) => out.push(check(S, "H representation", false, e.to_string())),
    }
    let clip = (|| -> Result<bool> {
        let mut rng = stream_rng(4, 19);
        for _ in 0..100 {
            let v = DVector::from_fn(4, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
            let c = clip_signed(&v)?;
            let p = clip_nonneg(&v)?;
            if clip_signed(&c)? != c || clip_nonneg(&p)? != p || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Ok(false);
            }
        }
        Ok(true)
    })();
    out.push(match clip {
        Ok(ok) => check(S, "clipping is idempotent", ok, String::new()),
        Err(e) => check(S, "clipping is idempotent", false, e.to_string()),
    });
    out
}

fn datagen_suite() -> Vec<CheckOutcome> {
    const S: &str = "datagen";
    let mut out = Vec::new();
    let simplex = (|| -> Result<f64> {
        let s = gen_uniform_polytope(&DomainSpec::simplex(3), 100_000, &mut stream_rng(5, 0))?;
        Ok((0..3).map(|i| (s.row(i).mean() - 1.0 / 3.0).abs()).fold(0.0, f64::max))
    })();
    out.push(measured(S, "simplex coordinate means", simplex, 0.01));
    let l1 = (|| -> Result<f64> {
        let s = gen_uniform_polytope(&DomainSpec::sparse(4), 10_000, &mut stream_rng(6, 0))?;
        Ok(s.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max))
    })();
    out.push(measured(S, "l1 ball samples are feasible", l1, 1.0 + 1e-12));
    let copula = (|| -> Result<f64> {
        let s = gen_copula_t(3, 20_000, 0.0, 4.0, Marginal::Signed, &mut stream_rng(7, 0))?;
        // Uniform on [-1, 1] has variance 1/3.
        Ok((0..3)
            .map(|i| {
                let r = s.row(i);
                (r.map(|v| v * v).mean() - 1.0 / 3.0).abs()
            })
            .fold(0.0, f64::max))
    })();
    out.push(measured(S, "copula marginals are uniform", copula, 0.01));
    let snr = (|| -> Result<f64> {
        let x = randn(6, 50_000, &mut stream_rng(8, 0));
        let noisy = add_awgn(&x, 30.0, &mut stream_rng(8, 2))?;
        let noise = (&noisy - &x).norm_squared();
        Ok((10.0 * (x.norm_squared() / noise).log10() - 30.0).abs())
    })();
    out.push(measured(S, "noise meets the SNR", snr, 0.1));
    out
}

fn metrics_suite() -> Vec<CheckOutcome> {
    const S: &str = "metrics";
    let mut out = Vec::new();
    let inv = (|| -> Result<f64> {
        let mut rng = stream_rng(9, 0);
        let s = randn(4, 500, &mut rng);
        let y = &s + randn(4, 500, &mut rng) * 0.1;
        let base = sinr_db(&y, &s)?;
        let perm = [2usize, 0, 3, 1];
        let scales = [-2.0, 0.5, 3.0, -0.1];
        let mixed = DMatrix::from_fn(4, 500, |i, j| scales[i] * y[(perm[i], j)]);
        let other = sinr_db(&mixed, &s)?;
        Ok(base
            .per_source
            .iter()
            .zip(&other.per_source)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    })();
    out.push(measured(S, "SINR is permutation and scale invariant", inv, 1e-9));
    let exhaustive = (|| -> Result<f64> {
        let mut rng = stream_rng(10, 0);
        let s = randn(4, 300, &mut rng);
        let y = randn(4, 4, &mut rng) * 0.2 + DMatrix::identity(4, 4);
        let y = DMatrix::from_fn(4, 4, |i, j| y[((i + 1) % 4, j)]) * &s + randn(4, 300, &mut rng) * 0.05;
        let got = sinr_db(&y, &s)?.mean;
        let mut best = f64::NEG_INFINITY;
        for p in permutations(4) {
            let mut total = 0.0;
            for (i, &j) in p.iter().enumerate() {
                let yr = y.row(i);
                let sr = s.row(j);
                let alpha = yr.dot(&sr) / sr.dot(&sr);
                let resid = (yr - sr * alpha).norm_squared();
                total += 10.0 * ((sr * alpha).norm_squared() / resid).log10();
            }
            best = best.max(total / 4.0);
        }
        Ok((got - best).abs())
    })();
    out.push(measured(S, "alignment matches exhaustive search", exhaustive, 1e-9));
    let known = (|| -> Result<f64> {
        let t: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let s = DMatrix::from_row_slice(1, 1000, &t);
        let mut w: Vec<f64> = (0..1000).map(|i| (i as f64 * 1.91).cos()).collect();
        // Remove the mean and the component along s, then scale to -30 dB.
        let wm = w.iter().sum::<f64>() / 1000.0;
        w.iter_mut().for_each(|v| *v -= wm);
        let proj = w.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / t.iter().map(|v| v * v).sum::<f64>();
        w.iter_mut().zip(&t).for_each(|(a, b)| *a -= proj * b);
        let scale = (1e-3 * s.norm_squared() / w.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let y = DMatrix::from_fn(1, 1000, |_, j| t[j] + scale * w[j]);
        Ok((sinr_db(&y, &s)?.mean - 30.0).abs())
    })();
    out.push(measured(S, "orthogonal noise at 30 dB", known, 1e-9));
    let align = (|| -> Result<bool> {
        let s = randn(3, 200, &mut stream_rng(11, 0));
        let y = DMatrix::from_fn(3, 200, |i, j| s[((i + 2) % 3, j)]);
        Ok(resolve_alignment(&y, &s)?.perm == vec![2, 0, 1])
    })();
    out.push(match align {
        Ok(ok) => check(S, "permutation recovered", ok, String::new()),
        Err(e) => check(S, "permutation recovered", false, e.to_string()),
    });
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Runs a suite; `All` runs every suite in a fixed order.
pub fn run_suite(suite: Suite) -> Vec<CheckOutcome> {
    match suite {
        Suite::Ldmi => ldmi_suite(),
        Suite::Dynamics => dynamics_suite(),
        Suite::Domains => domains_suite(),
        Suite::Datagen => datagen_suite(),
        Suite::Metrics => metrics_suite(),
        Suite::All => [Suite::Ldmi, Suite::Dynamics, Suite::Domains, Suite::Datagen, Suite::Metrics]
            .into_iter()
            .flat_map(run_suite)
            .collect(),
    }
}
