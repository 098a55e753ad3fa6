//! Per-sample fixed-point loop for every domain.

use nalgebra::DVector;

use super::{gamma_from_quad, DynamicsConfig, ForgettingConfig, NetworkState, OutputRecord};
use crate::domains::{
    clip_nonneg_scalar, clip_signed_scalar, relu, soft_threshold_scalar, DomainKind, DomainSpec,
};
use crate::error::{check_dim, Error, Result};

/// Guards the relative-change test at `y = 0`.
const DELTA: f64 = 1e-12;

/// Runs the neural dynamics for input `x` and returns the converged output.
///
/// The state is read-only here; learning happens in the `update_*` functions.
/// Gamma factors are recomputed from the current `y`, `e` at every iteration,
/// and multipliers restart from `lambda_init` for each sample.
pub fn run_dynamics(
    state: &NetworkState,
    x: &DVector<f64>,
    domain: &DomainSpec,
    fcfg: &ForgettingConfig,
    dcfg: &DynamicsConfig,
) -> Result<OutputRecord> {
    let n = state.n();
    check_dim(state.m(), x.len(), "input")?;
    check_dim(n, domain.dim(), "domain dimension")?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite input sample"));
    }

    let wx = state.w() * x;
    let wx = wx.as_slice();
    let b = state.b_y().as_slice();
    let mut y: Vec<f64> = if dcfg.warm_start {
        state.y_last().iter().copied().collect()
    } else {
        vec![0.0; n]
    };
    let mut e = vec![0.0; n];
    let mut by = vec![0.0; n];
    let mut be = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut lambda = vec![dcfg.lambda_init; domain.num_multipliers()];
    let mut alpha = vec![0.0; n];
    let mut slack = vec![0.0; lambda.len()];
    let free = match domain.kind() {
        DomainKind::FeaturePolytope(fp) => fp.ungrouped(),
        _ => Vec::new(),
    };

    let mut nu_used = 0;
    let mut converged = false;
    for nu in 1..=dcfg.nu_max {
        nu_used = nu;
        for i in 0..n {
            e[i] = y[i] - wx[i];
        }
        let mut qy = 0.0;
        for i in 0..n {
            // B_y is symmetric: column i is row i.
            let col = &b[i * n..(i + 1) * n];
            let s: f64 = col.iter().zip(&y).map(|(a, v)| a * v).sum();
            by[i] = s;
            qy += y[i] * s;
        }
        let qe = state.b_e().apply(&e, &mut be);
        if !(qy.is_finite() && qe.is_finite()) {
            return Err(Error::Divergence {
                iteration: nu,
                sample: None,
            });
        }
        let gy = gamma_from_quad(state.mode(), qy, fcfg.zeta_y, state.k())?;
        let ge = gamma_from_quad(state.mode(), qe, fcfg.zeta_e, state.k())?;
        for i in 0..n {
            g[i] = gy * by[i] - ge * be[i];
        }

        let eta = dcfg.eta_y.at(nu);
        let eta_l = dcfg.eta_lambda;
        prev.copy_from_slice(&y);
        match domain.kind() {
            DomainKind::Antisparse => {
                for i in 0..n {
                    y[i] = clip_signed_scalar(y[i] + eta * g[i]);
                }
            }
            DomainKind::NonnegAntisparse => {
                for i in 0..n {
                    y[i] = clip_nonneg_scalar(y[i] + eta * g[i]);
                }
            }
            DomainKind::Sparse => {
                let l = lambda[0];
                for i in 0..n {
                    y[i] = soft_threshold_scalar(y[i] + eta * g[i], l);
                }
                let l1: f64 = y.iter().map(|v| v.abs()).sum();
                lambda[0] = relu(l + eta_l * (l1 - 1.0));
            }
            DomainKind::NonnegSparse => {
                let l = lambda[0];
                for i in 0..n {
                    y[i] = relu(y[i] + eta * g[i] - l);
                }
                let s: f64 = y.iter().sum();
                lambda[0] = relu(l + eta_l * (s - 1.0));
            }
            DomainKind::UnitSimplex => {
                let l = lambda[0];
                for i in 0..n {
                    y[i] = relu(y[i] + eta * g[i] - l);
                }
                let s: f64 = y.iter().sum();
                lambda[0] = l + eta_l * (s - 1.0);
            }
            DomainKind::HPolytope(h) => {
                let a = h.a();
                let f = h.rows();
                // Multiplier ascent uses the output before this step's move.
                for r in 0..f {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += a[(r, j)] * prev[j];
                    }
                    slack[r] = s - h.b()[r];
                }
                for j in 0..n {
                    let mut atl = 0.0;
                    for r in 0..f {
                        atl += a[(r, j)] * lambda[r];
                    }
                    y[j] += eta * (g[j] - atl);
                }
                for r in 0..f {
                    lambda[r] = relu(lambda[r] + eta_l * slack[r]);
                }
            }
            DomainKind::FeaturePolytope(fp) => {
                alpha.iter_mut().for_each(|a| *a = 0.0);
                for (grp, &l) in fp.groups().iter().zip(&lambda) {
                    for &j in grp {
                        alpha[j] += l;
                    }
                }
                for j in 0..n {
                    let v = y[j] + eta * g[j];
                    y[j] = match (free[j], fp.is_signed(j)) {
                        (true, true) => clip_signed_scalar(v),
                        (true, false) => clip_nonneg_scalar(v),
                        (false, true) => soft_threshold_scalar(v, alpha[j]),
                        (false, false) => relu(v - alpha[j]),
                    };
                }
                for (l, grp) in fp.groups().iter().enumerate() {
                    let s: f64 = grp.iter().map(|&j| y[j].abs()).sum();
                    lambda[l] = relu(lambda[l] + eta_l * (s - 1.0));
                }
            }
        }

        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence {
                iteration: nu,
                sample: None,
            });
        }
        let mut dn = 0.0;
        let mut yn = 0.0;
        for i in 0..n {
            let d = y[i] - prev[i];
            dn += d * d;
            yn += y[i] * y[i];
        }
        if dn.sqrt() / yn.sqrt().max(DELTA) < dcfg.tol {
            converged = true;
            break;
        }
    }

    for i in 0..n {
        e[i] = y[i] - wx[i];
    }
    Ok(OutputRecord {
        y: DVector::from_vec(y),
        e: DVector::from_vec(e),
        nu_used,
        converged,
        lambda,
    })
}
