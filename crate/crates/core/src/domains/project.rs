//! Euclidean projections onto each domain.
//!
//! These serve the batch oracle only; the online dynamics never project onto
//! constrained polytopes and use interneurons instead.

use nalgebra::DVector;

use super::{clip_nonneg_scalar, clip_signed_scalar, DomainKind, DomainSpec, FeaturePolytope, HPolytope};
use crate::error::{check_dim, Result};

const DYKSTRA_MAX_SWEEPS: usize = 20_000;
const DYKSTRA_TOL: f64 = 1e-13;

/// Projection onto the probability simplex `{y >= 0, sum y = 1}` by sorting.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Projection onto the `l1` ball of the given radius.
pub fn project_l1_ball(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= radius {
        return v.clone();
    }
    let scaled = v.map(|x| x.abs() / radius);
    let w = project_simplex(&scaled);
    DVector::from_fn(v.len(), |i, _| super::sign(v[i]) * w[i] * radius)
}

fn project_nonneg_l1(v: &DVector<f64>) -> DVector<f64> {
    let r = v.map(|x| x.max(0.0));
    if r.sum() <= 1.0 {
        r
    } else {
        project_simplex(v)
    }
}

fn project_halfspace(y: &mut DVector<f64>, a: &[f64], a_sq: f64, b: f64) {
    let excess = a.iter().zip(y.iter()).map(|(ai, yi)| ai * yi).sum::<f64>() - b;
    if excess > 0.0 && a_sq > 0.0 {
        let s = excess / a_sq;
        for (yi, ai) in y.iter_mut().zip(a) {
            *yi -= s * ai;
        }
    }
}

fn dykstra_h(h: &HPolytope, v: &DVector<f64>) -> DVector<f64> {
    let f = h.rows();
    let rows: Vec<Vec<f64>> = (0..f).map(|i| h.a().row(i).iter().copied().collect()).collect();
    let sq: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
    let mut y = v.clone();
    let mut incr = vec![DVector::zeros(v.len()); f];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let prev = y.clone();
        let mut moved = 0.0;
        for i in 0..f {
            let z = &y + &incr[i];
            let mut p = z.clone();
            project_halfspace(&mut p, &rows[i], sq[i], h.b()[i]);
            let next = z - &p;
            moved += (&next - &incr[i]).norm_squared();
            incr[i] = next;
            y = p;
        }
        if moved + (&y - &prev).norm_squared() < DYKSTRA_TOL * DYKSTRA_TOL {
            break;
        }
    }
    y
}

fn dykstra_feature(fp: &FeaturePolytope, v: &DVector<f64>) -> DVector<f64> {
    let n = fp.dim();
    let project_box = |z: &DVector<f64>| {
        DVector::from_fn(n, |j, _| {
            if fp.is_signed(j) {
                clip_signed_scalar(z[j])
            } else {
                clip_nonneg_scalar(z[j])
            }
        })
    };
    if fp.num_groups() == 0 {
        return project_box(v);
    }
    let project_group = |z: &DVector<f64>, g: &[usize]| {
        let sub = DVector::from_iterator(g.len(), g.iter().map(|&j| z[j]));
        let p = project_l1_ball(&sub, 1.0);
        let mut out = z.clone();
        for (k, &j) in g.iter().enumerate() {
            out[j] = p[k];
        }
        out
    };

    let sets = fp.num_groups() + 1;
    let mut y = v.clone();
    let mut incr = vec![DVector::zeros(n); sets];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let prev = y.clone();
        let mut moved = 0.0;
        for s in 0..sets {
            let z = &y + &incr[s];
            let p = if s == 0 {
                project_box(&z)
            } else {
                project_group(&z, &fp.groups()[s - 1])
            };
            let next = z - &p;
            moved += (&next - &incr[s]).norm_squared();
            incr[s] = next;
            y = p;
        }
        if moved + (&y - &prev).norm_squared() < DYKSTRA_TOL * DYKSTRA_TOL {
            break;
        }
    }
    y
}

/// Euclidean projection of `v` onto the domain. Polytopes without a closed
/// form use Dykstra's alternating projections.
pub fn project(domain: &DomainSpec, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(domain.dim(), v.len(), "projection input")?;
    Ok(match domain.kind() {
        DomainKind::Antisparse => v.map(clip_signed_scalar),
        DomainKind::NonnegAntisparse => v.map(clip_nonneg_scalar),
        DomainKind::Sparse => project_l1_ball(v, 1.0),
        DomainKind::NonnegSparse => project_nonneg_l1(v),
        DomainKind::UnitSimplex => project_simplex(v),
        DomainKind::HPolytope(h) => dykstra_h(h, v),
        DomainKind::FeaturePolytope(fp) => dykstra_feature(fp, v),
    })
}
