//! Dense tableau simplex for `max c^T z  s.t.  A z <= b`, `b >= 0`, `z` free.
//!
//! Only used to bound H-polytopes, so problems are tiny. Bland's rule keeps
//! degenerate pivots from cycling.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-12;

/// Optimal value, or `None` when the objective is unbounded.
pub(crate) fn maximize(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Option<f64> {
    let (f, n) = a.shape();
    // Columns: z+ (n), z- (n), slacks (f), rhs.
    let cols = 2 * n + f + 1;
    let rhs = cols - 1;
    let mut t = DMatrix::<f64>::zeros(f + 1, cols);
    for i in 0..f {
        for j in 0..n {
            t[(i, j)] = a[(i, j)];
            t[(i, n + j)] = -a[(i, j)];
        }
        t[(i, 2 * n + i)] = 1.0;
        t[(i, rhs)] = b[i].max(0.0);
    }
    for j in 0..n {
        t[(f, j)] = -c[j];
        t[(f, n + j)] = c[j];
    }
    let mut basis: Vec<usize> = (0..f).map(|i| 2 * n + i).collect();

    let max_pivots = 50 * (f + 2 * n + 1);
    for _ in 0..max_pivots {
        let Some(enter) = (0..rhs).find(|&j| t[(f, j)] < -PIVOT_TOL) else {
            return Some(t[(f, rhs)]);
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..f {
            let p = t[(i, enter)];
            if p > PIVOT_TOL {
                let ratio = t[(i, rhs)] / p;
                let better = match leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < lr - PIVOT_TOL || (ratio <= lr + PIVOT_TOL && basis[i] < basis[li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (row, _) = leave?;
        let p = t[(row, enter)];
        for j in 0..cols {
            t[(row, j)] /= p;
        }
        for i in 0..=f {
            if i != row {
                let factor = t[(i, enter)];
                if factor != 0.0 {
                    for j in 0..cols {
                        t[(i, j)] -= factor * t[(row, j)];
                    }
                }
            }
        }
        basis[row] = enter;
    }
    Some(t[(f, rhs)])
}
