//! Source domains: the set every separator output is constrained to.
//!
//! The special domains (antisparse, sparse, simplex and their nonnegative
//! variants) have closed-form operators. General polytopes come either as an
//! H-representation `{y : A y <= b}` or as a feature-based description built
//! from per-coordinate sign attributes and group l1 constraints.

mod lp;
mod project;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use project::{project, project_l1_ball, project_simplex};

/// `sign(x)` with `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
pub(crate) fn soft_threshold_scalar(v: f64, lambda: f64) -> f64 {
    if v.abs() <= lambda {
        0.0
    } else {
        v - sign(v) * lambda
    }
}

#[inline]
pub(crate) fn clip_signed_scalar(v: f64) -> f64 {
    if (-1.0..=1.0).contains(&v) {
        v
    } else {
        sign(v)
    }
}

#[inline]
pub(crate) fn clip_nonneg_scalar(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn require_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("non-finite input vector"))
    }
}

/// Elementwise projection onto `[-1, 1]^n`.
pub fn clip_signed(v: &DVector<f64>) -> Result<DVector<f64>> {
    require_finite(v)?;
    Ok(v.map(clip_signed_scalar))
}

/// Elementwise projection onto `[0, 1]^n`.
pub fn clip_nonneg(v: &DVector<f64>) -> Result<DVector<f64>> {
    require_finite(v)?;
    Ok(v.map(clip_nonneg_scalar))
}

/// Soft-thresholding `ST_lambda`, the proximal map of `lambda * ||.||_1`.
pub fn soft_threshold(v: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("threshold must be nonnegative, got {lambda}")));
    }
    Ok(v.map(|x| soft_threshold_scalar(x, lambda)))
}

/// Polytope `{y : A y <= b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    witness: DVector<f64>,
}

impl HPolytope {
    /// Builds the polytope and checks that the origin is inside it.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let witness = DVector::zeros(a.ncols());
        Self::with_witness(a, b, witness)
    }

    /// Builds the polytope using `witness` as the nonemptiness probe.
    pub fn with_witness(a: DMatrix<f64>, b: DVector<f64>, witness: DVector<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::invalid("H-polytope needs at least one row and column"));
        }
        check_dim(a.nrows(), b.len(), "H-polytope rhs length")?;
        check_dim(a.ncols(), witness.len(), "H-polytope witness length")?;
        if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("H-polytope entries must be finite"));
        }
        let p = HPolytope { a, b, witness };
        if p.max_violation(&p.witness) > 0.0 {
            return Err(Error::invalid("H-polytope witness violates A y <= b; set may be empty"));
        }
        Ok(p)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn witness(&self) -> &DVector<f64> {
        &self.witness
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// `max_i (A y - b)_i`; nonpositive iff `y` is inside.
    pub fn max_violation(&self, y: &DVector<f64>) -> f64 {
        (&self.a * y - &self.b).max()
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        (0..self.rows()).all(|i| self.a.row(i).dot(&y.transpose()) - self.b[i] <= tol)
    }

    /// Per-coordinate bounds `[lo_i, hi_i]` of the polytope, each from a small LP.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let shifted_b = &self.b - &self.a * &self.witness;
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut c = DVector::zeros(n);
            c[i] = 1.0;
            let up = lp::maximize(&self.a, &shifted_b, &c)
                .ok_or_else(|| Error::invalid(format!("H-polytope unbounded along +y{}", i + 1)))?;
            c[i] = -1.0;
            let down = lp::maximize(&self.a, &shifted_b, &c)
                .ok_or_else(|| Error::invalid(format!("H-polytope unbounded along -y{}", i + 1)))?;
            hi[i] = self.witness[i] + up;
            lo[i] = self.witness[i] - down;
        }
        Ok((lo, hi))
    }
}

/// Polytope described by attributes: signed coordinates live in `[-1, 1]`,
/// nonnegative ones in `[0, 1]`, and each group `J_l` satisfies `||y_J||_1 <= 1`.
///
/// Indices are 0-based internally; the JSON form uses 1-based indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePolytope {
    signed: Vec<bool>,
    groups: Vec<Vec<usize>>,
}

impl FeaturePolytope {
    pub fn new(n: usize, signed_indices: &[usize], groups: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("feature polytope dimension must be positive"));
        }
        let mut signed = vec![false; n];
        for &i in signed_indices {
            if i >= n {
                return Err(Error::invalid(format!("signed index {} out of range", i + 1)));
            }
            signed[i] = true;
        }
        for g in &groups {
            if g.is_empty() {
                return Err(Error::invalid("sparsity groups must be nonempty"));
            }
            if let Some(&bad) = g.iter().find(|&&j| j >= n) {
                return Err(Error::invalid(format!("group index {} out of range", bad + 1)));
            }
        }
        let groups = groups
            .into_iter()
            .map(|mut g| {
                g.sort_unstable();
                g.dedup();
                g
            })
            .collect();
        Ok(FeaturePolytope { signed, groups })
    }

    /// Builds from 1-based index lists, checking that `signed` and `nonneg`
    /// partition `{1..n}`.
    pub fn from_one_based(
        n: usize,
        signed: &[usize],
        nonneg: &[usize],
        groups: &[Vec<usize>],
    ) -> Result<Self> {
        let to_zero = |i: usize| {
            if i == 0 || i > n {
                Err(Error::invalid(format!("index {i} outside 1..={n}")))
            } else {
                Ok(i - 1)
            }
        };
        let s: Vec<usize> = signed.iter().map(|&i| to_zero(i)).collect::<Result<_>>()?;
        let p: Vec<usize> = nonneg.iter().map(|&i| to_zero(i)).collect::<Result<_>>()?;
        let mut seen = vec![0u8; n];
        for &i in s.iter().chain(p.iter()) {
            seen[i] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(Error::invalid(
                "signed and nonneg index sets must partition 1..=n",
            ));
        }
        let g = groups
            .iter()
            .map(|g| g.iter().map(|&i| to_zero(i)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, &s, g)
    }

    /// The five-dimensional mixed-attribute example: `s1, s2, s4` signed,
    /// `s3, s5` nonnegative, `||(s1, s2, s5)||_1 <= 1`, `||(s2, s3, s4)||_1 <= 1`.
    pub fn p_ex() -> Self {
        Self::new(5, &[0, 1, 3], vec![vec![0, 1, 4], vec![1, 2, 3]]).expect("valid example")
    }

    pub fn dim(&self) -> usize {
        self.signed.len()
    }

    pub fn is_signed(&self, j: usize) -> bool {
        self.signed[j]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn signed_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.signed[j]).collect()
    }

    pub fn nonneg_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.signed[j]).collect()
    }

    /// `I_a`: coordinates that appear in no sparsity group.
    pub fn ungrouped(&self) -> Vec<bool> {
        let mut free = vec![true; self.dim()];
        for g in &self.groups {
            for &j in g {
                free[j] = false;
            }
        }
        free
    }

    /// `alpha_j = sum of lambda_l over groups containing j`.
    pub fn group_shift(&self, lambda: &[f64]) -> Vec<f64> {
        let mut alpha = vec![0.0; self.dim()];
        for (g, &l) in self.groups.iter().zip(lambda) {
            for &j in g {
                alpha[j] += l;
            }
        }
        alpha
    }

    pub fn group_l1(&self, y: &DVector<f64>, l: usize) -> f64 {
        self.groups[l].iter().map(|&j| y[j].abs()).sum()
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        let boxes = (0..self.dim()).all(|j| {
            let lo = if self.signed[j] { -1.0 } else { 0.0 };
            y[j] >= lo - tol && y[j] <= 1.0 + tol
        });
        boxes && (0..self.num_groups()).all(|l| self.group_l1(y, l) <= 1.0 + tol)
    }
}

/// The presumed source domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// `||y||_inf <= 1`
    Antisparse,
    /// `0 <= y <= 1`
    NonnegAntisparse,
    /// `||y||_1 <= 1`
    Sparse,
    /// `y >= 0, sum y <= 1`
    NonnegSparse,
    /// `y >= 0, sum y = 1`
    UnitSimplex,
    HPolytope(HPolytope),
    FeaturePolytope(FeaturePolytope),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    kind: DomainKind,
    n: usize,
}

impl DomainSpec {
    pub fn new(kind: DomainKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("domain dimension must be positive"));
        }
        match &kind {
            DomainKind::HPolytope(h) => check_dim(n, h.dim(), "H-polytope dimension")?,
            DomainKind::FeaturePolytope(f) => check_dim(n, f.dim(), "feature polytope dimension")?,
            _ => {}
        }
        Ok(DomainSpec { kind, n })
    }

    pub fn antisparse(n: usize) -> Self {
        Self::new(DomainKind::Antisparse, n).expect("n > 0")
    }

    pub fn nonneg_antisparse(n: usize) -> Self {
        Self::new(DomainKind::NonnegAntisparse, n).expect("n > 0")
    }

    pub fn sparse(n: usize) -> Self {
        Self::new(DomainKind::Sparse, n).expect("n > 0")
    }

    pub fn nonneg_sparse(n: usize) -> Self {
        Self::new(DomainKind::NonnegSparse, n).expect("n > 0")
    }

    pub fn simplex(n: usize) -> Self {
        Self::new(DomainKind::UnitSimplex, n).expect("n > 0")
    }

    pub fn hpolytope(h: HPolytope) -> Self {
        let n = h.dim();
        Self::new(DomainKind::HPolytope(h), n).expect("consistent")
    }

    pub fn feature(f: FeaturePolytope) -> Self {
        let n = f.dim();
        Self::new(DomainKind::FeaturePolytope(f), n).expect("consistent")
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Short lowercase name, matching the JSON `kind` tag.
    pub fn name(&self) -> &'static str {
        match self.kind {
            DomainKind::Antisparse => "antisparse",
            DomainKind::NonnegAntisparse => "nonneg_antisparse",
            DomainKind::Sparse => "sparse",
            DomainKind::NonnegSparse => "nonneg_sparse",
            DomainKind::UnitSimplex => "simplex",
            DomainKind::HPolytope(_) => "hpolytope",
            DomainKind::FeaturePolytope(_) => "feature",
        }
    }

    /// Whether the dynamics for this domain carry Lagrange multipliers.
    pub fn has_interneurons(&self) -> bool {
        !matches!(
            self.kind,
            DomainKind::Antisparse | DomainKind::NonnegAntisparse
        )
    }

    /// Number of interneurons (multipliers) the dynamics use.
    pub fn num_multipliers(&self) -> usize {
        match &self.kind {
            DomainKind::Antisparse | DomainKind::NonnegAntisparse => 0,
            DomainKind::Sparse | DomainKind::NonnegSparse | DomainKind::UnitSimplex => 1,
            DomainKind::HPolytope(h) => h.rows(),
            DomainKind::FeaturePolytope(f) => f.num_groups(),
        }
    }

    /// Largest violation of any defining inequality (0 when inside).
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        let l1: f64 = y.iter().map(|v| v.abs()).sum();
        let v = match &self.kind {
            DomainKind::Antisparse => y.iter().map(|v| v.abs() - 1.0).fold(f64::MIN, f64::max),
            DomainKind::NonnegAntisparse => y
                .iter()
                .map(|&v| (-v).max(v - 1.0))
                .fold(f64::MIN, f64::max),
            DomainKind::Sparse => l1 - 1.0,
            DomainKind::NonnegSparse => {
                let neg = y.iter().map(|&v| -v).fold(f64::MIN, f64::max);
                neg.max(y.sum() - 1.0)
            }
            DomainKind::UnitSimplex => {
                let neg = y.iter().map(|&v| -v).fold(f64::MIN, f64::max);
                neg.max((y.sum() - 1.0).abs())
            }
            DomainKind::HPolytope(h) => h.max_violation(y),
            DomainKind::FeaturePolytope(f) => {
                let boxes = (0..f.dim())
                    .map(|j| {
                        let lo = if f.is_signed(j) { -1.0 } else { 0.0 };
                        (lo - y[j]).max(y[j] - 1.0)
                    })
                    .fold(f64::MIN, f64::max);
                let groups = (0..f.num_groups())
                    .map(|l| f.group_l1(y, l) - 1.0)
                    .fold(f64::MIN, f64::max);
                boxes.max(groups)
            }
        };
        v.max(0.0)
    }

    /// Bounding box of the domain.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.n;
        let signed = |lo: f64| Ok((DVector::from_element(n, lo), DVector::from_element(n, 1.0)));
        match &self.kind {
            DomainKind::Antisparse | DomainKind::Sparse => signed(-1.0),
            DomainKind::NonnegAntisparse | DomainKind::NonnegSparse | DomainKind::UnitSimplex => {
                signed(0.0)
            }
            DomainKind::FeaturePolytope(f) => {
                let lo = DVector::from_fn(n, |j, _| if f.is_signed(j) { -1.0 } else { 0.0 });
                Ok((lo, DVector::from_element(n, 1.0)))
            }
            DomainKind::HPolytope(h) => h.bounding_box(),
        }
    }
}

/// Whether every defining inequality of `domain` holds at `y` within additive slack `tol`.
pub fn membership(domain: &DomainSpec, y: &DVector<f64>, tol: f64) -> Result<bool> {
    check_dim(domain.dim(), y.len(), "membership point")?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("membership tolerance must be nonnegative"));
    }
    let inside = match &domain.kind {
        DomainKind::Antisparse => y.iter().all(|v| v.abs() <= 1.0 + tol),
        DomainKind::NonnegAntisparse => y.iter().all(|&v| v >= -tol && v <= 1.0 + tol),
        DomainKind::Sparse => y.iter().map(|v| v.abs()).sum::<f64>() <= 1.0 + tol,
        DomainKind::NonnegSparse => y.iter().all(|&v| v >= -tol) && y.sum() <= 1.0 + tol,
        DomainKind::UnitSimplex => y.iter().all(|&v| v >= -tol) && (y.sum() - 1.0).abs() <= tol,
        DomainKind::HPolytope(h) => h.contains(y, tol),
        DomainKind::FeaturePolytope(f) => f.contains(y, tol),
    };
    Ok(inside)
}

/// H-representation of a feature polytope.
///
/// Rows, in order: one row per sign pattern over the signed members of each
/// group (nonnegative members always get +1, rhs 1); `-y_i <= 0` for each
/// nonnegative coordinate; box rows for coordinates outside every group.
pub fn feature_to_hrep(fp: &FeaturePolytope) -> HPolytope {
    let n = fp.dim();
    let free = fp.ungrouped();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();

    for g in fp.groups() {
        let signed: Vec<usize> = g.iter().copied().filter(|&j| fp.is_signed(j)).collect();
        for pattern in 0..(1usize << signed.len()) {
            let mut row = vec![0.0; n];
            for &j in g {
                row[j] = 1.0;
            }
            for (bit, &j) in signed.iter().enumerate() {
                if pattern & (1 << bit) != 0 {
                    row[j] = -1.0;
                }
            }
            rows.push(row);
            rhs.push(1.0);
        }
    }
    for j in fp.nonneg_indices() {
        let mut row = vec![0.0; n];
        row[j] = -1.0;
        rows.push(row);
        rhs.push(0.0);
    }
    for j in (0..n).filter(|&j| free[j]) {
        let mut up = vec![0.0; n];
        up[j] = 1.0;
        rows.push(up);
        rhs.push(1.0);
        if fp.is_signed(j) {
            let mut down = vec![0.0; n];
            down[j] = -1.0;
            rows.push(down);
            rhs.push(1.0);
        }
    }

    let f = rows.len();
    let a = DMatrix::from_fn(f, n, |i, j| rows[i][j]);
    HPolytope::new(a, DVector::from_vec(rhs)).expect("origin lies in every feature polytope")
}

/// Proximal map of `sum_l lambda_l ||q_{J_l}||_1` subject to `q_{I+} >= 0`.
pub fn prox_feature(
    v: &DVector<f64>,
    lambda: &[f64],
    fp: &FeaturePolytope,
) -> Result<DVector<f64>> {
    check_dim(fp.dim(), v.len(), "prox input")?;
    check_dim(fp.num_groups(), lambda.len(), "prox multipliers")?;
    if lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::invalid("prox multipliers must be nonnegative"));
    }
    let alpha = fp.group_shift(lambda);
    Ok(DVector::from_fn(v.len(), |j, _| {
        if fp.is_signed(j) {
            soft_threshold_scalar(v[j], alpha[j])
        } else {
            relu(v[j] - alpha[j])
        }
    }))
}

/// JSON form of a domain, as it appears under `"domain"` in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Antisparse,
    NonnegAntisparse,
    Sparse,
    NonnegSparse,
    Simplex,
    Hpolytope {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Feature {
        signed: Vec<usize>,
        nonneg: Vec<usize>,
        #[serde(default)]
        groups: Vec<Vec<usize>>,
    },
}

impl DomainConfig {
    pub fn to_spec(&self, n: usize) -> Result<DomainSpec> {
        match self {
            DomainConfig::Antisparse => DomainSpec::new(DomainKind::Antisparse, n),
            DomainConfig::NonnegAntisparse => DomainSpec::new(DomainKind::NonnegAntisparse, n),
            DomainConfig::Sparse => DomainSpec::new(DomainKind::Sparse, n),
            DomainConfig::NonnegSparse => DomainSpec::new(DomainKind::NonnegSparse, n),
            DomainConfig::Simplex => DomainSpec::new(DomainKind::UnitSimplex, n),
            DomainConfig::Hpolytope { a, b } => {
                if a.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid(format!("every row of A must have {n} entries")));
                }
                let am = DMatrix::from_fn(a.len(), n, |i, j| a[i][j]);
                let h = HPolytope::new(am, DVector::from_vec(b.clone()))?;
                DomainSpec::new(DomainKind::HPolytope(h), n)
            }
            DomainConfig::Feature {
                signed,
                nonneg,
                groups,
            } => {
                let f = FeaturePolytope::from_one_based(n, signed, nonneg, groups)?;
                DomainSpec::new(DomainKind::FeaturePolytope(f), n)
            }
        }
    }

    pub fn from_spec(spec: &DomainSpec) -> Self {
        match spec.kind() {
            DomainKind::Antisparse => DomainConfig::Antisparse,
            DomainKind::NonnegAntisparse => DomainConfig::NonnegAntisparse,
            DomainKind::Sparse => DomainConfig::Sparse,
            DomainKind::NonnegSparse => DomainConfig::NonnegSparse,
            DomainKind::UnitSimplex => DomainConfig::Simplex,
            DomainKind::HPolytope(h) => DomainConfig::Hpolytope {
                a: (0..h.rows())
                    .map(|i| h.a().row(i).iter().copied().collect())
                    .collect(),
                b: h.b().iter().copied().collect(),
            },
            DomainKind::FeaturePolytope(f) => DomainConfig::Feature {
                signed: f.signed_indices().iter().map(|i| i + 1).collect(),
                nonneg: f.nonneg_indices().iter().map(|i| i + 1).collect(),
                groups: f
                    .groups()
                    .iter()
                    .map(|g| g.iter().map(|i| i + 1).collect())
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn clip_signed_cases() {
        assert_eq!(clip_signed(&v(&[1.5, -0.2, -3.0])).unwrap(), v(&[1.0, -0.2, -1.0]));
        assert_eq!(clip_signed(&v(&[0.0, 0.0, 0.0])).unwrap(), v(&[0.0, 0.0, 0.0]));
        assert!(clip_signed(&v(&[f64::NAN])).is_err());
    }

    #[test]
    fn clip_nonneg_cases() {
        assert_eq!(clip_nonneg(&v(&[-0.3, 0.5, 2.0])).unwrap(), v(&[0.0, 0.5, 1.0]));
        assert_eq!(clip_nonneg(&v(&[0.25, 0.75])).unwrap(), v(&[0.25, 0.75]));
        assert!(clip_nonneg(&v(&[f64::INFINITY])).is_err());
    }

    #[test]
    fn clips_are_idempotent_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = DVector::from_fn(6, |_, _| rng.random_range(-4.0..4.0));
            let once = clip_signed(&x).unwrap();
            assert_eq!(clip_signed(&once).unwrap(), once);
            let once = clip_nonneg(&x).unwrap();
            assert_eq!(clip_nonneg(&once).unwrap(), once);
            assert!(once.iter().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }

    #[test]
    fn soft_threshold_cases() {
        let out = soft_threshold(&v(&[0.3, 1.2, -1.2]), 0.5).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.7).abs() < 1e-15);
        assert!((out[2] + 0.7).abs() < 1e-15);
        let x = v(&[0.4, -2.0, 0.0]);
        assert_eq!(soft_threshold(&x, 0.0).unwrap(), x);
        assert!(soft_threshold(&x, -0.1).is_err());
        assert_eq!(soft_threshold(&v(&[0.0]), 0.3).unwrap()[0], 0.0);
    }

    #[test]
    fn membership_cases() {
        let mut e1 = DVector::zeros(4);
        e1[0] = 1.0;
        assert!(membership(&DomainSpec::sparse(4), &e1, 0.0).unwrap());
        assert!(!membership(&DomainSpec::simplex(2), &v(&[0.5, 0.6]), 0.0).unwrap());
        assert!(membership(&DomainSpec::simplex(2), &v(&[0.4, 0.6]), 1e-12).unwrap());
        assert!(matches!(
            membership(&DomainSpec::sparse(3), &e1, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn p_ex_has_ten_rows() {
        let h = feature_to_hrep(&FeaturePolytope::p_ex());
        assert_eq!(h.rows(), 10);
        assert_eq!(h.dim(), 5);
    }

    #[test]
    fn pure_antisparse_feature_is_box() {
        let fp = FeaturePolytope::new(4, &[0, 1, 2, 3], vec![]).unwrap();
        let h = feature_to_hrep(&fp);
        assert_eq!(h.rows(), 8);
        assert!(h.contains(&v(&[1.0, -1.0, 0.3, -0.9]), 0.0));
        assert!(!h.contains(&v(&[1.01, 0.0, 0.0, 0.0]), 0.0));
    }

    #[test]
    fn hrep_agrees_with_feature_form() {
        let fp = FeaturePolytope::p_ex();
        let h = feature_to_hrep(&fp);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut disagreements = 0;
        for _ in 0..20_000 {
            let y = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
            if fp.contains(&y, 1e-12) != h.contains(&y, 1e-12) {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
    }

    #[test]
    fn prox_feature_rules() {
        let fp = FeaturePolytope::new(3, &[0, 1], vec![vec![0, 1, 2]]).unwrap();
        let out = prox_feature(&v(&[1.2, -0.3, 0.4]), &[0.5], &fp).unwrap();
        assert!((out[0] - 0.7).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        assert_eq!(out[2], 0.0);

        let x = v(&[0.4, -0.8, 0.1]);
        let out = prox_feature(&x, &[0.0], &fp).unwrap();
        assert_eq!(out[0], 0.4);
        assert_eq!(out[1], -0.8);
        assert!(prox_feature(&x, &[-1.0], &fp).is_err());
    }

    #[test]
    fn prox_is_identity_without_groups_or_nonneg() {
        let fp = FeaturePolytope::new(3, &[0, 1, 2], vec![]).unwrap();
        let x = v(&[3.0, -0.2, 0.0]);
        assert_eq!(prox_feature(&x, &[], &fp).unwrap(), x);
    }

    #[test]
    fn one_based_parsing_checks_partition() {
        assert!(FeaturePolytope::from_one_based(3, &[1, 2], &[3], &[vec![1, 3]]).is_ok());
        assert!(FeaturePolytope::from_one_based(3, &[1, 2], &[2, 3], &[]).is_err());
        assert!(FeaturePolytope::from_one_based(3, &[1, 2], &[4], &[]).is_err());
        assert!(FeaturePolytope::from_one_based(3, &[1, 2, 3], &[], &[vec![]]).is_err());
    }

    #[test]
    fn hpolytope_requires_nonempty_probe() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert!(HPolytope::new(a.clone(), v(&[-1.0, 2.0])).is_err());
        assert!(HPolytope::with_witness(a, v(&[-1.0, 2.0]), v(&[-1.5])).is_ok());
    }

    #[test]
    fn bounding_box_of_p_ex_hrep() {
        let h = feature_to_hrep(&FeaturePolytope::p_ex());
        let (lo, hi) = h.bounding_box().unwrap();
        let expect_lo = [-1.0, -1.0, 0.0, -1.0, 0.0];
        for j in 0..5 {
            assert!((lo[j] - expect_lo[j]).abs() < 1e-9, "lo {j}: {}", lo[j]);
            assert!((hi[j] - 1.0).abs() < 1e-9, "hi {j}: {}", hi[j]);
        }
    }

    #[test]
    fn domain_config_round_trip() {
        let json = r#"{"kind":"feature","signed":[1,2,4],"nonneg":[3,5],"groups":[[1,2,5],[2,3,4]]}"#;
        let cfg: DomainConfig = serde_json::from_str(json).unwrap();
        let spec = cfg.to_spec(5).unwrap();
        assert_eq!(spec.kind(), &DomainKind::FeaturePolytope(FeaturePolytope::p_ex()));
        assert_eq!(DomainConfig::from_spec(&spec), cfg);

        let json = r#"{"kind":"hpolytope","A":[[1,0],[0,1],[-1,-1]],"b":[1,1,1]}"#;
        let cfg: DomainConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.to_spec(2).unwrap().num_multipliers(), 3);
        assert!(cfg.to_spec(3).is_err());
    }
}
