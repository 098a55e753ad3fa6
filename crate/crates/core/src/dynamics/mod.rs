//! The online CorInfoMax learner.
//!
//! Per sample `x(k)` the network runs a fixed-point loop (the neural dynamics)
//! to get the output `y(k)`, then updates the feedforward map `W`, the inverse
//! output correlation `B_y` and, optionally, the inverse error correlation `B_e`.

mod neural;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domains::DomainSpec;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{quad_form, symmetrize};

pub use neural::run_dynamics;

/// Forgetting factors of the weighted correlations and the regularizer `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForgettingConfig {
    pub zeta_y: f64,
    pub zeta_e: f64,
    pub eps: f64,
}

impl ForgettingConfig {
    pub fn new(zeta_y: f64, zeta_e: f64, eps: f64) -> Result<Self> {
        let c = ForgettingConfig { zeta_y, zeta_e, eps };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |z: f64| z > 0.0 && z < 1.0;
        if !unit(self.zeta_y) || !unit(self.zeta_e) {
            return Err(Error::invalid("forgetting factors must lie in (0, 1)"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::invalid("eps must be positive and finite"));
        }
        Ok(())
    }
}

/// How `B_y` (and an exact `B_e`) are propagated between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Finite-`k` matrix-inversion-lemma recursion. Tracks the inverse of the
    /// bias-corrected weighted correlation exactly.
    Exact,
    /// The `k -> infinity` limit of `Exact`: `B <- (B - g B y y^T B) / zeta`
    /// with `g = (zeta / (1 - zeta) + y^T B y)^-1`.
    Steady,
    /// Both gamma factors frozen at `(1 - zeta) / zeta`, in the dynamics and in
    /// the `B_y` update. This is the form the network trains with.
    #[default]
    ConstantGain,
}

/// Inverse error correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCorrelation {
    /// `B_e = inv_eps * I`, held fixed.
    ScalarIdentity { inv_eps: f64 },
    ExactMatrix(DMatrix<f64>),
}

impl ErrorCorrelation {
    pub fn from_eps(eps: f64) -> Self {
        ErrorCorrelation::ScalarIdentity { inv_eps: 1.0 / eps }
    }

    /// `B_e e` written into `out`, returning `e^T B_e e`.
    pub(crate) fn apply(&self, e: &[f64], out: &mut [f64]) -> f64 {
        match self {
            ErrorCorrelation::ScalarIdentity { inv_eps } => {
                let mut q = 0.0;
                for (o, &v) in out.iter_mut().zip(e) {
                    *o = inv_eps * v;
                    q += v * *o;
                }
                q
            }
            ErrorCorrelation::ExactMatrix(b) => {
                let n = e.len();
                let bs = b.as_slice();
                let mut q = 0.0;
                for i in 0..n {
                    // B is symmetric, so column i doubles as row i.
                    let col = &bs[i * n..(i + 1) * n];
                    let s: f64 = col.iter().zip(e).map(|(a, v)| a * v).sum();
                    out[i] = s;
                    q += e[i] * s;
                }
                q
            }
        }
    }
}

/// Learned synaptic state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    w: DMatrix<f64>,
    b_y: DMatrix<f64>,
    b_e: ErrorCorrelation,
    k: usize,
    mode: UpdateMode,
    /// Output activity left by the previous sample; seeds warm starts.
    y_last: DVector<f64>,
}

impl NetworkState {
    pub fn new(
        w: DMatrix<f64>,
        b_y: DMatrix<f64>,
        b_e: ErrorCorrelation,
        mode: UpdateMode,
    ) -> Result<Self> {
        let n = w.nrows();
        if n == 0 || w.ncols() == 0 {
            return Err(Error::invalid("W must be nonempty"));
        }
        check_dim(n, b_y.nrows(), "B_y rows")?;
        check_dim(n, b_y.ncols(), "B_y cols")?;
        if b_y.clone().cholesky().is_none() {
            return Err(Error::NumericalDegeneracy("B_y must be positive definite".into()));
        }
        match &b_e {
            ErrorCorrelation::ScalarIdentity { inv_eps } => {
                if !(*inv_eps > 0.0 && inv_eps.is_finite()) {
                    return Err(Error::invalid("B_e scale must be positive"));
                }
            }
            ErrorCorrelation::ExactMatrix(b) => {
                check_dim(n, b.nrows(), "B_e rows")?;
                check_dim(n, b.ncols(), "B_e cols")?;
                if b.clone().cholesky().is_none() {
                    return Err(Error::NumericalDegeneracy("B_e must be positive definite".into()));
                }
            }
        }
        Ok(NetworkState {
            w,
            b_y,
            b_e,
            k: 1,
            mode,
            y_last: DVector::zeros(n),
        })
    }

    /// `W(1) = [I 0]` (n x m), `B_y(1) = by_scale I`, `B_e(1) = be_scale I`.
    pub fn identity_init(
        n: usize,
        m: usize,
        by_scale: f64,
        be_scale: f64,
        mode: UpdateMode,
    ) -> Result<Self> {
        if m < n {
            return Err(Error::invalid(format!("need m >= n, got m={m}, n={n}")));
        }
        Self::new(
            DMatrix::identity(n, m),
            DMatrix::identity(n, n) * by_scale,
            ErrorCorrelation::ScalarIdentity { inv_eps: be_scale },
            mode,
        )
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn m(&self) -> usize {
        self.w.ncols()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn b_y(&self) -> &DMatrix<f64> {
        &self.b_y
    }

    pub fn b_e(&self) -> &ErrorCorrelation {
        &self.b_e
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn y_last(&self) -> &DVector<f64> {
        &self.y_last
    }

    /// Replaces `B_e` with an explicitly propagated matrix.
    pub fn with_exact_be(mut self, b_e: DMatrix<f64>) -> Result<Self> {
        check_dim(self.n(), b_e.nrows(), "B_e rows")?;
        check_dim(self.n(), b_e.ncols(), "B_e cols")?;
        self.b_e = ErrorCorrelation::ExactMatrix(b_e);
        Ok(self)
    }

    /// Sets the sample counter. Exact-mode runs that start from a hand-built
    /// `B_y` should begin at `k >= 2`.
    pub fn set_counter(&mut self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::invalid("sample counter starts at 1"));
        }
        self.k = k;
        Ok(())
    }

    pub fn set_y_last(&mut self, y: DVector<f64>) -> Result<()> {
        check_dim(self.n(), y.len(), "output state")?;
        self.y_last = y;
        Ok(())
    }

    /// `1 / inv_eps` in scalar-identity mode.
    pub fn eps(&self) -> Option<f64> {
        match self.b_e {
            ErrorCorrelation::ScalarIdentity { inv_eps } => Some(1.0 / inv_eps),
            ErrorCorrelation::ExactMatrix(_) => None,
        }
    }
}

/// `(zeta - zeta^k) / (1 - zeta)`: the accumulated weight of past samples.
fn history_weight(zeta: f64, k: usize) -> f64 {
    let zk = zeta.powf(k as f64);
    (zeta - zk) / (1.0 - zeta)
}

/// Gamma factor from the quadratic form `q = v^T B v`.
pub(crate) fn gamma_from_quad(mode: UpdateMode, quad: f64, zeta: f64, k: usize) -> Result<f64> {
    let h = match mode {
        UpdateMode::Exact => history_weight(zeta, k),
        UpdateMode::Steady => zeta / (1.0 - zeta),
        UpdateMode::ConstantGain => return Ok((1.0 - zeta) / zeta),
    };
    let den = h + quad;
    if den > 0.0 && den.is_finite() {
        Ok(1.0 / den)
    } else {
        Err(Error::DegenerateInput(format!(
            "gamma denominator {den} is not positive (k = {k})"
        )))
    }
}

fn check_gamma_args(zeta: f64, k: usize) -> Result<()> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::invalid("forgetting factor must lie in (0, 1)"));
    }
    if k == 0 {
        return Err(Error::invalid("sample counter starts at 1"));
    }
    Ok(())
}

/// `((zeta - zeta^k) / (1 - zeta) + y^T B_y y)^-1`.
pub fn compute_gamma_y(b_y: &DMatrix<f64>, y: &DVector<f64>, zeta_y: f64, k: usize) -> Result<f64> {
    check_dim(b_y.nrows(), y.len(), "gamma_y vector")?;
    check_gamma_args(zeta_y, k)?;
    gamma_from_quad(UpdateMode::Exact, quad_form(b_y, y), zeta_y, k)
}

/// `((zeta - zeta^k) / (1 - zeta) + e^T B_e e)^-1`; `e^T B_e e = |e|^2 / eps`
/// in scalar-identity mode.
pub fn compute_gamma_e(b_e: &ErrorCorrelation, e: &DVector<f64>, zeta_e: f64, k: usize) -> Result<f64> {
    if let ErrorCorrelation::ExactMatrix(b) = b_e {
        check_dim(b.nrows(), e.len(), "gamma_e vector")?;
    }
    check_gamma_args(zeta_e, k)?;
    let mut scratch = vec![0.0; e.len()];
    let q = b_e.apply(e.as_slice(), &mut scratch);
    gamma_from_quad(UpdateMode::Exact, q, zeta_e, k)
}

/// Gamma factors the network's dynamics use for this state's update mode.
pub fn gammas_for_state(
    state: &NetworkState,
    y: &DVector<f64>,
    e: &DVector<f64>,
    fcfg: &ForgettingConfig,
) -> Result<(f64, f64)> {
    check_dim(state.n(), y.len(), "output")?;
    check_dim(state.n(), e.len(), "error")?;
    let mut scratch = vec![0.0; e.len()];
    let qe = state.b_e.apply(e.as_slice(), &mut scratch);
    let gy = gamma_from_quad(state.mode, quad_form(&state.b_y, y), fcfg.zeta_y, state.k)?;
    let ge = gamma_from_quad(state.mode, qe, fcfg.zeta_e, state.k)?;
    Ok((gy, ge))
}

/// Gradient of the online objective: `gamma_y B_y y - gamma_e B_e e`.
pub fn grad_j(
    state: &NetworkState,
    y: &DVector<f64>,
    e: &DVector<f64>,
    gamma_y: f64,
    gamma_e: f64,
) -> Result<DVector<f64>> {
    check_dim(state.n(), y.len(), "output")?;
    check_dim(state.n(), e.len(), "error")?;
    let mut be = vec![0.0; e.len()];
    state.b_e.apply(e.as_slice(), &mut be);
    let by = &state.b_y * y;
    Ok(DVector::from_fn(y.len(), |i, _| gamma_y * by[i] - gamma_e * be[i]))
}

/// The same gradient through the two-layer network: `M_y y + (gamma_e / eps) W x`
/// with `M_y = gamma_y B_y - (gamma_e / eps) I`. Needs a scalar-identity `B_e`.
pub fn grad_j_two_layer(
    state: &NetworkState,
    y: &DVector<f64>,
    x: &DVector<f64>,
    gamma_y: f64,
    gamma_e: f64,
) -> Result<DVector<f64>> {
    check_dim(state.n(), y.len(), "output")?;
    check_dim(state.m(), x.len(), "input")?;
    let ErrorCorrelation::ScalarIdentity { inv_eps } = state.b_e else {
        return Err(Error::invalid("two-layer form needs a scalar-identity B_e"));
    };
    let c = gamma_e * inv_eps;
    let m_y = &state.b_y * gamma_y - DMatrix::identity(state.n(), state.n()) * c;
    Ok(m_y * y + (&state.w * x) * c)
}

/// `W <- W + mu e x^T`.
pub fn update_w(state: &mut NetworkState, e: &DVector<f64>, x: &DVector<f64>, mu: f64) -> Result<()> {
    check_dim(state.n(), e.len(), "error")?;
    check_dim(state.m(), x.len(), "input")?;
    state.w.ger(mu, e, x, 1.0);
    Ok(())
}

/// One rank-1 step of an inverse weighted correlation, in place.
fn rank_one_step(
    b: &mut DMatrix<f64>,
    v: &DVector<f64>,
    zeta: f64,
    k: usize,
    eps: f64,
    mode: UpdateMode,
) -> Result<()> {
    if mode == UpdateMode::Exact && k == 1 {
        // The recursion's gain is infinite at k = 1; start from its limit.
        let p = v * v.transpose() + DMatrix::identity(v.len(), v.len()) * eps;
        *b = crate::linalg::inv_spd(&p)?;
        return Ok(());
    }
    let bv = &*b * v;
    let q = v.dot(&bv);
    if !(q >= 0.0) {
        return Err(Error::NumericalDegeneracy(format!(
            "quadratic form {q} lost positive definiteness"
        )));
    }
    let (scale, gamma) = match mode {
        UpdateMode::Exact => {
            let zk = zeta.powf(k as f64);
            ((1.0 - zk) / (zeta - zk), gamma_from_quad(mode, q, zeta, k)?)
        }
        UpdateMode::Steady => (1.0 / zeta, gamma_from_quad(mode, q, zeta, k)?),
        UpdateMode::ConstantGain => (1.0 / zeta, (1.0 - zeta) / zeta),
    };
    b.ger(-gamma, &bv, &bv, 1.0);
    *b *= scale;
    symmetrize(b);
    if !b.iter().all(|x| x.is_finite()) {
        return Err(Error::NumericalDegeneracy("inverse correlation is not finite".into()));
    }
    Ok(())
}

/// Rank-1 update of `B_y` for the converged output `y`, then `k <- k + 1`.
///
/// Call after [`update_be`] for the same sample.
pub fn update_by(
    state: &mut NetworkState,
    y: &DVector<f64>,
    fcfg: &ForgettingConfig,
    mode: UpdateMode,
) -> Result<()> {
    check_dim(state.n(), y.len(), "output")?;
    rank_one_step(&mut state.b_y, y, fcfg.zeta_y, state.k, fcfg.eps, mode)?;
    state.k += 1;
    Ok(())
}

/// Rank-1 update of an exact `B_e`; a no-op in scalar-identity mode.
pub fn update_be(
    state: &mut NetworkState,
    e: &DVector<f64>,
    fcfg: &ForgettingConfig,
    mode: UpdateMode,
) -> Result<()> {
    check_dim(state.n(), e.len(), "error")?;
    let k = state.k;
    match &mut state.b_e {
        ErrorCorrelation::ScalarIdentity { .. } => Ok(()),
        ErrorCorrelation::ExactMatrix(b) => rank_one_step(b, e, fcfg.zeta_e, k, fcfg.eps, mode),
    }
}

/// Step size of the output neurons: `eta(nu) = max(c / nu, floor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub c: f64,
    #[serde(default)]
    pub floor: f64,
}

impl StepSchedule {
    #[inline]
    pub fn at(&self, nu: usize) -> f64 {
        (self.c / nu as f64).max(self.floor)
    }
}

/// Controls of the per-sample fixed-point loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub nu_max: usize,
    pub tol: f64,
    pub eta_y: StepSchedule,
    pub eta_lambda: f64,
    pub lambda_init: f64,
    pub warm_start: bool,
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu_max == 0 {
            return Err(Error::invalid("nu_max must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if !(self.eta_y.c > 0.0) || !(self.eta_y.floor >= 0.0) {
            return Err(Error::invalid("output step schedule must be positive"));
        }
        if !(self.eta_lambda > 0.0) {
            return Err(Error::invalid("multiplier step must be positive"));
        }
        if !(self.lambda_init >= 0.0) {
            return Err(Error::invalid("initial multiplier must be nonnegative"));
        }
        Ok(())
    }
}

/// Result of the dynamics for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub y: DVector<f64>,
    /// `y - W x` with the `W` used during the dynamics.
    pub e: DVector<f64>,
    pub nu_used: usize,
    pub converged: bool,
    /// Final multipliers; empty for domains without interneurons.
    pub lambda: Vec<f64>,
}

/// Feedforward learning rate over samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuSchedule {
    Constant { mu: f64 },
    /// `mu(k+1) = max(mu(k) * factor, floor)`.
    Decay { initial: f64, factor: f64, floor: f64 },
}

impl MuSchedule {
    pub fn initial(&self) -> f64 {
        match *self {
            MuSchedule::Constant { mu } => mu,
            MuSchedule::Decay { initial, .. } => initial,
        }
    }

    pub fn next(&self, mu: f64) -> f64 {
        match *self {
            MuSchedule::Constant { mu } => mu,
            MuSchedule::Decay { factor, floor, .. } => (mu * factor).max(floor),
        }
    }
}

/// Runs the learner over the columns of `xs`, calling `sink` with each
/// sample's output. Returns the final state.
pub fn fit_online_with<F>(
    xs: &DMatrix<f64>,
    domain: &DomainSpec,
    fcfg: &ForgettingConfig,
    dcfg: &DynamicsConfig,
    mu: MuSchedule,
    init: NetworkState,
    mut sink: F,
) -> Result<NetworkState>
where
    F: FnMut(usize, &OutputRecord),
{
    fcfg.validate()?;
    dcfg.validate()?;
    check_dim(init.m(), xs.nrows(), "mixture dimension")?;
    check_dim(init.n(), domain.dim(), "domain dimension")?;
    let mut state = init;
    let mut mu_k = mu.initial();
    let mode = state.mode;
    for (idx, col) in xs.column_iter().enumerate() {
        let x = col.into_owned();
        let rec = run_dynamics(&state, &x, domain, fcfg, dcfg).map_err(|e| e.at_sample(idx))?;
        update_w(&mut state, &rec.e, &x, mu_k)?;
        update_be(&mut state, &rec.e, fcfg, mode).map_err(|e| e.at_sample(idx))?;
        update_by(&mut state, &rec.y, fcfg, mode).map_err(|e| e.at_sample(idx))?;
        state.y_last.copy_from(&rec.y);
        mu_k = mu.next(mu_k);
        sink(idx, &rec);
    }
    Ok(state)
}

/// Collecting form of [`fit_online_with`].
pub fn fit_online(
    xs: &DMatrix<f64>,
    domain: &DomainSpec,
    fcfg: &ForgettingConfig,
    dcfg: &DynamicsConfig,
    mu: MuSchedule,
    init: NetworkState,
) -> Result<(NetworkState, Vec<OutputRecord>)> {
    let mut out = Vec::with_capacity(xs.ncols());
    let state = fit_online_with(xs, domain, fcfg, dcfg, mu, init, |_, r| out.push(r.clone()))?;
    Ok((state, out))
}

/// Serialized learner: state plus the forgetting configuration it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: usize,
    pub m: usize,
    pub state: NetworkState,
    pub forgetting: ForgettingConfig,
}

impl Checkpoint {
    pub fn new(state: NetworkState, forgetting: ForgettingConfig) -> Self {
        Checkpoint {
            n: state.n(),
            m: state.m(),
            state,
            forgetting,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint =
            serde_json::from_str(s).map_err(|e| Error::invalid(format!("checkpoint: {e}")))?;
        check_dim(c.n, c.state.n(), "checkpoint n")?;
        check_dim(c.m, c.state.m(), "checkpoint m")?;
        c.forgetting.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests;
