//! End-to-end experiment description and runner: generate sources, mix, add
//! noise, learn online, score.
//!
//! Network hyperparameters left out of a config fall back to the preset for the
//! chosen domain and source type.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::datagen::{
    add_awgn, gen_copula_t, gen_mixing, gen_pam4, gen_uniform_polytope, pam4_scaled, stream_rng, Marginal,
    MixingDist, MIXING_STREAM, NOISE_STREAM, SOURCE_STREAM,
};
use crate::domains::{DomainConfig, DomainKind, DomainSpec};
use crate::dynamics::{
    fit_online_with, DynamicsConfig, ForgettingConfig, MuSchedule, NetworkState, StepSchedule, UpdateMode,
};
use crate::error::{Error, Result};
use crate::metrics::{resolve_alignment, ser_pam4, sinr_db_lenient, sinr_trace};

/// Source generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// Marginals follow the domain: signed for antisparse, `[0, 1]` for nonnegative antisparse.
    CopulaT {
        #[serde(default)]
        rho: f64,
        #[serde(default = "default_df")]
        df: f64,
    },
    /// Uniform on the domain.
    Uniform,
    /// 4-PAM symbols, fed to the network divided by 3.
    Pam4,
}

fn default_df() -> f64 {
    4.0
}

/// Optional network overrides; absent fields come from the preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkOverrides {
    pub zeta_y: Option<f64>,
    pub zeta_e: Option<f64>,
    /// `B_y(1) = by_init I`.
    pub by_init: Option<f64>,
    /// `B_e(1) = be_init I`; also fixes `eps = 1 / be_init`.
    pub be_init: Option<f64>,
    pub mu_w: Option<f64>,
    /// Per-sample multiplicative decay of `mu_w` (1 keeps it constant).
    pub mu_w_decay: Option<f64>,
    pub mu_w_floor: Option<f64>,
    pub nu_max: Option<usize>,
    pub tol: Option<f64>,
    pub eta_y: Option<f64>,
    pub eta_y_floor: Option<f64>,
    pub eta_lambda: Option<f64>,
    pub lambda_init: Option<f64>,
    pub warm_start: Option<bool>,
    pub update_mode: Option<UpdateMode>,
    /// Track the full inverse error correlation instead of `I / eps`.
    pub exact_error_correlation: Option<bool>,
}

/// Fully resolved hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub zeta_y: f64,
    pub zeta_e: f64,
    pub by_init: f64,
    pub be_init: f64,
    pub mu_w: f64,
    pub mu_w_decay: f64,
    pub mu_w_floor: f64,
    pub nu_max: usize,
    pub tol: f64,
    pub eta_y: f64,
    pub eta_y_floor: f64,
    pub eta_lambda: f64,
    pub lambda_init: f64,
    pub warm_start: bool,
    pub update_mode: UpdateMode,
    pub exact_error_correlation: bool,
}

impl NetworkParams {
    /// Preset hyperparameters for a domain and source type.
    pub fn preset(domain: &DomainSpec, source: &SourceConfig) -> Self {
        let base = NetworkParams {
            zeta_y: 0.99,
            zeta_e: 0.99,
            by_init: 5.0,
            be_init: 1000.0,
            mu_w: 0.03,
            mu_w_decay: 1.0,
            mu_w_floor: 0.0,
            nu_max: 500,
            tol: 1e-6,
            eta_y: 0.1,
            eta_y_floor: 1e-3,
            eta_lambda: 1.0,
            lambda_init: 0.0,
            warm_start: true,
            update_mode: UpdateMode::ConstantGain,
            exact_error_correlation: false,
        };
        if matches!(source, SourceConfig::Pam4) {
            return NetworkParams {
                eta_y: 0.9,
                ..base
            };
        }
        match domain.kind() {
            DomainKind::Antisparse => NetworkParams {
                be_init: 5000.0,
                zeta_e: 0.98,
                eta_y: 0.9,
                eta_y_floor: 0.0,
                ..base
            },
            DomainKind::NonnegAntisparse => NetworkParams {
                be_init: 2000.0,
                zeta_e: 1.0 - 0.1 / 3.0,
                eta_y: 0.9,
                ..base
            },
            DomainKind::Sparse => NetworkParams {
                by_init: 1.0,
                ..base
            },
            DomainKind::NonnegSparse => base,
            DomainKind::UnitSimplex => NetworkParams {
                eta_lambda: 0.05,
                ..base
            },
            DomainKind::HPolytope(_) => NetworkParams {
                by_init: 1.0,
                mu_w: 0.05,
                eta_y: 0.25,
                eta_y_floor: 1e-4,
                eta_lambda: 0.1,
                ..base
            },
            DomainKind::FeaturePolytope(_) => NetworkParams {
                be_init: 2500.0,
                mu_w: 0.05,
                eta_y_floor: 1e-10,
                ..base
            },
        }
    }

    fn apply(mut self, o: &NetworkOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        take!(
            zeta_y, zeta_e, by_init, be_init, mu_w, mu_w_decay, mu_w_floor, nu_max, tol, eta_y, eta_y_floor,
            eta_lambda, lambda_init, warm_start, update_mode, exact_error_correlation
        );
        self
    }

    pub fn forgetting(&self) -> Result<ForgettingConfig> {
        ForgettingConfig::new(self.zeta_y, self.zeta_e, 1.0 / self.be_init)
    }

    pub fn dynamics(&self) -> DynamicsConfig {
        DynamicsConfig {
            nu_max: self.nu_max,
            tol: self.tol,
            eta_y: StepSchedule {
                c: self.eta_y,
                floor: self.eta_y_floor,
            },
            eta_lambda: self.eta_lambda,
            lambda_init: self.lambda_init,
            warm_start: self.warm_start,
        }
    }

    pub fn mu_schedule(&self) -> MuSchedule {
        if self.mu_w_decay == 1.0 {
            MuSchedule::Constant { mu: self.mu_w }
        } else {
            MuSchedule::Decay {
                initial: self.mu_w,
                factor: self.mu_w_decay,
                floor: self.mu_w_floor,
            }
        }
    }

    pub fn initial_state(&self, n: usize, m: usize) -> Result<NetworkState> {
        let s = NetworkState::identity_init(n, m, self.by_init, self.be_init, self.update_mode)?;
        if self.exact_error_correlation {
            s.with_exact_be(DMatrix::identity(n, n) * self.be_init)
        } else {
            Ok(s)
        }
    }

    fn validate(&self) -> Result<()> {
        self.forgetting()?;
        self.dynamics().validate()?;
        if !(self.by_init > 0.0) || !(self.be_init > 0.0) {
            return Err(Error::invalid("network.by_init and network.be_init must be positive"));
        }
        if !(self.mu_w >= 0.0) || !(self.mu_w_decay > 0.0) || !(self.mu_w_floor >= 0.0) {
            return Err(Error::invalid("network.mu_w schedule must be nonnegative"));
        }
        Ok(())
    }
}

fn default_mixing() -> MixingDist {
    MixingDist::StdNormal
}

fn default_snr() -> Option<f64> {
    Some(30.0)
}

/// One experiment, as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    pub domain: DomainConfig,
    /// Defaults to a copula for the antisparse domains and uniform otherwise.
    #[serde(default)]
    pub source: Option<SourceConfig>,
    #[serde(default = "default_mixing")]
    pub mixing: MixingDist,
    /// Mixture SNR in dB; `null` disables noise.
    #[serde(default = "default_snr")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub network: NetworkOverrides,
    /// SINR trace window; defaults to `N / 100`.
    #[serde(default)]
    pub window: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn domain_spec(&self) -> Result<DomainSpec> {
        self.domain.to_spec(self.n)
    }

    pub fn source_config(&self, domain: &DomainSpec) -> SourceConfig {
        self.source.clone().unwrap_or(match domain.kind() {
            DomainKind::Antisparse | DomainKind::NonnegAntisparse => SourceConfig::CopulaT { rho: 0.0, df: 4.0 },
            _ => SourceConfig::Uniform,
        })
    }

    pub fn params(&self) -> Result<NetworkParams> {
        let d = self.domain_spec()?;
        Ok(NetworkParams::preset(&d, &self.source_config(&d)).apply(&self.network))
    }

    pub fn window_size(&self) -> usize {
        self.window.unwrap_or(self.samples / 100).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m < self.n {
            return Err(Error::invalid(format!("need m >= n >= 1, got n={}, m={}", self.n, self.m)));
        }
        let d = self.domain_spec()?;
        match self.source_config(&d) {
            SourceConfig::CopulaT { rho, df } => {
                if !matches!(d.kind(), DomainKind::Antisparse | DomainKind::NonnegAntisparse) {
                    return Err(Error::invalid("source.copula_t needs an antisparse or nonneg_antisparse domain"));
                }
                if !(0.0..1.0).contains(&rho) || !(df > 0.0) {
                    return Err(Error::invalid("source.rho must lie in [0, 1) and source.df must be positive"));
                }
            }
            SourceConfig::Pam4 => {
                if !matches!(d.kind(), DomainKind::Antisparse) {
                    return Err(Error::invalid("source.pam4 needs the antisparse domain"));
                }
            }
            SourceConfig::Uniform => {}
        }
        if let Some(s) = self.snr_db {
            if s.is_nan() {
                return Err(Error::invalid("snr_db must be a number"));
            }
        }
        if self.window == Some(0) {
            return Err(Error::invalid("window must be positive"));
        }
        self.params()?.validate()
    }

    /// Sets a dotted field, e.g. `source.rho` or `network.mu_w`, through the
    /// JSON form so the result is checked like a freshly loaded config.
    pub fn with_field(&self, path: &str, value: serde_json::Value) -> Result<Self> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let mut cur = &mut v;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, p) in parts.iter().enumerate() {
            let obj = cur
                .as_object_mut()
                .ok_or_else(|| Error::invalid(format!("`{path}` does not name a config field")))?;
            if i + 1 == parts.len() {
                obj.insert((*p).to_owned(), value.clone());
                break;
            }
            let next = obj.entry((*p).to_owned()).or_insert(serde_json::Value::Null);
            if next.is_null() {
                *next = serde_json::json!({});
            }
            cur = next;
        }
        let out: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| Error::invalid(format!("{path}: {e}")))?;
        out.validate()?;
        Ok(out)
    }
}

/// Generated data for one experiment.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Sources as fed to the network (PAM symbols already divided by 3).
    pub sources: DMatrix<f64>,
    /// Raw 4-PAM symbols, when the source is PAM.
    pub symbols: Option<DMatrix<f64>>,
    pub mixing: DMatrix<f64>,
    pub mixtures: DMatrix<f64>,
}

pub fn generate(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let domain = cfg.domain_spec()?;
    let mut src_rng = stream_rng(cfg.seed, SOURCE_STREAM);
    let (sources, symbols) = match cfg.source_config(&domain) {
        SourceConfig::CopulaT { rho, df } => {
            let marginal = if matches!(domain.kind(), DomainKind::NonnegAntisparse) {
                Marginal::Nonneg
            } else {
                Marginal::Signed
            };
            (gen_copula_t(cfg.n, cfg.samples, rho, df, marginal, &mut src_rng)?, None)
        }
        SourceConfig::Uniform => (gen_uniform_polytope(&domain, cfg.samples, &mut src_rng)?, None),
        SourceConfig::Pam4 => {
            let s = gen_pam4(cfg.n, cfg.samples, &mut src_rng);
            (pam4_scaled(&s), Some(s))
        }
    };
    let a = gen_mixing(cfg.m, cfg.n, cfg.mixing, &mut stream_rng(cfg.seed, MIXING_STREAM))?;
    let clean = &a * &sources;
    let mixtures = match cfg.snr_db {
        Some(snr) if cfg.samples > 0 => add_awgn(&clean, snr, &mut stream_rng(cfg.seed, NOISE_STREAM))?,
        _ => clean,
    };
    Ok(Dataset {
        sources,
        symbols,
        mixing: a,
        mixtures,
    })
}

/// Scores of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub seed: u64,
    pub samples: usize,
    pub window: usize,
    /// Mean SINR per window of `window` samples.
    pub trace: Vec<f64>,
    /// Mean SINR of the last trace window.
    pub final_sinr_db: f64,
    /// Mean SINR over the last 10% of samples.
    pub mean_sinr_db: f64,
    /// Mean SINR of the final feedforward separator `W x` over the last 10%
    /// of samples.
    pub separator_sinr_db: f64,
    /// Symbol error rate of the outputs over the last 80% of samples (4-PAM only).
    pub ser: Option<f64>,
    /// Symbol error rate of the final separator over the last 80% of samples.
    pub separator_ser: Option<f64>,
    pub nu_mean: f64,
    pub nu_max_used: usize,
    pub converged_fraction: f64,
    /// Seconds spent in online learning.
    pub wall_s: f64,
}

/// Fraction of the stream used for `mean_sinr_db`.
pub const TAIL_FRACTION: f64 = 0.1;
/// Fraction of the stream scored for 4-PAM symbol errors.
pub const SER_FRACTION: f64 = 0.8;

/// Outputs of a run along with its scores.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub outputs: DMatrix<f64>,
    pub data: Dataset,
    pub state: NetworkState,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let data = generate(cfg)?;
    let domain = cfg.domain_spec()?;
    let p = cfg.params()?;
    let init = p.initial_state(cfg.n, cfg.m)?;
    let n_samples = cfg.samples;
    let mut outputs = DMatrix::zeros(cfg.n, n_samples);
    let mut nu_total = 0usize;
    let mut nu_max_used = 0usize;
    let mut converged = 0usize;

    let started = Instant::now();
    let state = fit_online_with(
        &data.mixtures,
        &domain,
        &p.forgetting()?,
        &p.dynamics(),
        p.mu_schedule(),
        init,
        |k, rec| {
            outputs.column_mut(k).copy_from(&rec.y);
            nu_total += rec.nu_used;
            nu_max_used = nu_max_used.max(rec.nu_used);
            converged += usize::from(rec.converged);
        },
    )?;
    let wall_s = started.elapsed().as_secs_f64();

    let window = cfg.window_size();
    let separated = state.w() * &data.mixtures;
    let tail = tail_len(n_samples, TAIL_FRACTION);
    let (trace, final_sinr_db, mean_sinr_db, separator_sinr_db) = if n_samples >= 2 {
        let trace = sinr_trace(&outputs, &data.sources, window)?;
        let last = *trace.last().expect("nonempty trace");
        let mean = tail_sinr(&outputs, &data.sources, tail)?;
        let sep = tail_sinr(&separated, &data.sources, tail)?;
        (trace, last, mean, sep)
    } else {
        (Vec::new(), f64::NAN, f64::NAN, f64::NAN)
    };

    let (ser, separator_ser) = match &data.symbols {
        Some(sym) if n_samples >= 2 => {
            let len = tail_len(n_samples, SER_FRACTION);
            (Some(tail_ser(&outputs, sym, len)?), Some(tail_ser(&separated, sym, len)?))
        }
        _ => (None, None),
    };

    let denom = n_samples.max(1) as f64;
    Ok(RunOutput {
        result: RunResult {
            seed: cfg.seed,
            samples: n_samples,
            window,
            trace,
            final_sinr_db,
            mean_sinr_db,
            separator_sinr_db,
            ser,
            separator_ser,
            nu_mean: nu_total as f64 / denom,
            nu_max_used,
            converged_fraction: converged as f64 / denom,
            wall_s,
        },
        outputs,
        data,
        state,
    })
}

fn tail_len(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).ceil() as usize).clamp(2.min(n), n)
}

fn tail_sinr(y: &DMatrix<f64>, s: &DMatrix<f64>, len: usize) -> Result<f64> {
    let start = y.ncols() - len;
    Ok(sinr_db_lenient(&y.columns(start, len).into_owned(), &s.columns(start, len).into_owned())?.mean)
}

/// A run whose outputs cannot be aligned scores as all-wrong.
fn tail_ser(y: &DMatrix<f64>, symbols: &DMatrix<f64>, len: usize) -> Result<f64> {
    let start = y.ncols() - len;
    let y = y.columns(start, len).into_owned();
    let s = symbols.columns(start, len).into_owned();
    match resolve_alignment(&y, &s) {
        Ok(a) => ser_pam4(&a.apply(&y), &s),
        Err(Error::DegenerateSignal(_)) => Ok(1.0),
        Err(e) => Err(e),
    }
}

/// Sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Rho,
    Snr,
    MixingDist,
    /// Values are `field=value`, with `field` a `network` override name.
    Param,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rho" => Ok(SweepAxis::Rho),
            "snr" => Ok(SweepAxis::Snr),
            "mixing_dist" => Ok(SweepAxis::MixingDist),
            "param" => Ok(SweepAxis::Param),
            _ => Err(Error::invalid(format!("unknown sweep axis `{s}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::Snr => "snr",
            SweepAxis::MixingDist => "mixing_dist",
            SweepAxis::Param => "param",
        }
    }

    /// The config for one axis value.
    pub fn apply(&self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let value = value.trim();
        let number = |v: &str| -> Result<serde_json::Value> {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::invalid(format!("`{v}` is not a number")))?;
            Ok(serde_json::json!(x))
        };
        match self {
            SweepAxis::Rho => {
                let d = base.domain_spec()?;
                let df = match base.source_config(&d) {
                    SourceConfig::CopulaT { df, .. } => df,
                    _ => return Err(Error::invalid("the rho axis needs a copula_t source")),
                };
                let rho: f64 = value
                    .parse()
                    .map_err(|_| Error::invalid(format!("`{value}` is not a number")))?;
                base.with_field("source", serde_json::json!({"kind": "copula_t", "rho": rho, "df": df}))
            }
            SweepAxis::Snr => {
                if value.eq_ignore_ascii_case("inf") {
                    base.with_field("snr_db", serde_json::Value::Null)
                } else {
                    base.with_field("snr_db", number(value)?)
                }
            }
            SweepAxis::MixingDist => {
                let d = MixingDist::parse(value)?;
                base.with_field("mixing", serde_json::json!(d))
            }
            SweepAxis::Param => {
                let (k, v) = value
                    .split_once('=')
                    .ok_or_else(|| Error::invalid(format!("param value `{value}` must look like name=value")))?;
                let json: serde_json::Value = serde_json::from_str(v.trim())
                    .unwrap_or_else(|_| serde_json::Value::String(v.trim().to_owned()));
                base.with_field(&format!("network.{}", k.trim()), json)
            }
        }
    }
}

/// Seed of sweep cell `(axis_index, realization)`: a SplitMix64 mix of the
/// base seed and both indices, so cells are independent of execution order.
pub fn cell_seed(base: u64, axis_index: usize, realization: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ axis_index as u64) ^ (realization as u64).rotate_left(32))
}
