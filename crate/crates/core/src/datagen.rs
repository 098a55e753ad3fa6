//! Synthetic sources, mixing matrices and channel noise.
//!
//! Every generator takes an explicit RNG. Experiments derive one independent
//! ChaCha stream per role (sources, mixing, noise) from a single seed with
//! [`stream_rng`].

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::domains::{membership, DomainKind, DomainSpec};
use crate::error::{Error, Result};

pub const SOURCE_STREAM: u64 = 0;
pub const MIXING_STREAM: u64 = 1;
pub const NOISE_STREAM: u64 = 2;

/// Independent substream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Marginal range of copula sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    /// `2u - 1` in `[-1, 1]`.
    Signed,
    /// `u` in `[0, 1]`.
    Nonneg,
}

/// `n x N` sources whose dependence is a t-copula with Toeplitz scale matrix
/// `[1, rho, rho, ...]` and whose marginals are uniform on the chosen box.
pub fn gen_copula_t<R: Rng>(
    n: usize,
    samples: usize,
    rho: f64,
    df: f64,
    marginal: Marginal,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::invalid("source count must be positive"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!("rho must lie in [0, 1), got {rho}")));
    }
    if !(df > 0.0 && df.is_finite()) {
        return Err(Error::invalid("degrees of freedom must be positive"));
    }
    let sigma = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::invalid("Toeplitz scale matrix is not positive definite"))?;
    let l = chol.l();
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    let chi = ChiSquared::new(df).map_err(|e| Error::invalid(e.to_string()))?;

    let mut out = DMatrix::zeros(n, samples);
    let mut z = DVector::zeros(n);
    for c in 0..samples {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let g: f64 = chi.sample(rng);
        let scale = (g / df).sqrt().recip();
        let corr = &l * &z;
        for i in 0..n {
            let u = t_dist.cdf(corr[i] * scale);
            out[(i, c)] = match marginal {
                Marginal::Signed => 2.0 * u - 1.0,
                Marginal::Nonneg => u,
            };
        }
    }
    Ok(out)
}

fn dirichlet_ones<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Proposals after which an acceptance rate below `MIN_ACCEPTANCE` is fatal.
const PROBE_PROPOSALS: u64 = 2_000_000;
const MIN_ACCEPTANCE: f64 = 1e-6;

/// `n x N` samples drawn uniformly from the domain.
pub fn gen_uniform_polytope<R: Rng>(domain: &DomainSpec, samples: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    let n = domain.dim();
    let mut out = DMatrix::zeros(n, samples);
    let radial = |rng: &mut R| rng.random::<f64>().powf(1.0 / n as f64);
    match domain.kind() {
        DomainKind::Antisparse => out.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0)),
        DomainKind::NonnegAntisparse => out.iter_mut().for_each(|v| *v = rng.random_range(0.0..=1.0)),
        DomainKind::UnitSimplex => {
            for c in 0..samples {
                let w = dirichlet_ones(n, rng);
                out.column_mut(c).copy_from_slice(&w);
            }
        }
        DomainKind::NonnegSparse => {
            for c in 0..samples {
                let w = dirichlet_ones(n, rng);
                let r = radial(rng);
                for i in 0..n {
                    out[(i, c)] = w[i] * r;
                }
            }
        }
        DomainKind::Sparse => {
            for c in 0..samples {
                let w = dirichlet_ones(n, rng);
                let r = radial(rng);
                for i in 0..n {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    out[(i, c)] = s * w[i] * r;
                }
            }
        }
        DomainKind::HPolytope(_) | DomainKind::FeaturePolytope(_) => {
            let (lo, hi) = domain.bounding_box()?;
            let mut proposals = 0u64;
            let mut accepted = 0usize;
            let mut y = DVector::zeros(n);
            while accepted < samples {
                for i in 0..n {
                    y[i] = if hi[i] > lo[i] { rng.random_range(lo[i]..hi[i]) } else { lo[i] };
                }
                proposals += 1;
                if membership(domain, &y, 0.0)? {
                    out.column_mut(accepted).copy_from(&y);
                    accepted += 1;
                }
                if proposals >= PROBE_PROPOSALS && (accepted as f64) < MIN_ACCEPTANCE * proposals as f64 {
                    return Err(Error::InfeasibleSampler {
                        rate: accepted as f64 / proposals as f64,
                    });
                }
            }
        }
    }
    Ok(out)
}

pub const PAM4_LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

/// `n x N` i.i.d. symbols drawn uniformly from `{-3, -1, 1, 3}`.
pub fn gen_pam4<R: Rng>(n: usize, samples: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, samples, |_, _| PAM4_LEVELS[rng.random_range(0..4)])
}

/// Symbols divided by 3, so they fill the antisparse box.
pub fn pam4_scaled(s: &DMatrix<f64>) -> DMatrix<f64> {
    s / 3.0
}

/// Distribution of mixing-matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingDist {
    StdNormal,
    /// `U[-1, 1]`
    Uniform1,
    /// `U[-2, 2]`
    Uniform2,
    /// Laplace with location 0 and scale 1.
    Laplace,
}

impl MixingDist {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.trim().to_owned()))
            .map_err(|_| Error::invalid(format!("unknown mixing distribution `{s}`")))
    }

    pub fn name(&self) -> &'static str {
        match self {
            MixingDist::StdNormal => "std_normal",
            MixingDist::Uniform1 => "uniform1",
            MixingDist::Uniform2 => "uniform2",
            MixingDist::Laplace => "laplace",
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            MixingDist::StdNormal => rng.sample(StandardNormal),
            MixingDist::Uniform1 => rng.random_range(-1.0..1.0),
            MixingDist::Uniform2 => rng.random_range(-2.0..2.0),
            MixingDist::Laplace => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }
}

const MIXING_TRIES: usize = 100;
const MIN_SINGULAR: f64 = 1e-6;

/// `m x n` mixing matrix with i.i.d. entries and full column rank.
pub fn gen_mixing<R: Rng>(m: usize, n: usize, dist: MixingDist, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 || m < n {
        return Err(Error::invalid(format!("need m >= n >= 1, got m={m}, n={n}")));
    }
    for _ in 0..MIXING_TRIES {
        let a = DMatrix::from_fn(m, n, |_, _| dist.sample(rng));
        if a.singular_values().min() > MIN_SINGULAR {
            return Ok(a);
        }
    }
    Err(Error::DegenerateMixing { tries: MIXING_TRIES })
}

/// Adds white Gaussian noise with variance `mean(X^2) * 10^(-snr_db / 10)`.
/// `snr_db = +inf` disables noise.
pub fn add_awgn<R: Rng>(x: &DMatrix<f64>, snr_db: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if x.is_empty() {
        return Ok(x.clone());
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::invalid("SNR must be a number or +inf"));
    }
    let power = x.norm_squared() / x.len() as f64;
    if power == 0.0 {
        return Err(Error::invalid("cannot set an SNR for an all-zero signal"));
    }
    if snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    let sigma = (power * 10f64.powf(-snr_db / 10.0)).sqrt();
    Ok(x.map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal)))
}

/// Writes one row per channel, comma separated, columns as samples.
pub fn dump_csv(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in 0..x.nrows() {
        let row: Vec<String> = x.row(r).iter().map(|v| format!("{v:e}")).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

pub const DUMP_MAGIC: &[u8; 4] = b"CIMX";
pub const DUMP_VERSION: u32 = 1;

/// Binary dump: `"CIMX"`, `u32` rows, `u32` cols, `u32` version (16 bytes),
/// then the entries as little-endian `f64` in column-major order.
pub fn dump_binary(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    let rows = u32::try_from(x.nrows()).map_err(|_| Error::invalid("too many rows"))?;
    let cols = u32::try_from(x.ncols()).map_err(|_| Error::invalid("too many columns"))?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(DUMP_MAGIC)?;
    f.write_all(&rows.to_le_bytes())?;
    f.write_all(&cols.to_le_bytes())?;
    f.write_all(&DUMP_VERSION.to_le_bytes())?;
    for v in x.iter() {
        f.write_all(&v.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn load_binary(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != DUMP_MAGIC {
        return Err(Error::invalid("not a CIMX dump"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    let body = &bytes[16..];
    if body.len() != rows * cols * 8 {
        return Err(Error::invalid("CIMX dump length does not match its header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect::<Vec<_>>();
    Ok(DMatrix::from_vec(rows, cols, data))
}
