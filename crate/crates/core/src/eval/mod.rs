//! Rate–distortion sweeps, fidelity metrics, compression accounting and the
//! analytic predictors they are compared against.

mod analytic;
mod fidelity;
mod manifest;
mod studies;

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{scalar_codec, scalar_lloyd_table, ScalarTable, SCALAR_TRAIN_SIZE};
use crate::codebook::{build_codebook, init_codebook, BuildOptions, Codebook, Layout, LloydConfig};
use crate::codec::VectorCodec;
use crate::error::{Error, Result};
use crate::points::dist_sq;
use crate::quantizer::BlockQuantizer;
use crate::source::{haar_rotation, sample_blocks};

pub use analytic::{
    compression_ratio, high_rate_gain, int_compression_ratio, nearest_operating_point, shell_distortion_prediction,
    to_db, Accounting, CapMode, HighRateGain, LatticeTable,
};
pub use fidelity::{
    attention_cosine, exponential_rows, gaussian_rows, per_vector_fidelity, AttentionFidelity, VectorFidelity,
};
pub use manifest::RunManifest;
pub use studies::{
    block_radius_samples, fast_complexity, fast_penalty, ks_distance, scaled_distortion, shell_gap, FastPenalty,
    InputLaw, ShellGap,
};

const EVAL_SALT: u64 = 0x6576_616c_5f68_6f6c;

/// Seed of the held-out set paired with seed `seed`; disjoint from the
/// training stream of the same seed.
pub fn evaluation_seed(seed: u64) -> u64 {
    seed ^ EVAL_SALT
}

/// Codec under evaluation. Parses from `fibquant:K:N` or `scalar:B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CodecSpec {
    FibQuant { k: usize, n: usize },
    /// Per-coordinate Lloyd–Max with `2^bits` levels.
    Scalar { bits: u32 },
}

impl FromStr for CodecSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("bad number {v:?} in codec {s:?}")))
        };
        match parts.as_slice() {
            ["fibquant", k, n] => Ok(CodecSpec::FibQuant { k: num(k)?, n: num(n)? }),
            ["scalar", b] => Ok(CodecSpec::Scalar { bits: num(b)? as u32 }),
            _ => Err(Error::InvalidConfig(format!(
                "codec {s:?} is neither fibquant:K:N nor scalar:B"
            ))),
        }
    }
}

impl fmt::Display for CodecSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecSpec::FibQuant { k, n } => write!(f, "fibquant:{k}:{n}"),
            CodecSpec::Scalar { bits } => write!(f, "scalar:{bits}"),
        }
    }
}

impl CodecSpec {
    pub fn id(&self) -> &'static str {
        match self {
            CodecSpec::FibQuant { .. } => "fibquant",
            CodecSpec::Scalar { .. } => "scalar-lloyd",
        }
    }

    pub fn k(&self) -> usize {
        match *self {
            CodecSpec::FibQuant { k, .. } => k,
            CodecSpec::Scalar { .. } => 1,
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            CodecSpec::FibQuant { n, .. } => n,
            CodecSpec::Scalar { bits } => 1 << bits,
        }
    }

    pub fn rate(&self) -> f64 {
        (self.n() as f64).log2() / self.k() as f64
    }
}

/// How codebooks are trained inside a sweep: `M = train_ratio·N`, `R`
/// restarts, `T_LM` iterations, optionally capped at `max_work` distance
/// evaluations (see [`LloydConfig::within_budget`]). A config that still
/// exceeds the cap is left unrefined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LloydPolicy {
    pub train_ratio: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub max_work: Option<f64>,
}

impl Default for LloydPolicy {
    fn default() -> Self {
        Self {
            train_ratio: 30,
            restarts: 4,
            iterations: 25,
            max_work: None,
        }
    }
}

impl LloydPolicy {
    pub fn capped(max_work: f64) -> Self {
        Self {
            max_work: Some(max_work),
            ..Self::default()
        }
    }

    /// Lloyd settings for `(k, N)`, or `None` when the budget rules out any
    /// refinement.
    pub fn config(&self, n: usize, k: usize, seed: u64) -> Option<LloydConfig> {
        let cfg = LloydConfig {
            train_size: self.train_ratio.max(1) * n,
            restarts: self.restarts.max(1),
            iterations: self.iterations,
            seed,
        };
        match self.max_work {
            None => Some(cfg),
            Some(w) => {
                let cfg = cfg.within_budget(n, k, w);
                (cfg.work(n, k) <= w).then_some(cfg)
            }
        }
    }
}

/// A trained codebook and the Lloyd settings used, if any.
#[derive(Clone, Debug)]
pub struct FittedCodebook {
    pub codebook: Codebook,
    pub lloyd: Option<LloydConfig>,
}

/// Beta-quantile codebook for `(d, k, N)`, refined under `policy`.
pub fn fit_codebook(d: usize, k: usize, n: usize, policy: &LloydPolicy, seed: u64) -> Result<FittedCodebook> {
    match policy.config(n, k, seed) {
        Some(cfg) => {
            let built = build_codebook(d, k, n, &BuildOptions::new(Layout::BetaQuantile, cfg))?;
            Ok(FittedCodebook {
                codebook: built.codebook,
                lloyd: Some(cfg),
            })
        }
        None => Ok(FittedCodebook {
            codebook: init_codebook(d, k, n)?,
            lloyd: None,
        }),
    }
}

/// Mean per-coordinate squared error with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub blocks: usize,
}

/// Per-coordinate MSE of `q` on `blocks` fresh samples of `f_{d,k}` drawn
/// from `seed`.
pub fn held_out_mse<Q: BlockQuantizer + Sync>(q: &Q, d: usize, blocks: usize, seed: u64) -> Result<MseEstimate> {
    let k = q.block_dim();
    let samples = sample_blocks(d, k, blocks, seed)?;
    let errs: Vec<f64> = samples
        .as_slice()
        .par_chunks(k * 256)
        .flat_map_iter(|chunk| {
            chunk.chunks_exact(k).map(|y| dist_sq(y, q.codeword(q.nearest(y))) / k as f64).collect::<Vec<_>>()
        })
        .collect();
    Ok(mean_stderr(&errs))
}

pub(crate) fn mean_stderr(values: &[f64]) -> MseEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    MseEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        blocks: n,
    }
}

/// One row of a sweep. Vector codecs report `bits` as absent; scalar
/// codecs report `n = 2^bits` and `k = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RDPoint {
    pub codec: String,
    pub d: usize,
    pub k: usize,
    pub n: u64,
    pub bits: Option<u32>,
    pub rate_bits_per_coord: f64,
    pub per_coord_mse: f64,
    pub mse_stderr: f64,
    pub mean_cosine: Option<f64>,
    pub nmse_db: Option<f64>,
    pub nmse_db_per_vector: Option<f64>,
    pub compression_ratio: Option<f64>,
    pub seed: u64,
    pub samples: u64,
    pub train_size: u64,
    pub restarts: u32,
    pub iterations: u32,
    pub codebook_hash: String,
}

impl RDPoint {
    pub const HEADER: [&'static str; 18] = [
        "codec",
        "d",
        "k",
        "n",
        "bits",
        "rate_bits_per_coord",
        "per_coord_mse",
        "mse_stderr",
        "mean_cosine",
        "nmse_db",
        "nmse_db_per_vector",
        "compression_ratio",
        "seed",
        "samples",
        "train_size",
        "restarts",
        "iterations",
        "codebook_hash",
    ];

    fn sort_key(&self) -> (String, usize, u64, u64) {
        (self.codec.clone(), self.k, self.n, self.seed)
    }
}

/// Inputs of [`rd_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub codecs: Vec<CodecSpec>,
    /// Held-out blocks per (codec, seed).
    pub samples: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub lloyd: LloydPolicy,
}

pub const MIN_SWEEP_SAMPLES: usize = 10_000;

/// Trains each codec once per seed and measures held-out per-coordinate MSE.
/// Rows are ordered by `(codec, k, N, seed)`.
pub fn rd_sweep(cfg: &SweepConfig) -> Result<Vec<RDPoint>> {
    if cfg.samples < MIN_SWEEP_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "sweeps need at least {MIN_SWEEP_SAMPLES} held-out samples, got {}",
            cfg.samples
        )));
    }
    let jobs: Vec<(CodecSpec, u64)> =
        cfg.codecs.iter().flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let mut points = jobs
        .into_iter()
        .map(|(codec, seed)| rd_point(cfg.d, codec, cfg.samples, seed, &cfg.lloyd))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by_key(RDPoint::sort_key);
    Ok(points)
}

fn blank_point(d: usize, codec: CodecSpec, samples: usize, seed: u64) -> RDPoint {
    RDPoint {
        codec: codec.id().to_string(),
        d,
        k: codec.k(),
        n: codec.n() as u64,
        bits: match codec {
            CodecSpec::Scalar { bits } => Some(bits),
            CodecSpec::FibQuant { .. } => None,
        },
        rate_bits_per_coord: codec.rate(),
        per_coord_mse: 0.0,
        mse_stderr: 0.0,
        mean_cosine: None,
        nmse_db: None,
        nmse_db_per_vector: None,
        compression_ratio: compression_ratio(d, codec.k(), codec.n(), 16, 16).ok().map(|a| a.exact_ratio),
        seed,
        samples: samples as u64,
        train_size: 0,
        restarts: 0,
        iterations: 0,
        codebook_hash: String::new(),
    }
}

enum Fitted {
    Vector(VectorCodec<Codebook>),
    Scalar(VectorCodec<ScalarTable>),
}

impl Fitted {
    fn round_trip(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Fitted::Vector(c) => c.round_trip(x),
            Fitted::Scalar(c) => c.round_trip(x),
        }
    }
}

fn fit_codec(point: &mut RDPoint, codec: CodecSpec, policy: &LloydPolicy) -> Result<Fitted> {
    let rotation = haar_rotation(point.d, point.seed)?;
    match codec {
        CodecSpec::FibQuant { k, n } => {
            let fit = fit_codebook(point.d, k, n, policy, point.seed)?;
            record_training(point, &fit);
            Ok(Fitted::Vector(VectorCodec::new(fit.codebook, rotation)?))
        }
        CodecSpec::Scalar { bits } => {
            let table = scalar_lloyd_table(point.d, bits, point.seed)?;
            record_scalar(point, &table);
            Ok(Fitted::Scalar(scalar_codec(table, rotation)?))
        }
    }
}

fn record_training(point: &mut RDPoint, fit: &FittedCodebook) {
    if let Some(cfg) = fit.lloyd {
        point.train_size = cfg.train_size as u64;
        point.restarts = cfg.restarts as u32;
        point.iterations = cfg.iterations as u32;
    }
    point.codebook_hash = format!("{:016x}", fit.codebook.content_hash());
}

fn record_scalar(point: &mut RDPoint, table: &ScalarTable) {
    point.train_size = SCALAR_TRAIN_SIZE as u64;
    point.iterations = table.iterations() as u32;
    point.codebook_hash = format!("{:016x}", table.content_hash());
}

fn rd_point(d: usize, codec: CodecSpec, samples: usize, seed: u64, policy: &LloydPolicy) -> Result<RDPoint> {
    let mut point = blank_point(d, codec, samples, seed);
    let mse = match codec {
        CodecSpec::FibQuant { k, n } => {
            let fit = fit_codebook(d, k, n, policy, seed)?;
            record_training(&mut point, &fit);
            held_out_mse(&fit.codebook, d, samples, evaluation_seed(seed))?
        }
        CodecSpec::Scalar { bits } => {
            let table = scalar_lloyd_table(d, bits, seed)?;
            record_scalar(&mut point, &table);
            held_out_mse(&table, d, samples, evaluation_seed(seed))?
        }
    };
    point.per_coord_mse = mse.mean;
    point.mse_stderr = mse.stderr;
    Ok(point)
}

/// Inputs of [`fidelity_sweep`] and [`attention_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityConfig {
    pub d: usize,
    pub codecs: Vec<CodecSpec>,
    /// Cached rows per seed.
    pub tokens: usize,
    /// Attention queries per seed; unused by [`fidelity_sweep`].
    #[serde(default = "default_queries")]
    pub queries: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub lloyd: LloydPolicy,
}

fn default_queries() -> usize {
    32
}

/// Full-pipeline (normalize, rotate, quantize, binary16 norm) round trip of
/// Gaussian rows: cosine, NMSE and per-coordinate MSE per (codec, seed).
/// The rotation seed is the run seed.
pub fn fidelity_sweep(cfg: &FidelityConfig) -> Result<Vec<RDPoint>> {
    let mut points = Vec::new();
    for &codec in &cfg.codecs {
        for &seed in &cfg.seeds {
            let mut point = blank_point(cfg.d, codec, cfg.tokens, seed);
            let fitted = fit_codec(&mut point, codec, &cfg.lloyd)?;
            let data = gaussian_rows(cfg.tokens, cfg.d, evaluation_seed(seed))?;
            let f = per_vector_fidelity(&data, |x| fitted.round_trip(x))?;
            point.per_coord_mse = f.per_coord_mse;
            point.mse_stderr = f.mse_stderr;
            point.mean_cosine = Some(f.mean_cosine);
            point.nmse_db = Some(f.nmse_db);
            point.nmse_db_per_vector = Some(f.nmse_db_per_vector);
            points.push(point);
        }
    }
    points.sort_by_key(RDPoint::sort_key);
    Ok(points)
}

/// Attention-output cosine on a synthetic Gaussian cache of `tokens` keys
/// and values with `queries` Gaussian queries, per (codec, seed).
pub fn attention_sweep(cfg: &FidelityConfig) -> Result<Vec<RDPoint>> {
    let mut points = Vec::new();
    for &codec in &cfg.codecs {
        for &seed in &cfg.seeds {
            let mut point = blank_point(cfg.d, codec, cfg.tokens, seed);
            let fitted = fit_codec(&mut point, codec, &cfg.lloyd)?;
            let base = evaluation_seed(seed);
            let keys = gaussian_rows(cfg.tokens, cfg.d, base)?;
            let values = gaussian_rows(cfg.tokens, cfg.d, base.wrapping_add(1))?;
            let queries = gaussian_rows(cfg.queries, cfg.d, base.wrapping_add(2))?;
            let a = attention_cosine(&keys, &values, &queries, |x| fitted.round_trip(x))?;
            point.mean_cosine = Some(a.mean_cosine);
            points.push(point);
        }
    }
    points.sort_by_key(RDPoint::sort_key);
    Ok(points)
}

/// Writes `points` as CSV with a header row, sorted by `(codec, k, N, seed)`.
pub fn write_csv<W: Write>(points: &[RDPoint], out: W) -> Result<()> {
    let mut sorted: Vec<&RDPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.sort_key());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    w.write_record(RDPoint::HEADER).map_err(csv_err)?;
    for p in sorted {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

pub fn export_csv(points: &[RDPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(points, file).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::io(path, std::io::Error::other(msg)),
        e => e,
    })
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RDPoint>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::InvalidInput(format!("csv: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    if header != RDPoint::HEADER {
        return Err(Error::InvalidInput(format!("unexpected csv header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(|e| Error::InvalidInput(format!("csv: {e}")))).collect()
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<Vec<RDPoint>> {
    let path = path.as_ref();
    read_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}
