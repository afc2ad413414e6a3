//! The `fibquant` command line: `build`, `encode`, `decode`, `bench` and
//! `inspect`.
//!
//! Exit codes: 0 success, 2 usage, 3 format or hash, 4 numeric or domain.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::codebook::{build_codebook, read_codebook, write_codebook, BuildOptions, Codebook, Layout, LloydConfig};
use crate::codec::{CacheHeader, CacheReader, FastEncoder, FastEncoderConfig, VectorCodec, CACHE_HEADER_BYTES};
use crate::error::{Error, FormatError, Result};
use crate::eval::{
    attention_sweep, compression_ratio, export_csv, fidelity_sweep, rd_sweep, CodecSpec, FidelityConfig, LloydPolicy,
    RDPoint, RunManifest, SweepConfig,
};
use crate::points::PointSet;
use crate::quantizer::BlockQuantizer;
use crate::source::haar_rotation;
use crate::tensor::{read_tensor, write_tensor, TENSOR_HEADER_BYTES};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fibquant", version, about = "Fixed-rate random-access vector quantization for KV caches")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and refine a codebook, then write it as an FQCB file.
    Build(BuildArgs),
    /// Encode an FQTN tensor into an FQKV cache.
    Encode(EncodeArgs),
    /// Decode a token range of an FQKV cache into an FQTN tensor.
    Decode(DecodeArgs),
    /// Run a benchmark and optionally write CSV.
    Bench(BenchArgs),
    /// Print the header of an FQCB, FQKV or FQTN file.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    BetaQuantile,
    Shell,
    Multishell,
    MultishellAuto,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Ambient dimension d.
    #[arg(long)]
    pub d: usize,
    /// Block size k (must divide d for the codebook to encode vectors).
    #[arg(long)]
    pub k: usize,
    /// Codebook size N.
    #[arg(long)]
    pub n: usize,
    /// Initial layout.
    #[arg(long, value_enum, default_value = "beta-quantile")]
    pub scheme: Scheme,
    /// Shell count S for `--scheme multishell`.
    #[arg(long)]
    pub shells: Option<usize>,
    /// Training samples M (default 30N).
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Lloyd restarts R.
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    /// Lloyd iterations per restart.
    #[arg(long, default_value_t = 25)]
    pub iterations: usize,
    /// Seed of the training set and restart rotations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output codebook file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// FQTN input tensor (T × d).
    #[arg(long)]
    pub input: PathBuf,
    /// FQCB codebook.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Seed of the Haar rotation, stored in the cache header.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output FQKV cache.
    #[arg(long)]
    pub out: PathBuf,
    /// Fast encoder shells L (requires --fast-parents and --fast-list).
    #[arg(long, requires_all = ["fast_parents", "fast_list"])]
    pub fast_shells: Option<usize>,
    /// Fast encoder parents K per shell.
    #[arg(long, requires = "fast_shells")]
    pub fast_parents: Option<usize>,
    /// Fast encoder parents T kept per block.
    #[arg(long, requires = "fast_shells")]
    pub fast_list: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// FQKV cache.
    #[arg(long)]
    pub cache: PathBuf,
    /// FQCB codebook the cache was encoded with.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Tokens to decode: `I`, `A..B` (half-open) or omitted for all.
    #[arg(long)]
    pub tokens: Option<String>,
    /// Output FQTN tensor.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Benchmark {
    /// Held-out per-coordinate MSE on the canonical source.
    Rd,
    /// Per-vector cosine and NMSE on Gaussian rows.
    Fidelity,
    /// Attention-output cosine on a Gaussian cache.
    Attn,
    /// Bits per vector and compression ratios.
    Accounting,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub benchmark: Benchmark,
    /// TOML config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ambient dimension d (default 64).
    #[arg(long)]
    pub d: Option<usize>,
    /// Codec, `fibquant:K:N` or `scalar:B`; repeatable.
    #[arg(long = "codec")]
    pub codecs: Vec<String>,
    /// Held-out blocks per point (rd; default 10000).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Cached rows per seed (fidelity default 10000, attn default 512).
    #[arg(long)]
    pub tokens: Option<usize>,
    /// Attention queries per seed (attn; default 32).
    #[arg(long)]
    pub queries: Option<usize>,
    /// Comma-separated seeds (default 0).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Training samples per codeword (default 30).
    #[arg(long)]
    pub train_ratio: Option<usize>,
    /// Lloyd restarts (default 4).
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Lloyd iterations (default 25).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Cap on Lloyd distance evaluations per codebook.
    #[arg(long)]
    pub max_work: Option<f64>,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML run-manifest output path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

/// Optional fields of a bench config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    pub d: Option<usize>,
    #[serde(default)]
    pub codecs: Vec<CodecSpec>,
    pub samples: Option<usize>,
    pub tokens: Option<usize>,
    pub queries: Option<usize>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    pub lloyd: Option<LloydPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountingRow {
    pub codec: String,
    pub d: usize,
    pub k: usize,
    pub n: u64,
    pub rate_bits_per_coord: f64,
    pub exact_bits: f64,
    pub record_bits: u64,
    pub exact_ratio: f64,
    pub byte_aligned_ratio: f64,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Format(_) | Error::CodebookMismatch { .. } | Error::CorruptRecord(_) | Error::Io { .. } => EXIT_FORMAT,
        Error::Domain(_) | Error::UndefinedResult(_) => EXIT_NUMERIC,
        Error::InvalidDimension(_)
        | Error::InvalidSpec(_)
        | Error::InvalidConfig(_)
        | Error::InsufficientTrainingData { .. }
        | Error::InvalidInput(_)
        | Error::OutOfRange { .. }
        | Error::Layout(_) => EXIT_USAGE,
    }
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Build(a) => build(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Bench(a) => bench(a),
        Command::Inspect(a) => inspect(&a.path),
    }
}

fn build(a: &BuildArgs) -> Result<()> {
    if a.k == 0 || a.k > a.d {
        return Err(Error::InvalidConfig(format!("block size k={} must lie in 1..={}", a.k, a.d)));
    }
    let layout = match (a.scheme, a.shells) {
        (Scheme::BetaQuantile, None) => Layout::BetaQuantile,
        (Scheme::Shell, None) => Layout::Shell,
        (Scheme::Multishell, Some(shells)) => Layout::MultiShell { shells },
        (Scheme::Multishell, None) => {
            return Err(Error::InvalidConfig("--scheme multishell needs --shells".into()));
        }
        (Scheme::MultishellAuto, None) => Layout::MultiShellSearch,
        (_, Some(_)) => return Err(Error::InvalidConfig("--shells only applies to --scheme multishell".into())),
    };
    let lloyd = LloydConfig {
        train_size: a.train_size.unwrap_or(30 * a.n),
        restarts: a.restarts,
        iterations: a.iterations,
        seed: a.seed,
    };
    let built = build_codebook(a.d, a.k, a.n, &BuildOptions::new(layout, lloyd))?;
    let cb = &built.codebook;
    write_codebook(&a.out, cb)?;
    let scheme = a.scheme.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    println!(
        "codebook d={} k={} N={} scheme={scheme} rate={:.4} bits/coord",
        cb.d(),
        cb.k(),
        cb.n(),
        cb.rate()
    );
    if !a.d.is_multiple_of(a.k) {
        println!("note: k={} does not divide d={}; the codebook cannot encode {}-dim vectors", a.k, a.d, a.d);
    }
    if let Some(fs) = &built.factor_search {
        let scores: Vec<String> = fs.candidates.iter().map(|(s, m, mse)| format!("{s}x{m}:{mse:.6e}")).collect();
        println!("factor search: S={} M_a={} ({})", fs.shells, fs.per_shell, scores.join(" "));
    }
    let d = built.report.train_distortion;
    println!("training MSE: {:.6e} per coordinate ({:.6e} per block)", d / a.k as f64, d);
    println!("content hash: {:#018x}", cb.content_hash());
    println!("wrote {}", a.out.display());
    Ok(())
}

fn encode(a: &EncodeArgs) -> Result<()> {
    let rows = read_tensor(&a.input)?;
    let cb = read_codebook(&a.codebook)?;
    if rows.dim() != cb.d() {
        return Err(Error::InvalidDimension(format!(
            "tensor has d={}, codebook expects d={}",
            rows.dim(),
            cb.d()
        )));
    }
    let rotation = haar_rotation(cb.d(), a.seed)?;
    match (a.fast_shells, a.fast_parents, a.fast_list) {
        (Some(shells), Some(parents), Some(list)) => {
            let fast = FastEncoder::new(
                cb,
                FastEncoderConfig {
                    shells,
                    parents,
                    list,
                    seed: a.seed,
                },
            )?;
            encode_with(VectorCodec::new(fast, rotation)?, &rows, &a.out)
        }
        _ => encode_with(VectorCodec::new(cb, rotation)?, &rows, &a.out),
    }
}

fn encode_with<Q: BlockQuantizer + Sync>(codec: VectorCodec<Q>, rows: &PointSet, out: &Path) -> Result<()> {
    let cache = codec.encode_cache(rows)?;
    let bytes = cache.to_bytes();
    std::fs::write(out, &bytes).map_err(|e| Error::io(out, e))?;
    println!(
        "encoded {} tokens: {} bytes per record, {} bytes total",
        cache.len(),
        cache.header().record_bytes,
        bytes.len()
    );
    if cache.saturated_tokens() > 0 {
        println!("warning: {} token norms saturated binary16", cache.saturated_tokens());
    }
    println!("codebook hash: {:#018x}", cache.header().codebook_hash);
    println!("wrote {}", out.display());
    Ok(())
}

/// Parses `I`, `A..B` or nothing (everything) against `len` tokens.
pub fn parse_token_range(spec: Option<&str>, len: u64) -> Result<Range<u64>> {
    let bad = |s: &str| Error::InvalidConfig(format!("token range {s:?} is not I or A..B"));
    let range = match spec {
        None => 0..len,
        Some(s) => match s.split_once("..") {
            Some((a, b)) => a.trim().parse().map_err(|_| bad(s))?..b.trim().parse().map_err(|_| bad(s))?,
            None => {
                let i: u64 = s.trim().parse().map_err(|_| bad(s))?;
                i..i.saturating_add(1)
            }
        },
    };
    if range.start > range.end || range.end > len {
        return Err(Error::OutOfRange {
            index: range.end.max(range.start).saturating_sub(1),
            len,
        });
    }
    Ok(range)
}

fn decode(a: &DecodeArgs) -> Result<()> {
    let cb = read_codebook(&a.codebook)?;
    let mut reader = CacheReader::open(&a.cache)?;
    let header = *reader.header();
    let codec = VectorCodec::new(cb, haar_rotation(header.d as usize, header.rotation_seed)?)?;
    codec.check_header(&header)?;
    let range = parse_token_range(a.tokens.as_deref(), header.tokens)?;
    let mut data = Vec::with_capacity((range.end - range.start) as usize * codec.d());
    for t in range.clone() {
        data.extend(reader.decode_token(&codec, t)?);
    }
    write_tensor(&a.out, &PointSet::new(codec.d(), data)?)?;
    println!(
        "decoded tokens {}..{} of {}; read {} bytes",
        range.start,
        range.end,
        header.tokens,
        reader.bytes_read()
    );
    println!("wrote {}", a.out.display());
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<()> {
    let file: BenchFile = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => BenchFile::default(),
    };
    let d = a.d.or(file.d).unwrap_or(64);
    let codecs = if a.codecs.is_empty() {
        file.codecs.clone()
    } else {
        a.codecs.iter().map(|s| s.parse()).collect::<Result<Vec<CodecSpec>>>()?
    };
    if codecs.is_empty() {
        return Err(Error::InvalidConfig("no codecs given (use --codec or a config file)".into()));
    }
    let seeds = if a.seeds.is_empty() {
        if file.seeds.is_empty() {
            vec![0]
        } else {
            file.seeds.clone()
        }
    } else {
        a.seeds.clone()
    };
    let mut lloyd = file.lloyd.unwrap_or_default();
    lloyd.train_ratio = a.train_ratio.unwrap_or(lloyd.train_ratio);
    lloyd.restarts = a.restarts.unwrap_or(lloyd.restarts);
    lloyd.iterations = a.iterations.unwrap_or(lloyd.iterations);
    lloyd.max_work = a.max_work.or(lloyd.max_work);

    let points = match a.benchmark {
        Benchmark::Accounting => return accounting(d, &codecs, a.out.as_deref()),
        Benchmark::Rd => rd_sweep(&SweepConfig {
            d,
            codecs,
            samples: a.samples.or(file.samples).unwrap_or(10_000),
            seeds: seeds.clone(),
            lloyd,
        })?,
        Benchmark::Fidelity | Benchmark::Attn => {
            let attn = a.benchmark == Benchmark::Attn;
            let cfg = FidelityConfig {
                d,
                codecs,
                tokens: a.tokens.or(file.tokens).unwrap_or(if attn { 512 } else { 10_000 }),
                queries: a.queries.or(file.queries).unwrap_or(32),
                seeds: seeds.clone(),
                lloyd,
            };
            if attn {
                attention_sweep(&cfg)?
            } else {
                fidelity_sweep(&cfg)?
            }
        }
    };
    for p in &points {
        print_point(p);
    }
    if let Some(out) = &a.out {
        export_csv(&points, out)?;
        println!("wrote {}", out.display());
    }
    if let Some(path) = &a.manifest {
        let mut m = RunManifest::new(format!("bench {:?}", a.benchmark).to_lowercase())
            .parameter("d", d)
            .parameter("train_ratio", lloyd.train_ratio)
            .parameter("restarts", lloyd.restarts)
            .parameter("iterations", lloyd.iterations);
        if let Some(w) = lloyd.max_work {
            m = m.parameter("max_work", w);
        }
        m.seeds = seeds;
        for p in &points {
            m.codebooks.insert(format!("{}:{}:{}:seed{}", p.codec, p.k, p.n, p.seed), p.codebook_hash.clone());
        }
        m.write(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn print_point(p: &RDPoint) {
    let mut line = format!(
        "{:<12} k={:<2} N={:<6} rate={:.4} seed={} mse={:.6e} ± {:.1e}",
        p.codec, p.k, p.n, p.rate_bits_per_coord, p.seed, p.per_coord_mse, p.mse_stderr
    );
    if let Some(c) = p.mean_cosine {
        line += &format!(" cosine={c:.4}");
    }
    if let (Some(a), Some(b)) = (p.nmse_db, p.nmse_db_per_vector) {
        line += &format!(" nmse={a:.2} dB (per-vector mean {b:.2} dB)");
    }
    println!("{line}");
}

fn accounting(d: usize, codecs: &[CodecSpec], out: Option<&Path>) -> Result<()> {
    let mut rows = Vec::new();
    for c in codecs {
        let acc = compression_ratio(d, c.k(), c.n(), 16, 16)?;
        println!(
            "{c:<20} rate={:.4} bits={:.1} exact {:.2}x, byte-aligned record {} bits {:.2}x",
            c.rate(),
            acc.exact_bits,
            acc.exact_ratio,
            acc.record_bits,
            acc.byte_aligned_ratio
        );
        rows.push(AccountingRow {
            codec: c.to_string(),
            d,
            k: c.k(),
            n: c.n() as u64,
            rate_bits_per_coord: c.rate(),
            exact_bits: acc.exact_bits,
            record_bits: acc.record_bits,
            exact_ratio: acc.exact_ratio,
            byte_aligned_ratio: acc.byte_aligned_ratio,
        });
    }
    if let Some(out) = out {
        let file = File::create(out).map_err(|e| Error::io(out, e))?;
        let mut w = csv::Writer::from_writer(file);
        for r in &rows {
            w.serialize(r).map_err(|e| Error::io(out, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| Error::io(out, e))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic: [u8; 4] = bytes
        .get(..4)
        .and_then(|m| m.try_into().ok())
        .ok_or(FormatError::Truncated {
            needed: 4,
            available: bytes.len(),
        })?;
    let mut out = std::io::stdout().lock();
    let w = |e: std::io::Error| Error::io("<stdout>", e);
    match &magic {
        b"FQCB" => {
            let cb: Codebook = crate::codebook::deserialize_codebook(&bytes)?;
            writeln!(out, "FQCB codebook").map_err(w)?;
            writeln!(out, "d={} k={} N={}", cb.d(), cb.k(), cb.n()).map_err(w)?;
            writeln!(out, "scheme={:?} shells={}", cb.construction().scheme, cb.construction().shells).map_err(w)?;
            writeln!(out, "rate={:.4} bits/coord", cb.rate()).map_err(w)?;
            writeln!(out, "content hash: {:#018x}", cb.content_hash()).map_err(w)?;
        }
        b"FQKV" => {
            let header = CacheHeader::parse(&bytes)?;
            let expected = CACHE_HEADER_BYTES as u64 + header.tokens * header.record_bytes as u64;
            if bytes.len() as u64 != expected {
                return Err(FormatError::Malformed(format!(
                    "cache of {} tokens should be {expected} bytes, file has {}",
                    header.tokens,
                    bytes.len()
                ))
                .into());
            }
            let rate = (header.n as f64).log2() / header.k as f64;
            writeln!(out, "FQKV cache").map_err(w)?;
            writeln!(out, "d={} k={} N={} tokens={}", header.d, header.k, header.n, header.tokens).map_err(w)?;
            writeln!(
                out,
                "record={} bytes, rate={rate:.4} bits/coord, rotation seed={}",
                header.record_bytes, header.rotation_seed
            )
            .map_err(w)?;
            writeln!(out, "codebook hash: {:#018x}", header.codebook_hash).map_err(w)?;
        }
        b"FQTN" => {
            let t = crate::tensor::tensor_from_bytes(&bytes)?;
            writeln!(out, "FQTN tensor").map_err(w)?;
            writeln!(out, "T={} d={} ({} header bytes)", t.len(), t.dim(), TENSOR_HEADER_BYTES).map_err(w)?;
        }
        _ => {
            return Err(FormatError::Malformed(format!("unknown magic {magic:?}")).into());
        }
    }
    Ok(())
}
