use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use super::{evaluation_seed, held_out_mse, mean_stderr};
use crate::codebook::{build_codebook_on, multishell_init, training_seed, BuildOptions, Codebook, Layout, LloydConfig};
use crate::codec::{complexity_setup, FastEncoder};
use crate::error::{Error, Result};
use crate::points::{dist_sq, dot, norm_sq};
use crate::rng::{self, CHUNK_ROWS};
use crate::source::sample_blocks;

/// Coordinate law of synthetic inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputLaw {
    Gaussian,
    Exponential,
}

impl InputLaw {
    fn draw<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            InputLaw::Gaussian => StandardNormal.sample(rng),
            InputLaw::Exponential => Exp1.sample(rng),
        }
    }
}

/// Radius of the first `k`-block of `Πx/‖x‖` for `n` inputs with i.i.d.
/// coordinates from `law`, each under a fresh Haar rotation `Π`. Only the
/// first `k` rows of each rotation are drawn.
pub fn block_radius_samples(d: usize, k: usize, n: usize, law: InputLaw, seed: u64) -> Result<Vec<f64>> {
    if k == 0 || k > d {
        return Err(Error::InvalidDimension(format!("need 1 ≤ k ≤ d, got d={d} k={k}")));
    }
    let mut out = vec![0.0; n];
    out.par_chunks_mut(CHUNK_ROWS).enumerate().for_each(|(c, chunk)| {
        let mut rng = rng::stream(seed, c as u64);
        let mut x = vec![0.0; d];
        let mut frame = vec![0.0; k * d];
        for r in chunk.iter_mut() {
            let nx = loop {
                x.iter_mut().for_each(|v| *v = law.draw(&mut rng));
                let nx = norm_sq(&x).sqrt();
                if nx > 0.0 {
                    break nx;
                }
            };
            haar_frame(&mut frame, d, &mut rng);
            let sq: f64 = frame.chunks_exact(d).map(|row| (dot(row, &x) / nx).powi(2)).sum();
            *r = sq.sqrt();
        }
    });
    Ok(out)
}

/// Orthonormal rows from Gram–Schmidt on Gaussian rows: the leading rows of
/// a Haar rotation.
fn haar_frame<R: Rng>(frame: &mut [f64], d: usize, rng: &mut R) {
    let rows = frame.len() / d;
    for i in 0..rows {
        let (done, rest) = frame.split_at_mut(i * d);
        let row = &mut rest[..d];
        loop {
            row.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
            for _ in 0..2 {
                for prev in done.chunks_exact(d) {
                    let p = dot(row, prev);
                    row.iter_mut().zip(prev).for_each(|(v, q)| *v -= p * q);
                }
            }
            let len = norm_sq(row).sqrt();
            if len > 1e-8 {
                row.iter_mut().for_each(|v| *v /= len);
                break;
            }
        }
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("KS distance needs two nonempty NaN-free samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

/// Held-out per-coordinate MSE of Beta-quantile and single-shell codebooks
/// after the same Lloyd polish on the same training set, compared on the
/// same held-out blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellGap {
    pub d: usize,
    pub beta_mse: f64,
    pub shell_mse: f64,
    /// `(shell − beta)` per coordinate, relative to the per-coordinate
    /// source energy `1/d`.
    pub normalized_gap: f64,
    /// Standard error of `normalized_gap` from the paired per-block
    /// differences.
    pub stderr: f64,
}

pub fn shell_gap(d: usize, k: usize, n: usize, lloyd: &LloydConfig, blocks: usize, seed: u64) -> Result<ShellGap> {
    lloyd.validate(n)?;
    let train = sample_blocks(d, k, lloyd.train_size, training_seed(lloyd.seed))?;
    let beta = build_codebook_on(d, n, &BuildOptions::new(Layout::BetaQuantile, *lloyd), &train)?.codebook;
    let shell = build_codebook_on(d, n, &BuildOptions::new(Layout::Shell, *lloyd), &train)?.codebook;
    let samples = sample_blocks(d, k, blocks, evaluation_seed(seed))?;
    let pairs: Vec<(f64, f64)> = samples
        .as_slice()
        .par_chunks(k * 256)
        .flat_map_iter(|chunk| {
            chunk
                .chunks_exact(k)
                .map(|y| (beta.nearest_with_distance(y).1 / k as f64, shell.nearest_with_distance(y).1 / k as f64))
                .collect::<Vec<_>>()
        })
        .collect();
    let b = mean_stderr(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let s = mean_stderr(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    let diff = mean_stderr(&pairs.iter().map(|p| p.1 - p.0).collect::<Vec<_>>());
    let df = d as f64;
    Ok(ShellGap {
        d,
        beta_mse: b.mean,
        shell_mse: s.mean,
        normalized_gap: diff.mean * df,
        stderr: diff.stderr * df,
    })
}

/// `d` times the held-out block distortion of a Lloyd-refined Beta-quantile
/// codebook, with its standard error.
pub fn scaled_distortion(d: usize, k: usize, n: usize, lloyd: &LloydConfig, blocks: usize, seed: u64) -> Result<(f64, f64)> {
    lloyd.validate(n)?;
    let train = sample_blocks(d, k, lloyd.train_size, training_seed(lloyd.seed))?;
    let cb = build_codebook_on(d, n, &BuildOptions::new(Layout::BetaQuantile, *lloyd), &train)?.codebook;
    let m = held_out_mse(&cb, d, blocks, evaluation_seed(seed))?;
    let scale = (d * k) as f64;
    Ok((m.mean * scale, m.stderr * scale))
}

/// Exact versus fast-encoder distortion on the same held-out blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastPenalty {
    pub exact_mse: f64,
    pub fast_mse: f64,
    /// `10·log₁₀(fast/exact)`.
    pub penalty_db: f64,
    pub mean_evaluations: f64,
    /// Fraction of blocks where the fast index differs from the exact one.
    pub mismatch_rate: f64,
}

pub fn fast_penalty(fast: &FastEncoder, d: usize, blocks: usize, seed: u64) -> Result<FastPenalty> {
    let cb: &Codebook = fast.codebook();
    let samples = sample_blocks(d, cb.k(), blocks, seed)?;
    let rows: Vec<&[f64]> = samples.rows().collect();
    let per: Vec<(f64, f64, usize, bool)> = rows
        .par_iter()
        .map(|y| {
            let exact = cb.nearest_with_distance(y);
            let choice = fast.encode_block(y);
            let e = dist_sq(y, cb.codeword(choice.index));
            (exact.1, e, choice.evaluations, exact.0 != choice.index)
        })
        .collect();
    let m = per.len() as f64;
    let exact_mse = per.iter().map(|p| p.0).sum::<f64>() / m;
    let fast_mse = per.iter().map(|p| p.1).sum::<f64>() / m;
    Ok(FastPenalty {
        exact_mse: exact_mse / cb.k() as f64,
        fast_mse: fast_mse / cb.k() as f64,
        penalty_db: 10.0 * (fast_mse / exact_mse).log10(),
        mean_evaluations: per.iter().map(|p| p.2 as f64).sum::<f64>() / m,
        mismatch_rate: per.iter().filter(|p| p.3).count() as f64 / m,
    })
}

/// Mean evaluations per block of the fast encoder on a multi-shell
/// codebook laid out by [`complexity_setup`], for each `N` in `ns`.
pub fn fast_complexity(d: usize, k: usize, ns: &[usize], list: usize, blocks: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    let samples = sample_blocks(d, k, blocks, evaluation_seed(seed))?;
    ns.iter()
        .map(|&n| {
            let cfg = complexity_setup(n, list, seed);
            let cb = multishell_init(d, k, cfg.shells, n / cfg.shells)?;
            let fe = FastEncoder::new(cb, cfg)?;
            let total: usize = samples.rows().map(|y| fe.encode_block(y).evaluations).sum();
            Ok((n, total as f64 / blocks as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::FastEncoderConfig;

    #[test]
    fn ks_basics() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(ks_distance(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 0.5);
        assert!(ks_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn frames_are_orthonormal() {
        let mut rng = rng::seeded(3);
        let mut f = vec![0.0; 4 * 16];
        haar_frame(&mut f, 16, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let p = dot(&f[i * 16..(i + 1) * 16], &f[j * 16..(j + 1) * 16]);
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn radii_follow_the_canonical_law() {
        // E R² = k/d regardless of the input law.
        for law in [InputLaw::Gaussian, InputLaw::Exponential] {
            let r = block_radius_samples(32, 4, 20_000, law, 5).unwrap();
            let m = r.iter().map(|r| r * r).sum::<f64>() / r.len() as f64;
            assert!((m - 0.125).abs() < 0.003, "{law:?} {m}");
        }
    }

    #[test]
    fn exact_fast_encoder_has_no_penalty() {
        let cb = multishell_init(64, 4, 1, 16).unwrap();
        let fe = FastEncoder::new(
            cb,
            FastEncoderConfig {
                shells: 1,
                parents: 16,
                list: 16,
                seed: 0,
            },
        )
        .unwrap();
        let p = fast_penalty(&fe, 64, 2000, 1).unwrap();
        assert_eq!(p.penalty_db, 0.0);
        assert_eq!(p.mismatch_rate, 0.0);
        assert_eq!(p.mean_evaluations, 1.0 + 16.0 + 16.0);
    }

    #[test]
    fn complexity_grows() {
        let c = fast_complexity(64, 8, &[256, 1024], 2, 500, 1).unwrap();
        assert!(c[1].1 > c[0].1);
        assert!(c[1].1 < 4.0 * c[0].1);
    }
}
