use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::{dist_sq, dot, norm_sq, PointSet};
use crate::rng::{self, CHUNK_ROWS};

/// `t × d` rows of i.i.d. standard normals.
pub fn gaussian_rows(t: usize, d: usize, seed: u64) -> Result<PointSet> {
    rows_from(t, d, seed, |rng| StandardNormal.sample(rng))
}

/// `t × d` rows of i.i.d. unit-rate exponentials.
pub fn exponential_rows(t: usize, d: usize, seed: u64) -> Result<PointSet> {
    rows_from(t, d, seed, |rng| Exp1.sample(rng))
}

fn rows_from(t: usize, d: usize, seed: u64, draw: impl Fn(&mut rng::FqRng) -> f64 + Sync) -> Result<PointSet> {
    if d == 0 {
        return Err(Error::InvalidDimension("rows need d ≥ 1".into()));
    }
    let mut data = vec![0.0; t * d];
    data.par_chunks_mut(CHUNK_ROWS * d).enumerate().for_each(|(c, chunk)| {
        let mut rng = rng::stream(seed, c as u64);
        chunk.iter_mut().for_each(|v| *v = draw(&mut rng));
    });
    PointSet::new(d, data)
}

/// Per-row reconstruction quality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorFidelity {
    pub mean_cosine: f64,
    /// `10·log₁₀` of the mean of `‖x − x̂‖²/‖x‖²`.
    pub nmse_db: f64,
    /// Mean of the per-row `10·log₁₀(‖x − x̂‖²/‖x‖²)`.
    pub nmse_db_per_vector: f64,
    /// Mean of `‖x − x̂‖²/d`.
    pub per_coord_mse: f64,
    pub mse_stderr: f64,
    pub rows: usize,
    /// Zero rows, excluded from every mean.
    pub skipped: usize,
}

/// Cosine and NMSE between each nonzero row of `data` and its
/// reconstruction. A zero reconstruction has cosine 0.
pub fn per_vector_fidelity<F>(data: &PointSet, reconstruct: F) -> Result<VectorFidelity>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let d = data.dim();
    let stats = data
        .as_slice()
        .par_chunks(d * 64)
        .map(|chunk| {
            let mut acc = [0.0f64; 5];
            let mut rows = 0usize;
            let mut skipped = 0usize;
            for x in chunk.chunks_exact(d) {
                let nx = norm_sq(x);
                if nx == 0.0 {
                    skipped += 1;
                    continue;
                }
                let y = reconstruct(x)?;
                let ny = norm_sq(&y);
                let cos = if ny > 0.0 { dot(x, &y) / (nx * ny).sqrt() } else { 0.0 };
                let err = dist_sq(x, &y);
                let ratio = err / nx;
                acc[0] += cos;
                acc[1] += ratio;
                acc[2] += 10.0 * ratio.log10();
                acc[3] += err / d as f64;
                acc[4] += (err / d as f64).powi(2);
                rows += 1;
            }
            Ok((acc, rows, skipped))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut acc, mut rows, mut skipped) = ([0.0f64; 5], 0usize, 0usize);
    for (a, r, s) in stats {
        acc.iter_mut().zip(a).for_each(|(t, v)| *t += v);
        rows += r;
        skipped += s;
    }
    if rows == 0 {
        return Err(Error::UndefinedResult("every row is zero".into()));
    }
    let m = rows as f64;
    let mse = acc[3] / m;
    let var = if rows > 1 { (acc[4] - m * mse * mse).max(0.0) / (m - 1.0) } else { 0.0 };
    Ok(VectorFidelity {
        mean_cosine: acc[0] / m,
        nmse_db: 10.0 * (acc[1] / m).log10(),
        nmse_db_per_vector: acc[2] / m,
        per_coord_mse: mse,
        mse_stderr: (var / m).sqrt(),
        rows,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttentionFidelity {
    pub mean_cosine: f64,
    pub queries: usize,
    /// Queries whose exact or reconstructed output was the zero vector.
    pub skipped: usize,
}

/// Mean cosine, over queries, between `softmax(qKᵀ/√d)V` computed on the
/// original cache and on the reconstructed cache.
pub fn attention_cosine<F>(keys: &PointSet, values: &PointSet, queries: &PointSet, reconstruct: F) -> Result<AttentionFidelity>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let d = keys.dim();
    if keys.is_empty() || queries.is_empty() {
        return Err(Error::InvalidInput("attention needs at least one key and one query".into()));
    }
    if values.len() != keys.len() || values.dim() != d || queries.dim() != d {
        return Err(Error::InvalidDimension(format!(
            "keys {}×{}, values {}×{}, queries {}×{}",
            keys.len(),
            d,
            values.len(),
            values.dim(),
            queries.len(),
            queries.dim()
        )));
    }
    let rebuild = |m: &PointSet| -> Result<PointSet> {
        let rows = m.rows().collect::<Vec<_>>().into_par_iter().map(&reconstruct).collect::<Result<Vec<_>>>()?;
        PointSet::new(d, rows.concat())
    };
    let (k_hat, v_hat) = (rebuild(keys)?, rebuild(values)?);
    let mut total = 0.0;
    let mut used = 0;
    for q in queries.rows() {
        let exact = attend(q, keys, values);
        let approx = attend(q, &k_hat, &v_hat);
        let (ne, na) = (norm_sq(&exact), norm_sq(&approx));
        if ne == 0.0 || na == 0.0 {
            continue;
        }
        total += dot(&exact, &approx) / (ne * na).sqrt();
        used += 1;
    }
    if used == 0 {
        return Err(Error::UndefinedResult("every attention output is zero".into()));
    }
    Ok(AttentionFidelity {
        mean_cosine: total / used as f64,
        queries: queries.len(),
        skipped: queries.len() - used,
    })
}

fn attend(q: &[f64], keys: &PointSet, values: &PointSet) -> Vec<f64> {
    let scale = 1.0 / (q.len() as f64).sqrt();
    let logits: Vec<f64> = keys.rows().map(|k| dot(q, k) * scale).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    let mut out = vec![0.0; q.len()];
    for (w, v) in weights.iter().zip(values.rows()) {
        out.iter_mut().zip(v).for_each(|(o, v)| *o += w / z * v);
    }
    out
}
