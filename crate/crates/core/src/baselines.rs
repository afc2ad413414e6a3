//! Matched-rate comparison codecs: a rotated scalar Lloyd–Max quantizer on
//! the marginal `f_{d,1}`, and per-token min–max integer quantization.

use half::f16;

use crate::codebook::{codeword_hash, scalar_companded_levels};
use crate::codec::VectorCodec;
use crate::error::{Error, Result};
use crate::quantizer::BlockQuantizer;
use crate::source::{sample_blocks, RotationSpec};

/// Training samples used by [`scalar_lloyd_table`].
pub const SCALAR_TRAIN_SIZE: usize = 1_000_000;
const SCALAR_MAX_ITERATIONS: usize = 100;
const SCALAR_REL_TOL: f64 = 1e-10;

/// `2^b` increasing levels, symmetric about zero, with midpoint thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarTable {
    d: usize,
    levels: Vec<f64>,
    thresholds: Vec<f64>,
    train_mse: f64,
    iterations: usize,
    content_hash: u64,
}

impl ScalarTable {
    /// Builds a table from increasing levels.
    pub fn from_levels(d: usize, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || !levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("scalar levels must be strictly increasing".into()));
        }
        if levels.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::InvalidInput("scalar levels must lie in [−1, 1]".into()));
        }
        let thresholds = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let content_hash = codeword_hash(&levels);
        Ok(Self {
            d,
            levels,
            thresholds,
            train_mse: f64::NAN,
            iterations: 0,
            content_hash,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bits(&self) -> f64 {
        (self.levels.len() as f64).log2()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Per-coordinate MSE on the training samples (NaN if not trained).
    pub fn train_mse(&self) -> f64 {
        self.train_mse
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn quantize(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t < x)
    }

    /// Mean squared error per coordinate over `samples`.
    pub fn mse(&self, samples: &[f64]) -> f64 {
        samples
            .iter()
            .map(|&x| (x - self.levels[self.quantize(x)]).powi(2))
            .sum::<f64>()
            / samples.len() as f64
    }
}

impl BlockQuantizer for ScalarTable {
    fn block_dim(&self) -> usize {
        1
    }

    fn len(&self) -> usize {
        self.levels.len()
    }

    fn codeword(&self, index: usize) -> &[f64] {
        std::slice::from_ref(&self.levels[index])
    }

    fn nearest(&self, y: &[f64]) -> usize {
        self.quantize(y[0])
    }

    fn content_hash(&self) -> u64 {
        self.content_hash
    }
}

/// Prefix sums over sorted magnitudes for O(log M) cell statistics.
struct Folded {
    sorted: Vec<f64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Folded {
    fn new(samples: &[f64]) -> Self {
        let mut sorted: Vec<f64> = samples.iter().map(|v| v.abs()).collect();
        sorted.sort_by(f64::total_cmp);
        let mut sum = Vec::with_capacity(sorted.len() + 1);
        let mut sum_sq = Vec::with_capacity(sorted.len() + 1);
        let (mut s, mut q) = (0.0, 0.0);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &v in &sorted {
            s += v;
            q += v * v;
            sum.push(s);
            sum_sq.push(q);
        }
        Self { sorted, sum, sum_sq }
    }

    /// Cell boundaries (sample positions) for positive levels `levels`.
    fn cuts(&self, levels: &[f64]) -> Vec<usize> {
        let mut cuts = vec![0];
        for w in levels.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            cuts.push(self.sorted.partition_point(|&v| v <= t));
        }
        cuts.push(self.sorted.len());
        cuts
    }

    fn distortion(&self, levels: &[f64], cuts: &[usize]) -> f64 {
        let mut total = 0.0;
        for (i, &c) in levels.iter().enumerate() {
            let (a, b) = (cuts[i], cuts[i + 1]);
            let n = (b - a) as f64;
            total += (self.sum_sq[b] - self.sum_sq[a]) - 2.0 * c * (self.sum[b] - self.sum[a]) + c * c * n;
        }
        total / self.sorted.len() as f64
    }
}

/// Scalar Lloyd–Max for `f_{d,1}` with `2^b` levels: trained on
/// [`SCALAR_TRAIN_SIZE`] seeded samples, started from the folded Beta
/// quantiles, run on magnitudes so the table is exactly symmetric, for 100
/// iterations or until the relative MSE change drops below 1e-10.
pub fn scalar_lloyd_table(d: usize, bits: u32, seed: u64) -> Result<ScalarTable> {
    if !(1..=8).contains(&bits) {
        return Err(Error::InvalidConfig(format!("scalar table needs 1 ≤ b ≤ 8, got {bits}")));
    }
    let samples = scalar_training_samples(d, seed)?;
    scalar_lloyd_table_on(d, bits, &samples)
}

/// The training set [`scalar_lloyd_table`] uses for `(d, seed)`.
pub fn scalar_training_samples(d: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_blocks(d, 1, SCALAR_TRAIN_SIZE, seed)?.into_vec())
}

/// [`scalar_lloyd_table`] on caller-supplied samples of `f_{d,1}`.
pub fn scalar_lloyd_table_on(d: usize, bits: u32, samples: &[f64]) -> Result<ScalarTable> {
    let n = 1usize << bits;
    if samples.len() < n {
        return Err(Error::InsufficientTrainingData {
            have: samples.len(),
            needed: n,
        });
    }
    let folded = Folded::new(samples);
    let mut pos: Vec<f64> = scalar_companded_levels(d, n)?[n / 2..].to_vec();
    let mut cuts = folded.cuts(&pos);
    let mut mse = folded.distortion(&pos, &cuts);
    let mut iterations = 0;
    for _ in 0..SCALAR_MAX_ITERATIONS {
        iterations += 1;
        for (i, level) in pos.iter_mut().enumerate() {
            let (a, b) = (cuts[i], cuts[i + 1]);
            if b > a {
                *level = (folded.sum[b] - folded.sum[a]) / (b - a) as f64;
            }
        }
        cuts = folded.cuts(&pos);
        let next = folded.distortion(&pos, &cuts);
        let change = (mse - next).abs() / mse.max(f64::MIN_POSITIVE);
        mse = next;
        if change < SCALAR_REL_TOL {
            break;
        }
    }
    let mut levels: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    levels.extend_from_slice(&pos);
    let mut table = ScalarTable::from_levels(d, levels)?;
    table.train_mse = mse;
    table.iterations = iterations;
    Ok(table)
}

/// Rotated scalar codec: the cache container with `k = 1` and `N = 2^b`.
pub fn scalar_codec(table: ScalarTable, rotation: RotationSpec) -> Result<VectorCodec<ScalarTable>> {
    if table.d() != rotation.d() {
        return Err(Error::InvalidConfig(format!(
            "table trained for d={}, rotation has d={}",
            table.d(),
            rotation.d()
        )));
    }
    VectorCodec::new(table, rotation)
}

/// One token under per-token asymmetric min–max quantization.
#[derive(Clone, Debug, PartialEq)]
pub struct IntToken {
    pub scale: f16,
    pub zero: f16,
    pub codes: Vec<u8>,
    pub bits: u32,
}

impl IntToken {
    /// Stored bits: two binary16 side values plus `b` per coordinate.
    pub fn stored_bits(&self) -> u64 {
        32 + self.bits as u64 * self.codes.len() as u64
    }
}

/// `zero = min`, `step = (max − min)/(2^b − 1)`, both stored as binary16;
/// codes are computed against the stored values and clamped to the range.
pub fn int_quantize_token(x: &[f64], bits: u32) -> Result<IntToken> {
    if ![2, 4, 8].contains(&bits) {
        return Err(Error::InvalidConfig(format!("integer baseline supports b ∈ {{2, 4, 8}}, got {bits}")));
    }
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("token must be non-empty and finite".into()));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top = (1u32 << bits) - 1;
    let zero = f16::from_f64(lo);
    let scale = f16::from_f64((hi - lo) / top as f64);
    let (z, s) = (zero.to_f64(), scale.to_f64());
    let codes = x
        .iter()
        .map(|&v| {
            if s > 0.0 {
                ((v - z) / s).round().clamp(0.0, top as f64) as u8
            } else {
                0
            }
        })
        .collect();
    Ok(IntToken {
        scale,
        zero,
        codes,
        bits,
    })
}

pub fn int_dequantize_token(token: &IntToken) -> Vec<f64> {
    let (z, s) = (token.zero.to_f64(), token.scale.to_f64());
    token.codes.iter().map(|&c| z + s * c as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{haar_rotation, sample_sphere};
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn uniform_source_tables() {
        // f_{3,1} is uniform on [−1, 1].
        let t = scalar_lloyd_table(3, 1, 1).unwrap();
        assert!((t.levels()[1] - 0.5).abs() < 0.005);
        assert!((t.train_mse() / (1.0 / 12.0) - 1.0).abs() < 0.01);
        let t = scalar_lloyd_table(3, 2, 1).unwrap();
        for (a, b) in t.levels().iter().zip([-0.75, -0.25, 0.25, 0.75]) {
            assert!((a - b).abs() < 0.005, "{:?}", t.levels());
        }
        assert!((t.train_mse() / (1.0 / 48.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn tables_are_symmetric_and_improve_with_rate() {
        let samples = scalar_training_samples(64, 9).unwrap();
        let mut last = f64::INFINITY;
        for b in 1..=5 {
            let t = scalar_lloyd_table_on(64, b, &samples).unwrap();
            let l = t.levels();
            assert!(l.iter().zip(l.iter().rev()).all(|(a, b)| (a + b).abs() < 1e-9));
            assert!(t.train_mse() < last);
            last = t.train_mse();
        }
    }

    #[test]
    fn lloyd_fixed_point_conditions() {
        let samples = scalar_training_samples(64, 2).unwrap();
        let t = scalar_lloyd_table_on(64, 3, &samples).unwrap();
        for (i, w) in t.levels().windows(2).enumerate() {
            assert_eq!(t.thresholds()[i], 0.5 * (w[0] + w[1]));
        }
        let mut sums = [0.0; 8];
        let mut counts = [0usize; 8];
        for &x in &samples {
            let i = t.quantize(x);
            sums[i] += x;
            counts[i] += 1;
        }
        // Folded cells pool both signs, so compare the symmetric centroid.
        for i in 0..4 {
            let j = 7 - i;
            let centroid = (sums[j] - sums[i]) / (counts[i] + counts[j]) as f64;
            assert!((centroid - t.levels()[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn scalar_codec_round_trips_level_vectors() {
        let table = ScalarTable::from_levels(16, vec![-0.75, -0.25, 0.25, 0.75]).unwrap();
        let codec = scalar_codec(table, haar_rotation(16, 5).unwrap()).unwrap();
        // Sixteen entries of ±0.25 form a unit vector.
        let idx: Vec<u32> = (0..16).map(|i| if i % 3 == 0 { 1 } else { 2 }).collect();
        let y: Vec<f64> = idx.iter().map(|&i| if i == 1 { -0.25 } else { 0.25 }).collect();
        let mut x = vec![0.0; 16];
        codec.rotation().apply_transpose(&y, &mut x);
        x.iter_mut().for_each(|v| *v *= 2.0);
        let rec = codec.encode_vector(&x).unwrap();
        assert_eq!(rec.indices, idx);
        let back = codec.decode_vector(&rec).unwrap();
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(codec.record_bytes(), 2 + 4);
    }

    #[test]
    fn int_examples() {
        let t = int_quantize_token(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(int_dequantize_token(&t), vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(t.stored_bits(), 32 + 8);
        let t = int_quantize_token(&[0.75; 8], 4).unwrap();
        assert!(t.codes.iter().all(|&c| c == 0));
        assert_eq!(int_dequantize_token(&t), vec![0.75; 8]);
        assert!(int_quantize_token(&[1.0], 3).is_err());
    }

    #[test]
    fn int8_gaussian_nmse() {
        let mut rng = crate::rng::seeded(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..64).map(|_| rng.sample(StandardNormal)).collect();
            let t = int_quantize_token(&x, 8).unwrap();
            let y = int_dequantize_token(&t);
            let err: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            let energy: f64 = x.iter().map(|a| a * a).sum();
            assert!(10.0 * (err / energy).log10() < -40.0);
        }
    }

    #[test]
    fn scalar_codec_matches_table_quantizer() {
        let table = scalar_lloyd_table(32, 3, 1).unwrap();
        let codec = scalar_codec(table.clone(), haar_rotation(32, 2).unwrap()).unwrap();
        let x = sample_sphere(32, 50, 4).unwrap();
        for row in x.rows() {
            let rec = codec.encode_vector(row).unwrap();
            let (y, _) = codec.rotate(row).unwrap();
            for (v, &i) in y.iter().zip(&rec.indices) {
                let brute = (0..8)
                    .min_by(|&a, &b| (v - table.levels()[a]).abs().total_cmp(&(v - table.levels()[b]).abs()))
                    .unwrap();
                assert_eq!(i as usize, brute);
            }
        }
    }
}
