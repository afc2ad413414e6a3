//! The canonical block source.
//!
//! After normalizing a vector and applying a Haar-random rotation, every run
//! of `k` consecutive coordinates has the same law `f_{d,k}` on the unit
//! k-ball: `R² ~ Beta(k/2, (d−k)/2)` with a uniform independent direction.
//! This module samples that law, evaluates its density, and draws the shared
//! rotation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::{dot, norm_sq, PointSet};
use crate::rng::{self, CHUNK_ROWS};
use crate::special::{integrate, ln_beta};
use statrs::function::gamma::ln_gamma;

/// Ambient dimension `d` and block size `k` of the canonical law `f_{d,k}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SourceSpec {
    d: usize,
    k: usize,
}

impl SourceSpec {
    /// Requires `d ≥ 2` and `1 ≤ k ≤ d`. Operations that need the block
    /// marginal additionally check `k < d`, and density evaluations check
    /// `d ≥ k + 2`.
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidSpec(format!("ambient dimension must be ≥ 2, got {d}")));
        }
        if k == 0 || k > d {
            return Err(Error::InvalidSpec(format!("block size must lie in 1..={d}, got {k}")));
        }
        Ok(Self { d, k })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Exponent α = (d − k − 2)/2 of the density.
    pub fn alpha(&self) -> f64 {
        (self.d as f64 - self.k as f64 - 2.0) / 2.0
    }

    fn require_marginal(&self) -> Result<()> {
        if self.k >= self.d {
            return Err(Error::InvalidSpec(format!(
                "block marginal needs k < d, got d={} k={}",
                self.d, self.k
            )));
        }
        Ok(())
    }

    fn require_density(&self) -> Result<()> {
        self.require_marginal()?;
        if self.d < self.k + 2 {
            return Err(Error::InvalidSpec(format!(
                "density f_(d,k) is unbounded for d < k + 2 (d={}, k={})",
                self.d, self.k
            )));
        }
        Ok(())
    }

    /// ln C_{d,k}, the log normalizing constant of the density.
    fn ln_constant(&self) -> f64 {
        let alpha = self.alpha();
        let half_k = self.k as f64 / 2.0;
        ln_gamma(alpha + half_k + 1.0) - half_k * std::f64::consts::PI.ln() - ln_gamma(alpha + 1.0)
    }
}

/// A seed-deterministic Haar-distributed orthogonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationSpec {
    d: usize,
    seed: u64,
    matrix: Vec<f64>,
}

impl RotationSpec {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major d×d entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.d + col]
    }

    /// `out = Π x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.matrix.chunks_exact(self.d)) {
            *o = dot(row, x);
        }
    }

    /// `out = Πᵀ y`.
    pub fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (yi, row) in y.iter().zip(self.matrix.chunks_exact(self.d)) {
            for (o, m) in out.iter_mut().zip(row) {
                *o += yi * m;
            }
        }
    }

    pub fn frobenius_distance(&self, other: &RotationSpec) -> f64 {
        self.matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Haar-uniform orthogonal d×d matrix: QR of a seeded Gaussian matrix with
/// the columns of Q multiplied by the signs of R's diagonal.
pub fn haar_rotation(d: usize, seed: u64) -> Result<RotationSpec> {
    if d == 0 {
        return Err(Error::InvalidDimension("rotation dimension must be positive".into()));
    }
    let mut rng = rng::seeded(seed);
    let gaussian: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
    let qr = DMatrix::from_row_slice(d, d, &gaussian).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut matrix = Vec::with_capacity(d * d);
    for i in 0..d {
        matrix.extend(q.row(i).iter().copied());
    }
    Ok(RotationSpec { d, seed, matrix })
}

fn fill_chunked(
    dim: usize,
    n: usize,
    seed: u64,
    fill: impl Fn(&mut rng::FqRng, &mut [f64]) + Sync,
) -> Vec<f64> {
    let mut data = vec![0.0; n * dim];
    data.par_chunks_mut(CHUNK_ROWS * dim)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = rng::stream(seed, chunk as u64);
            for row in out.chunks_exact_mut(dim) {
                fill(&mut rng, row);
            }
        });
    data
}

fn unit_gaussian(rng: &mut rng::FqRng, row: &mut [f64]) {
    loop {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = norm_sq(row).sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
            return;
        }
    }
}

/// `n` i.i.d. uniform points on 𝕊^{d−1} (normalized Gaussians).
pub fn sample_sphere(d: usize, n: usize, seed: u64) -> Result<PointSet> {
    if d == 0 {
        return Err(Error::InvalidDimension("sphere dimension must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    PointSet::new(d, fill_chunked(d, n, seed, unit_gaussian))
}

/// `n` samples of `f_{d,k}`: the first `k` coordinates of uniform points on
/// 𝕊^{d−1}.
pub fn sample_block_marginal(spec: SourceSpec, n: usize, seed: u64) -> Result<PointSet> {
    spec.require_marginal()?;
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let (d, k) = (spec.d, spec.k);
    let data = fill_chunked(k, n, seed, |rng, row| {
        let mut full = vec![0.0; d];
        unit_gaussian(rng, &mut full);
        row.copy_from_slice(&full[..k]);
    });
    PointSet::new(k, data)
}

/// `n` samples of `f_{d,k}` built in polar form: `R² ~ Beta(k/2, (d−k)/2)`
/// times an independent uniform direction on 𝕊^{k−1}. Same law as
/// [`sample_block_marginal`], at O(k) cost per sample.
pub fn sample_block_polar(spec: SourceSpec, n: usize, seed: u64) -> Result<PointSet> {
    spec.require_marginal()?;
    if n == 0 {
        return Err(Error::InvalidConfig("sample count must be positive".into()));
    }
    let k = spec.k;
    let radial = Beta::new(k as f64 / 2.0, (spec.d - k) as f64 / 2.0)
        .map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let data = fill_chunked(k, n, seed, |rng, row| {
        let r = radial.sample(rng).sqrt();
        unit_gaussian(rng, row);
        row.iter_mut().for_each(|v| *v *= r);
    });
    PointSet::new(k, data)
}

/// Training/evaluation samples for a block codebook: `f_{d,k}` when `k < d`,
/// the uniform sphere when `k = d`.
pub fn sample_blocks(d: usize, k: usize, n: usize, seed: u64) -> Result<PointSet> {
    let spec = SourceSpec::new(d, k)?;
    if k == d {
        sample_sphere(d, n, seed)
    } else {
        sample_block_marginal(spec, n, seed)
    }
}

/// Density `f_{d,k}(x) = C_{d,k} (1 − ‖x‖²)^α` on the closed unit ball, zero
/// outside.
pub fn density_f(spec: SourceSpec, x: &[f64]) -> Result<f64> {
    spec.require_density()?;
    if x.len() != spec.k {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, expected {}",
            x.len(),
            spec.k
        )));
    }
    let r2 = norm_sq(x);
    if r2 > 1.0 {
        return Ok(0.0);
    }
    let alpha = spec.alpha();
    if alpha == 0.0 {
        return Ok(spec.ln_constant().exp());
    }
    Ok((spec.ln_constant() + alpha * (1.0 - r2).ln()).exp())
}

/// `(E‖X‖², Var‖X‖²) = (k/d, 2k(d−k)/(d²(d+2)))`.
pub fn radial_moments(spec: SourceSpec) -> Result<(f64, f64)> {
    spec.require_marginal()?;
    let (d, k) = (spec.d as f64, spec.k as f64);
    Ok((k / d, 2.0 * k * (d - k) / (d * d * (d + 2.0))))
}

/// Surface area of 𝕊^{k−1}.
pub(crate) fn sphere_surface(k: usize) -> f64 {
    let half_k = k as f64 / 2.0;
    (std::f64::consts::LN_2 + half_k * std::f64::consts::PI.ln() - ln_gamma(half_k)).exp()
}

/// `I_{d,k}(s) = ∫ f_{d,k}^s dx`, reduced to a one-dimensional radial
/// integral and evaluated by adaptive quadrature.
pub fn power_integral(spec: SourceSpec, s: f64) -> Result<f64> {
    spec.require_density()?;
    let alpha = spec.alpha();
    if !(s > 0.0 && s <= 1.0) || s * alpha <= -1.0 {
        return Err(Error::Domain(format!(
            "power integral needs s in (0, 1] with sα > −1 (s={s}, α={alpha})"
        )));
    }
    let k = spec.k as i32;
    let exponent = s * alpha;
    let radial = integrate(
        |r: f64| r.powi(k - 1) * (1.0 - r * r).max(0.0).powf(exponent),
        0.0,
        1.0,
        1e-13,
    );
    Ok((s * spec.ln_constant()).exp() * sphere_surface(spec.k) * radial)
}

/// Closed form of [`power_integral`] via the Beta function, used as an
/// independent cross-check.
pub fn power_integral_closed_form(spec: SourceSpec, s: f64) -> Result<f64> {
    spec.require_density()?;
    let k = spec.k as f64;
    let radial = 0.5 * ln_beta(k / 2.0, s * spec.alpha() + 1.0).exp();
    Ok((s * spec.ln_constant()).exp() * sphere_surface(spec.k) * radial)
}
