use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use crate::codec::payload_bytes;
use crate::error::{Error, Result};
use crate::source::{power_integral, SourceSpec};

/// Bits per vector and the resulting compression against an uncompressed
/// baseline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accounting {
    /// `norm_bits + (d/k)·log₂N`.
    pub exact_bits: f64,
    /// `8·record_bytes` of the cache format.
    pub record_bits: u64,
    pub exact_ratio: f64,
    pub byte_aligned_ratio: f64,
}

/// Exact-bit ratio `d·baseline_bits / (norm_bits + (d/k)·log₂N)`, plus the
/// byte-aligned ratio of the on-disk record (binary16 norm and packed
/// payload).
pub fn compression_ratio(d: usize, k: usize, n: usize, norm_bits: u32, baseline_bits: u32) -> Result<Accounting> {
    if k == 0 || !d.is_multiple_of(k) {
        return Err(Error::InvalidConfig(format!("block size {k} does not divide d={d}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("codebook size must be positive".into()));
    }
    let blocks = d / k;
    let exact_bits = norm_bits as f64 + blocks as f64 * (n as f64).log2();
    let record_bits = 8 * (norm_bits as u64).div_ceil(8) + 8 * payload_bytes(blocks, n) as u64;
    let raw = (d as u64 * baseline_bits as u64) as f64;
    Ok(Accounting {
        exact_bits,
        record_bits,
        exact_ratio: raw / exact_bits,
        byte_aligned_ratio: raw / record_bits as f64,
    })
}

/// Per-token INT-b: binary16 scale and zero plus `b` bits per coordinate.
pub fn int_compression_ratio(d: usize, bits: u32, baseline_bits: u32) -> f64 {
    (d as f64 * baseline_bits as f64) / (32.0 + d as f64 * bits as f64)
}

/// Normalized second moments of good `k`-dimensional cells, stored as
/// `k·G_k` (the total second moment per unit volume^{2/k}).
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeTable {
    entries: BTreeMap<usize, f64>,
}

impl LatticeTable {
    /// Integer lattice (k=1), hexagonal (k=2), BCC (k=3) and E8 (k=8).
    pub fn standard() -> Self {
        let entries = [
            (1, 1.0 / 12.0),
            (2, 2.0 * 0.080_187_5),
            (3, 3.0 * 0.078_543_3),
            (8, 8.0 * 0.071_682_1),
        ]
        .into_iter()
        .collect();
        Self { entries }
    }

    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_entry(mut self, k: usize, k_times_g: f64) -> Self {
        self.entries.insert(k, k_times_g);
        self
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        if k == 1 {
            return Some(1.0 / 12.0);
        }
        self.entries.get(&k).copied()
    }

    /// `k/(2πe)`: the sphere-bound limit of `k·G_k`.
    pub fn asymptote(k: usize) -> f64 {
        k as f64 / (2.0 * PI * E)
    }
}

/// Factors of the high-rate scalar-to-vector distortion ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighRateGain {
    /// `k·(1/12) / (k·G_k)`; `None` when the table has no entry for `k`.
    pub gamma_cell: Option<f64>,
    /// `I_{d,1}(1/3)³ / I_{d,k}(k/(k+2))^{(k+2)/k}`.
    pub gamma_dens: f64,
}

impl HighRateGain {
    pub fn product(&self) -> Option<f64> {
        self.gamma_cell.map(|c| c * self.gamma_dens)
    }
}

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Cell-shaping and density-matching gains at `(d, k)`.
pub fn high_rate_gain(d: usize, k: usize, table: &LatticeTable) -> Result<HighRateGain> {
    if k == 0 || k >= d {
        return Err(Error::InvalidSpec(format!("need 1 ≤ k < d, got d={d} k={k}")));
    }
    let gamma_cell = table.get(k).map(|kg| k as f64 / 12.0 / kg);
    let gamma_dens = if k == 1 {
        1.0
    } else {
        let scalar = power_integral(SourceSpec::new(d, 1)?, 1.0 / 3.0)?;
        let kf = k as f64;
        let vector = power_integral(SourceSpec::new(d, k)?, kf / (kf + 2.0))?;
        scalar.powi(3) / vector.powf((kf + 2.0) / kf)
    };
    Ok(HighRateGain { gamma_cell, gamma_dens })
}

/// Cap model for [`shell_distortion_prediction`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapMode {
    /// Codewords fixed on the shell: `2ρ(1 − t_b)`.
    FixedCap,
    /// Codewords at cap centroids: `ρ·2^{−2b}`.
    LloydCap,
}

/// Large-d shell distortion with `t_b = √(1 − 2^{−2b})`.
pub fn shell_distortion_prediction(rho: f64, bits: f64, mode: CapMode) -> Result<f64> {
    if bits.is_nan() || bits <= 0.0 {
        return Err(Error::Domain(format!("rate must be positive, got {bits}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    let floor = (-2.0 * bits).exp2();
    Ok(match mode {
        CapMode::FixedCap => 2.0 * rho * (1.0 - (1.0 - floor).sqrt()),
        CapMode::LloydCap => rho * floor,
    })
}

/// Operating point `(k, N = 2^j)` whose rate `j/k` is nearest `target`,
/// over block sizes `ks` and `1 ≤ j ≤ max_log2_n`. Ties go to the earlier
/// `k`, then the smaller `N`.
pub fn nearest_operating_point(target: f64, ks: &[usize], max_log2_n: u32) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for &k in ks {
        for j in 1..=max_log2_n {
            let rate = j as f64 / k as f64;
            if best.is_none_or(|b| (rate - target).abs() < (b.2 - target).abs()) {
                best = Some((k, 1usize << j, rate));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_compression_points() {
        let a = compression_ratio(64, 64, 16384, 16, 16).unwrap();
        assert!((a.exact_ratio - 1024.0 / 30.0).abs() < 1e-12);
        assert_eq!(format!("{:.2}", a.exact_ratio), "34.13");
        let a = compression_ratio(64, 32, 16384, 16, 16).unwrap();
        assert_eq!(format!("{:.2}", a.exact_ratio), "23.27");
        let a = compression_ratio(64, 1, 16, 16, 16).unwrap();
        assert!((a.exact_ratio - 1024.0 / 272.0).abs() < 1e-12);
        assert_eq!(a.record_bits, 272);
        // (64, 2, 64): 16 + 192 bits, record of 26 bytes.
        let a = compression_ratio(64, 2, 64, 16, 16).unwrap();
        assert_eq!(a.record_bits, 208);
        assert_eq!(a.exact_bits, 208.0);
        // (64, 16, 8192): 52 payload bits round up to 7 bytes.
        let a = compression_ratio(64, 16, 8192, 16, 16).unwrap();
        assert_eq!(a.record_bits, 16 + 56);
        assert!(a.byte_aligned_ratio < a.exact_ratio);
    }

    #[test]
    fn compression_is_monotone() {
        let mut last = f64::INFINITY;
        for n in [2, 16, 256, 4096, 65536] {
            let r = compression_ratio(64, 8, n, 16, 16).unwrap().exact_ratio;
            assert!(r < last);
            last = r;
        }
        let mut last = 0.0;
        for k in [1, 2, 4, 8, 16, 32, 64] {
            let r = compression_ratio(64, k, 256, 16, 16).unwrap().exact_ratio;
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn cell_gains() {
        let t = LatticeTable::standard();
        let g = high_rate_gain(64, 1, &t).unwrap();
        assert_eq!(g.gamma_cell, Some(1.0));
        assert_eq!(g.gamma_dens, 1.0);
        let g = high_rate_gain(64, 2, &t).unwrap();
        assert!((to_db(g.gamma_cell.unwrap()) - 0.167).abs() < 0.001);
        assert!(g.gamma_dens >= 1.0);
        assert_eq!(high_rate_gain(64, 5, &t).unwrap().gamma_cell, None);
        assert_eq!(high_rate_gain(64, 5, &t).unwrap().product(), None);
        // 10·log₁₀(πe/6) in the limit.
        assert!((to_db(1.0 / 12.0 / (LatticeTable::asymptote(1))) - 1.533).abs() < 0.001);
    }

    #[test]
    fn density_gain_grows_with_k() {
        let t = LatticeTable::empty();
        let mut last = 1.0;
        for k in [2, 4, 8, 16] {
            let g = high_rate_gain(64, k, &t).unwrap().gamma_dens;
            assert!(g > last, "k={k} {g}");
            last = g;
        }
    }

    #[test]
    fn shell_predictions() {
        let f = shell_distortion_prediction(0.5, 1.0, CapMode::FixedCap).unwrap();
        assert!((f - (1.0 - 0.75f64.sqrt())).abs() < 1e-15);
        assert!((f - 0.133_975).abs() < 1e-6);
        assert_eq!(shell_distortion_prediction(0.5, 1.0, CapMode::LloydCap).unwrap(), 0.125);
        for i in 1..100 {
            let rho = i as f64 / 100.0;
            for j in 1..80 {
                let b = j as f64 / 10.0;
                let l = shell_distortion_prediction(rho, b, CapMode::LloydCap).unwrap();
                let f = shell_distortion_prediction(rho, b, CapMode::FixedCap).unwrap();
                assert!(l <= f);
            }
        }
        assert!(shell_distortion_prediction(0.5, 0.0, CapMode::LloydCap).is_err());
    }

    #[test]
    fn fractional_rates_are_covered() {
        let ks = [2, 4, 8, 16, 32];
        for i in 1..=15 {
            let target = 0.25 * i as f64;
            let (_, _, rate) = nearest_operating_point(target, &ks, 16).unwrap();
            assert!((rate - target).abs() <= 0.05);
        }
        assert_eq!(nearest_operating_point(0.1875, &[32], 16), Some((32, 64, 0.1875)));
    }
}
