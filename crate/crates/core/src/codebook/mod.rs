//! Codebooks for the canonical block source.
//!
//! A codebook is `N` codewords in the closed unit k-ball. Construction
//! starts from a deterministic radial–angular layout (Beta-quantile radii,
//! a single typical shell, or several shells) and is then polished by
//! multi-restart Lloyd iterations on samples of `f_{d,k}`.

mod format;
mod init;
mod lloyd;

use std::hash::Hasher;

use fnv::FnvHasher;

pub use format::{
    deserialize_codebook, read_codebook, serialize_codebook, write_codebook, CODEBOOK_MAGIC, CODEBOOK_VERSION,
};
pub use init::{
    beta_quantile_radii, beta_quantile_radii_generic, beta_shape, init_codebook,
    init_codebook_with, multishell_init, scalar_companded_levels, shell_init,
};
pub use lloyd::{
    build_codebook, build_codebook_on, lloyd_refine, multishell_factor_search, shell_polish,
    training_distortion, training_seed, BuildOptions, BuiltCodebook, FactorSearch, Layout,
    LloydConfig, LloydReport, RestartTrace,
};

use crate::directions::DirectionScheme;
use crate::error::{Error, Result};
use crate::points::{nearest_row, norm_sq, PointSet};
use crate::quantizer::BlockQuantizer;

/// How the initial codeword layout was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InitScheme {
    /// One Beta-quantile radius per codeword.
    BetaQuantile,
    /// Every codeword on the typical radius √(k/d).
    Shell,
    /// `S` Beta-quantile shells of `N/S` directions each, shell-major order.
    MultiShell,
}

impl InitScheme {
    pub(crate) fn code(self) -> u8 {
        match self {
            InitScheme::BetaQuantile => 0,
            InitScheme::Shell => 1,
            InitScheme::MultiShell => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(InitScheme::BetaQuantile),
            1 => Some(InitScheme::Shell),
            2 => Some(InitScheme::MultiShell),
            _ => None,
        }
    }
}

/// Construction metadata carried alongside the codewords.
#[derive(Clone, Debug, PartialEq)]
pub struct Construction {
    pub scheme: InitScheme,
    /// Radial shells in the initial layout (`N` for Beta-quantile, 1 for the
    /// typical shell, `S` for multi-shell).
    pub shells: u32,
    /// Direction design used by the initial layout, if any.
    pub directions: Option<DirectionScheme>,
    /// Lloyd settings, when the codebook was refined in this process.
    /// Not persisted by the file format.
    pub lloyd: Option<LloydConfig>,
}

#[derive(Clone, Debug)]
pub struct Codebook {
    d: usize,
    codewords: PointSet,
    construction: Construction,
    content_hash: u64,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.codewords == other.codewords && self.construction == other.construction
    }
}

/// FNV-1a over the little-endian byte image of the row-major codewords.
pub fn codeword_hash(values: &[f64]) -> u64 {
    let mut hasher = FnvHasher::default();
    for v in values {
        hasher.write(&v.to_le_bytes());
    }
    hasher.finish()
}

impl Codebook {
    /// Validates the invariants: at least one codeword, every codeword finite
    /// and inside the closed unit ball (to 1e-9), and all codewords distinct.
    pub fn new(d: usize, codewords: PointSet, construction: Construction) -> Result<Self> {
        let k = codewords.dim();
        if k > d {
            return Err(Error::InvalidConfig(format!("block size {k} exceeds dimension {d}")));
        }
        if codewords.is_empty() {
            return Err(Error::InvalidConfig("codebook needs at least one codeword".into()));
        }
        for (i, c) in codewords.rows().enumerate() {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("codeword {i} is not finite")));
            }
            if norm_sq(c).sqrt() > 1.0 + 1e-9 {
                return Err(Error::InvalidInput(format!("codeword {i} lies outside the unit ball")));
            }
        }
        let mut order: Vec<usize> = (0..codewords.len()).collect();
        order.sort_by(|&a, &b| {
            codewords
                .row(a)
                .iter()
                .zip(codewords.row(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(w) = order.windows(2).find(|w| codewords.row(w[0]) == codewords.row(w[1])) {
            return Err(Error::InvalidInput(format!(
                "codewords {} and {} coincide",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
        let content_hash = codeword_hash(codewords.as_slice());
        Ok(Self {
            d,
            codewords,
            construction,
            content_hash,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.codewords.dim()
    }

    pub fn n(&self) -> usize {
        self.codewords.len()
    }

    pub fn codewords(&self) -> &PointSet {
        &self.codewords
    }

    pub fn codeword(&self, i: usize) -> &[f64] {
        self.codewords.row(i)
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn content_hash(&self) -> u64 {
        self.content_hash
    }

    /// Payload rate `log₂N / k` in bits per coordinate.
    pub fn rate(&self) -> f64 {
        (self.n() as f64).log2() / self.k() as f64
    }

    /// Nearest codeword index and its squared distance.
    pub fn nearest_with_distance(&self, y: &[f64]) -> (usize, f64) {
        nearest_row(self.codewords.as_slice(), y)
    }

    /// Mean of ‖x − nearest codeword‖² over `samples`, divided by `k`.
    pub fn per_coordinate_mse(&self, samples: &PointSet) -> f64 {
        training_distortion(self, samples) / self.k() as f64
    }
}

impl BlockQuantizer for Codebook {
    fn block_dim(&self) -> usize {
        self.k()
    }

    fn len(&self) -> usize {
        self.n()
    }

    fn codeword(&self, index: usize) -> &[f64] {
        self.codewords.row(index)
    }

    fn nearest(&self, y: &[f64]) -> usize {
        self.nearest_with_distance(y).0
    }

    fn content_hash(&self) -> u64 {
        self.content_hash
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn construction() -> Construction {
        Construction {
            scheme: InitScheme::Shell,
            shells: 1,
            directions: None,
            lloyd: None,
        }
    }

    #[test]
    fn rejects_invalid_codewords() {
        let outside = PointSet::new(2, vec![0.0, 0.0, 1.0, 0.5]).unwrap();
        assert!(Codebook::new(4, outside, construction()).is_err());
        let dup = PointSet::new(2, vec![0.1, 0.2, 0.3, 0.0, 0.1, 0.2]).unwrap();
        assert!(Codebook::new(4, dup, construction()).is_err());
        let empty = PointSet::new(2, vec![]).unwrap();
        assert!(Codebook::new(4, empty, construction()).is_err());
        let ok = PointSet::new(2, vec![0.1, 0.2, 0.3, 0.0]).unwrap();
        let cb = Codebook::new(4, ok, construction()).unwrap();
        assert_eq!(cb.content_hash(), codeword_hash(cb.codewords().as_slice()));
    }

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let cw = PointSet::new(1, vec![-0.5, 0.5]).unwrap();
        let cb = Codebook::new(4, cw, construction()).unwrap();
        assert_eq!(cb.nearest(&[0.0]), 0);
        assert_eq!(cb.nearest(&[0.1]), 1);
    }

    #[test]
    fn fnv_hash_reference_value() {
        // FNV-1a 64 of the empty input is the offset basis.
        assert_eq!(codeword_hash(&[]), 0xcbf2_9ce4_8422_2325);
    }
}
