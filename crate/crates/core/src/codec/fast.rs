use rand::seq::index::sample;

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::points::{dist_sq, dot, norm_sq};
use crate::quantizer::BlockQuantizer;
use crate::rng;

const KMEANS_ITERATIONS: usize = 20;

/// Shape of the two-stage search tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FastEncoderConfig {
    /// Radial shells `L`; shell `ℓ` owns indices `ℓ·M_a .. (ℓ+1)·M_a`.
    pub shells: usize,
    /// Parent clusters `K` per shell.
    pub parents: usize,
    /// Parents kept per query, `T`.
    pub list: usize,
    pub seed: u64,
}

/// `L = 2^round(log₂√(N/T))` shells (capped at `N`) and
/// `K = round(√(T·M_a))` parents, for a power-of-two `N`.
pub fn complexity_setup(n: usize, list: usize, seed: u64) -> FastEncoderConfig {
    let target = (n as f64 / list as f64).sqrt().log2().round().max(0.0) as u32;
    let shells = (1usize << target).min(n);
    let per_shell = n / shells;
    let parents = ((list * per_shell) as f64).sqrt().round().clamp(1.0, per_shell as f64) as usize;
    FastEncoderConfig {
        shells,
        parents,
        list: list.min(parents),
        seed,
    }
}

/// Selected index and the number of distance-like evaluations spent
/// (shell radii, parent scores, and candidate codewords).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FastChoice {
    pub index: usize,
    pub evaluations: usize,
}

/// Radius-first, list-decoded nearest-codeword search on a shell-major
/// codebook.
#[derive(Clone, Debug)]
pub struct FastEncoder {
    codebook: Codebook,
    config: FastEncoderConfig,
    per_shell: usize,
    radii: Vec<f64>,
    /// `L·K` unit parent centroids, shell-major.
    centroids: Vec<f64>,
    /// Global codeword indices under each parent, ascending.
    children: Vec<Vec<u32>>,
}

impl FastEncoder {
    pub fn new(codebook: Codebook, config: FastEncoderConfig) -> Result<Self> {
        let (n, k) = (codebook.n(), codebook.k());
        let FastEncoderConfig {
            shells,
            parents,
            list,
            seed,
        } = config;
        if shells == 0 || n % shells != 0 {
            return Err(Error::Layout(format!("{shells} shells do not divide N={n}")));
        }
        let per_shell = n / shells;
        if parents == 0 || parents > per_shell {
            return Err(Error::Layout(format!("need 1 ≤ K ≤ M_a={per_shell}, got K={parents}")));
        }
        if list == 0 || list > parents {
            return Err(Error::InvalidConfig(format!("need 1 ≤ T ≤ K={parents}, got T={list}")));
        }
        let mut radii = Vec::with_capacity(shells);
        let mut centroids = Vec::with_capacity(shells * parents * k);
        let mut children = Vec::with_capacity(shells * parents);
        for s in 0..shells {
            let base = s * per_shell;
            let mut dirs = Vec::with_capacity(per_shell * k);
            let mut radius = 0.0;
            for i in base..base + per_shell {
                let c = codebook.codeword(i);
                let r = norm_sq(c).sqrt();
                radius += r;
                if r > 0.0 {
                    dirs.extend(c.iter().map(|v| v / r));
                } else {
                    dirs.extend_from_slice(c);
                }
            }
            radii.push(radius / per_shell as f64);
            let (cents, labels) = spherical_kmeans(&dirs, k, parents, seed, s as u64);
            centroids.extend(cents);
            let mut lists = vec![Vec::new(); parents];
            for (i, &l) in labels.iter().enumerate() {
                lists[l].push((base + i) as u32);
            }
            children.extend(lists);
        }
        Ok(Self {
            codebook,
            config,
            per_shell,
            radii,
            centroids,
            children,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn config(&self) -> FastEncoderConfig {
        self.config
    }

    pub fn per_shell(&self) -> usize {
        self.per_shell
    }

    /// Mean codeword norm of each shell.
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Codeword indices under parent `p` of shell `s`.
    pub fn children(&self, shell: usize, parent: usize) -> &[u32] {
        &self.children[shell * self.config.parents + parent]
    }

    /// Shell with radius nearest `‖y‖`, then the `T` parents of highest
    /// inner product with `y`, then the nearest codeword among their
    /// children. Ties go to the lowest index at every stage.
    pub fn encode_block(&self, y: &[f64]) -> FastChoice {
        let k = self.codebook.k();
        let FastEncoderConfig {
            shells, parents, list, ..
        } = self.config;
        let rho = norm_sq(y).sqrt();
        let mut shell = 0;
        for s in 1..shells {
            if (rho - self.radii[s]).abs() < (rho - self.radii[shell]).abs() {
                shell = s;
            }
        }
        let cents = &self.centroids[shell * parents * k..(shell + 1) * parents * k];
        let mut scored: Vec<(f64, usize)> = cents.chunks_exact(k).map(|p| dot(y, p)).zip(0..).collect();
        if list < parents {
            scored.select_nth_unstable_by(list - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        }
        let mut best = (usize::MAX, f64::INFINITY);
        let mut evaluations = shells + parents;
        for &(_, p) in &scored[..list] {
            for &i in self.children(shell, p) {
                let e = dist_sq(y, self.codebook.codeword(i as usize));
                evaluations += 1;
                let i = i as usize;
                if e < best.1 || (e == best.1 && i < best.0) {
                    best = (i, e);
                }
            }
        }
        if best.0 == usize::MAX {
            // Every selected parent was empty; fall back to the shell.
            for i in shell * self.per_shell..(shell + 1) * self.per_shell {
                let e = dist_sq(y, self.codebook.codeword(i));
                evaluations += 1;
                if e < best.1 {
                    best = (i, e);
                }
            }
        }
        FastChoice {
            index: best.0,
            evaluations,
        }
    }
}

/// Spherical k-means on unit rows: assignment by largest inner product,
/// centroids renormalized, empty clusters left in place. Seeds are `K`
/// distinct rows drawn from stream `stream` of `seed`.
fn spherical_kmeans(dirs: &[f64], k: usize, clusters: usize, seed: u64, stream: u64) -> (Vec<f64>, Vec<usize>) {
    let m = dirs.len() / k;
    let mut rng = rng::stream(seed, stream);
    let mut picks = sample(&mut rng, m, clusters).into_vec();
    picks.sort_unstable();
    let mut cents: Vec<f64> = picks.iter().flat_map(|&i| dirs[i * k..(i + 1) * k].to_vec()).collect();
    let assign = |cents: &[f64]| -> Vec<usize> {
        dirs.chunks_exact(k)
            .map(|u| {
                let mut best = (0, f64::NEG_INFINITY);
                for (j, p) in cents.chunks_exact(k).enumerate() {
                    let ip = dot(u, p);
                    if ip > best.1 {
                        best = (j, ip);
                    }
                }
                best.0
            })
            .collect()
    };
    let mut labels = assign(&cents);
    for _ in 0..KMEANS_ITERATIONS {
        let mut sums = vec![0.0; clusters * k];
        for (u, &l) in dirs.chunks_exact(k).zip(&labels) {
            sums[l * k..(l + 1) * k].iter_mut().zip(u).for_each(|(s, v)| *s += v);
        }
        for (c, s) in cents.chunks_exact_mut(k).zip(sums.chunks_exact(k)) {
            let len = norm_sq(s).sqrt();
            if len > 0.0 {
                c.iter_mut().zip(s).for_each(|(c, v)| *c = v / len);
            }
        }
        let next = assign(&cents);
        if next == labels {
            break;
        }
        labels = next;
    }
    (cents, labels)
}

impl BlockQuantizer for FastEncoder {
    fn block_dim(&self) -> usize {
        self.codebook.k()
    }

    fn len(&self) -> usize {
        self.codebook.n()
    }

    fn codeword(&self, index: usize) -> &[f64] {
        self.codebook.codeword(index)
    }

    fn nearest(&self, y: &[f64]) -> usize {
        self.encode_block(y).index
    }

    fn content_hash(&self) -> u64 {
        self.codebook.content_hash()
    }
}
