use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::directions::DirectionScheme;
use crate::error::{Error, Result};
use crate::points::{dist_sq, dot, nearest_row, norm_sq, PointSet};
use crate::source::{haar_rotation, sample_blocks};

use super::init::{init_codebook, init_codebook_with, multishell_init, shell_init};
use super::{Codebook, InitScheme};

const ASSIGN_CHUNK: usize = 1024;
const TRAIN_SALT: u64 = 0x7472_6169_6e5f_7365;

/// Lloyd–Max settings: `M` training samples, `R` restarts, `T_LM`
/// iterations per restart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LloydConfig {
    pub train_size: usize,
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl LloydConfig {
    /// `M = 30N`, `R = 4`, `T_LM = 25`.
    pub fn standard(n: usize, seed: u64) -> Self {
        Self {
            train_size: 30 * n,
            restarts: 4,
            iterations: 25,
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("at least one restart is required".into()));
        }
        if self.train_size < n {
            return Err(Error::InsufficientTrainingData {
                have: self.train_size,
                needed: n,
            });
        }
        Ok(())
    }

    /// Distance evaluations (`R·(T+1)·M·N`, scaled by `k`) this config costs.
    pub fn work(&self, n: usize, k: usize) -> f64 {
        self.restarts as f64 * (self.iterations as f64 + 1.0) * self.train_size as f64 * n as f64 * k as f64
    }

    /// Shrinks the config until [`work`](Self::work) fits in `max_work`:
    /// first fewer restarts, then fewer iterations, then fewer samples (down
    /// to `M = N`), and finally no iterations at all.
    pub fn within_budget(mut self, n: usize, k: usize, max_work: f64) -> Self {
        while self.work(n, k) > max_work && self.restarts > 1 {
            self.restarts -= 1;
        }
        while self.work(n, k) > max_work && self.iterations > 1 {
            self.iterations -= 1;
        }
        if self.work(n, k) > max_work {
            let per_sample = self.work(n, k) / self.train_size as f64;
            self.train_size = ((max_work / per_sample) as usize).max(n).min(self.train_size);
        }
        if self.work(n, k) > max_work {
            self.iterations = 0;
        }
        self
    }
}

/// One restart: distortions are mean squared block errors on the training set.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartTrace {
    pub restart: usize,
    /// Distortion of the rotated initialization.
    pub initial: f64,
    /// Distortion at each assignment step, then the final assignment.
    pub history: Vec<f64>,
    /// Distortion after each centroid update, under that iteration's assignment.
    pub after_centroid: Vec<f64>,
    pub repairs: usize,
    pub final_distortion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LloydReport {
    pub restarts: Vec<RestartTrace>,
    pub best_restart: usize,
    /// Mean squared block error of the returned codebook on the training set.
    pub train_distortion: f64,
}

/// Mean of `‖x − Q(x)‖²` over `samples` (per block, not per coordinate).
pub fn training_distortion(cb: &Codebook, samples: &PointSet) -> f64 {
    assert_eq!(cb.k(), samples.dim(), "sample dimension must match the codebook");
    let (_, dist) = assign(cb.codewords(), samples);
    mean(&dist)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn assign(codewords: &PointSet, samples: &PointSet) -> (Vec<u32>, Vec<f64>) {
    let k = samples.dim();
    let table = codewords.as_slice();
    let mut labels = vec![0u32; samples.len()];
    let mut dist = vec![0.0; samples.len()];
    labels
        .par_chunks_mut(ASSIGN_CHUNK)
        .zip(dist.par_chunks_mut(ASSIGN_CHUNK))
        .zip(samples.as_slice().par_chunks(ASSIGN_CHUNK * k))
        .for_each(|((l, d), x)| {
            for ((li, di), xi) in l.iter_mut().zip(d.iter_mut()).zip(x.chunks_exact(k)) {
                let (i, e) = nearest_row(table, xi);
                *li = i as u32;
                *di = e;
            }
        });
    (labels, dist)
}

struct Donor {
    load: f64,
    cell: usize,
}

impl PartialEq for Donor {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Donor {}

impl PartialOrd for Donor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Donor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.load.total_cmp(&other.load).then(other.cell.cmp(&self.cell))
    }
}

/// Centroid update followed by empty-cell repair. Returns the number of
/// repaired cells.
fn update(codewords: &mut PointSet, samples: &PointSet, labels: &[u32]) -> usize {
    let (n, k) = (codewords.len(), codewords.dim());
    let mut sums = vec![0.0; n * k];
    let mut counts = vec![0usize; n];
    for (x, &l) in samples.rows().zip(labels) {
        let l = l as usize;
        counts[l] += 1;
        sums[l * k..(l + 1) * k].iter_mut().zip(x).for_each(|(s, v)| *s += v);
    }
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            let row = codewords.row_mut(i);
            row.iter_mut()
                .zip(&sums[i * k..(i + 1) * k])
                .for_each(|(r, s)| *r = s / c as f64);
        }
    }
    let empty: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    if empty.is_empty() {
        return 0;
    }

    // Bucket the samples by cell, measured against the updated centroids.
    let mut start = vec![0usize; n + 1];
    for (i, &c) in counts.iter().enumerate() {
        start[i + 1] = start[i] + c;
    }
    let mut fill = start.clone();
    let mut members = vec![0usize; samples.len()];
    let mut error = vec![0.0; samples.len()];
    let mut load = vec![0.0; n];
    for (j, (x, &l)) in samples.rows().zip(labels).enumerate() {
        let l = l as usize;
        members[fill[l]] = j;
        fill[l] += 1;
        error[j] = dist_sq(x, codewords.row(l));
        load[l] += error[j];
    }
    let mut heap: BinaryHeap<Donor> = (0..n)
        .filter(|&i| counts[i] > 0)
        .map(|cell| Donor { load: load[cell], cell })
        .collect();
    let mut taken = vec![false; samples.len()];
    let mut repaired = 0;
    for cell in empty {
        let Some(mut donor) = heap.pop() else { break };
        if donor.load <= 0.0 {
            heap.push(donor);
            continue;
        }
        let far = members[start[donor.cell]..start[donor.cell + 1]]
            .iter()
            .copied()
            .filter(|&j| !taken[j] && error[j] > 0.0)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if error[b] >= error[j] => Some(b),
                _ => Some(j),
            });
        if let Some(j) = far {
            taken[j] = true;
            codewords.row_mut(cell).copy_from_slice(samples.row(j));
            donor.load = (donor.load - error[j]).max(0.0);
            repaired += 1;
        } else {
            donor.load = 0.0;
        }
        heap.push(donor);
    }
    repaired
}

fn rotated(init: &Codebook, restart: usize, seed: u64) -> Result<PointSet> {
    if restart == 0 {
        return Ok(init.codewords().clone());
    }
    let k = init.k();
    let omega = haar_rotation(k, seed.wrapping_add(restart as u64))?;
    let mut out = init.codewords().clone();
    for i in 0..out.len() {
        let c = init.codeword(i);
        omega.apply(c, out.row_mut(i));
    }
    Ok(out)
}

/// Multi-restart Lloyd–Max. Restart 0 starts from `init` itself; restart
/// `j ≥ 1` from `init` rotated by the Haar matrix of seed `cfg.seed + j`.
/// The restart with the lowest final training distortion wins (the earliest
/// on ties).
pub fn lloyd_refine(init: &Codebook, train: &PointSet, cfg: &LloydConfig) -> Result<(Codebook, LloydReport)> {
    cfg.validate(init.n())?;
    if train.dim() != init.k() {
        return Err(Error::InvalidInput(format!(
            "training samples have dimension {}, codebook has {}",
            train.dim(),
            init.k()
        )));
    }
    if train.len() < init.n() {
        return Err(Error::InsufficientTrainingData {
            have: train.len(),
            needed: init.n(),
        });
    }
    let mut best: Option<(PointSet, f64)> = None;
    let mut traces = Vec::with_capacity(cfg.restarts);
    let mut best_restart = 0;
    for restart in 0..cfg.restarts {
        let mut codewords = rotated(init, restart, cfg.seed)?;
        let mut history = Vec::with_capacity(cfg.iterations + 1);
        let mut after_centroid = Vec::with_capacity(cfg.iterations);
        let mut repairs = 0;
        let (mut labels, dist) = assign(&codewords, train);
        history.push(mean(&dist));
        for _ in 0..cfg.iterations {
            repairs += update(&mut codewords, train, &labels);
            after_centroid.push(mean(
                &train
                    .rows()
                    .zip(&labels)
                    .map(|(x, &l)| dist_sq(x, codewords.row(l as usize)))
                    .collect::<Vec<_>>(),
            ));
            let (next, dist) = assign(&codewords, train);
            labels = next;
            history.push(mean(&dist));
        }
        let final_distortion = *history.last().expect("initial assignment recorded");
        if best.as_ref().is_none_or(|(_, d)| final_distortion < *d) {
            best = Some((codewords, final_distortion));
            best_restart = restart;
        }
        traces.push(RestartTrace {
            restart,
            initial: history[0],
            history,
            after_centroid,
            repairs,
            final_distortion,
        });
    }
    let (codewords, train_distortion) = best.expect("at least one restart");
    let mut construction = init.construction().clone();
    construction.lloyd = Some(*cfg);
    let cb = Codebook::new(init.d(), codewords, construction)?;
    Ok((
        cb,
        LloydReport {
            restarts: traces,
            best_restart,
            train_distortion,
        },
    ))
}

/// Per-shell spherical Lloyd on a shell-major layout of `shells` shells.
/// Samples go to the shell whose radius is nearest their norm, then to the
/// nearest codeword on that shell; each codeword moves to its shell radius
/// times the normalized mean of its samples. Codewords stay on their shells,
/// and codewords without samples stay put.
pub fn shell_polish(cb: &Codebook, train: &PointSet, shells: usize, iterations: usize) -> Result<Codebook> {
    let (n, k) = (cb.n(), cb.k());
    if shells == 0 || n % shells != 0 {
        return Err(Error::Layout(format!("{shells} shells do not divide N={n}")));
    }
    if train.dim() != k {
        return Err(Error::InvalidInput("training dimension does not match the codebook".into()));
    }
    let per_shell = n / shells;
    let radii: Vec<f64> = (0..shells)
        .map(|s| {
            (0..per_shell)
                .map(|i| norm_sq(cb.codeword(s * per_shell + i)).sqrt())
                .sum::<f64>()
                / per_shell as f64
        })
        .collect();
    let shell_of: Vec<usize> = train
        .rows()
        .map(|x| {
            let r = norm_sq(x).sqrt();
            let mut best = 0;
            for s in 1..shells {
                if (r - radii[s]).abs() < (r - radii[best]).abs() {
                    best = s;
                }
            }
            best
        })
        .collect();
    let mut codewords = cb.codewords().clone();
    for _ in 0..iterations {
        let mut sums = vec![0.0; n * k];
        for (x, &s) in train.rows().zip(&shell_of) {
            let base = s * per_shell;
            let block = &codewords.as_slice()[base * k..(base + per_shell) * k];
            let mut best = 0;
            let mut best_ip = f64::NEG_INFINITY;
            for (i, c) in block.chunks_exact(k).enumerate() {
                let ip = dot(x, c);
                if ip > best_ip {
                    best_ip = ip;
                    best = i;
                }
            }
            let l = base + best;
            sums[l * k..(l + 1) * k].iter_mut().zip(x).for_each(|(a, v)| *a += v);
        }
        for l in 0..n {
            let s = &sums[l * k..(l + 1) * k];
            let len = norm_sq(s).sqrt();
            if len > 0.0 {
                let r = radii[l / per_shell];
                codewords.row_mut(l).iter_mut().zip(s).for_each(|(c, v)| *c = r * v / len);
            }
        }
    }
    Codebook::new(cb.d(), codewords, cb.construction().clone())
}

/// Result of the multi-shell factor search.
#[derive(Clone, Debug)]
pub struct FactorSearch {
    /// `(S, M_a, training distortion)` for every factorization, `S` ascending.
    pub candidates: Vec<(usize, usize, f64)>,
    pub shells: usize,
    pub per_shell: usize,
    pub codebook: Codebook,
}

fn divisors(n: usize) -> Vec<usize> {
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut s = 1;
    while s * s <= n {
        if n.is_multiple_of(s) {
            low.push(s);
            if s * s != n {
                high.push(n / s);
            }
        }
        s += 1;
    }
    low.extend(high.into_iter().rev());
    low
}

/// Scores every factorization `N = S·M_a` by training distortion after five
/// iterations of [`shell_polish`] and keeps the best; ties go to smaller `S`.
pub fn multishell_factor_search(d: usize, k: usize, n: usize, train: &PointSet) -> Result<FactorSearch> {
    if n == 0 {
        return Err(Error::InvalidConfig("codebook size must be positive".into()));
    }
    let mut candidates = Vec::new();
    let mut best: Option<(usize, Codebook, f64)> = None;
    for s in divisors(n) {
        let init = multishell_init(d, k, s, n / s)?;
        let polished = shell_polish(&init, train, s, 5)?;
        let mse = training_distortion(&polished, train);
        candidates.push((s, n / s, mse));
        if best.as_ref().is_none_or(|(_, _, b)| mse < *b) {
            best = Some((s, polished, mse));
        }
    }
    let (shells, codebook, _) = best.expect("N has at least one divisor");
    Ok(FactorSearch {
        candidates,
        shells,
        per_shell: n / shells,
        codebook,
    })
}

/// Which initial layout [`build_codebook`] starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    BetaQuantile,
    /// Beta-quantile radii with an explicit direction scheme.
    BetaQuantileWith(DirectionScheme),
    Shell,
    MultiShell { shells: usize },
    /// Multi-shell with `S` chosen by [`multishell_factor_search`].
    MultiShellSearch,
}

impl Layout {
    pub fn scheme(self) -> InitScheme {
        match self {
            Layout::BetaQuantile | Layout::BetaQuantileWith(_) => InitScheme::BetaQuantile,
            Layout::Shell => InitScheme::Shell,
            Layout::MultiShell { .. } | Layout::MultiShellSearch => InitScheme::MultiShell,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    pub layout: Layout,
    pub lloyd: LloydConfig,
}

impl BuildOptions {
    pub fn new(layout: Layout, lloyd: LloydConfig) -> Self {
        Self { layout, lloyd }
    }
}

#[derive(Clone, Debug)]
pub struct BuiltCodebook {
    pub codebook: Codebook,
    /// Unrefined layout the restarts started from.
    pub init: Codebook,
    pub report: LloydReport,
    pub factor_search: Option<FactorSearch>,
}

/// Seed of the training set drawn for a Lloyd config with seed `seed`.
pub fn training_seed(seed: u64) -> u64 {
    seed ^ TRAIN_SALT
}

/// Draws `M` training samples of `f_{d,k}`, builds the initial layout and
/// refines it with [`lloyd_refine`].
pub fn build_codebook(d: usize, k: usize, n: usize, opts: &BuildOptions) -> Result<BuiltCodebook> {
    opts.lloyd.validate(n)?;
    let train = sample_blocks(d, k, opts.lloyd.train_size, training_seed(opts.lloyd.seed))?;
    build_codebook_on(d, n, opts, &train)
}

/// [`build_codebook`] on a caller-supplied training set.
pub fn build_codebook_on(d: usize, n: usize, opts: &BuildOptions, train: &PointSet) -> Result<BuiltCodebook> {
    let k = train.dim();
    let mut factor_search = None;
    let init = match opts.layout {
        Layout::BetaQuantile => init_codebook(d, k, n)?,
        Layout::BetaQuantileWith(scheme) => init_codebook_with(d, k, n, scheme)?,
        Layout::Shell => shell_init(d, k, n)?,
        Layout::MultiShell { shells } => {
            if shells == 0 || !n.is_multiple_of(shells) {
                return Err(Error::InvalidConfig(format!("{shells} shells do not divide N={n}")));
            }
            multishell_init(d, k, shells, n / shells)?
        }
        Layout::MultiShellSearch => {
            let search = multishell_factor_search(d, k, n, train)?;
            let init = multishell_init(d, k, search.shells, search.per_shell)?;
            factor_search = Some(search);
            init
        }
    };
    let (codebook, report) = lloyd_refine(&init, train, &opts.lloyd)?;
    Ok(BuiltCodebook {
        codebook,
        init,
        report,
        factor_search,
    })
}
