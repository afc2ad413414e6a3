//! Deterministic quasi-uniform direction sets on 𝕊^{k−1}.
//!
//! * `k = 2`: planar Fibonacci spiral (golden-angle steps).
//! * `k = 3`: Fibonacci sphere (equal-area latitude bands, golden-angle azimuth).
//! * `k ≥ 4`: Roberts–Kronecker rank-one sequence pushed through Φ⁻¹ and
//!   normalized.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::points::{norm_sq, PointSet};
use crate::special::inverse_normal_cdf;

/// Golden-angle fraction θ_g = 1 − 1/φ = (3 − √5)/2.
pub const GOLDEN_ANGLE_FRACTION: f64 = 0.381_966_011_250_105_15;

const XI_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionScheme {
    Spiral2d,
    FibSphere,
    RobertsKronecker,
}

impl DirectionScheme {
    /// Default scheme for a block size: spiral at 2, Fibonacci sphere at 3,
    /// Roberts–Kronecker above.
    pub fn for_dimension(k: usize) -> Result<Self> {
        match k {
            0 | 1 => Err(Error::InvalidDimension(format!(
                "no direction design for k = {k}"
            ))),
            2 => Ok(Self::Spiral2d),
            3 => Ok(Self::FibSphere),
            _ => Ok(Self::RobertsKronecker),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    scheme: DirectionScheme,
    points: PointSet,
}

impl DirectionSet {
    pub fn scheme(&self) -> DirectionScheme {
        self.scheme
    }

    pub fn k(&self) -> usize {
        self.points.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn into_points(self) -> PointSet {
        self.points
    }
}

fn require_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("direction count must be positive".into()));
    }
    Ok(())
}

/// Fibonacci spiral on the circle, starting at sequence index `first`
/// (0-based: index 0 is the point at angle 0).
pub fn fibonacci_spiral_from(first: u64, n: usize) -> Result<DirectionSet> {
    require_count(n)?;
    let mut data = Vec::with_capacity(2 * n);
    for i in 0..n as u64 {
        let theta = TAU * ((first + i) as f64 * GOLDEN_ANGLE_FRACTION).fract();
        data.extend_from_slice(&[theta.cos(), theta.sin()]);
    }
    Ok(DirectionSet {
        scheme: DirectionScheme::Spiral2d,
        points: PointSet::new(2, data)?,
    })
}

/// `u_n = (cos θ_n, sin θ_n)`, `θ_n = 2π(n−1)θ_g`, n = 1..N.
pub fn fibonacci_spiral(n: usize) -> Result<DirectionSet> {
    fibonacci_spiral_from(0, n)
}

/// Fibonacci sphere with every azimuth advanced by `azimuth_turns` full turns.
pub fn fibonacci_sphere_rotated(m: usize, azimuth_turns: f64) -> Result<DirectionSet> {
    require_count(m)?;
    let mut data = Vec::with_capacity(3 * m);
    for i in 0..m {
        let z = 1.0 - (2 * i + 1) as f64 / m as f64;
        let theta = TAU * (i as f64 * GOLDEN_ANGLE_FRACTION + azimuth_turns).fract();
        let rho = (1.0 - z * z).max(0.0).sqrt();
        data.extend_from_slice(&[rho * theta.cos(), rho * theta.sin(), z]);
    }
    Ok(DirectionSet {
        scheme: DirectionScheme::FibSphere,
        points: PointSet::new(3, data)?,
    })
}

/// `z_n = 1 − (2n−1)/M`, golden-angle azimuth, n = 1..M.
pub fn fibonacci_sphere(m: usize) -> Result<DirectionSet> {
    fibonacci_sphere_rotated(m, 0.0)
}

/// The unique root φ_k > 1 of φ^{k+1} = φ + 1.
pub fn kronecker_root(k: usize) -> f64 {
    let p = (k + 1) as i32;
    let f = |x: f64| x.powi(p) - x - 1.0;
    // f(1) = −1 < 0 < f(2) for all k ≥ 1.
    let (mut lo, mut hi) = (1.0_f64, 2.0_f64);
    let mut x = 1.5;
    for _ in 0..200 {
        let fx = f(x);
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / (p as f64 * x.powi(p - 1) - 1.0);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= f64::EPSILON * next {
            return next;
        }
        x = next;
    }
    x
}

/// Roberts–Kronecker directions for sequence indices `first+1 ..= first+n`:
/// `ξ_{n,j} = frac((n − ½) φ_k^{−j})`, `g = Φ⁻¹(ξ)`, `u = g/‖g‖`.
pub fn roberts_kronecker_from(k: usize, first: u64, n: usize) -> Result<DirectionSet> {
    if k < 2 {
        return Err(Error::InvalidDimension(format!(
            "Roberts–Kronecker directions need k ≥ 2, got {k}"
        )));
    }
    require_count(n)?;
    let phi = kronecker_root(k);
    let alphas: Vec<f64> = (1..=k as i32).map(|j| phi.powi(-j)).collect();
    let mut data = Vec::with_capacity(k * n);
    let mut g = vec![0.0; k];
    for i in 0..n as u64 {
        let offset = (first + i) as f64 + 0.5;
        for (gj, &a) in g.iter_mut().zip(&alphas) {
            let xi = (offset * a).fract().clamp(XI_CLAMP, 1.0 - XI_CLAMP);
            *gj = inverse_normal_cdf(xi)?;
        }
        let norm = norm_sq(&g).sqrt();
        if norm > 0.0 {
            data.extend(g.iter().map(|v| v / norm));
        } else {
            data.push(1.0);
            data.extend(std::iter::repeat_n(0.0, k - 1));
        }
    }
    Ok(DirectionSet {
        scheme: DirectionScheme::RobertsKronecker,
        points: PointSet::new(k, data)?,
    })
}

pub fn roberts_kronecker_directions(k: usize, n: usize) -> Result<DirectionSet> {
    roberts_kronecker_from(k, 0, n)
}

/// `n` directions on 𝕊^{k−1} from the given scheme.
pub fn directions(scheme: DirectionScheme, k: usize, n: usize) -> Result<DirectionSet> {
    match (scheme, k) {
        (DirectionScheme::Spiral2d, 2) => fibonacci_spiral(n),
        (DirectionScheme::FibSphere, 3) => fibonacci_sphere(n),
        (DirectionScheme::RobertsKronecker, k) if k >= 2 => roberts_kronecker_directions(k, n),
        (scheme, k) => Err(Error::InvalidConfig(format!(
            "direction scheme {scheme:?} does not apply to k = {k}"
        ))),
    }
}

/// `n` directions on 𝕊^{k−1} using the default scheme for `k`.
pub fn default_directions(k: usize, n: usize) -> Result<DirectionSet> {
    directions(DirectionScheme::for_dimension(k)?, k, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::dot;
    use crate::source::sample_sphere;

    #[test]
    fn spiral_first_points() {
        let s = fibonacci_spiral(1).unwrap();
        assert_eq!(s.direction(0), &[1.0, 0.0]);
        let s = fibonacci_spiral(2).unwrap();
        // Oracle: golden angle 2π(3 − √5)/2 evaluated independently.
        let angle = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        assert!((angle - 2.399_963_23).abs() < 1e-8);
        let u = s.direction(1);
        assert!((u[0] - angle.cos()).abs() < 1e-14 && (u[1] - angle.sin()).abs() < 1e-14);
        assert!((u[0] + 0.73736).abs() < 1e-5 && (u[1] - 0.67549).abs() < 1e-5);
    }

    #[test]
    fn spiral_gaps_are_bounded() {
        let n = 89;
        let s = fibonacci_spiral(n).unwrap();
        let mut angles: Vec<f64> = s.points().rows().map(|u| u[1].atan2(u[0]).rem_euclid(TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let mut min_gap = TAU - angles[n - 1] + angles[0];
        for w in angles.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!(min_gap > TAU / (phi * phi * n as f64) * 0.9, "{min_gap}");
    }

    #[test]
    fn fibonacci_sphere_values() {
        let s = fibonacci_sphere(2).unwrap();
        assert_eq!(s.direction(0)[2], 0.5);
        assert_eq!(s.direction(1)[2], -0.5);
        assert!((s.direction(0)[0] - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert_eq!(s.direction(0)[1], 0.0);
        let s = fibonacci_sphere(1).unwrap();
        assert_eq!(s.direction(0), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn fibonacci_sphere_cells_have_balanced_area() {
        // Monte-Carlo Voronoi cell areas from nearest-direction counts.
        let m = 256;
        let s = fibonacci_sphere(m).unwrap();
        let n = 1_000_000;
        let probes = sample_sphere(3, n, 21).unwrap();
        let mut counts = vec![0usize; m];
        for p in probes.rows() {
            let best = (0..m)
                .max_by(|&a, &b| dot(p, s.direction(a)).total_cmp(&dot(p, s.direction(b))))
                .unwrap();
            counts[best] += 1;
        }
        let expected = n as f64 / m as f64;
        for (i, &c) in counts.iter().enumerate() {
            let ratio = c as f64 / expected;
            assert!((0.5..=2.0).contains(&ratio), "cell {i}: {ratio}");
        }
    }

    #[test]
    fn kronecker_roots() {
        assert!((kronecker_root(1) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        // Oracle: plain bisection on [1, 2].
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid.powi(3) - mid - 1.0 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((kronecker_root(2) - lo).abs() < 1e-14);
        assert!((kronecker_root(2) - 1.324_717_957_2).abs() < 1e-10);
        let r8 = kronecker_root(8);
        assert!((r8.powi(9) - r8 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roberts_kronecker_first_point() {
        let s = roberts_kronecker_directions(2, 1).unwrap();
        // Stage-by-stage oracle for n = 1.
        let phi: f64 = 1.324_717_957_244_746;
        let xi = [0.5 / phi, 0.5 / (phi * phi)];
        assert!((xi[0] - 0.377_438_833).abs() < 1e-8);
        assert!((xi[1] - 0.284_920_145).abs() < 1e-8);
        let g: Vec<f64> = xi.iter().map(|&x| inverse_normal_cdf(x).unwrap()).collect();
        let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
        let u = s.direction(0);
        assert!((u[0] - g[0] / norm).abs() < 1e-12 && (u[1] - g[1] / norm).abs() < 1e-12);
    }

    #[test]
    fn roberts_kronecker_unit_and_centered() {
        let s = roberts_kronecker_directions(4, 512).unwrap();
        for u in s.points().rows() {
            assert!((norm_sq(u).sqrt() - 1.0).abs() < 1e-12);
        }
        for j in 0..4 {
            let m = s.points().rows().map(|u| u[j]).sum::<f64>() / 512.0;
            assert!(m.abs() < 0.06, "coordinate {j}: {m}");
        }
        assert!(roberts_kronecker_directions(1, 4).is_err());
    }

    #[test]
    fn direction_sets_are_distinct_and_deterministic() {
        for (k, set) in [
            (2, default_directions(2, 512).unwrap()),
            (3, default_directions(3, 512).unwrap()),
            (5, default_directions(5, 512).unwrap()),
        ] {
            assert_eq!(set, default_directions(k, 512).unwrap());
            for i in 0..set.len() {
                for j in 0..i {
                    assert_ne!(set.direction(i), set.direction(j), "k={k} ({i},{j})");
                }
            }
        }
        assert_eq!(
            DirectionScheme::for_dimension(3).unwrap(),
            DirectionScheme::FibSphere
        );
        assert!(directions(DirectionScheme::RobertsKronecker, 3, 16).is_ok());
        assert!(directions(DirectionScheme::FibSphere, 4, 16).is_err());
    }

    #[test]
    fn covering_radius_shrinks_with_count() {
        let probes = sample_sphere(4, 100_000, 77).unwrap();
        for (scheme, k) in [
            (DirectionScheme::Spiral2d, 2),
            (DirectionScheme::FibSphere, 3),
            (DirectionScheme::RobertsKronecker, 3),
            (DirectionScheme::RobertsKronecker, 4),
        ] {
            let mut last = f64::INFINITY;
            for n in [8, 64, 512] {
                let set = directions(scheme, k, n).unwrap();
                let cover = probes
                    .rows()
                    .map(|p| {
                        let p = &p[..k];
                        let norm = norm_sq(p).sqrt();
                        let best = set
                            .points()
                            .rows()
                            .map(|u| dot(p, u) / norm)
                            .fold(f64::NEG_INFINITY, f64::max);
                        best.clamp(-1.0, 1.0).acos()
                    })
                    .fold(0.0, f64::max);
                assert!(cover < last, "{scheme:?} k={k} n={n}: {cover} vs {last}");
                last = cover;
            }
        }
    }
}
