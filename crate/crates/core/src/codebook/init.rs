use crate::directions::{
    directions, fibonacci_spiral_from, fibonacci_sphere_rotated, roberts_kronecker_from,
    DirectionScheme, GOLDEN_ANGLE_FRACTION,
};
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::special::BetaQuantile;

use super::{Codebook, Construction, InitScheme};

/// Second shape of the companded radial law,
/// `β_{d,k} = k/(k+2) · (d−k−2)/2 + 1`.
pub fn beta_shape(d: usize, k: usize) -> f64 {
    let (d, k) = (d as f64, k as f64);
    k / (k + 2.0) * (d - k - 2.0) / 2.0 + 1.0
}

fn check_block(d: usize, k: usize) -> Result<()> {
    if k == 0 || k >= d {
        return Err(Error::InvalidSpec(format!("need 1 ≤ k < d, got d={d} k={k}")));
    }
    Ok(())
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("codebook size must be positive".into()));
    }
    Ok(())
}

fn midpoint_quantile(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// `r_n = √BetaInv(q_n; k/2, β_{d,k})` at `q_n = (n − ½)/N`, always by the
/// iterative inverse.
pub fn beta_quantile_radii_generic(d: usize, k: usize, n: usize) -> Result<Vec<f64>> {
    check_block(d, k)?;
    check_count(n)?;
    let bq = BetaQuantile::new(k as f64 / 2.0, beta_shape(d, k))?;
    let mut radii = Vec::with_capacity(n);
    let mut previous: Option<f64> = None;
    for i in 0..n {
        let z = bq.solve(midpoint_quantile(i, n), previous.unwrap_or(0.0), previous)?;
        previous = Some(z);
        radii.push(z.sqrt());
    }
    Ok(radii)
}

/// Beta-quantile radii, strictly increasing. At `k = 2` the inverse has the
/// closed form `r_n = √(1 − (1 − q_n)^{4/d})`.
pub fn beta_quantile_radii(d: usize, k: usize, n: usize) -> Result<Vec<f64>> {
    check_block(d, k)?;
    check_count(n)?;
    if k != 2 {
        return beta_quantile_radii_generic(d, k, n);
    }
    let exponent = 4.0 / d as f64;
    Ok((0..n)
        .map(|i| {
            let q = midpoint_quantile(i, n);
            (-(exponent * (-q).ln_1p()).exp_m1()).sqrt()
        })
        .collect())
}

/// `n` increasing levels for the scalar source `f_{d,1}`, symmetric about 0:
/// level `n` sits at the signed companded quantile `q_n = (n − ½)/N`, i.e.
/// `±√BetaInv(|2q_n − 1|; ½, β_{d,1})`.
pub fn scalar_companded_levels(d: usize, n: usize) -> Result<Vec<f64>> {
    check_block(d, 1)?;
    check_count(n)?;
    let bq = BetaQuantile::new(0.5, beta_shape(d, 1))?;
    let mut positive = Vec::with_capacity(n / 2);
    // Folded quantiles of the upper half, shared by both signs.
    for i in n.div_ceil(2)..n {
        let folded = 2.0 * midpoint_quantile(i, n) - 1.0;
        positive.push(bq.solve(folded, 0.0, None)?.sqrt());
    }
    let mut levels: Vec<f64> = positive.iter().rev().map(|r| -r).collect();
    if n % 2 == 1 {
        levels.push(0.0);
    }
    levels.extend(positive);
    Ok(levels)
}

fn scale_directions(radii: &[f64], dirs: &PointSet) -> PointSet {
    let k = dirs.dim();
    let mut data = Vec::with_capacity(radii.len() * k);
    for (r, u) in radii.iter().zip(dirs.rows()) {
        data.extend(u.iter().map(|v| r * v));
    }
    PointSet::new(k, data).expect("rows of length k")
}

/// Beta-quantile radii paired index-by-index with the default direction
/// design for `k` (`r_n · u_n`). At `k = 1` the levels of
/// [`scalar_companded_levels`] are used; at `k = d` the codebook is
/// [`shell_init`] on the unit sphere.
pub fn init_codebook(d: usize, k: usize, n: usize) -> Result<Codebook> {
    if k == d && d >= 2 {
        // Whole-vector blocks all have radius 1.
        return shell_init(d, k, n);
    }
    if k == 1 {
        check_block(d, k)?;
        let levels = scalar_companded_levels(d, n)?;
        return Codebook::new(
            d,
            PointSet::new(1, levels)?,
            Construction {
                scheme: InitScheme::BetaQuantile,
                shells: n as u32,
                directions: None,
                lloyd: None,
            },
        );
    }
    init_codebook_with(d, k, n, DirectionScheme::for_dimension(k)?)
}

/// [`init_codebook`] with an explicit direction scheme (e.g. Roberts–Kronecker
/// at `k = 3`).
pub fn init_codebook_with(d: usize, k: usize, n: usize, scheme: DirectionScheme) -> Result<Codebook> {
    check_block(d, k)?;
    let radii = beta_quantile_radii(d, k, n)?;
    let dirs = directions(scheme, k, n)?;
    Codebook::new(
        d,
        scale_directions(&radii, dirs.points()),
        Construction {
            scheme: InitScheme::BetaQuantile,
            shells: n as u32,
            directions: Some(scheme),
            lloyd: None,
        },
    )
}

/// Every codeword on the typical radius `R̄ = √(k/d)`; `k = d` gives a
/// codebook on the unit sphere.
pub fn shell_init(d: usize, k: usize, n: usize) -> Result<Codebook> {
    if k == 0 || k > d || d < 2 {
        return Err(Error::InvalidSpec(format!("need 1 ≤ k ≤ d, got d={d} k={k}")));
    }
    check_count(n)?;
    let radius = (k as f64 / d as f64).sqrt();
    let (points, dirs) = if k == 1 {
        let levels = match n {
            1 => vec![radius],
            2 => vec![-radius, radius],
            _ => {
                return Err(Error::InvalidConfig(
                    "a scalar shell holds at most two distinct levels".into(),
                ))
            }
        };
        (PointSet::new(1, levels)?, None)
    } else {
        let scheme = DirectionScheme::for_dimension(k)?;
        let dirs = directions(scheme, k, n)?;
        (scale_directions(&vec![radius; n], dirs.points()), Some(scheme))
    };
    Codebook::new(
        d,
        points,
        Construction {
            scheme: InitScheme::Shell,
            shells: 1,
            directions: dirs,
            lloyd: None,
        },
    )
}

/// Union of `shells` Beta-quantile shells (`q_s = (s − ½)/S`), each carrying
/// its own `per_shell` directions. Shell `s` (0-based) uses the Fibonacci
/// sphere with azimuth advanced by `s·θ_g` turns at `k = 3`, the
/// Roberts–Kronecker indices `s·M_a + 1 ..= (s+1)·M_a` at `k ≥ 4`, and the
/// spiral indices of the same range at `k = 2`. Codewords are stored
/// shell-major, so shell `s` owns indices `s·M_a .. (s+1)·M_a`.
pub fn multishell_init(d: usize, k: usize, shells: usize, per_shell: usize) -> Result<Codebook> {
    check_block(d, k)?;
    if k < 2 {
        return Err(Error::InvalidConfig("multi-shell layout needs k ≥ 2".into()));
    }
    let n = shells
        .checked_mul(per_shell)
        .filter(|&n| n > 0 && n <= u32::MAX as usize)
        .ok_or_else(|| {
            Error::InvalidConfig(format!("invalid shell layout {shells} × {per_shell}"))
        })?;
    let radii = beta_quantile_radii(d, k, shells)?;
    let scheme = DirectionScheme::for_dimension(k)?;
    let mut data = Vec::with_capacity(n * k);
    for (s, &r) in radii.iter().enumerate() {
        let dirs = match scheme {
            DirectionScheme::Spiral2d => fibonacci_spiral_from((s * per_shell) as u64, per_shell)?,
            DirectionScheme::FibSphere => {
                fibonacci_sphere_rotated(per_shell, s as f64 * GOLDEN_ANGLE_FRACTION)?
            }
            DirectionScheme::RobertsKronecker => {
                roberts_kronecker_from(k, (s * per_shell) as u64, per_shell)?
            }
        };
        for u in dirs.points().rows() {
            data.extend(u.iter().map(|v| r * v));
        }
    }
    Codebook::new(
        d,
        PointSet::new(k, data)?,
        Construction {
            scheme: InitScheme::MultiShell,
            shells: shells as u32,
            directions: Some(scheme),
            lloyd: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::norm_sq;

    #[test]
    fn beta_shape_values() {
        assert_eq!(beta_shape(64, 2), 16.0);
        assert_eq!(beta_shape(4, 2), 1.0);
        assert!((beta_shape(64, 3) - 18.7).abs() < 1e-12);
    }

    #[test]
    fn radii_uniform_case() {
        let r = beta_quantile_radii(4, 2, 4).unwrap();
        let expect = [0.125f64, 0.375, 0.625, 0.875].map(f64::sqrt);
        for (a, b) in r.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((expect[0] - 0.353_553).abs() < 1e-6 && (expect[3] - 0.935_414).abs() < 1e-6);
    }

    #[test]
    fn radii_closed_form_values() {
        let r = beta_quantile_radii(64, 2, 2).unwrap();
        assert!((r[0] - (1.0 - 0.75f64.powf(1.0 / 16.0)).sqrt()).abs() < 1e-15);
        assert!((r[1] - (1.0 - 0.25f64.powf(1.0 / 16.0)).sqrt()).abs() < 1e-15);
    }

    // Beta(1.5, 18.7) quantiles at q = 1/8, 3/8, 5/8, 7/8 from an
    // independent statistics library.
    const K3_SHELLS: [f64; 4] = [0.134_555_294, 0.212_681_193, 0.280_704_649, 0.374_923_207];

    #[test]
    fn radii_k3_shells() {
        let r = beta_quantile_radii(64, 3, 4).unwrap();
        for (a, b) in r.iter().zip(K3_SHELLS) {
            assert!((a - b).abs() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn closed_form_matches_generic() {
        for d in [4, 16, 64, 256] {
            for n in [8, 64] {
                let a = beta_quantile_radii(d, 2, n).unwrap();
                let b = beta_quantile_radii_generic(d, 2, n).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-9, "d={d} n={n}");
                }
            }
        }
    }

    #[test]
    fn radii_strictly_increasing() {
        for &(d, k, n) in &[(64, 3, 1000), (64, 8, 4096), (256, 4, 333), (16, 15, 50)] {
            let r = beta_quantile_radii(d, k, n).unwrap();
            assert!(r.windows(2).all(|w| w[0] < w[1]), "d={d} k={k}");
            assert!(r.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn init_examples() {
        let cb = init_codebook(4, 2, 1).unwrap();
        let c = cb.codeword(0);
        assert!((c[0] - 0.5f64.sqrt()).abs() < 1e-15 && c[1] == 0.0);
        let cb = init_codebook(64, 2, 64).unwrap();
        // Largest radius: √(1 − (1/128)^{1/16}) = √(1 − 2^{−7/16}).
        let r_max = (1.0 - (-7.0f64 / 16.0).exp2()).sqrt();
        assert!((r_max - 0.511_455_694).abs() < 1e-8);
        let top = cb.codewords().rows().map(|c| norm_sq(c).sqrt()).fold(0.0, f64::max);
        assert!((top - r_max).abs() < 1e-12);
        let cb = init_codebook(64, 4, 8).unwrap();
        let norms: Vec<f64> = cb.codewords().rows().map(|c| norm_sq(c).sqrt()).collect();
        assert!(norms.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn scalar_levels_are_symmetric() {
        for n in [1, 2, 3, 16, 255] {
            let levels = scalar_companded_levels(64, n).unwrap();
            assert_eq!(levels.len(), n);
            assert!(levels.windows(2).all(|w| w[0] < w[1]));
            for (a, b) in levels.iter().zip(levels.iter().rev()) {
                assert_eq!(*a, -*b);
            }
        }
        // α = 0 and β_{3,1} = 1: the levels are the uniform midpoints ±0.5.
        let levels = scalar_companded_levels(3, 2).unwrap();
        assert!((levels[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shell_examples() {
        let cb = shell_init(64, 64, 16).unwrap();
        assert!(cb.codewords().rows().all(|c| (norm_sq(c) - 1.0).abs() < 1e-12));
        let cb = shell_init(128, 2, 8).unwrap();
        assert!(cb.codewords().rows().all(|c| (norm_sq(c).sqrt() - 0.125).abs() < 1e-15));
        let cb = shell_init(64, 2, 8).unwrap();
        assert!(cb.codewords().rows().all(|c| (norm_sq(c) - 1.0 / 32.0).abs() < 1e-15));
        let cb = shell_init(16, 4, 4).unwrap();
        assert!(cb.codewords().rows().all(|c| (norm_sq(c).sqrt() - 0.5).abs() < 1e-15));
    }

    #[test]
    fn multishell_examples() {
        let cb = multishell_init(64, 3, 4, 32).unwrap();
        assert_eq!(cb.n(), 128);
        for (s, expect) in K3_SHELLS.iter().enumerate() {
            for i in 0..32 {
                let r = norm_sq(cb.codeword(s * 32 + i)).sqrt();
                assert!((r - expect).abs() < 1e-8);
            }
        }
        let one = multishell_init(64, 3, 1, 16).unwrap();
        let median = beta_quantile_radii(64, 3, 1).unwrap()[0];
        assert!(one.codewords().rows().all(|c| (norm_sq(c).sqrt() - median).abs() < 1e-12));
        // One direction per radius: the radii are exactly init_codebook's.
        let spread = multishell_init(64, 3, 128, 1).unwrap();
        let plain = init_codebook(64, 3, 128).unwrap();
        for i in 0..128 {
            let a = norm_sq(spread.codeword(i)).sqrt();
            let b = norm_sq(plain.codeword(i)).sqrt();
            assert!((a - b).abs() < 1e-12);
        }
        assert!(multishell_init(64, 3, 0, 4).is_err());
        assert!(multishell_init(64, 3, usize::MAX, 2).is_err());
        let rk = multishell_init(64, 6, 3, 10).unwrap();
        assert_eq!(rk.n(), 30);
    }
}
