//! Scalar numerics: normal CDF and its inverse, the inverse regularized
//! incomplete beta function, and adaptive Gauss–Kronrod quadrature.
//!
//! The forward special functions (`erfc`, `ln_gamma`, the regularized
//! incomplete beta) come from `statrs`; the inversions and the quadrature
//! are implemented here.

use statrs::function::{beta::beta_reg, erf::erfc, gamma::ln_gamma};

use crate::error::{Error, Result};

/// Standard normal CDF, evaluated through `erfc` so both tails keep relative
/// accuracy.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile Φ⁻¹(p).
///
/// Acklam's rational approximation (relative error ~1e-9) polished by one
/// Halley step against [`normal_cdf`].
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    };
    let x = if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta I_x(a, b).
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    beta_reg(a, b, x.clamp(0.0, 1.0))
}

/// Quantile function of Beta(a, b), reusable across many probabilities.
#[derive(Clone, Copy, Debug)]
pub struct BetaQuantile {
    a: f64,
    b: f64,
    ln_beta: f64,
}

impl BetaQuantile {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("beta shapes must be positive, got ({a}, {b})")));
        }
        Ok(Self {
            a,
            b,
            ln_beta: ln_beta(a, b),
        })
    }

    fn pdf(&self, x: f64) -> f64 {
        ((self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - self.ln_beta).exp()
    }

    fn tail_guess(&self, q: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let mean = a / (a + b);
        if q < incomplete_beta(mean, a, b) {
            // I_x ≈ x^a / (a B) near zero
            (((q * a).ln() + self.ln_beta) / a).exp().min(mean)
        } else {
            // 1 − I_x ≈ (1 − x)^b / (b B) near one
            (1.0 - ((((1.0 - q) * b).ln() + self.ln_beta) / b).exp()).max(mean)
        }
    }

    /// Solves I_z(a, b) = q. `lower` is a known lower bracket (0 when unknown);
    /// `start` optionally replaces the tail-asymptotic starting point.
    pub fn solve(&self, q: f64, lower: f64, start: Option<f64>) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("beta quantile needs q in (0, 1), got {q}")));
        }
        let (mut lo, mut hi) = (lower.max(0.0), 1.0);
        let mut x = start.unwrap_or_else(|| self.tail_guess(q));
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..300 {
            let f = incomplete_beta(x, self.a, self.b) - q;
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - f / self.pdf(x);
            let next = if newton > lo && newton < hi && newton.is_finite() {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) || hi - lo <= f64::EPSILON * hi {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }
}

/// Inverse regularized incomplete beta: z with I_z(a, b) = q.
pub fn beta_inv(q: f64, a: f64, b: f64) -> Result<f64> {
    BetaQuantile::new(a, b)?.solve(q, 0.0, None)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS_WEIGHTS[3];
    for (i, (&node, &w)) in GK_NODES.iter().zip(&GK_WEIGHTS).take(7).enumerate() {
        let dx = half * node;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over [a, b].
///
/// Intervals are bisected, largest error estimate first, until the summed
/// error estimate falls below `rel_tol · |I|`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut intervals = vec![{
        let (v, e) = gauss_kronrod_15(&f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= rel_tol * total.abs() || err < f64::MIN_POSITIVE {
            break;
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gauss_kronrod_15(&f, lo, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // Sum smallest-first for a reproducible, well-conditioned total.
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    intervals.iter().map(|iv| iv.2).sum()
}
