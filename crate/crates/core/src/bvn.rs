//! Univariate and bivariate standard normal distribution functions.
//!
//! The bivariate CDF follows Genz's reduction: for |ρ| < 0.925 the Plackett
//! integral is evaluated over `θ = asin(r)` with a 6/12/20-point
//! Gauss–Legendre rule chosen by |ρ|; closer to ±1 the singular part is
//! subtracted analytically and the smooth remainder is integrated with the
//! 20-point rule. Absolute error is below 1e-14 across the tested range.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`normal_cdf`]; maps 0 and 1 to ∓∞.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        // one Newton step against the accurate CDF
        let x = -SQRT_2 * erfc_inv(2.0 * p);
        let pdf = normal_pdf(x);
        if pdf > 0.0 {
            x - (normal_cdf(x) - p) / pdf
        } else {
            x
        }
    }
}

/// Gauss–Legendre nodes in (-1, 0) and their weights.
struct HalfRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn gauss_legendre_half(n: usize) -> HalfRule {
    let mut nodes = Vec::with_capacity(n / 2);
    let mut weights = Vec::with_capacity(n / 2);
    for i in 1..=n / 2 {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(-x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    HalfRule { nodes, weights }
}

fn rules() -> &'static [HalfRule; 3] {
    static RULES: OnceLock<[HalfRule; 3]> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            gauss_legendre_half(6),
            gauss_legendre_half(12),
            gauss_legendre_half(20),
        ]
    })
}

/// `P(X > h, Y > k)` for standard normals with correlation `rho`.
pub fn bvn_upper(h: f64, k: f64, rho: f64) -> Result<f64> {
    if h.is_nan() || k.is_nan() || !(-1.0..=1.0).contains(&rho) {
        return Err(Error::QuadratureFailure { h, k, rho });
    }
    if h == f64::INFINITY || k == f64::INFINITY {
        return Ok(0.0);
    }
    if h == f64::NEG_INFINITY {
        return Ok(normal_cdf(-k));
    }
    if k == f64::NEG_INFINITY {
        return Ok(normal_cdf(-h));
    }
    let value = genz_upper(h, k, rho);
    if !value.is_finite() || !(-1e-14..=1.0 + 1e-14).contains(&value) {
        return Err(Error::QuadratureFailure { h, k, rho });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// `P(X ≤ h, Y ≤ k)` for standard normals with correlation `rho`.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    bvn_upper(-h, -k, rho)
}

/// Gaussian copula `C(u1, u2; ρ) = Φ₂(Φ⁻¹(u1), Φ⁻¹(u2); ρ)`.
pub fn gaussian_copula(u1: f64, u2: f64, rho: f64) -> Result<f64> {
    if u1 <= 0.0 || u2 <= 0.0 {
        return Ok(0.0);
    }
    if u1 >= 1.0 {
        return Ok(u2.min(1.0));
    }
    if u2 >= 1.0 {
        return Ok(u1);
    }
    bvn_cdf(normal_quantile(u1), normal_quantile(u2), rho)
}

fn genz_upper(dh: f64, dk: f64, r: f64) -> f64 {
    let rule = if r.abs() < 0.3 {
        &rules()[0]
    } else if r.abs() < 0.75 {
        &rules()[1]
    } else {
        &rules()[2]
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            for sign in [1.0, -1.0] {
                let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (4.0 * PI) + normal_cdf(-h) * normal_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * (2.0 * PI).sqrt()
                * normal_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            for sign in [-1.0, 1.0] {
                let xs = (a * (sign * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                bvn += a
                    * w
                    * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                        - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
        bvn = -bvn / (2.0 * PI);
    }
    if r > 0.0 {
        bvn + normal_cdf(-h.max(k))
    } else {
        bvn = -bvn;
        if k > h {
            if h < 0.0 {
                bvn += normal_cdf(k) - normal_cdf(h);
            } else {
                bvn += normal_cdf(-h) - normal_cdf(-k);
            }
        }
        bvn
    }
}
