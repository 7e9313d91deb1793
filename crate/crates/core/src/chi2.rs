//! Chi-square confidence level.
//!
//! `c = Pr[chi2(nu) >= zeta] = 1 - P(nu/2, zeta/2)` where `P` is the
//! regularized lower incomplete gamma function. `P` is evaluated by its power
//! series below `a + 1` and by a Lentz continued fraction for `Q = 1 - P`
//! above, so the upper tail never suffers cancellation.

use crate::error::{Error, Result};

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Lanczos approximation of `ln Gamma(x)` for `x > 0` (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
pub fn gamma_pq(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidDevice(format!("incomplete gamma domain: a={a}, x={x}")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_pref = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (log_pref.exp() * sum).min(1.0);
        Ok((p, 1.0 - p))
    } else {
        // modified Lentz on Q(a,x) = pref / (x+1-a - 1(1-a)/(x+3-a - 2(2-a)/(...)))
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (log_pref.exp() * h).clamp(0.0, 1.0);
        Ok((1.0 - q, q))
    }
}

/// Chi-square CDF `Pr[chi2(nu) <= zeta]`.
pub fn chi_square_cdf(zeta: f64, nu: usize) -> Result<f64> {
    if nu == 0 {
        return Err(Error::NoRedundancy);
    }
    Ok(gamma_pq(nu as f64 / 2.0, zeta.max(0.0) / 2.0)?.0)
}

/// Confidence that the measurements agree with the model: `Pr[chi2(nu) >= zeta]`.
pub fn confidence(zeta: f64, nu: usize) -> Result<f64> {
    if nu == 0 {
        return Err(Error::NoRedundancy);
    }
    if zeta.is_nan() || zeta < 0.0 {
        return Err(Error::InvalidDevice(format!(
            "chi-square statistic must be >= 0, got {zeta}"
        )));
    }
    Ok(gamma_pq(nu as f64 / 2.0, zeta / 2.0)?.1)
}
