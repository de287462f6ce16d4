//! Chi-square distribution via the regularized incomplete gamma function.

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;
const TINY: f64 = 1e-300;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
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
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`.
fn incomplete_gamma(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_TERMS {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // Lentz continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_TERMS {
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
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let q = (log_prefix.exp() * h).min(1.0);
        (1.0 - q, q)
    }
}

fn check_df(df: usize) -> Result<()> {
    if df == 0 {
        return Err(Error::InvalidInput("chi-square needs df ≥ 1".into()));
    }
    Ok(())
}

/// `P(X ≤ x)` for `X ~ χ²_df`.
pub fn chi2_cdf(x: f64, df: usize) -> Result<f64> {
    check_df(df)?;
    if !(x >= 0.0) {
        return Err(Error::InvalidInput(format!("chi-square cdf needs x ≥ 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(incomplete_gamma(df as f64 / 2.0, x / 2.0).0)
}

/// Upper tail `P(X > x)`, computed directly so small p-values keep their
/// relative accuracy.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    check_df(df)?;
    if !(x >= 0.0) {
        return Err(Error::InvalidInput(format!("chi-square tail needs x ≥ 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(incomplete_gamma(df as f64 / 2.0, x / 2.0).1)
}

fn chi2_pdf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let k = df as f64 / 2.0;
    ((k - 1.0) * x.ln() - x / 2.0 - k * 2f64.ln() - ln_gamma(k)).exp()
}

/// Inverse of [`chi2_cdf`]: Newton steps safeguarded by bisection.
pub fn chi2_quantile(q: f64, df: usize) -> Result<f64> {
    check_df(df)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInput(format!("quantile level must be in (0, 1), got {q}")));
    }
    // work on whichever tail is small to avoid cancellation
    let residual = |x: f64| -> Result<f64> {
        Ok(if q > 0.5 {
            (1.0 - q) - chi2_sf(x, df)?
        } else {
            chi2_cdf(x, df)? - q
        })
    };
    let mut lo = 0.0;
    let mut hi = (df as f64).max(1.0);
    while residual(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = residual(x)?;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = chi2_pdf(x, df);
        let newton = if d > 0.0 { x - f / d } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - x).abs() <= 1e-15 * x.max(f64::MIN_POSITIVE);
        x = next;
        if done || hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(x)
}
