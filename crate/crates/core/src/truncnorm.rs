//! Rounding link for count outcomes and the truncated-normal sampler used to
//! augment them.
//!
//! A count `p` is the rounding `h(y*)` of a latent continuous `y*`, with
//! `h(y*) = 0` on `(−∞, 0]` and `h(y*) = p` on `(p − 1, p]`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::stats::{log_normal_sf, normal_cdf, normal_pdf, normal_quantile};

/// `h(y*)`: 0 for `y* ≤ 0`, otherwise `⌈y*⌉`.
pub fn round_count(y_star: f64) -> Result<u64> {
    if !y_star.is_finite() {
        return Err(Error::validation(format!("latent value {y_star} is not finite")));
    }
    Ok(if y_star <= 0.0 { 0 } else { y_star.ceil() as u64 })
}

/// The interval `(lower, upper]` that rounds to `count`.
pub fn count_bucket(count: f64) -> (f64, f64) {
    if count <= 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (count - 1.0, count)
    }
}

/// Draws from `N(mean, var)` restricted to `(lower, upper]`.
///
/// Nearly flat bounded intervals use uniform rejection; everything else is
/// drawn by inversion, with far-tail intervals handled on the log-survival
/// scale so buckets hundreds of standard deviations out still sample exactly.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    var: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
        return Err(Error::numerical(
            "augment_counts",
            format!("degenerate truncated normal: mean {mean}, variance {var}"),
        ));
    }
    if !(lower < upper) {
        return Err(Error::validation(format!("empty truncation interval ({lower}, {upper}]")));
    }
    let s = var.sqrt();
    let a = (lower - mean) / s;
    let b = (upper - mean) / s;
    if let Some(z) = flat_interval_draw(a, b, rng) {
        return Ok(clamp_into(mean + s * z, lower, upper));
    }
    let u: f64 = rng.random();
    let z = if a >= 0.0 {
        upper_tail_inverse(a, b, u)
    } else if b <= 0.0 {
        -upper_tail_inverse(-b, -a, u)
    } else {
        let pa = normal_cdf(a);
        let pb = normal_cdf(b);
        normal_quantile(pa + u * (pb - pa))
    };
    Ok(clamp_into(mean + s * z, lower, upper))
}

/// On a bounded interval where the density varies by at most a factor of
/// two, a uniform proposal accepted with probability `φ(z)/max φ` is exact
/// and accepts at least half the time.
fn flat_interval_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Option<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return None;
    }
    let near = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    let far2 = (a * a).max(b * b);
    let log_ratio = 0.5 * (far2 - near * near);
    if log_ratio > std::f64::consts::LN_2 {
        return None;
    }
    let top = -0.5 * near * near;
    loop {
        let z = a + (b - a) * rng.random::<f64>();
        let e: f64 = rng.random();
        if e.ln() <= -0.5 * z * z - top {
            return Some(z);
        }
    }
}

/// Inverse CDF of the standard normal restricted to `[a, b]`, `0 ≤ a < b`.
fn upper_tail_inverse(a: f64, b: f64, u: f64) -> f64 {
    if a < 8.0 {
        let qa = normal_cdf(-a);
        let qb = if b.is_finite() { normal_cdf(-b) } else { 0.0 };
        let x = -normal_quantile(qa - u * (qa - qb));
        if x.is_finite() {
            return if b.is_finite() { x.clamp(a, b) } else { x.max(a) };
        }
    }
    let la = log_normal_sf(a);
    let lb = if b.is_finite() { log_normal_sf(b) } else { f64::NEG_INFINITY };
    // Q(x) = Q(a) − u (Q(a) − Q(b))
    let frac = -(lb - la).exp_m1();
    let target = la + (-u * frac).ln_1p();
    let x = inverse_log_sf(target, a);
    if b.is_finite() {
        x.clamp(a, b)
    } else {
        x.max(a)
    }
}

/// Solves `ln Q(x) = target` for `x ≥ lower`.
fn inverse_log_sf(target: f64, lower: f64) -> f64 {
    let mut x = if target > -700.0 {
        -normal_quantile(target.exp())
    } else {
        // Leading-order asymptote of ln Q.
        let t = -2.0 * target;
        (t - (t * 2.0 * std::f64::consts::PI).ln()).max(0.0).sqrt()
    };
    if !x.is_finite() {
        x = lower;
    }
    // Newton on ln Q; d/dx ln Q(x) = −φ(x)/Q(x).
    for _ in 0..8 {
        let lq = log_normal_sf(x);
        let hazard = (-0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln() - lq).exp();
        if !hazard.is_finite() || hazard == 0.0 {
            break;
        }
        let step = (lq - target) / hazard;
        x += step;
        if step.abs() <= 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Forces floating-point round-off back into `(lower, upper]`.
fn clamp_into(x: f64, lower: f64, upper: f64) -> f64 {
    if x > upper {
        upper
    } else if x <= lower {
        lower.next_up().min(upper)
    } else {
        x
    }
}

/// Closed-form density of the truncated normal, for tests.
#[doc(hidden)]
pub fn truncated_normal_pdf(x: f64, mean: f64, var: f64, lower: f64, upper: f64) -> f64 {
    if x <= lower || x > upper {
        return 0.0;
    }
    let s = var.sqrt();
    let z = normal_cdf((upper - mean) / s) - normal_cdf((lower - mean) / s);
    normal_pdf((x - mean) / s) / (s * z)
}
