//! Small numerical helpers shared across modules.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::distribution::{ContinuousCDF, Normal};

/// ln(2π) / 2.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

const SCALE_FLOOR: f64 = 1e-100;
const SCALE_CEIL: f64 = 1e100;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample variance with divisor `n - 1` (zero for a single value).
pub fn variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Empirical quantile with linear interpolation between order statistics
/// (the common "type 7" rule). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log density of N(mean, variance) at `x`.
pub fn normal_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -HALF_LN_2PI - 0.5 * variance.ln() - 0.5 * d * d / variance
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Draw from Gamma(shape, rate); the density is proportional to
/// `x^{shape-1} exp(-rate x)`.
pub fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters must be positive and finite")
        .sample(rng)
}

/// Draw from InvGamma(shape, rate), density proportional to
/// `x^{-shape-1} exp(-rate / x)`, sampled as `1 / Gamma(shape, rate)`.
///
/// The result is clamped to `[1e-100, 1e100]` so scale parameters stay
/// strictly positive and finite.
pub fn inv_gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let rate = rate.clamp(SCALE_FLOOR, SCALE_CEIL);
    let g = gamma_draw(rng, shape, rate);
    (1.0 / g).clamp(SCALE_FLOOR, SCALE_CEIL)
}

/// Clamp a positive scale into the representable range used by the samplers.
pub fn clamp_scale(v: f64) -> f64 {
    if v.is_nan() {
        return 1.0;
    }
    v.clamp(SCALE_FLOOR, SCALE_CEIL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(&v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn std_normal_pdf_at_zero() {
        assert!((normal_log_pdf(0.0, 0.0, 1.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
    }
}
