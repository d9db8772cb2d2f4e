//! Streaming moments, sample statistics and exact binomial intervals.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::specfn::ln_gamma;

/// Running central moments up to order four (Pébay's update and merge rules).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d * d2 * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        *self = Self {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
        };
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count as f64 - 1.0)
    }

    pub fn std_err_mean(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance, √((μ₄ - σ⁴)/N).
    pub fn std_err_variance(&self) -> f64 {
        let n = self.count as f64;
        let mu2 = self.m2 / n;
        let mu4 = self.m4 / n;
        ((mu4 - mu2 * mu2).max(0.0) / n).sqrt()
    }
}

/// Sample covariance of paired draws and its large-sample standard error.
pub fn covariance_with_std_err(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut prod = Moments::new();
    for (a, b) in x.iter().zip(y) {
        prod.push((a - mx) * (b - my));
    }
    let cov = prod.mean() * n / (n - 1.0);
    (cov, prod.std_err_mean())
}

/// Pearson correlation of two weighted samples (weights need not be normalized).
pub fn weighted_correlation(x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for ((a, b), c) in x.iter().zip(y).zip(w) {
        let (da, db) = (a - mx, b - my);
        sxy += c * da * db;
        sxx += c * da * da;
        syy += c * db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// Weights c_j such that Σ c_j q_j is the least-squares intercept of q_j ≈ a + b x_j.
pub fn intercept_weights(x: &[f64]) -> Result<Vec<f64>> {
    let m = x.len() as f64;
    if x.len() < 2 {
        return Err(invalid("theta_grid", "need at least two positive amplitudes"));
    }
    let mean = x.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("theta_grid", "amplitudes must be distinct"));
    }
    Ok(x.iter().map(|v| 1.0 / m - mean * (v - mean) / sxx).collect())
}

/// Order statistic giving the empirical (1 - α) quantile: the ⌈(1-α)N⌉-th smallest value.
pub fn upper_quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let rank = ((1.0 - alpha) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Number of entries of an ascending slice strictly greater than `tau`.
pub fn count_above(sorted: &[f64], tau: f64) -> usize {
    sorted.len() - sorted.partition_point(|&v| v <= tau)
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_fraction(1.0 - x, b, a) / b
    }
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if regularized_beta(mid, a, b) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper–Pearson) two-sided interval for a binomial proportion.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(successes <= trials && trials > 0);
    let tail = 0.5 * (1.0 - confidence);
    let k = successes as f64;
    let n = trials as f64;
    let lower = if successes == 0 {
        0.0
    } else {
        beta_quantile(tail, k, n - k + 1.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        beta_quantile(1.0 - tail, k + 1.0, n - k)
    };
    (lower, upper)
}

/// Binomial standard error √(p(1-p)/N).
pub fn binomial_std_err(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..257).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let all = Moments::from_slice(&xs);
        let mut left = Moments::from_slice(&xs[..100]);
        left.merge(&Moments::from_slice(&xs[100..]));
        assert!((all.mean() - left.mean()).abs() < 1e-12);
        assert!((all.variance() - left.variance()).abs() < 1e-10);
        assert!((all.m3 - left.m3).abs() < 1e-8 * all.m3.abs().max(1.0));
        assert!((all.m4 - left.m4).abs() < 1e-8 * all.m4.abs());
    }

    #[test]
    fn intercept_of_exact_line() {
        let x = [0.001, 0.002, 0.005];
        let c = intercept_weights(&x).unwrap();
        let q: Vec<f64> = x.iter().map(|v| 2.0 + 7.0 * v).collect();
        let a: f64 = c.iter().zip(&q).map(|(c, q)| c * q).sum();
        assert!((a - 2.0).abs() < 1e-10);
        assert!(intercept_weights(&[0.1]).is_err());
    }

    #[test]
    fn incomplete_beta_known_values() {
        // I_x(1, 1) = x; I_x(2, 3) = 1 - (1-x)^3 (1 + 3x).
        assert!((regularized_beta(0.3, 1.0, 1.0) - 0.3).abs() < 1e-14);
        let x: f64 = 0.4;
        let want = 1.0 - (1.0 - x).powi(3) * (1.0 + 3.0 * x);
        assert!((regularized_beta(x, 2.0, 3.0) - want).abs() < 1e-13);
    }

    #[test]
    fn clopper_pearson_brackets_estimate() {
        let (lo, hi) = clopper_pearson(10, 1000, 0.95);
        assert!(lo < 0.01 && 0.01 < hi);
        // Zero successes: upper bound is 1 - (α/2)^{1/N}.
        let (lo, hi) = clopper_pearson(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-10);
    }

    #[test]
    fn quantile_and_counts() {
        let v = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(upper_quantile_sorted(&v, 0.25), 3.0);
        assert_eq!(count_above(&v, 3.0), 1);
    }
}
