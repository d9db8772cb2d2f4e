//! Special functions and quadrature rules.
//!
//! Hermite polynomials use the probabilists' convention, H_{k+1}(x) = x H_k(x) - k H_{k-1}(x),
//! so that they are orthogonal under the standard normal density with squared norm k!.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Largest k for which k! is finite in double precision.
pub const MAX_FACTORIAL: usize = 170;

/// Truncation policy for the power series below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl SeriesControl {
    pub fn new(max_terms: usize, abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if max_terms == 0 {
            return Err(invalid("max_terms", "must be at least 1"));
        }
        if !(abs_tol >= 0.0 && rel_tol >= 0.0) {
            return Err(invalid("abs_tol/rel_tol", "tolerances must be nonnegative"));
        }
        if abs_tol == 0.0 && rel_tol == 0.0 {
            return Err(invalid("abs_tol/rel_tol", "at least one tolerance must be positive"));
        }
        Ok(Self {
            max_terms,
            abs_tol,
            rel_tol,
        })
    }

    fn tolerance(&self, scale: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * scale.abs())
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            max_terms: 10_000,
            abs_tol: 0.0,
            rel_tol: 1e-16,
        }
    }
}

/// Probabilists' Hermite polynomial H_k(x).
pub fn hermite(k: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = x;
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// H_k(x) and its derivative k H_{k-1}(x).
pub fn hermite_with_derivative(k: usize, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = x;
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, k as f64 * prev)
}

/// Coefficients of H_k in increasing powers of x.
pub fn hermite_coefficients(k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for j in 1..k {
        let mut next = vec![0.0; j + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= j as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// k! as a double.
pub fn factorial(k: usize) -> Result<f64> {
    if k > MAX_FACTORIAL {
        return Err(Error::Overflow(k));
    }
    Ok((1..=k).fold(1.0, |acc, i| acc * i as f64))
}

/// Binomial coefficient C(n, k) as a double.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// κ_k H_k(x/σ) with κ_k = 1/√(k!), the unit-variance Hermite function under N(0, σ²).
pub fn hermite_normalized(k: usize, x: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let kappa = 1.0 / factorial(k)?.sqrt();
    Ok(kappa * hermite(k, x / sigma))
}

/// Kummer's confluent hypergeometric function 1F1(a; b; x) by direct summation.
pub fn hyp1f1(a: f64, b: f64, x: f64, ctl: SeriesControl) -> Result<f64> {
    if b <= 0.0 && b.fract() == 0.0 {
        return Err(Error::Domain("1F1 lower parameter is a nonpositive integer"));
    }
    let terminating = a <= 0.0 && a.fract() == 0.0;
    let mut sum = 1.0;
    let mut term = 1.0;
    for n in 0..ctl.max_terms {
        let nf = n as f64;
        term *= (a + nf) * x / ((b + nf) * (nf + 1.0));
        sum += term;
        if terminating && nf + 1.0 >= -a {
            return Ok(sum);
        }
        // Terms only shrink monotonically once n exceeds |a| and |x|.
        if nf > a.abs() + x.abs() && term.abs() <= ctl.tolerance(sum) {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        terms: ctl.max_terms,
    })
}

/// Jacobi theta function ϑ₃(z, q) = 1 + 2 Σ_{n≥1} q^{n²} cos(2nz).
///
/// Summation stops once the tail bound 2q^{(N+1)²}/(1-q) falls below tolerance.
pub fn jacobi_theta3(z: f64, q: f64, ctl: SeriesControl) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain("theta nome must lie in [0, 1)"));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    let mut sum = 1.0;
    for n in 1..=ctl.max_terms {
        let nf = n as f64;
        sum += 2.0 * q.powf(nf * nf) * (2.0 * nf * z).cos();
        let tail = 2.0 * q.powf((nf + 1.0) * (nf + 1.0)) / (1.0 - q);
        if tail <= ctl.tolerance(sum) {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence {
        terms: ctl.max_terms,
    })
}

/// Γ(x).
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// ln |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Surface area of the unit sphere in R^p, 2π^{p/2}/Γ(p/2).
///
/// # Panics
/// If `p == 0`.
pub fn sphere_surface(p: usize) -> f64 {
    assert!(p >= 1, "sphere dimension must be positive");
    let half = p as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal upper-tail quantile: the x with P(Z > x) = tail.
pub fn normal_upper_quantile(tail: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * erfc(mid / core::f64::consts::SQRT_2) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nodes and weights of an n-point Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Σ w_i f(x_i).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss–Hermite rule for the standard normal density: Σ w_i f(x_i) ≈ E f(Z).
    ///
    /// Golub–Welsch eigenvalues seed a Newton polish on the orthonormal recurrence.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "quadrature needs at least one node"));
        }
        let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let off = (i as f64).sqrt();
            jacobi[(i - 1, i)] = off;
            jacobi[(i, i - 1)] = off;
        }
        let eig = nalgebra::SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            let mut lower = 0.0;
            for _ in 0..8 {
                let (hn, hn1) = orthonormal_hermite_pair(n, *x);
                let step = hn / ((n as f64).sqrt() * hn1);
                *x -= step;
                lower = hn1;
                if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                    lower = orthonormal_hermite_pair(n, *x).1;
                    break;
                }
            }
            weights.push(1.0 / (n as f64 * lower * lower));
        }
        Ok(Self { nodes, weights })
    }

    /// Gauss–Legendre rule on [a, b] with weights summing to b - a.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "quadrature needs at least one node"));
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let nf = n as f64;
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() <= 1e-16 {
                    dp = legendre_with_derivative(n, x).1;
                    break;
                }
            }
            nodes.push(mid - half * x);
            weights.push(half * 2.0 / ((1.0 - x * x) * dp * dp));
        }
        Ok(Self { nodes, weights })
    }
}

/// (ĥ_n(x), ĥ_{n-1}(x)) for the orthonormal Hermite functions ĥ_k = H_k/√(k!).
fn orthonormal_hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    let nf = n as f64;
    let d = nf * (x * cur - prev) / (x * x - 1.0);
    (cur, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(2, 1.0), 0.0);
        assert_eq!(hermite(3, 2.0), 2.0);
        assert_eq!(hermite_coefficients(4), vec![3.0, 0.0, -6.0, 0.0, 1.0]);
    }

    #[test]
    fn normalized_hermite_values() {
        assert_eq!(hermite_normalized(1, 0.3, 1.0).unwrap(), 0.3);
        assert!(close(
            hermite_normalized(2, 0.0, 1.0).unwrap(),
            -1.0 / 2f64.sqrt(),
            1e-15
        ));
        let want = -2.0 / (2.0 * 6f64.sqrt());
        assert!(close(hermite_normalized(4, 1.0, 1.0).unwrap(), want, 1e-15));
        assert_eq!(hermite_normalized(171, 1.0, 1.0), Err(Error::Overflow(171)));
        assert!(hermite_normalized(1, 1.0, 0.0).is_err());
    }

    #[test]
    fn kummer_series() {
        let ctl = SeriesControl::default();
        assert_eq!(hyp1f1(0.7, 1.3, 0.0, ctl).unwrap(), 1.0);
        assert_eq!(hyp1f1(0.0, 0.5, 3.2, ctl).unwrap(), 1.0);
        assert_eq!(hyp1f1(-1.0, 0.5, 2.0, ctl).unwrap(), -3.0);
        assert!(close(hyp1f1(1.0, 1.0, 1.5, ctl).unwrap(), 1.5f64.exp(), 1e-14));
        assert!(matches!(hyp1f1(1.0, -2.0, 1.0, ctl), Err(Error::Domain(_))));
        let tight = SeriesControl::new(3, 0.0, 1e-16).unwrap();
        assert!(matches!(
            hyp1f1(1.0, 1.0, 10.0, tight),
            Err(Error::NonConvergence { .. })
        ));
    }

    #[test]
    fn theta_series() {
        let ctl = SeriesControl::default();
        assert_eq!(jacobi_theta3(0.0, 0.0, ctl).unwrap(), 1.0);
        let v = jacobi_theta3(0.0, 0.1, ctl).unwrap();
        assert!(close(v, 1.200_200_002_000_000_2, 1e-15));
        let naive: f64 = 1.0 + 2.0 * (1..200).map(|n| 0.5f64.powi(n * n)).sum::<f64>();
        assert!(close(jacobi_theta3(0.0, 0.5, ctl).unwrap(), naive, 1e-14));
        assert!(jacobi_theta3(0.0, 1.0, ctl).is_err());
        assert!(jacobi_theta3(0.0, -0.1, ctl).is_err());
    }

    #[test]
    fn sphere_surfaces() {
        assert!(close(sphere_surface(1), 2.0, 1e-14));
        assert!(close(sphere_surface(2), 2.0 * PI, 1e-14));
        assert!(close(sphere_surface(3), 4.0 * PI, 1e-13));
    }

    #[test]
    fn series_control_validation() {
        assert!(SeriesControl::new(0, 1e-10, 0.0).is_err());
        assert!(SeriesControl::new(10, 0.0, 0.0).is_err());
        assert!(SeriesControl::new(10, -1.0, 0.1).is_err());
    }

    #[test]
    fn normal_quantile() {
        let q = normal_upper_quantile(1.349_898_031_630_094_6e-3).unwrap();
        assert!(close(q, 3.0, 1e-12), "{q}");
        assert!(close(normal_upper_quantile(0.5).unwrap(), 0.0, 1e-12));
    }

    #[test]
    fn gauss_hermite_moments() {
        let q = Quadrature::gauss_hermite(20).unwrap();
        assert!(close(q.integrate(|_| 1.0), 1.0, 1e-14));
        assert!(close(q.integrate(|x| x * x), 1.0, 1e-13));
        assert!(close(q.integrate(|x| x.powi(4)), 3.0, 1e-12));
        assert!(close(q.integrate(|x| x.powi(8)), 105.0, 1e-10));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = Quadrature::gauss_legendre(10, 0.0, 2.0).unwrap();
        assert!(close(q.integrate(|_| 1.0), 2.0, 1e-14));
        assert!(close(q.integrate(|x| x.powi(5)), 64.0 / 6.0, 1e-12));
    }
}
