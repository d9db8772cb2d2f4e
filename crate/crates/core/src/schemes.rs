//! Detection functions and their matched embedders.
//!
//! A [`Scheme`] is built from a block detector `t_p : R^p → R` applied to the
//! `n / p` blocks of the signal:
//!
//! ```text
//! t(r) = √(p/n) Σ_b ε_b t_p(r_b),        w(s) = k_w ∇t(s),   k_w = √(n/η)
//! ```
//!
//! so that t has unit variance under the host and the embedder has unit power
//! per sample whenever the block detector is unit-variance with E‖∇t_p‖² = η.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt::Debug;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::lattice::{Lattice, VoronoiMoments};
use crate::rng::{labels, substream};
use crate::specfn::{factorial, hermite_coefficients, sphere_surface, Quadrature};

/// A detection function on one block, with analytic derivatives.
pub trait BlockDetector: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, r: &[f64]) -> f64;
    fn gradient(&self, r: &[f64], out: &mut [f64]);
    fn laplacian(&self, r: &[f64]) -> f64;
    /// Nominal efficacy E‖∇t_p‖² under the intended host.
    fn efficiency(&self) -> f64;
    /// Whether the function solves the fundamental equation with its nominal efficacy.
    fn is_fundamental(&self) -> bool {
        true
    }

    /// Σ_b ε_b t_p(r_b).
    fn value_sum(&self, r: &[f64], signs: &[f64]) -> f64 {
        let p = self.dim();
        r.chunks_exact(p)
            .zip(signs)
            .map(|(b, e)| e * self.value(b))
            .sum()
    }

    /// out_b = scale · ε_b ∇t_p(r_b).
    fn gradient_blocks(&self, r: &[f64], signs: &[f64], scale: f64, out: &mut [f64]) {
        let p = self.dim();
        for ((b, o), e) in r.chunks_exact(p).zip(out.chunks_exact_mut(p)).zip(signs) {
            self.gradient(b, o);
            let c = scale * e;
            o.iter_mut().for_each(|v| *v *= c);
        }
    }

    /// Sums along an affine path through the blocks. With
    /// r0_b = γ(s_b + σ z_b) and v_b = γ(c_e ε_b ∇t_p(s_b) + c_z z_b), writes
    /// Σ_b ε_b t_p(r0_b) to `sums[0]` and Σ_b ε_b t_p(r0_b + θ_j v_b) to
    /// `sums[1 + j]`. An empty `z` stands for zero noise.
    fn path_sums(
        &self,
        s: &[f64],
        z: &[f64],
        signs: &[f64],
        path: &AffinePath,
        thetas: &[f64],
        sums: &mut [f64],
    ) {
        block_path_sums(self, s, z, signs, path, thetas, sums);
    }
}

/// Default body of [`BlockDetector::path_sums`], usable from overrides.
pub fn block_path_sums<D: BlockDetector + ?Sized>(
    det: &D,
    s: &[f64],
    z: &[f64],
    signs: &[f64],
    path: &AffinePath,
    thetas: &[f64],
    sums: &mut [f64],
) {
    let p = det.dim();
    let noisy = !z.is_empty();
    let mut buf = vec![0.0; 4 * p];
    let (g, rest) = buf.split_at_mut(p);
    let (r0, rest) = rest.split_at_mut(p);
    let (v, x) = rest.split_at_mut(p);
    sums[..=thetas.len()].iter_mut().for_each(|t| *t = 0.0);
    for (b, e) in signs.iter().enumerate() {
        let sb = &s[b * p..(b + 1) * p];
        if path.embed_scale != 0.0 {
            det.gradient(sb, g);
        }
        let ce = path.embed_scale * e;
        for i in 0..p {
            let zi = if noisy { z[b * p + i] } else { 0.0 };
            r0[i] = path.gamma * (sb[i] + path.sigma_z * zi);
            v[i] = path.gamma * (ce * g[i] + path.noise_gain * zi);
        }
        sums[0] += e * det.value(r0);
        for (j, th) in thetas.iter().enumerate() {
            for i in 0..p {
                x[i] = r0[i] + th * v[i];
            }
            sums[1 + j] += e * det.value(x);
        }
    }
}

/// How the received signal moves with θ: r(θ) = γ(s + σ z) + θ γ(c_e w̃(s) + c_z z),
/// w̃ being the unit-power matched embedder scaled by `embed_scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePath {
    pub gamma: f64,
    pub sigma_z: f64,
    pub noise_gain: f64,
    pub embed_scale: f64,
}

/// Scalar version of [`BlockDetector::path_sums`] for one-sample blocks.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn scalar_path_sums(
    s: &[f64],
    z: &[f64],
    signs: &[f64],
    path: &AffinePath,
    thetas: &[f64],
    sums: &mut [f64],
    slope: impl Fn(f64) -> f64 + Copy,
    value: impl Fn(f64) -> f64 + Copy,
) {
    // Fixed grid lengths keep the accumulators in registers.
    macro_rules! fixed {
        ($m:literal) => {{
            let th: &[f64; $m] = thetas.try_into().unwrap();
            let acc = if z.is_empty() {
                scalar_path_fixed::<$m, false>(s, z, signs, path, th, slope, value)
            } else {
                scalar_path_fixed::<$m, true>(s, z, signs, path, th, slope, value)
            };
            sums[..=$m].copy_from_slice(&acc[..=$m]);
        }};
    }
    match thetas.len() {
        0 => fixed!(0),
        1 => fixed!(1),
        2 => fixed!(2),
        3 => fixed!(3),
        m => {
            let mut acc = vec![0.0; m + 1];
            let noisy = !z.is_empty();
            for (i, (&x, &e)) in s.iter().zip(signs).enumerate() {
                let zi = if noisy { z[i] } else { 0.0 };
                let r0 = path.gamma * (x + path.sigma_z * zi);
                let v = path.gamma * (path.embed_scale * e * slope(x) + path.noise_gain * zi);
                acc[0] += e * value(r0);
                for (j, th) in thetas.iter().enumerate() {
                    acc[1 + j] += e * value(r0 + th * v);
                }
            }
            sums[..=m].copy_from_slice(&acc);
        }
    }
}

#[inline(always)]
fn scalar_path_fixed<const M: usize, const NOISY: bool>(
    s: &[f64],
    z: &[f64],
    signs: &[f64],
    path: &AffinePath,
    thetas: &[f64; M],
    slope: impl Fn(f64) -> f64,
    value: impl Fn(f64) -> f64,
) -> [f64; 4] {
    let mut acc = [0.0; 4];
    let n = s.len().min(signs.len());
    let (s, signs) = (&s[..n], &signs[..n]);
    let z = if NOISY { &z[..n] } else { z };
    let embed = path.embed_scale != 0.0;
    for i in 0..n {
        let (x, e) = (s[i], signs[i]);
        let zi = if NOISY { z[i] } else { 0.0 };
        let r0 = path.gamma * (x + path.sigma_z * zi);
        let mut v = path.gamma * path.noise_gain * zi;
        if embed && M > 0 {
            v += path.gamma * path.embed_scale * e * slope(x);
        }
        acc[0] += e * value(r0);
        for j in 0..M {
            acc[1 + j] += e * value(r0 + thetas[j] * v);
        }
    }
    acc
}

/// Secret sign sequence ε_b applied to the blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignKey {
    /// ε_b = +1 for every block.
    Unit,
    /// ε_b uniform on {±1}, derived from a 64-bit key.
    Seeded(u64),
}

impl SignKey {
    pub fn signs(&self, blocks: usize) -> Vec<f64> {
        match *self {
            SignKey::Unit => vec![1.0; blocks],
            SignKey::Seeded(seed) => {
                let mut rng = substream(seed, labels::KEY, 0);
                (0..blocks)
                    .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SphereVariant {
    /// C cos(√η ρ), needs √η R₀ ≡ 0 mod π.
    Cosine,
    /// C sin(√η ρ), needs √η R₀ ≡ 0 mod 2π.
    Sine,
}

/// Family identity and the parameters the closed-form maps need.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Polynomial { k: usize, sigma: f64 },
    Sinusoidal { k: usize, eta_base: f64 },
    Janis { p: usize, sigma: f64 },
    MultiHermite { orders: Vec<usize>, sigma: f64 },
    Hyperboloid { p: usize, sigma: f64 },
    SphereHardening { p: usize, r0: f64, eta: f64, variant: SphereVariant },
    Projection { base: Box<Family>, lambda_norm: f64 },
    LatticeSinusoid { k: Vec<i64>, eta: f64 },
    LatticeDcdm { eta: f64 },
    Mixture { components: Vec<Family>, weights: Vec<f64> },
}

// ---------------------------------------------------------------------------
// Block detectors

/// (H_k, H_{k-1}, H_{k-2}) with H_{-1} = H_{-2} = 0.
#[inline]
fn hermite_triple(k: usize, x: f64) -> (f64, f64, f64) {
    let (mut h2, mut h1, mut h0) = (0.0, 0.0, 1.0);
    for j in 0..k {
        let next = x * h0 - j as f64 * h1;
        h2 = h1;
        h1 = h0;
        h0 = next;
    }
    (h0, h1, h2)
}

/// κ_k H_k(r/σ), the order-k polynomial solution for N(0, σ²) hosts.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteDetector {
    k: usize,
    sigma: f64,
    kappa: f64,
    // t(r) = r^(k mod 2) Σ_i a_i r^(2i) and t'(r) = r^((k-1) mod 2) Σ_i b_i r^(2i).
    value_poly: Vec<f64>,
    slope_poly: Vec<f64>,
}

/// Coefficients of c·H_k(r/σ) in powers of r², dropping the odd factor r.
fn even_part(k: usize, sigma: f64, c: f64) -> Vec<f64> {
    let coeffs = hermite_coefficients(k);
    coeffs
        .iter()
        .enumerate()
        .skip(k % 2)
        .step_by(2)
        .map(|(i, a)| c * a / sigma.powi(i as i32))
        .collect()
}

#[inline(always)]
fn horner(poly: &[f64], u: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, a| acc * u + a)
}

#[inline(always)]
fn horner_fixed<const N: usize>(poly: &[f64; N], u: f64) -> f64 {
    let mut acc = 0.0;
    for i in (0..N).rev() {
        acc = acc * u + poly[i];
    }
    acc
}

impl HermiteDetector {
    pub fn new(k: usize, sigma: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "order must be at least 1"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma_x", "must be positive"));
        }
        let kappa = 1.0 / factorial(k)?.sqrt();
        Ok(Self {
            k,
            sigma,
            kappa,
            value_poly: even_part(k, sigma, kappa),
            slope_poly: even_part(k - 1, sigma, kappa * k as f64 / sigma),
        })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    #[inline(always)]
    fn eval(&self, r: f64) -> f64 {
        let v = horner(&self.value_poly, r * r);
        if self.k % 2 == 1 {
            r * v
        } else {
            v
        }
    }

    #[inline(always)]
    fn slope(&self, r: f64) -> f64 {
        let v = horner(&self.slope_poly, r * r);
        if self.k % 2 == 0 {
            r * v
        } else {
            v
        }
    }
}

impl BlockDetector for HermiteDetector {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, r: &[f64]) -> f64 {
        self.eval(r[0])
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        out[0] = self.slope(r[0]);
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        let x = r[0] / self.sigma;
        let k = self.k as f64;
        self.kappa * k * (k - 1.0) * hermite_triple(self.k, x).2 / (self.sigma * self.sigma)
    }
    fn efficiency(&self) -> f64 {
        self.k as f64 / (self.sigma * self.sigma)
    }
    fn value_sum(&self, r: &[f64], signs: &[f64]) -> f64 {
        r.iter().zip(signs).map(|(x, e)| e * self.eval(*x)).sum()
    }
    fn gradient_blocks(&self, r: &[f64], signs: &[f64], scale: f64, out: &mut [f64]) {
        for ((x, o), e) in r.iter().zip(out.iter_mut()).zip(signs) {
            *o = scale * e * self.slope(*x);
        }
    }
    fn path_sums(
        &self,
        s: &[f64],
        z: &[f64],
        signs: &[f64],
        path: &AffinePath,
        thetas: &[f64],
        sums: &mut [f64],
    ) {
        // Fixed-length coefficient arrays let Horner's rule unroll.
        macro_rules! fixed {
            ($odd:literal, $nv:literal, $ns:literal) => {{
                let vp: [f64; $nv] = self.value_poly[..].try_into().unwrap();
                let sp: [f64; $ns] = self.slope_poly[..].try_into().unwrap();
                let value = |x: f64| {
                    let v = horner_fixed(&vp, x * x);
                    if $odd {
                        x * v
                    } else {
                        v
                    }
                };
                let slope = |x: f64| {
                    let v = horner_fixed(&sp, x * x);
                    if $odd {
                        v
                    } else {
                        x * v
                    }
                };
                scalar_path_sums(s, z, signs, path, thetas, sums, slope, value)
            }};
        }
        match self.k {
            1 => fixed!(true, 1, 1),
            2 => fixed!(false, 2, 1),
            3 => fixed!(true, 2, 2),
            4 => fixed!(false, 3, 2),
            5 => fixed!(true, 3, 3),
            6 => fixed!(false, 4, 3),
            7 => fixed!(true, 4, 4),
            _ => scalar_path_sums(s, z, signs, path, thetas, sums, |x| self.slope(x), |x| self.eval(x)),
        }
    }
}

/// √2 cos(f r) on a flat host with cells of width π/f₁.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidDetector {
    freq: f64,
}

impl SinusoidDetector {
    pub fn new(freq: f64) -> Result<Self> {
        if !(freq > 0.0 && freq.is_finite()) {
            return Err(invalid("eta", "frequency must be positive"));
        }
        Ok(Self { freq })
    }
}

impl BlockDetector for SinusoidDetector {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, r: &[f64]) -> f64 {
        core::f64::consts::SQRT_2 * (self.freq * r[0]).cos()
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        out[0] = -core::f64::consts::SQRT_2 * self.freq * (self.freq * r[0]).sin();
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        -core::f64::consts::SQRT_2 * self.freq * self.freq * (self.freq * r[0]).cos()
    }
    fn efficiency(&self) -> f64 {
        self.freq * self.freq
    }
    fn path_sums(
        &self,
        s: &[f64],
        z: &[f64],
        signs: &[f64],
        path: &AffinePath,
        thetas: &[f64],
        sums: &mut [f64],
    ) {
        let f = self.freq;
        let a = core::f64::consts::SQRT_2;
        if let Some(step) = uniform_step(thetas) {
            return sinusoid_rotation_sums(f, s, z, signs, path, step, thetas.len(), sums);
        }
        scalar_path_sums(
            s,
            z,
            signs,
            path,
            thetas,
            sums,
            |x| -a * f * (f * x).sin(),
            |x| a * (f * x).cos(),
        );
    }
}

/// θ₁ when the grid is θ_j = j θ₁ for j = 1..m.
fn uniform_step(thetas: &[f64]) -> Option<f64> {
    let h = *thetas.first()?;
    let ok = thetas
        .iter()
        .enumerate()
        .all(|(j, t)| (t - (j + 1) as f64 * h).abs() <= 1e-14 * t.abs());
    ok.then_some(h)
}

/// Sinusoid path sums on a uniform grid: cos(f(r0 + jθ₁v)) by repeated
/// rotation through the angle fθ₁v, two `sin_cos` calls per sample.
#[allow(clippy::too_many_arguments)]
fn sinusoid_rotation_sums(
    f: f64,
    s: &[f64],
    z: &[f64],
    signs: &[f64],
    path: &AffinePath,
    step: f64,
    m: usize,
    sums: &mut [f64],
) {
    let a = core::f64::consts::SQRT_2;
    let noisy = !z.is_empty();
    let embed = path.embed_scale != 0.0;
    sums[..=m].iter_mut().for_each(|t| *t = 0.0);
    for (i, (&x, &e)) in s.iter().zip(signs).enumerate() {
        let zi = if noisy { z[i] } else { 0.0 };
        let r0 = path.gamma * (x + path.sigma_z * zi);
        let mut v = path.gamma * path.noise_gain * zi;
        if embed {
            v -= path.gamma * path.embed_scale * e * a * f * (f * x).sin();
        }
        let (mut sn, mut cs) = (f * r0).sin_cos();
        sums[0] += e * a * cs;
        let (sd, cd) = (f * step * v).sin_cos();
        for acc in &mut sums[1..=m] {
            let c = cs * cd - sn * sd;
            sn = sn * cd + cs * sd;
            cs = c;
            *acc += e * a * cs;
        }
    }
}

/// ∏_i κ_{k_i} H_{k_i}(r_i/σ). All-ones orders give the JANIS product detector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHermiteDetector {
    orders: Vec<usize>,
    kappas: Vec<f64>,
    sigma: f64,
}

impl MultiHermiteDetector {
    pub fn new(orders: Vec<usize>, sigma: f64) -> Result<Self> {
        if orders.is_empty() {
            return Err(invalid("orders", "need at least one coordinate"));
        }
        if orders.iter().all(|&k| k == 0) {
            return Err(invalid("orders", "total order must be positive"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma_x", "must be positive"));
        }
        let kappas = orders
            .iter()
            .map(|&k| factorial(k).map(|f| 1.0 / f.sqrt()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            orders,
            kappas,
            sigma,
        })
    }

    pub fn janis(p: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![1; p], sigma)
    }

    #[inline]
    fn factor(&self, i: usize, r: f64) -> (f64, f64, f64) {
        let k = self.orders[i];
        let (h0, h1, h2) = hermite_triple(k, r / self.sigma);
        let kf = k as f64;
        let c = self.kappas[i];
        (
            c * h0,
            c * kf * h1 / self.sigma,
            c * kf * (kf - 1.0) * h2 / (self.sigma * self.sigma),
        )
    }
}

impl BlockDetector for MultiHermiteDetector {
    fn dim(&self) -> usize {
        self.orders.len()
    }
    fn value(&self, r: &[f64]) -> f64 {
        (0..self.orders.len()).map(|i| self.factor(i, r[i]).0).product()
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        let p = self.orders.len();
        let mut prefix = 1.0;
        for i in 0..p {
            out[i] = prefix;
            prefix *= self.factor(i, r[i]).0;
        }
        let mut suffix = 1.0;
        for i in (0..p).rev() {
            let (h, d, _) = self.factor(i, r[i]);
            out[i] *= suffix * d;
            suffix *= h;
        }
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        let p = self.orders.len();
        let f: Vec<(f64, f64, f64)> = (0..p).map(|i| self.factor(i, r[i])).collect();
        (0..p)
            .map(|i| {
                f.iter()
                    .enumerate()
                    .map(|(j, v)| if i == j { v.2 } else { v.0 })
                    .product::<f64>()
            })
            .sum()
    }
    fn efficiency(&self) -> f64 {
        self.orders.iter().sum::<usize>() as f64 / (self.sigma * self.sigma)
    }
    fn path_sums(
        &self,
        s: &[f64],
        z: &[f64],
        signs: &[f64],
        path: &AffinePath,
        thetas: &[f64],
        sums: &mut [f64],
    ) {
        const MAX_P: usize = 16;
        let p = self.orders.len();
        if p > MAX_P || self.orders.iter().any(|&k| k != 1) {
            return block_path_sums(self, s, z, signs, path, thetas, sums);
        }
        // Product of first-order factors: t = Π r_i / σ^p.
        let inv = 1.0 / self.sigma;
        let noisy = !z.is_empty();
        let mut r0 = [0.0; MAX_P];
        let mut v = [0.0; MAX_P];
        sums[..=thetas.len()].iter_mut().for_each(|t| *t = 0.0);
        for (b, &e) in signs.iter().enumerate() {
            let sb = &s[b * p..(b + 1) * p];
            let ce = path.embed_scale * e;
            let mut prefix = 1.0;
            for i in 0..p {
                v[i] = prefix;
                prefix *= sb[i] * inv;
            }
            let mut suffix = 1.0;
            for i in (0..p).rev() {
                let zi = if noisy { z[b * p + i] } else { 0.0 };
                let g = v[i] * suffix * inv;
                suffix *= sb[i] * inv;
                r0[i] = path.gamma * (sb[i] + path.sigma_z * zi);
                v[i] = path.gamma * (ce * g + path.noise_gain * zi);
            }
            sums[0] += e * r0[..p].iter().map(|x| x * inv).product::<f64>();
            for (j, th) in thetas.iter().enumerate() {
                let t: f64 = (0..p).map(|i| (r0[i] + th * v[i]) * inv).product();
                sums[1 + j] += e * t;
            }
        }
    }
}

/// Two-sheet hyperboloid detector (p (rᵀe)² - ‖r‖²) / (σ²√(2p(p-1))).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperboloidDetector {
    axis: Vec<f64>,
    sigma: f64,
    norm: f64,
}

impl HyperboloidDetector {
    pub fn new(axis: Vec<f64>, sigma: f64) -> Result<Self> {
        let p = axis.len();
        if p < 2 {
            return Err(invalid("p", "hyperboloid needs p >= 2"));
        }
        let len: f64 = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (len - 1.0).abs() > 1e-9 {
            return Err(invalid("e_p", "axis must be a unit vector"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma_x", "must be positive"));
        }
        let pf = p as f64;
        Ok(Self {
            axis,
            sigma,
            norm: 1.0 / (sigma * sigma * (2.0 * pf * (pf - 1.0)).sqrt()),
        })
    }

    /// Secret unit axis: the last canonical vector under a keyed random rotation,
    /// i.e. a uniform point on the sphere.
    pub fn keyed_axis(p: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, labels::KEY, 1);
        loop {
            let v: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len > 1e-12 {
                return v.into_iter().map(|x| x / len).collect();
            }
        }
    }

    fn project(&self, r: &[f64]) -> f64 {
        r.iter().zip(&self.axis).map(|(a, b)| a * b).sum()
    }
}

impl BlockDetector for HyperboloidDetector {
    fn dim(&self) -> usize {
        self.axis.len()
    }
    fn value(&self, r: &[f64]) -> f64 {
        let u = self.project(r);
        let q: f64 = r.iter().map(|v| v * v).sum();
        self.norm * (self.axis.len() as f64 * u * u - q)
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        let u = self.project(r);
        let pu2 = 2.0 * self.axis.len() as f64 * u;
        for ((o, x), e) in out.iter_mut().zip(r).zip(&self.axis) {
            *o = self.norm * (pu2 * e - 2.0 * x);
        }
    }
    fn laplacian(&self, _r: &[f64]) -> f64 {
        0.0
    }
    fn efficiency(&self) -> f64 {
        2.0 / (self.sigma * self.sigma)
    }
}

/// Radial detector U(‖r‖) for the radial host, U = C cos(√η ρ) or C sin(√η ρ).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereHardeningDetector {
    p: usize,
    r0: f64,
    freq: f64,
    variant: SphereVariant,
    amplitude: f64,
    mean_residual: f64,
}

impl SphereHardeningDetector {
    pub fn new(p: usize, r0: f64, eta: f64, variant: SphereVariant) -> Result<Self> {
        if p == 0 {
            return Err(invalid("p", "must be positive"));
        }
        if !(r0 > 0.0 && eta > 0.0) {
            return Err(invalid("R0/eta", "must be positive"));
        }
        let freq = eta.sqrt();
        let period = match variant {
            SphereVariant::Cosine => PI,
            SphereVariant::Sine => 2.0 * PI,
        };
        let turns = freq * r0 / period;
        if (turns - turns.round()).abs() > 1e-9 * turns.max(1.0) || turns.round() < 1.0 {
            return Err(invalid(
                "eta",
                match variant {
                    SphereVariant::Cosine => "need sqrt(eta)*R0 to be a positive multiple of pi",
                    SphereVariant::Sine => "need sqrt(eta)*R0 to be a positive multiple of 2 pi",
                },
            ));
        }
        // ‖s‖ is uniform on [0, R₀]; normalize U(ρ) under that law.
        let quad = Quadrature::gauss_legendre(64 + 16 * turns.round() as usize, 0.0, r0)?;
        let base = |rho: f64| match variant {
            SphereVariant::Cosine => (freq * rho).cos(),
            SphereVariant::Sine => (freq * rho).sin(),
        };
        let mean = quad.integrate(base) / r0;
        let second = quad.integrate(|rho| base(rho) * base(rho)) / r0;
        let amplitude = 1.0 / second.sqrt();
        Ok(Self {
            p,
            r0,
            freq,
            variant,
            amplitude,
            mean_residual: mean * amplitude,
        })
    }

    /// Normalizing constant C found by quadrature.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// E{t} under the radial host as computed by the same quadrature (should vanish).
    pub fn mean_residual(&self) -> f64 {
        self.mean_residual
    }

    /// The literal prefactor √(2 surf(S_p(1))), for comparison with [`Self::amplitude`].
    pub fn literal_prefactor(&self) -> f64 {
        (2.0 * sphere_surface(self.p)).sqrt()
    }

    pub fn radius(&self) -> f64 {
        self.r0
    }

    fn radial(&self, rho: f64) -> (f64, f64, f64) {
        let (s, c) = (self.freq * rho).sin_cos();
        let a = self.amplitude;
        let f = self.freq;
        match self.variant {
            SphereVariant::Cosine => (a * c, -a * f * s, -a * f * f * c),
            SphereVariant::Sine => (a * s, a * f * c, -a * f * f * s),
        }
    }
}

impl BlockDetector for SphereHardeningDetector {
    fn dim(&self) -> usize {
        self.p
    }
    fn value(&self, r: &[f64]) -> f64 {
        let rho = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.radial(rho).0
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        let rho = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rho == 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let d = self.radial(rho).1 / rho;
        for (o, x) in out.iter_mut().zip(r) {
            *o = d * x;
        }
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        let rho = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (_, d1, d2) = self.radial(rho);
        if rho == 0.0 {
            return self.p as f64 * d2;
        }
        d2 + (self.p as f64 - 1.0) * d1 / rho
    }
    fn efficiency(&self) -> f64 {
        self.freq * self.freq
    }
}

/// Scalar detector applied to a keyed projection, t(r) = t*(rᵀλ).
#[derive(Debug, Clone)]
pub struct ProjectionDetector {
    base: Arc<dyn BlockDetector>,
    lambda: Vec<f64>,
    norm2: f64,
}

impl ProjectionDetector {
    pub fn new(base: Arc<dyn BlockDetector>, lambda: Vec<f64>) -> Result<Self> {
        if base.dim() != 1 {
            return Err(invalid("base", "projection needs a scalar base detector"));
        }
        let norm2: f64 = lambda.iter().map(|v| v * v).sum();
        if !(norm2 > 0.0 && norm2.is_finite()) {
            return Err(invalid("lambda", "projection vector must be nonzero"));
        }
        Ok(Self {
            base,
            lambda,
            norm2,
        })
    }

    /// Hermite base scaled to the projected variance σ²‖λ‖², so that t stays
    /// unit-variance under an i.i.d. N(0, σ²) host.
    pub fn gaussian_matched(k: usize, sigma: f64, lambda: Vec<f64>) -> Result<Self> {
        let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(invalid("lambda", "projection vector must be nonzero"));
        }
        Self::new(Arc::new(HermiteDetector::new(k, sigma * norm)?), lambda)
    }

    fn project(&self, r: &[f64]) -> f64 {
        r.iter().zip(&self.lambda).map(|(a, b)| a * b).sum()
    }

    pub fn lambda_norm(&self) -> f64 {
        self.norm2.sqrt()
    }
}

impl BlockDetector for ProjectionDetector {
    fn dim(&self) -> usize {
        self.lambda.len()
    }
    fn value(&self, r: &[f64]) -> f64 {
        self.base.value(&[self.project(r)])
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        let mut d = [0.0];
        self.base.gradient(&[self.project(r)], &mut d);
        for (o, l) in out.iter_mut().zip(&self.lambda) {
            *o = d[0] * l;
        }
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        self.base.laplacian(&[self.project(r)]) * self.norm2
    }
    fn efficiency(&self) -> f64 {
        self.base.efficiency() * self.norm2
    }
    fn is_fundamental(&self) -> bool {
        self.base.is_fundamental()
    }
}

/// Lattice-periodic cosine √2 cos(rᵀλ_k), λ_k = 2π G^{-T} k.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSinusoidDetector {
    lambda: Vec<f64>,
    norm2: f64,
}

impl LatticeSinusoidDetector {
    pub fn new(lattice: &Lattice, k: &[i64]) -> Result<Self> {
        let lambda = lattice.dual_frequency(k)?;
        let norm2 = lambda.iter().map(|v| v * v).sum();
        Ok(Self { lambda, norm2 })
    }

    pub fn frequency(&self) -> &[f64] {
        &self.lambda
    }

    fn phase(&self, r: &[f64]) -> f64 {
        r.iter().zip(&self.lambda).map(|(a, b)| a * b).sum()
    }
}

impl BlockDetector for LatticeSinusoidDetector {
    fn dim(&self) -> usize {
        self.lambda.len()
    }
    fn value(&self, r: &[f64]) -> f64 {
        core::f64::consts::SQRT_2 * self.phase(r).cos()
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        let s = -core::f64::consts::SQRT_2 * self.phase(r).sin();
        for (o, l) in out.iter_mut().zip(&self.lambda) {
            *o = s * l;
        }
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        -core::f64::consts::SQRT_2 * self.norm2 * self.phase(r).cos()
    }
    fn efficiency(&self) -> f64 {
        self.norm2
    }
}

/// Quantization-residual detector k_t (‖Q(r) - r‖² - μ) with k_t < 0.
///
/// Its gradient 2k_t (r - Q(r)) points toward the nearest lattice point, so the
/// matched embedder pulls the host onto the lattice.
#[derive(Debug, Clone)]
pub struct DcdmDetector {
    lattice: Lattice,
    mu: f64,
    k_t: f64,
    eta: f64,
}

impl DcdmDetector {
    pub fn new(lattice: Lattice, moments: VoronoiMoments) -> Result<Self> {
        let spread = moments.spread();
        if !(spread > 0.0 && moments.i2 > 0.0) {
            return Err(invalid("lattice", "degenerate Voronoi moments (I4 <= I2^2)"));
        }
        Ok(Self {
            lattice,
            mu: moments.i2,
            k_t: -1.0 / spread.sqrt(),
            eta: moments.efficiency(),
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn residual(&self, r: &[f64], e: &mut [f64]) {
        let mut q = [0.0; crate::lattice::MAX_GENERAL_DIM];
        let p = r.len();
        if p <= q.len() {
            self.lattice.quantize_into(r, &mut q[..p]);
            for i in 0..p {
                e[i] = r[i] - q[i];
            }
        } else {
            let q = self.lattice.quantize(r);
            for i in 0..p {
                e[i] = r[i] - q[i];
            }
        }
    }
}

impl BlockDetector for DcdmDetector {
    fn dim(&self) -> usize {
        self.lattice.dim()
    }
    fn value(&self, r: &[f64]) -> f64 {
        let mut buf = [0.0; crate::lattice::MAX_GENERAL_DIM];
        let mut heap = Vec::new();
        let e: &mut [f64] = if r.len() <= buf.len() {
            &mut buf[..r.len()]
        } else {
            heap.resize(r.len(), 0.0);
            &mut heap
        };
        self.residual(r, e);
        let d: f64 = e.iter().map(|v| v * v).sum();
        self.k_t * (d - self.mu)
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        self.residual(r, out);
        out.iter_mut().for_each(|v| *v *= 2.0 * self.k_t);
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        2.0 * r.len() as f64 * self.k_t
    }
    fn efficiency(&self) -> f64 {
        self.eta
    }
    fn is_fundamental(&self) -> bool {
        false
    }
}

/// Σ_j ω_j t_j over orthonormal components sharing a host, with Σ ω_j² = 1.
#[derive(Debug, Clone)]
pub struct MixtureDetector {
    components: Vec<Arc<dyn BlockDetector>>,
    weights: Vec<f64>,
}

impl MixtureDetector {
    pub fn new(components: Vec<Arc<dyn BlockDetector>>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(invalid("weights", "need one weight per component"));
        }
        let p = components[0].dim();
        if components.iter().any(|c| c.dim() != p) {
            return Err(invalid("components", "components must share the block size"));
        }
        let s2: f64 = weights.iter().map(|w| w * w).sum();
        if (s2 - 1.0).abs() > 1e-9 {
            return Err(invalid("weights", "squared weights must sum to 1"));
        }
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Embedder weights ϖ_j = k_w ω_j √η_j on the unit-power component embedders.
    pub fn embedder_weights(&self, k_w: f64) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| k_w * w * c.efficiency().sqrt())
            .collect()
    }
}

impl BlockDetector for MixtureDetector {
    fn dim(&self) -> usize {
        self.components[0].dim()
    }
    fn value(&self, r: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.value(r))
            .sum()
    }
    fn gradient(&self, r: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, w) in self.components.iter().zip(&self.weights) {
            c.gradient(r, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += w * t;
            }
        }
    }
    fn laplacian(&self, r: &[f64]) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.laplacian(r))
            .sum()
    }
    fn efficiency(&self) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * w * c.efficiency())
            .sum()
    }
    fn is_fundamental(&self) -> bool {
        let live: Vec<_> = self
            .components
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .collect();
        live.len() == 1 && live[0].0.is_fundamental()
    }
}

/// Weights ω_j = -(-1)^j 3√10/(π² j²) of the scalar Costa scheme, j = 1..j_max.
pub fn scs_weights(j_max: usize) -> Vec<f64> {
    let c = 3.0 * 10f64.sqrt() / (PI * PI);
    (1..=j_max)
        .map(|j| {
            let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
            sign * c / (j * j) as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Schemes

/// A complete n-dimensional scheme: keyed block sum plus matched embedder.
#[derive(Debug, Clone)]
pub struct Scheme {
    n: usize,
    block: Arc<dyn BlockDetector>,
    signs: Vec<f64>,
    family: Family,
    eta0: f64,
    scale: f64,
}

impl Scheme {
    pub fn new(
        n: usize,
        block: Arc<dyn BlockDetector>,
        key: SignKey,
        family: Family,
    ) -> Result<Self> {
        let p = block.dim();
        if n == 0 || p == 0 || n % p != 0 {
            return Err(invalid("n", "block size must divide a positive n"));
        }
        let eta0 = block.efficiency();
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return Err(invalid("eta", "nominal efficacy must be positive"));
        }
        Ok(Self {
            n,
            signs: key.signs(n / p),
            block,
            family,
            eta0,
            scale: (p as f64 / n as f64).sqrt(),
        })
    }

    /// Per-sample κ_k H_k(r_i/σ) with keyed signs.
    pub fn polynomial(k: usize, sigma: f64, n: usize, key: SignKey) -> Result<Self> {
        let block = HermiteDetector::new(k, sigma)?;
        Self::new(n, Arc::new(block), key, Family::Polynomial { k, sigma })
    }

    /// Per-sample √2 cos(k√η_b r) for flat hosts with cells of width π/√η_b.
    pub fn sinusoidal(k: usize, eta_base: f64, n: usize, key: SignKey) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "order must be at least 1"));
        }
        if !(eta_base > 0.0) {
            return Err(invalid("eta_base", "must be positive"));
        }
        let block = SinusoidDetector::new(k as f64 * eta_base.sqrt())?;
        Self::new(n, Arc::new(block), key, Family::Sinusoidal { k, eta_base })
    }

    /// Block products of p samples, t = √(p/n) Σ_b ∏_j r_{b,j}/σ.
    pub fn janis(p: usize, sigma: f64, n: usize, key: SignKey) -> Result<Self> {
        let block = MultiHermiteDetector::janis(p, sigma)?;
        Self::new(n, Arc::new(block), key, Family::Janis { p, sigma })
    }

    pub fn multi_hermite(orders: Vec<usize>, sigma: f64, n: usize, key: SignKey) -> Result<Self> {
        let block = MultiHermiteDetector::new(orders.clone(), sigma)?;
        Self::new(n, Arc::new(block), key, Family::MultiHermite { orders, sigma })
    }

    pub fn hyperboloid(axis: Vec<f64>, sigma: f64, n: usize, key: SignKey) -> Result<Self> {
        let p = axis.len();
        let block = HyperboloidDetector::new(axis, sigma)?;
        Self::new(n, Arc::new(block), key, Family::Hyperboloid { p, sigma })
    }

    pub fn sphere_hardening(
        p: usize,
        r0: f64,
        eta: f64,
        variant: SphereVariant,
        n: usize,
        key: SignKey,
    ) -> Result<Self> {
        let block = SphereHardeningDetector::new(p, r0, eta, variant)?;
        Self::new(
            n,
            Arc::new(block),
            key,
            Family::SphereHardening {
                p,
                r0,
                eta,
                variant,
            },
        )
    }

    pub fn projection(
        base: Arc<dyn BlockDetector>,
        base_family: Family,
        lambda: Vec<f64>,
        n: usize,
        key: SignKey,
    ) -> Result<Self> {
        let block = ProjectionDetector::new(base, lambda)?;
        let lambda_norm = block.lambda_norm();
        Self::new(
            n,
            Arc::new(block),
            key,
            Family::Projection {
                base: Box::new(base_family),
                lambda_norm,
            },
        )
    }

    pub fn lattice_sinusoid(lattice: &Lattice, k: Vec<i64>, n: usize, key: SignKey) -> Result<Self> {
        let block = LatticeSinusoidDetector::new(lattice, &k)?;
        let eta = block.efficiency();
        Self::new(n, Arc::new(block), key, Family::LatticeSinusoid { k, eta })
    }

    pub fn lattice_dcdm(
        lattice: Lattice,
        moments: VoronoiMoments,
        n: usize,
        key: SignKey,
    ) -> Result<Self> {
        let block = DcdmDetector::new(lattice, moments)?;
        let eta = block.efficiency();
        Self::new(n, Arc::new(block), key, Family::LatticeDcdm { eta })
    }

    /// Mixture of per-sample polynomial solutions of orders `orders`.
    pub fn polynomial_mixture(
        orders: &[usize],
        weights: Vec<f64>,
        sigma: f64,
        n: usize,
        key: SignKey,
    ) -> Result<Self> {
        let mut comps: Vec<Arc<dyn BlockDetector>> = Vec::new();
        let mut fams = Vec::new();
        for &k in orders {
            comps.push(Arc::new(HermiteDetector::new(k, sigma)?));
            fams.push(Family::Polynomial { k, sigma });
        }
        Self::mixture(comps, fams, weights, n, key)
    }

    /// Mixture of per-sample sinusoids of orders `orders` on a common base frequency.
    pub fn sinusoidal_mixture(
        orders: &[usize],
        weights: Vec<f64>,
        eta_base: f64,
        n: usize,
        key: SignKey,
    ) -> Result<Self> {
        let mut comps: Vec<Arc<dyn BlockDetector>> = Vec::new();
        let mut fams = Vec::new();
        for &k in orders {
            if k == 0 {
                return Err(invalid("k", "order must be at least 1"));
            }
            comps.push(Arc::new(SinusoidDetector::new(k as f64 * eta_base.sqrt())?));
            fams.push(Family::Sinusoidal { k, eta_base });
        }
        Self::mixture(comps, fams, weights, n, key)
    }

    /// The scalar Costa scheme of step Δ as a truncated sinusoid mixture, j = 1..j_max.
    ///
    /// Truncated weights are rescaled to unit norm.
    pub fn scs(delta: f64, j_max: usize, n: usize, key: SignKey) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("delta", "must be positive"));
        }
        if j_max == 0 {
            return Err(invalid("j_max", "must be at least 1"));
        }
        let mut w = scs_weights(j_max);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.iter_mut().for_each(|v| *v /= norm);
        let orders: Vec<usize> = (1..=j_max).collect();
        let eta = (2.0 * PI / delta).powi(2);
        Self::sinusoidal_mixture(&orders, w, eta, n, key)
    }

    fn mixture(
        comps: Vec<Arc<dyn BlockDetector>>,
        fams: Vec<Family>,
        weights: Vec<f64>,
        n: usize,
        key: SignKey,
    ) -> Result<Self> {
        let block = MixtureDetector::new(comps, weights.clone())?;
        Self::new(
            n,
            Arc::new(block),
            key,
            Family::Mixture {
                components: fams,
                weights,
            },
        )
    }

    /// Same detector and key at a different length.
    pub fn with_len(&self, n: usize, key: SignKey) -> Result<Self> {
        Self::new(n, self.block.clone(), key, self.family.clone())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn block_dim(&self) -> usize {
        self.block.dim()
    }

    pub fn block(&self) -> &Arc<dyn BlockDetector> {
        &self.block
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    /// Nominal efficacy per sample, E‖∇t‖².
    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    /// Embedder gain √(n/η).
    pub fn k_w(&self) -> f64 {
        (self.n as f64 / self.eta0).sqrt()
    }

    /// Detector gain 1/√(nη).
    pub fn k_t(&self) -> f64 {
        1.0 / (self.n as f64 * self.eta0).sqrt()
    }

    fn check(&self, r: &[f64]) {
        assert_eq!(r.len(), self.n, "signal length does not match the scheme");
    }

    /// Detection statistic t(r).
    pub fn value(&self, r: &[f64]) -> f64 {
        self.check(r);
        self.scale * self.block.value_sum(r, &self.signs)
    }

    pub fn gradient(&self, r: &[f64], out: &mut [f64]) {
        self.check(r);
        self.block.gradient_blocks(r, &self.signs, self.scale, out);
    }

    pub fn laplacian(&self, r: &[f64]) -> f64 {
        self.check(r);
        let p = self.block.dim();
        self.scale
            * r.chunks_exact(p)
                .zip(&self.signs)
                .map(|(b, e)| e * self.block.laplacian(b))
                .sum::<f64>()
    }

    /// Matched embedder w(s) = k_w ∇t(s).
    pub fn embedding(&self, s: &[f64], out: &mut [f64]) {
        self.check(s);
        // k_w √(p/n) = √(p/η)
        let c = (self.block.dim() as f64 / self.eta0).sqrt();
        self.block.gradient_blocks(s, &self.signs, c, out);
    }

    /// Scaled path sums: `out[0]` = t(r0), `out[1 + j]` = t(r0 + θ_j v), with
    /// the embedder part of v being `path.embed_scale` times the matched w(s).
    pub fn path_values(
        &self,
        s: &[f64],
        z: &[f64],
        path: &AffinePath,
        thetas: &[f64],
        out: &mut [f64],
    ) {
        self.check(s);
        let c = (self.block.dim() as f64 / self.eta0).sqrt();
        let path = AffinePath {
            embed_scale: path.embed_scale * c,
            ..*path
        };
        self.block.path_sums(s, z, &self.signs, &path, thetas, out);
        out[..=thetas.len()].iter_mut().for_each(|v| *v *= self.scale);
    }

    /// Residual η t + score·∇t + ∇²t of the fundamental equation at one block.
    pub fn block_residual(&self, r: &[f64], score: &[f64]) -> f64 {
        let p = self.block.dim();
        let mut g = vec![0.0; p];
        self.block.gradient(r, &mut g);
        let drift: f64 = score.iter().zip(&g).map(|(a, b)| a * b).sum();
        self.eta0 * self.block.value(r) + drift + self.block.laplacian(r)
    }
}

/// Returns an error unless the scheme length matches `n`.
pub(crate) fn check_len(scheme: &Scheme, n: usize) -> Result<()> {
    if scheme.len() != n {
        return Err(Error::Dimension {
            expected: scheme.len(),
            got: n,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_sums(det: &dyn BlockDetector, s: &[f64], z: &[f64], signs: &[f64], path: &AffinePath, th: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; th.len() + 1];
        block_path_sums(det, s, z, signs, path, th, &mut out);
        out
    }

    #[test]
    fn specialised_path_kernels_match_generic() {
        let mut rng = substream(3, 1, 0);
        let s: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        let z: Vec<f64> = (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let signs = SignKey::Seeded(9).signs(200);
        let path = AffinePath {
            gamma: 0.9,
            sigma_z: 0.4,
            noise_gain: 0.2,
            embed_scale: 1.3,
        };
        let mut dets: Vec<Box<dyn BlockDetector>> = vec![Box::new(SinusoidDetector::new(2.0).unwrap())];
        for k in 1..=8 {
            dets.push(Box::new(HermiteDetector::new(k, 1.2).unwrap()));
        }
        for grid in [&[0.01, 0.02, 0.03][..], &[0.05, 0.1, 0.15, 0.2, 0.25], &[0.01, 0.025]] {
            for det in &dets {
                let want = generic_sums(det.as_ref(), &s, &z, &signs, &path, grid);
                let mut got = vec![0.0; grid.len() + 1];
                det.path_sums(&s, &z, &signs, &path, grid, &mut got);
                for (a, b) in got.iter().zip(&want) {
                    assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()), "{det:?} {grid:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn polynomial_rows() {
        let s = Scheme::polynomial(2, 1.0, 1, SignKey::Unit).unwrap();
        assert!((s.value(&[0.0]) + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let mut w = [0.0];
        s.embedding(&[0.7], &mut w);
        assert!((w[0] - 0.7).abs() < 1e-15);
        assert_eq!(s.eta0(), 2.0);
    }

    #[test]
    fn kw_kt_duality() {
        let s = Scheme::polynomial(3, 1.5, 40, SignKey::Seeded(1)).unwrap();
        assert!((s.k_w() * s.k_t() - 1.0 / s.eta0()).abs() < 1e-15);
    }

    #[test]
    fn janis_identities() {
        let s = Scheme::janis(3, 1.0, 3, SignKey::Unit).unwrap();
        let r = [0.3, -1.2, 2.0];
        let mut g = [0.0; 3];
        s.gradient(&r, &mut g);
        let euler: f64 = r.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!((euler - 3.0 * s.value(&r)).abs() < 1e-12);
        assert_eq!(s.laplacian(&r), 0.0);
    }

    #[test]
    fn hyperboloid_on_axis() {
        let s = Scheme::hyperboloid(vec![0.0, 1.0], 1.0, 2, SignKey::Unit).unwrap();
        let a = 1.7;
        assert!((s.value(&[0.0, a]) - a * a / 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_hardening_conditions() {
        assert!(SphereHardeningDetector::new(3, 1.0, PI * PI, SphereVariant::Cosine).is_ok());
        assert!(
            SphereHardeningDetector::new(3, 1.0, PI * PI / 4.0, SphereVariant::Cosine).is_err()
        );
        assert!(SphereHardeningDetector::new(3, 1.0, PI * PI, SphereVariant::Sine).is_err());
        let d = SphereHardeningDetector::new(3, 1.0, 4.0 * PI * PI, SphereVariant::Sine).unwrap();
        assert!((d.amplitude() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scs_weight_norm() {
        let w = scs_weights(10_000);
        let s: f64 = w.iter().map(|v| v * v).sum();
        assert!((s - 1.0).abs() < 1e-10);
        assert!(w[0] > 0.0 && w[1] < 0.0);
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        assert!(Scheme::polynomial_mixture(&[1, 2], vec![0.5, 0.5], 1.0, 4, SignKey::Unit).is_err());
    }

    #[test]
    fn projection_scaling() {
        let base: Arc<dyn BlockDetector> = Arc::new(HermiteDetector::new(1, 1.0).unwrap());
        let fam = Family::Polynomial { k: 1, sigma: 1.0 };
        let s = Scheme::projection(base, fam, vec![0.0, 2.0], 2, SignKey::Unit).unwrap();
        assert_eq!(s.eta0(), 4.0);
        let base: Arc<dyn BlockDetector> = Arc::new(HermiteDetector::new(1, 1.0).unwrap());
        let fam = Family::Polynomial { k: 1, sigma: 1.0 };
        assert!(Scheme::projection(base, fam, vec![0.0, 0.0], 2, SignKey::Unit).is_err());
    }

    #[test]
    fn seeded_signs_are_balanced_and_stable() {
        let a = SignKey::Seeded(9).signs(1000);
        assert_eq!(a, SignKey::Seeded(9).signs(1000));
        let sum: f64 = a.iter().sum();
        assert!(sum.abs() < 150.0);
    }
}
