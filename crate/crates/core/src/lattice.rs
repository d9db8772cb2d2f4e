//! Lattices, nearest-point quantizers and Voronoi-cell moments.
//!
//! Lattice points are `β·G·m` for integer vectors `m`; the columns of `G` are
//! the basis vectors.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{labels, map_chunks, substream};

/// Largest dimension handled by the enumerating quantizer.
pub const MAX_GENERAL_DIM: usize = 4;

/// Half-width of the integer box searched around the rounded coordinates.
const SEARCH_RADIUS: i64 = 2;

const MOMENT_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    /// The cubic lattice Z^p.
    Integer,
    /// The hexagonal lattice, scaled to unit cell volume.
    A2,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    p: usize,
    kind: LatticeKind,
    generator: Vec<f64>,
    beta: f64,
    basis: Vec<f64>,
    inverse: Vec<f64>,
}

impl Lattice {
    /// Z^p with unit spacing.
    pub fn integer(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("p", "lattice dimension must be positive"));
        }
        let mut g = vec![0.0; p * p];
        for i in 0..p {
            g[i * p + i] = 1.0;
        }
        Self::build(p, LatticeKind::Integer, g, 1.0)
    }

    /// Hexagonal lattice with generator [2 1; 0 √3]/√(2√3), so that vol(V) = 1.
    pub fn a2() -> Self {
        let s = (2.0 * 3f64.sqrt()).sqrt();
        let g = vec![2.0 / s, 1.0 / s, 0.0, 3f64.sqrt() / s];
        Self::build(2, LatticeKind::A2, g, 1.0).expect("A2 generator is nonsingular")
    }

    /// Lattice spanned by the columns of the row-major `p × p` matrix `g`.
    pub fn general(p: usize, g: Vec<f64>) -> Result<Self> {
        if p == 0 || p > MAX_GENERAL_DIM {
            return Err(invalid(
                "p",
                alloc::format!("general lattices support 1 <= p <= {MAX_GENERAL_DIM}"),
            ));
        }
        if g.len() != p * p {
            return Err(Error::Dimension {
                expected: p * p,
                got: g.len(),
            });
        }
        Self::build(p, LatticeKind::General, g, 1.0)
    }

    /// The same lattice scaled by `beta`.
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        Self::build(self.p, self.kind, self.generator.clone(), self.beta * beta)
    }

    fn build(p: usize, kind: LatticeKind, generator: Vec<f64>, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", "scale must be positive and finite"));
        }
        if generator.iter().any(|v| !v.is_finite()) {
            return Err(invalid("G", "generator entries must be finite"));
        }
        let basis: Vec<f64> = generator.iter().map(|v| v * beta).collect();
        let m = nalgebra::DMatrix::from_row_slice(p, p, &basis);
        let det = m.determinant();
        if !(det.abs() > 1e-12 * beta.powi(p as i32)) {
            return Err(invalid("G", "generator matrix is singular"));
        }
        let inv = m
            .try_inverse()
            .ok_or_else(|| invalid("G", "generator matrix is singular"))?;
        let mut inverse = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                inverse[i * p + j] = inv[(i, j)];
            }
        }
        Ok(Self {
            p,
            kind,
            generator,
            beta,
            basis,
            inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Unscaled generator, row-major.
    pub fn generator(&self) -> &[f64] {
        &self.generator
    }

    /// Scaled generator β·G, row-major.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// Volume of the Voronoi cell, |det(β·G)|.
    pub fn volume(&self) -> f64 {
        nalgebra::DMatrix::from_row_slice(self.p, self.p, &self.basis)
            .determinant()
            .abs()
    }

    /// β·G·m.
    pub fn point(&self, m: &[i64]) -> Vec<f64> {
        let p = self.p;
        (0..p)
            .map(|i| (0..p).map(|j| self.basis[i * p + j] * m[j] as f64).sum())
            .collect()
    }

    /// Writes the nearest lattice point to `r` into `out`; ties go to the
    /// lexicographically smallest integer coordinates.
    pub fn quantize_into(&self, r: &[f64], out: &mut [f64]) {
        let p = self.p;
        debug_assert_eq!(r.len(), p);
        if self.kind == LatticeKind::Integer {
            for i in 0..p {
                out[i] = self.beta * (r[i] / self.beta - 0.5).ceil();
            }
            return;
        }
        let m = self.nearest_coords(r);
        for i in 0..p {
            out[i] = (0..p).map(|j| self.basis[i * p + j] * m[j] as f64).sum();
        }
    }

    pub fn quantize(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.quantize_into(r, &mut out);
        out
    }

    /// Integer coordinates of the nearest lattice point.
    pub fn quantize_coords(&self, r: &[f64]) -> Vec<i64> {
        if self.kind == LatticeKind::Integer {
            return r
                .iter()
                .map(|x| (x / self.beta - 0.5).ceil() as i64)
                .collect();
        }
        self.nearest_coords(r)[..self.p].to_vec()
    }

    fn nearest_coords(&self, r: &[f64]) -> [i64; MAX_GENERAL_DIM] {
        let p = self.p;
        let mut center = [0i64; MAX_GENERAL_DIM];
        for i in 0..p {
            let u: f64 = (0..p).map(|j| self.inverse[i * p + j] * r[j]).sum();
            center[i] = u.round() as i64;
        }
        let side = (2 * SEARCH_RADIUS + 1) as usize;
        let total = side.pow(p as u32);
        let mut best = [0i64; MAX_GENERAL_DIM];
        let mut best_d = f64::INFINITY;
        let mut cand = [0i64; MAX_GENERAL_DIM];
        // Lexicographic enumeration: a later candidate must beat the incumbent
        // by more than the tie tolerance, so ties keep the smallest vector.
        for idx in 0..total {
            let mut rem = idx;
            for i in (0..p).rev() {
                cand[i] = center[i] - SEARCH_RADIUS + (rem % side) as i64;
                rem /= side;
            }
            let mut d = 0.0;
            for i in 0..p {
                let mut c = 0.0;
                for j in 0..p {
                    c += self.basis[i * p + j] * cand[j] as f64;
                }
                let e = r[i] - c;
                d += e * e;
            }
            if best_d.is_infinite() || d < best_d - 1e-12 * best_d {
                best_d = d;
                best = cand;
            }
        }
        best
    }

    /// Distance from `r` to the second-nearest candidate minus distance to the nearest.
    /// Zero (up to rounding) on Voronoi boundaries.
    pub fn boundary_gap(&self, r: &[f64]) -> f64 {
        let p = self.p;
        let q = self.quantize_coords(r);
        let side = 3usize;
        let mut best = f64::INFINITY;
        let mut cand = vec![0i64; p];
        let d0 = dist2(r, &self.point(&q)).sqrt();
        for idx in 0..side.pow(p as u32) {
            let mut rem = idx;
            for i in (0..p).rev() {
                cand[i] = q[i] - 1 + (rem % side) as i64;
                rem /= side;
            }
            if cand == q {
                continue;
            }
            best = best.min(dist2(r, &self.point(&cand)).sqrt());
        }
        best - d0
    }

    /// 2π (β·G)^{-T} k, the frequency of the lattice-periodic cosine of index `k`.
    pub fn dual_frequency(&self, k: &[i64]) -> Result<Vec<f64>> {
        let p = self.p;
        if k.len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: k.len(),
            });
        }
        if k.iter().all(|&v| v == 0) {
            return Err(invalid("k", "frequency index must be nonzero"));
        }
        // (G^{-T})_{ij} = (G^{-1})_{ji}
        Ok((0..p)
            .map(|i| 2.0 * PI * (0..p).map(|j| self.inverse[j * p + i] * k[j] as f64).sum::<f64>())
            .collect())
    }

    /// Uniform draw from the fundamental parallelepiped β·G·[0,1)^p.
    pub fn sample_parallelepiped<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let p = self.p;
        let mut u = [0.0; MAX_GENERAL_DIM];
        if p > MAX_GENERAL_DIM {
            // Only the diagonal integer lattice reaches here.
            for (i, o) in out.iter_mut().enumerate().take(p) {
                *o = self.basis[i * p + i] * rng.random::<f64>();
            }
            return;
        }
        for v in u.iter_mut().take(p) {
            *v = rng.random::<f64>();
        }
        for i in 0..p {
            out[i] = (0..p).map(|j| self.basis[i * p + j] * u[j]).sum();
        }
    }

    /// Uniform draw from the Voronoi cell around the origin (parallelepiped draw folded by Q).
    pub fn sample_voronoi<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let p = self.p;
        let mut q = [0.0; MAX_GENERAL_DIM];
        if p > MAX_GENERAL_DIM {
            for o in out.iter_mut().take(p) {
                *o = self.beta * (rng.random::<f64>() - 0.5);
            }
            return;
        }
        self.sample_parallelepiped(rng, out);
        self.quantize_into(&out[..p], &mut q[..p]);
        for i in 0..p {
            out[i] -= q[i];
        }
    }

    /// Normalized second and fourth moments of the Voronoi cell.
    ///
    /// Closed form for Z^p; otherwise Monte Carlo over `mc_budget` uniform points.
    pub fn voronoi_moments(&self, mc_budget: usize, seed: u64) -> Result<VoronoiMoments> {
        if self.kind == LatticeKind::Integer {
            let p = self.p as f64;
            let b2 = self.beta * self.beta;
            return Ok(VoronoiMoments {
                i2: p / 12.0 * b2,
                i4: (p / 80.0 + p * (p - 1.0) / 144.0) * b2 * b2,
                method: MomentMethod::ClosedForm,
                samples: 0,
                i2_std_err: 0.0,
                i4_std_err: 0.0,
                eta_std_err: 0.0,
            });
        }
        self.voronoi_moments_mc(mc_budget, seed)
    }

    /// Monte Carlo moments regardless of lattice kind.
    pub fn voronoi_moments_mc(&self, mc_budget: usize, seed: u64) -> Result<VoronoiMoments> {
        if mc_budget < 10_000 {
            return Err(Error::BudgetTooSmall {
                budget: mc_budget,
                reason: "Voronoi moments need at least 1e4 samples",
            });
        }
        let p = self.p;
        let partial = map_chunks(mc_budget, MOMENT_CHUNK, |c, range| {
            let mut rng = substream(seed, labels::MOMENTS, c as u64);
            let mut buf = [0.0; MAX_GENERAL_DIM];
            let mut big = vec![0.0; if p > MAX_GENERAL_DIM { p } else { 0 }];
            let mut s = [0.0f64; 4];
            for _ in range {
                let e: &mut [f64] = if p > MAX_GENERAL_DIM { &mut big } else { &mut buf[..p] };
                self.sample_voronoi(&mut rng, e);
                let x: f64 = e.iter().map(|v| v * v).sum();
                let x2 = x * x;
                s[0] += x;
                s[1] += x2;
                s[2] += x2 * x;
                s[3] += x2 * x2;
            }
            s
        });
        let mut s = [0.0f64; 4];
        for part in partial {
            for i in 0..4 {
                s[i] += part[i];
            }
        }
        let n = mc_budget as f64;
        let (e1, e2, e3, e4) = (s[0] / n, s[1] / n, s[2] / n, s[3] / n);
        let var_x = e2 - e1 * e1;
        let var_x2 = e4 - e2 * e2;
        let cov = e3 - e1 * e2;
        let d = e2 - e1 * e1;
        let g1 = 4.0 / d + 8.0 * e1 * e1 / (d * d);
        let g2 = -4.0 * e1 / (d * d);
        let eta_var = (g1 * g1 * var_x + 2.0 * g1 * g2 * cov + g2 * g2 * var_x2) / n;
        Ok(VoronoiMoments {
            i2: e1,
            i4: e2,
            method: MomentMethod::MonteCarlo,
            samples: mc_budget,
            i2_std_err: (var_x / n).sqrt(),
            i4_std_err: (var_x2 / n).sqrt(),
            eta_std_err: eta_var.max(0.0).sqrt(),
        })
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    ClosedForm,
    MonteCarlo,
}

/// I(Λ,k) = vol(V)^{-1} ∫_V ‖r‖^k dr for k = 2, 4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiMoments {
    pub i2: f64,
    pub i4: f64,
    pub method: MomentMethod,
    pub samples: usize,
    pub i2_std_err: f64,
    pub i4_std_err: f64,
    /// Delta-method standard error of [`VoronoiMoments::efficiency`].
    pub eta_std_err: f64,
}

impl VoronoiMoments {
    /// Moments of the ball B_p(R), the idealized nearly-spherical cell.
    pub fn ball(p: usize, radius: f64) -> Self {
        let pf = p as f64;
        let r2 = radius * radius;
        Self {
            i2: pf * r2 / (pf + 2.0),
            i4: pf * r2 * r2 / (pf + 4.0),
            method: MomentMethod::ClosedForm,
            samples: 0,
            i2_std_err: 0.0,
            i4_std_err: 0.0,
            eta_std_err: 0.0,
        }
    }

    /// I4 - I2².
    pub fn spread(&self) -> f64 {
        self.i4 - self.i2 * self.i2
    }

    /// Efficacy 4 I2 / (I4 - I2²) of the quantization-residual detector.
    pub fn efficiency(&self) -> f64 {
        4.0 * self.i2 / self.spread()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_rounding() {
        let z1 = Lattice::integer(1).unwrap();
        assert_eq!(z1.quantize(&[0.4]), vec![0.0]);
        assert_eq!(z1.quantize(&[0.6]), vec![1.0]);
        assert_eq!(z1.quantize(&[0.5]), vec![0.0]);
        assert_eq!(z1.quantize(&[-0.5]), vec![-1.0]);
        let z2 = Lattice::integer(2).unwrap();
        assert_eq!(z2.quantize(&[1.2, -0.7]), vec![1.0, -1.0]);
    }

    #[test]
    fn a2_has_unit_volume() {
        let a2 = Lattice::a2();
        assert!((a2.volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn a2_recovers_perturbed_point() {
        let a2 = Lattice::a2();
        let c = a2.point(&[1, 1]);
        let r = [c[0] + 1e-3, c[1] - 2e-3];
        assert_eq!(a2.quantize_coords(&r), vec![1, 1]);
    }

    #[test]
    fn integer_moments_give_sixty() {
        let m = Lattice::integer(1).unwrap().voronoi_moments(0, 0).unwrap();
        assert!((m.i2 - 1.0 / 12.0).abs() < 1e-16);
        assert!((m.i4 - 1.0 / 80.0).abs() < 1e-16);
        assert!((m.efficiency() - 60.0).abs() < 1e-10);
    }

    #[test]
    fn ball_efficiency() {
        let m = VoronoiMoments::ball(3, 2.0);
        assert!((m.efficiency() - 7.0 * 5.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn dual_frequencies() {
        let z1 = Lattice::integer(1).unwrap();
        assert!((z1.dual_frequency(&[1]).unwrap()[0] - 2.0 * PI).abs() < 1e-15);
        let z2 = Lattice::integer(2).unwrap();
        let f = z2.dual_frequency(&[0, 1]).unwrap();
        assert!(f[0].abs() < 1e-15 && (f[1] - 2.0 * PI).abs() < 1e-15);
        assert!(z2.dual_frequency(&[0, 0]).is_err());
    }

    #[test]
    fn degenerate_generators_rejected() {
        assert!(Lattice::general(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
        assert!(Lattice::general(2, vec![1.0, 0.0, 0.0]).is_err());
        assert!(Lattice::integer(1).unwrap().scaled(0.0).is_err());
        assert!(Lattice::integer(1).unwrap().voronoi_moments_mc(10, 0).is_err());
    }
}
