//! Host signal models: densities, score functions and samplers.
//!
//! A host vector of length `n` is made of `n / p` independent blocks of
//! length `p` drawn from the same block density.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::lattice::Lattice;
use crate::rng::{chunk_ranges, labels, substream, TRIAL_CHUNK};
use crate::specfn::sphere_surface;

#[derive(Debug, Clone, PartialEq)]
pub enum HostKind {
    /// i.i.d. N(0, σ²) samples.
    GaussianIid { sigma: f64 },
    /// Piecewise-constant scalar density on the cells `[j·width, (j+1)·width)`,
    /// cell `j` carrying probability `weights[j]`.
    FlatInterval { width: f64, weights: Vec<f64> },
    /// Uniform density on the Voronoi cell of a lattice around the origin.
    FlatLattice { lattice: Lattice },
    /// Radial density with ‖s‖ uniform on [0, R₀] and a uniform direction.
    Radial { r0: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostModel {
    n: usize,
    p: usize,
    kind: HostKind,
    cumulative: Vec<f64>,
}

impl HostModel {
    pub fn new(n: usize, p: usize, kind: HostKind) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(invalid("n", "dimensions must be positive"));
        }
        if n % p != 0 {
            return Err(invalid("p", "block size must divide n"));
        }
        let mut cumulative = Vec::new();
        match &kind {
            HostKind::GaussianIid { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(invalid("sigma_x", "must be positive"));
                }
            }
            HostKind::FlatInterval { width, weights } => {
                if p != 1 {
                    return Err(invalid("p", "interval hosts are scalar (p = 1)"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(invalid("width", "must be positive"));
                }
                if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(invalid("weights", "need at least one nonnegative weight"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid("weights", "cell probabilities must sum to 1"));
                }
                let mut acc = 0.0;
                for w in weights {
                    acc += w;
                    cumulative.push(acc);
                }
            }
            HostKind::FlatLattice { lattice } => {
                if lattice.dim() != p {
                    return Err(invalid("p", "block size must equal the lattice dimension"));
                }
            }
            HostKind::Radial { r0 } => {
                if !(*r0 > 0.0 && r0.is_finite()) {
                    return Err(invalid("R0", "must be positive"));
                }
            }
        }
        Ok(Self {
            n,
            p,
            kind,
            cumulative,
        })
    }

    pub fn gaussian(n: usize, sigma: f64) -> Result<Self> {
        Self::new(n, 1, HostKind::GaussianIid { sigma })
    }

    /// Uniform scalar host on [0, width).
    pub fn flat_interval(n: usize, width: f64) -> Result<Self> {
        Self::new(
            n,
            1,
            HostKind::FlatInterval {
                width,
                weights: vec![1.0],
            },
        )
    }

    pub fn flat_lattice(n: usize, lattice: Lattice) -> Result<Self> {
        let p = lattice.dim();
        Self::new(n, p, HostKind::FlatLattice { lattice })
    }

    pub fn radial(n: usize, p: usize, r0: f64) -> Result<Self> {
        Self::new(n, p, HostKind::Radial { r0 })
    }

    /// Same kind and block size, different length.
    pub fn with_len(&self, n: usize) -> Result<Self> {
        Self::new(n, self.p, self.kind.clone())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn block(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> &HostKind {
        &self.kind
    }

    /// The standard deviation for Gaussian hosts.
    pub fn sigma(&self) -> Option<f64> {
        match self.kind {
            HostKind::GaussianIid { sigma } => Some(sigma),
            _ => None,
        }
    }

    /// Fills one block with an independent draw.
    pub fn draw_block<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            HostKind::GaussianIid { sigma } => {
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sigma * z;
                }
            }
            HostKind::FlatInterval { width, .. } => {
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    let cell = if self.cumulative.len() == 1 {
                        0
                    } else {
                        self.cumulative
                            .partition_point(|&c| c <= u)
                            .min(self.cumulative.len() - 1)
                    };
                    // Open interval draw keeps points off the cell boundaries.
                    let mut x: f64 = rng.random();
                    while x == 0.0 {
                        x = rng.random();
                    }
                    *v = width * (cell as f64 + x);
                }
            }
            HostKind::FlatLattice { lattice } => lattice.sample_voronoi(rng, out),
            HostKind::Radial { r0 } => {
                let mut norm2 = 0.0;
                while norm2 == 0.0 {
                    norm2 = 0.0;
                    for v in out.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = z;
                        norm2 += z * z;
                    }
                }
                let rho = r0 * rng.random::<f64>();
                let scale = rho / norm2.sqrt();
                for v in out.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }

    /// Fills a full host vector of length `n`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n);
        if let HostKind::GaussianIid { sigma } = self.kind {
            for v in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = sigma * z;
            }
            return;
        }
        for block in out.chunks_exact_mut(self.p) {
            self.draw_block(rng, block);
        }
    }

    /// `count` host vectors, reproducible from `seed`.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        for (c, range) in chunk_ranges(count, TRIAL_CHUNK).into_iter().enumerate() {
            let mut rng = substream(seed, labels::HOST, c as u64);
            for _ in range {
                let mut v = vec![0.0; self.n];
                self.draw(&mut rng, &mut v);
                out.push(v);
            }
        }
        out
    }

    /// Score ∇p(r)/p(r) of one block.
    pub fn score_block(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        if r.len() != self.p {
            return Err(Error::Dimension {
                expected: self.p,
                got: r.len(),
            });
        }
        match &self.kind {
            HostKind::GaussianIid { sigma } => {
                let inv = 1.0 / (sigma * sigma);
                for (o, x) in out.iter_mut().zip(r) {
                    *o = -x * inv;
                }
            }
            HostKind::FlatInterval { width, weights } => {
                let x = r[0];
                let top = width * weights.len() as f64;
                if x < 0.0 || x > top {
                    return Err(Error::OutsideSupport);
                }
                let u = x / width;
                if u == u.round() {
                    return Err(Error::OnBoundary);
                }
                out[0] = 0.0;
            }
            HostKind::FlatLattice { lattice } => {
                let q = lattice.quantize_coords(r);
                if q.iter().any(|&v| v != 0) {
                    return Err(Error::OutsideSupport);
                }
                if lattice.boundary_gap(r) <= 1e-12 * lattice.beta() {
                    return Err(Error::OnBoundary);
                }
                out.iter_mut().for_each(|o| *o = 0.0);
            }
            HostKind::Radial { r0 } => {
                let rho2: f64 = r.iter().map(|v| v * v).sum();
                if rho2 == 0.0 {
                    return Err(Error::Domain("radial score undefined at the origin"));
                }
                if rho2.sqrt() > *r0 {
                    return Err(Error::OutsideSupport);
                }
                let c = (1.0 - self.p as f64) / rho2;
                for (o, x) in out.iter_mut().zip(r) {
                    *o = c * x;
                }
            }
        }
        Ok(())
    }

    /// Score of a full host vector.
    pub fn score(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: r.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for (rb, ob) in r.chunks_exact(self.p).zip(out.chunks_exact_mut(self.p)) {
            self.score_block(rb, ob)?;
        }
        Ok(out)
    }

    /// Log-density of one block.
    pub fn log_density_block(&self, r: &[f64]) -> Result<f64> {
        match &self.kind {
            HostKind::GaussianIid { sigma } => {
                let s2 = sigma * sigma;
                let q: f64 = r.iter().map(|x| x * x).sum();
                let p = r.len() as f64;
                Ok(-0.5 * q / s2 - 0.5 * p * (2.0 * core::f64::consts::PI * s2).ln())
            }
            HostKind::FlatInterval { width, weights } => {
                let cell = (r[0] / width).floor();
                if cell < 0.0 || cell >= weights.len() as f64 {
                    return Err(Error::OutsideSupport);
                }
                Ok((weights[cell as usize] / width).ln())
            }
            HostKind::FlatLattice { lattice } => {
                if lattice.quantize_coords(r).iter().any(|&v| v != 0) {
                    return Err(Error::OutsideSupport);
                }
                Ok(-lattice.volume().ln())
            }
            HostKind::Radial { r0 } => {
                let rho: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                if rho == 0.0 || rho > *r0 {
                    return Err(Error::OutsideSupport);
                }
                // ρ ~ U[0, R₀] spread over the sphere of radius ρ.
                let p = self.p as f64;
                Ok(-(r0 * sphere_surface(self.p)).ln() + (1.0 - p) * rho.ln())
            }
        }
    }
}
