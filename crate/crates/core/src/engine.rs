//! Embedding, detection, threshold calibration and LMP construction.
//!
//! The embedding f(s) = s + θ w(s) is assumed invertible for the amplitudes
//! used. This holds for θ below a family-dependent bound (for the polynomial
//! family roughly θ < σ_x / (k max|t''|) over the bulk of the host), which is
//! documented here but not enforced since the analysis concerns θ → 0.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::host::{HostKind, HostModel};
use crate::rng::{labels, map_chunks, substream, TRIAL_CHUNK};
use crate::schemes::{check_len, Scheme};
use crate::specfn::{normal_upper_quantile, Quadrature};
use crate::stats::{upper_quantile_sorted, Moments};

/// y = s + θ k_w ∇t(s), written into `out`; `w` is scratch of length n.
pub fn embed_into(scheme: &Scheme, s: &[f64], theta: f64, w: &mut [f64], out: &mut [f64]) {
    scheme.embedding(s, w);
    for ((o, a), b) in out.iter_mut().zip(s).zip(w.iter()) {
        *o = a + theta * b;
    }
}

/// y = s + θ k_w ∇t(s).
pub fn embed(scheme: &Scheme, s: &[f64], theta: f64) -> Result<Vec<f64>> {
    check_len(scheme, s.len())?;
    let mut w = vec![0.0; s.len()];
    let mut out = vec![0.0; s.len()];
    embed_into(scheme, s, theta, &mut w, &mut out);
    Ok(out)
}

/// Variance-shaping embedder x = θ k_w(s) ∇t(s) with
/// k_w(s) = (√(nη) - c t(s)) / ‖∇t(s)‖².
///
/// η is set by the distortion budget n = a c² + b n η with
/// a = E{t² ‖∇t‖^{-2}} and b = E{‖∇t‖^{-2}} estimated by Monte Carlo.
#[derive(Debug, Clone)]
pub struct AsymmetricEmbedder {
    scheme: Scheme,
    c: f64,
    eta: f64,
    a: f64,
    b: f64,
    cross: f64,
    a_std_err: f64,
    b_std_err: f64,
    cross_std_err: f64,
}

impl AsymmetricEmbedder {
    pub fn calibrate(
        scheme: Scheme,
        host: &HostModel,
        c: f64,
        budget: usize,
        seed: u64,
    ) -> Result<Self> {
        check_len(&scheme, host.len())?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(invalid("c", "must be nonnegative"));
        }
        if budget < 100 {
            return Err(Error::BudgetTooSmall {
                budget,
                reason: "moment estimation needs at least 100 host draws",
            });
        }
        let n = host.len();
        let parts = map_chunks(budget, TRIAL_CHUNK, |ch, range| {
            let mut rng = substream(seed, labels::CALIBRATION, ch as u64);
            let mut s = vec![0.0; n];
            let mut g = vec![0.0; n];
            let mut acc = [Moments::new(); 3];
            for _ in range {
                host.draw(&mut rng, &mut s);
                let t = scheme.value(&s);
                scheme.gradient(&s, &mut g);
                let g2: f64 = g.iter().map(|v| v * v).sum();
                if g2 > 0.0 {
                    acc[0].push(t * t / g2);
                    acc[1].push(1.0 / g2);
                    acc[2].push(t / g2);
                }
            }
            acc
        });
        let mut acc = [Moments::new(); 3];
        for part in &parts {
            for i in 0..3 {
                acc[i].merge(&part[i]);
            }
        }
        let (a, b) = (acc[0].mean(), acc[1].mean());
        let nf = n as f64;
        if a * c * c >= nf {
            return Err(invalid(
                "c",
                alloc::format!("a c^2 = {:.4} exceeds the distortion budget n = {n}", a * c * c),
            ));
        }
        Ok(Self {
            eta: (nf - a * c * c) / (nf * b),
            scheme,
            c,
            a,
            b,
            cross: acc[2].mean(),
            a_std_err: acc[0].std_err_mean(),
            b_std_err: acc[1].std_err_mean(),
            cross_std_err: acc[2].std_err_mean(),
        })
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Efficacy left after paying for the variance shaping.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// (a, std err) with a = E{t² ‖∇t‖^{-2}}.
    pub fn a(&self) -> (f64, f64) {
        (self.a, self.a_std_err)
    }

    /// (b, std err) with b = E{‖∇t‖^{-2}}.
    pub fn b(&self) -> (f64, f64) {
        (self.b, self.b_std_err)
    }

    /// (E{t ‖∇t‖^{-2}}, std err): the distortion cross term assumed to vanish.
    pub fn cross_term(&self) -> (f64, f64) {
        (self.cross, self.cross_std_err)
    }

    /// x(s)/θ, written into `out`. Falls back to the plain embedder where ∇t(s) = 0.
    pub fn watermark_unit(&self, s: &[f64], out: &mut [f64]) {
        self.scheme.gradient(s, out);
        let g2: f64 = out.iter().map(|v| v * v).sum();
        if g2 == 0.0 {
            self.scheme.embedding(s, out);
            return;
        }
        let nf = s.len() as f64;
        let k = ((nf * self.eta).sqrt() - self.c * self.scheme.value(s)) / g2;
        out.iter_mut().for_each(|v| *v *= k);
    }

    pub fn embed(&self, s: &[f64], theta: f64) -> Result<Vec<f64>> {
        check_len(&self.scheme, s.len())?;
        let mut x = vec![0.0; s.len()];
        self.watermark_unit(s, &mut x);
        Ok(s.iter().zip(&x).map(|(a, b)| a + theta * b).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMethod {
    /// Empirical (1 - α) quantile of t under H₀.
    McQuantile,
    /// Unit-normal quantile; only valid asymptotically.
    GaussianApprox,
}

/// Threshold τ for the test d = 1 iff t(r) > τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorCalibration {
    pub tau: f64,
    pub alpha: f64,
    pub method: CalibrationMethod,
    pub mc_budget: usize,
}

impl DetectorCalibration {
    /// Returns (t(r), decision).
    pub fn detect(&self, scheme: &Scheme, r: &[f64]) -> (f64, bool) {
        let t = scheme.value(r);
        (t, t > self.tau)
    }
}

/// Returns (t(r), decision).
pub fn detect(scheme: &Scheme, r: &[f64], cal: &DetectorCalibration) -> (f64, bool) {
    cal.detect(scheme, r)
}

/// Draws `budget` statistics t(a(s)) under H₀ and returns them sorted.
pub fn h0_statistics(
    scheme: &Scheme,
    host: &HostModel,
    channel: &crate::channel::AttackChannel,
    budget: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_len(scheme, host.len())?;
    let n = host.len();
    let under = channel.applies_under_h0() && channel.is_noisy();
    let gain = channel.gain_and_noise().0;
    let parts = map_chunks(budget, TRIAL_CHUNK, |c, range| {
        let mut rng = substream(seed, labels::HOST_H0, c as u64);
        let mut nrng = substream(seed, labels::NOISE_H0, c as u64);
        let mut s = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut out = Vec::with_capacity(range.len());
        for _ in range {
            host.draw(&mut rng, &mut s);
            if under {
                fill_normal(&mut nrng, &mut z);
                channel.apply_with_noise(&s, 0.0, &z, &mut r);
                out.push(scheme.value(&r));
            } else if gain != 1.0 {
                s.iter_mut().for_each(|v| *v *= gain);
                out.push(scheme.value(&s));
            } else {
                out.push(scheme.value(&s));
            }
        }
        out
    });
    let mut all: Vec<f64> = parts.into_iter().flatten().collect();
    all.sort_by(|a, b| a.total_cmp(b));
    Ok(all)
}

pub(crate) fn fill_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(rand_distr::StandardNormal);
    }
}

/// Threshold at significance `alpha`, from the unattacked host under H₀.
///
/// The threshold depends only on t and the host, never on the embedder.
pub fn calibrate_threshold(
    scheme: &Scheme,
    host: &HostModel,
    alpha: f64,
    method: CalibrationMethod,
    mc_budget: usize,
    seed: u64,
) -> Result<DetectorCalibration> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    match method {
        CalibrationMethod::GaussianApprox => Ok(DetectorCalibration {
            tau: normal_upper_quantile(alpha)?,
            alpha,
            method,
            mc_budget: 0,
        }),
        CalibrationMethod::McQuantile => {
            if alpha * (mc_budget as f64) < 100.0 {
                return Err(Error::BudgetTooSmall {
                    budget: mc_budget,
                    reason: "need alpha * budget >= 100",
                });
            }
            let stats = h0_statistics(
                scheme,
                host,
                &crate::channel::AttackChannel::None,
                mc_budget,
                seed,
            )?;
            Ok(DetectorCalibration {
                tau: upper_quantile_sorted(&stats, alpha),
                alpha,
                method,
                mc_budget,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// LMP detector from an embedder

/// Embedding function on one block.
pub type BlockField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Divergence of a block embedding function.
pub type BlockDivergence = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Budget used when a host has no quadrature rule.
pub const LMP_MC_BUDGET: usize = 1_000_000;

/// Detector t(r) = -k_t (score(r)·w(r) + div w(r)) built from an embedder.
#[derive(Clone)]
pub struct LmpDetector {
    field: BlockField,
    divergence: Option<BlockDivergence>,
    host: HostModel,
    k_t: f64,
    mean: f64,
    mean_std_err: f64,
}

impl fmt::Debug for LmpDetector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LmpDetector")
            .field("host", &self.host)
            .field("k_t", &self.k_t)
            .field("mean", &self.mean)
            .finish()
    }
}

/// Central-difference divergence with per-coordinate step 1e-5 (1 + |r_i|).
pub fn numeric_divergence(field: &dyn Fn(&[f64], &mut [f64]), r: &[f64]) -> f64 {
    let p = r.len();
    let mut x = r.to_vec();
    let mut up = vec![0.0; p];
    let mut down = vec![0.0; p];
    let mut div = 0.0;
    for i in 0..p {
        let h = 1e-5 * (1.0 + r[i].abs());
        x[i] = r[i] + h;
        field(&x, &mut up);
        x[i] = r[i] - h;
        field(&x, &mut down);
        x[i] = r[i];
        div += (up[i] - down[i]) / (2.0 * h);
    }
    div
}

impl LmpDetector {
    /// Unnormalized -(score·w + div w) at one block.
    pub fn raw(&self, r: &[f64]) -> Result<f64> {
        let p = r.len();
        let mut score = vec![0.0; p];
        self.host.score_block(r, &mut score)?;
        let mut w = vec![0.0; p];
        (self.field)(r, &mut w);
        let drift: f64 = score.iter().zip(&w).map(|(a, b)| a * b).sum();
        let div = match &self.divergence {
            Some(d) => d(r),
            None => numeric_divergence(&*self.field, r),
        };
        Ok(-(drift + div))
    }

    /// Normalized detector value on one block.
    pub fn value(&self, r: &[f64]) -> Result<f64> {
        Ok(self.k_t * self.raw(r)?)
    }

    pub fn k_t(&self) -> f64 {
        self.k_t
    }

    /// E{t} under the host and its standard error (zero for quadrature).
    pub fn mean(&self) -> (f64, f64) {
        (self.k_t * self.mean, self.k_t * self.mean_std_err)
    }

    pub fn host(&self) -> &HostModel {
        &self.host
    }
}

/// Builds the locally most powerful detector matched to `field` on the host's blocks.
///
/// The scale k_t makes t unit-variance, by quadrature when the host block has
/// a rule and by Monte Carlo otherwise.
pub fn lmp_from_embedding(
    field: BlockField,
    divergence: Option<BlockDivergence>,
    host: &HostModel,
    seed: u64,
) -> Result<LmpDetector> {
    let host = host.with_len(host.block())?;
    let mut det = LmpDetector {
        field,
        divergence,
        host,
        k_t: 1.0,
        mean: 0.0,
        mean_std_err: 0.0,
    };
    let (mean, second, se) = match block_quadrature(&det.host, 64) {
        Some((points, weights)) => {
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for (x, w) in points.chunks_exact(det.host.block()).zip(&weights) {
                let v = det.raw(x)?;
                m1 += w * v;
                m2 += w * v * v;
            }
            (m1, m2, 0.0)
        }
        None => {
            let p = det.host.block();
            let mut rng = substream(seed, labels::MOMENTS, 0);
            let mut m = Moments::new();
            let mut x = vec![0.0; p];
            let mut drawn = 0;
            while drawn < LMP_MC_BUDGET {
                det.host.draw_block(&mut rng, &mut x);
                match det.raw(&x) {
                    Ok(v) => {
                        m.push(v);
                        drawn += 1;
                    }
                    Err(Error::OnBoundary) => continue,
                    Err(e) => return Err(e),
                }
            }
            let mean = m.mean();
            (mean, m.variance() + mean * mean, m.std_err_mean())
        }
    };
    let var = second - mean * mean;
    if !(var > 0.0) {
        return Err(Error::Domain("LMP statistic is constant under the host"));
    }
    det.k_t = 1.0 / var.sqrt();
    det.mean = mean;
    det.mean_std_err = se;
    Ok(det)
}

/// Tensor quadrature for one host block: (row-major points, weights summing to 1).
///
/// Available for Gaussian blocks (Gauss–Hermite, up to 10⁶ points) and interval
/// hosts (Gauss–Legendre per cell).
pub fn block_quadrature(host: &HostModel, nodes: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let p = host.block();
    match host.kind() {
        HostKind::GaussianIid { sigma } => {
            let total = nodes.checked_pow(p as u32)?;
            if total > 1_000_000 {
                return None;
            }
            let q = Quadrature::gauss_hermite(nodes).ok()?;
            let mut points = Vec::with_capacity(total * p);
            let mut weights = Vec::with_capacity(total);
            for idx in 0..total {
                let mut rem = idx;
                let mut w = 1.0;
                let start = points.len();
                points.resize(start + p, 0.0);
                for d in (0..p).rev() {
                    let j = rem % nodes;
                    rem /= nodes;
                    points[start + d] = sigma * q.nodes[j];
                    w *= q.weights[j];
                }
                weights.push(w);
            }
            Some((points, weights))
        }
        HostKind::FlatInterval { width, weights: cells } => {
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (j, &pw) in cells.iter().enumerate() {
                if pw == 0.0 {
                    continue;
                }
                let a = j as f64 * width;
                let q = Quadrature::gauss_legendre(nodes, a, a + width).ok()?;
                for (&x, &w) in q.nodes.iter().zip(&q.weights) {
                    points.push(x);
                    weights.push(pw * w / width);
                }
            }
            Some((points, weights))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::SignKey;

    #[test]
    fn zero_amplitude_is_identity() {
        let sch = Scheme::polynomial(3, 1.0, 4, SignKey::Seeded(2)).unwrap();
        let s = [0.1, -0.4, 1.3, 2.0];
        assert_eq!(embed(&sch, &s, 0.0).unwrap(), s.to_vec());
    }

    #[test]
    fn multiplicative_embedding() {
        let sch = Scheme::polynomial(2, 1.0, 3, SignKey::Seeded(5)).unwrap();
        let s = [0.5, -1.0, 2.0];
        let y = embed(&sch, &s, 0.1).unwrap();
        for i in 0..3 {
            let e = sch.signs()[i];
            assert!((y[i] - (s[i] + 0.1 * e * s[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn infinite_threshold_never_fires() {
        let sch = Scheme::polynomial(1, 1.0, 2, SignKey::Unit).unwrap();
        let cal = DetectorCalibration {
            tau: f64::INFINITY,
            alpha: 1e-9,
            method: CalibrationMethod::GaussianApprox,
            mc_budget: 0,
        };
        assert!(!detect(&sch, &[100.0, 100.0], &cal).1);
    }

    #[test]
    fn gaussian_threshold() {
        let sch = Scheme::polynomial(1, 1.0, 2, SignKey::Unit).unwrap();
        let host = HostModel::gaussian(2, 1.0).unwrap();
        let cal =
            calibrate_threshold(
                &sch,
                &host,
                1.349_898_031_630_094_6e-3,
                CalibrationMethod::GaussianApprox,
                0,
                0,
            )
                .unwrap();
        assert!((cal.tau - 3.0).abs() < 1e-10);
        assert!(matches!(
            calibrate_threshold(&sch, &host, 0.001, CalibrationMethod::McQuantile, 1000, 0),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn numeric_divergence_of_linear_field() {
        let f = |r: &[f64], out: &mut [f64]| {
            out[0] = 2.0 * r[0] + r[1];
            out[1] = -3.0 * r[1];
        };
        assert!((numeric_divergence(&f, &[0.3, 0.8]) + 1.0).abs() < 1e-8);
    }
}
