//! Verification and measurement: fundamental-equation residuals, Gram
//! matrices, the small-θ variance series, and Monte Carlo estimates of
//! efficacy, ROC curves and Pitman regularity.
//!
//! Monte Carlo loops share host and noise draws across every θ (and across
//! every case of a batch), so finite differences are taken with common random
//! numbers.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::AttackChannel;
use crate::engine::{block_quadrature, fill_normal};
use crate::error::{invalid, Error, Result};
use crate::host::HostModel;
use crate::rng::{labels, map_chunks, substream, TRIAL_CHUNK};
use crate::schemes::{check_len, Scheme, SignKey};
use crate::specfn::{binomial, factorial, Quadrature};
use crate::stats::{
    binomial_std_err, clopper_pearson, count_above, intercept_weights, upper_quantile_sorted,
    Moments,
};

// ---------------------------------------------------------------------------
// Reports

/// A named statistic with its standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub std_err: f64,
}

/// Seeded Monte Carlo results; every estimate carries a standard error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub label: String,
    pub seed: u64,
    pub n: usize,
    pub budget: usize,
    pub estimates: Vec<Estimate>,
    pub roc: Vec<RocPoint>,
    /// Filled in by callers that have a clock.
    pub wall_time_s: Option<f64>,
}

impl ExperimentReport {
    pub fn new(label: impl Into<String>, seed: u64, n: usize, budget: usize) -> Self {
        Self {
            label: label.into(),
            seed,
            n,
            budget,
            ..Self::default()
        }
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, std_err: f64) {
        self.estimates.push(Estimate {
            name: name.into(),
            value,
            std_err,
        });
    }

    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }
}

// ---------------------------------------------------------------------------
// Fundamental-equation residuals

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub count: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub median_abs: f64,
    pub q90_abs: f64,
    pub q99_abs: f64,
}

impl ResidualStats {
    fn from_abs(mut v: Vec<f64>) -> Self {
        v.sort_by(|a, b| a.total_cmp(b));
        let count = v.len();
        let q = |f: f64| -> f64 {
            if count == 0 {
                return 0.0;
            }
            let i = ((f * count as f64).ceil() as usize).clamp(1, count) - 1;
            v[i]
        };
        Self {
            count,
            max_abs: v.last().copied().unwrap_or(0.0),
            mean_abs: if count == 0 {
                0.0
            } else {
                v.iter().sum::<f64>() / count as f64
            },
            median_abs: q(0.5),
            q90_abs: q(0.9),
            q99_abs: q(0.99),
        }
    }
}

fn residual_points(
    scheme: &Scheme,
    host: &HostModel,
    sample_count: usize,
    seed: u64,
    eval: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<ResidualStats> {
    let p = scheme.block_dim();
    if host.block() != p {
        return Err(Error::Dimension {
            expected: p,
            got: host.block(),
        });
    }
    let mut rng = substream(seed, labels::HOST, 0);
    let mut r = vec![0.0; p];
    let mut score = vec![0.0; p];
    let mut out = Vec::with_capacity(sample_count);
    while out.len() < sample_count {
        host.draw_block(&mut rng, &mut r);
        match host.score_block(&r, &mut score) {
            Ok(()) => out.push(eval(&r, &score).abs()),
            Err(Error::OnBoundary) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(ResidualStats::from_abs(out))
}

/// |η t + score·∇t + ∇²t| at host-distributed block points, analytic derivatives.
pub fn pde_residual(
    scheme: &Scheme,
    host: &HostModel,
    sample_count: usize,
    seed: u64,
) -> Result<ResidualStats> {
    residual_points(scheme, host, sample_count, seed, &|r, s| {
        scheme.block_residual(r, s)
    })
}

/// Same residual with central-difference derivatives of t.
pub fn pde_residual_fd(
    scheme: &Scheme,
    host: &HostModel,
    sample_count: usize,
    seed: u64,
) -> Result<ResidualStats> {
    let block = scheme.block().clone();
    let eta = scheme.eta0();
    residual_points(scheme, host, sample_count, seed, &|r, s| {
        let mut x = r.to_vec();
        let t = block.value(r);
        let mut drift = 0.0;
        let mut lap = 0.0;
        for i in 0..r.len() {
            let h1 = 1e-5 * (1.0 + r[i].abs());
            x[i] = r[i] + h1;
            let up = block.value(&x);
            x[i] = r[i] - h1;
            let down = block.value(&x);
            drift += s[i] * (up - down) / (2.0 * h1);
            let h2 = 1e-4 * (1.0 + r[i].abs());
            x[i] = r[i] + h2;
            let up = block.value(&x);
            x[i] = r[i] - h2;
            let down = block.value(&x);
            lap += (up - 2.0 * t + down) / (h2 * h2);
            x[i] = r[i];
        }
        eta * t + drift + lap
    })
}

// ---------------------------------------------------------------------------
// Orthonormality

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramMethod {
    /// Tensor quadrature with this many nodes per coordinate.
    Quadrature { nodes: usize },
    MonteCarlo { budget: usize },
}

/// Pairwise ⟨t_i, t_j⟩ = E{t_i t_j | H₀}, row-major, with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub size: usize,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Largest |G - I| entry, split into (diagonal, off-diagonal).
    pub fn identity_error(&self) -> (f64, f64) {
        let mut diag = 0.0f64;
        let mut off = 0.0f64;
        for i in 0..self.size {
            for j in 0..self.size {
                let v = self.get(i, j);
                if i == j {
                    diag = diag.max((v - 1.0).abs());
                } else {
                    off = off.max(v.abs());
                }
            }
        }
        (diag, off)
    }
}

/// Gram matrix of the block detectors of `schemes` under the host block density.
pub fn gram_matrix(
    schemes: &[Scheme],
    host: &HostModel,
    method: GramMethod,
    seed: u64,
) -> Result<GramMatrix> {
    let p = host.block();
    for s in schemes {
        if s.block_dim() != p {
            return Err(Error::Dimension {
                expected: p,
                got: s.block_dim(),
            });
        }
    }
    let m = schemes.len();
    let mut values = vec![0.0; m * m];
    let mut std_err = vec![0.0; m * m];
    let mut row = vec![0.0; m];
    match method {
        GramMethod::Quadrature { nodes } => {
            let (points, weights) = block_quadrature(host, nodes)
                .ok_or(Error::Domain("host block has no quadrature rule"))?;
            for (x, w) in points.chunks_exact(p).zip(&weights) {
                for (v, s) in row.iter_mut().zip(schemes) {
                    *v = s.block().value(x);
                }
                for i in 0..m {
                    for j in 0..m {
                        values[i * m + j] += w * row[i] * row[j];
                    }
                }
            }
        }
        GramMethod::MonteCarlo { budget } => {
            if budget < 2 {
                return Err(Error::BudgetTooSmall {
                    budget,
                    reason: "need at least two draws",
                });
            }
            let mut acc = vec![Moments::new(); m * m];
            let mut rng = substream(seed, labels::HOST, 0);
            let mut x = vec![0.0; p];
            for _ in 0..budget {
                host.draw_block(&mut rng, &mut x);
                for (v, s) in row.iter_mut().zip(schemes) {
                    *v = s.block().value(&x);
                }
                for i in 0..m {
                    for j in 0..m {
                        acc[i * m + j].push(row[i] * row[j]);
                    }
                }
            }
            for (k, a) in acc.iter().enumerate() {
                values[k] = a.mean();
                std_err[k] = a.std_err_mean();
            }
        }
    }
    Ok(GramMatrix {
        size: m,
        values,
        std_err,
    })
}

// ---------------------------------------------------------------------------
// Variance of t under H₁ for the polynomial family

/// Coefficients [1, c₁, c₂] of Var{t|H₁} = 1 + c₁θ + c₂θ² + O(θ³) for the
/// order-k Hermite detector with its matched embedder on a N(0,1) host.
pub fn variance_h1_coefficients(k: usize) -> Result<[f64; 3]> {
    if k == 0 {
        return Err(invalid("k", "order must be at least 1"));
    }
    let c1 = if k % 2 == 0 {
        let h = k / 2;
        2.0 * factorial(k - 1)?.sqrt() * factorial(k)?
            / (factorial(h - 1)? * factorial(h)?.powi(2))
    } else {
        0.0
    };
    let mut sum = 0.0;
    for l in 0..=k.saturating_sub(2) {
        if k < 2 {
            break;
        }
        let b = binomial(k - 1, l);
        sum += (2.0 - 1.0 / (k - l) as f64)
            * b.powi(4)
            * factorial(l)?.powi(2)
            * factorial(2 * k - 2 - 2 * l)?;
    }
    let c2 = k as f64 / factorial(k - 1)?.powi(2) * sum;
    Ok([1.0, c1, c2])
}

/// Second-order Maclaurin approximation of Var{t|H₁} at amplitude θ.
pub fn variance_h1_series(k: usize, theta: f64) -> Result<f64> {
    let [c0, c1, c2] = variance_h1_coefficients(k)?;
    Ok(c0 + theta * (c1 + theta * c2))
}

/// Exact Var{t(s + θ w(s))} for s ~ N(0,1) by Gauss–Hermite quadrature.
pub fn variance_h1_quadrature(k: usize, theta: f64) -> Result<f64> {
    let scheme = Scheme::polynomial(k, 1.0, 1, SignKey::Unit)?;
    // t∘f is a polynomial of degree k(k-1) + ... ≤ k²; its square needs 2k² + 1 nodes.
    let q = Quadrature::gauss_hermite((k * k + 1).max(16))?;
    let mut w = [0.0];
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (&s, &wt) in q.nodes.iter().zip(&q.weights) {
        scheme.embedding(&[s], &mut w);
        let t = scheme.value(&[s + theta * w[0]]);
        m1 += wt * t;
        m2 += wt * t * t;
    }
    Ok(m2 - m1 * m1)
}

// ---------------------------------------------------------------------------
// Moments under H₁

/// Mean and variance of t under H₁ at one amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Moments {
    pub theta: f64,
    pub mean: f64,
    pub mean_std_err: f64,
    pub variance: f64,
    pub variance_std_err: f64,
    pub trials: usize,
}

/// Monte Carlo moments of t(a(s + θ w(s))) for each θ, with common random numbers.
pub fn h1_moments(
    scheme: &Scheme,
    host: &HostModel,
    channel: &AttackChannel,
    thetas: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Vec<H1Moments>> {
    check_len(scheme, host.len())?;
    if budget < 2 {
        return Err(Error::BudgetTooSmall {
            budget,
            reason: "need at least two trials",
        });
    }
    let n = host.len();
    let m = thetas.len();
    let noisy = channel.is_noisy();
    let parts = map_chunks(budget, TRIAL_CHUNK, |c, range| {
        let mut rng = substream(seed, labels::HOST_H1, c as u64);
        let mut nrng = substream(seed, labels::NOISE_H1, c as u64);
        let mut s = vec![0.0; n];
        let mut z = vec![0.0; if noisy { n } else { 0 }];
        let mut out = vec![0.0; m + 1];
        let mut acc = vec![Moments::new(); m];
        let path = channel.path();
        for _ in range {
            host.draw(&mut rng, &mut s);
            fill_normal(&mut nrng, &mut z);
            scheme.path_values(&s, &z, &path, thetas, &mut out);
            for (a, t) in acc.iter_mut().zip(&out[1..]) {
                a.push(*t);
            }
        }
        acc
    });
    let mut acc = vec![Moments::new(); m];
    for part in &parts {
        for (a, b) in acc.iter_mut().zip(part) {
            a.merge(b);
        }
    }
    Ok(acc
        .iter()
        .zip(thetas)
        .map(|(a, &theta)| H1Moments {
            theta,
            mean: a.mean(),
            mean_std_err: a.std_err_mean(),
            variance: a.variance(),
            variance_std_err: a.std_err_variance(),
            trials: budget,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Efficacy

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficacyEstimate {
    /// η̂ = slope² / n.
    pub eta: f64,
    pub std_err: f64,
    /// dE{t|H₁}/dθ at θ = 0.
    pub slope: f64,
    pub slope_std_err: f64,
    pub trials: usize,
}

/// One (scheme, channel) pair of a batched efficacy run.
#[derive(Debug, Clone, Copy)]
pub struct EfficacyCase<'a> {
    pub scheme: &'a Scheme,
    pub channel: AttackChannel,
}

fn positive_grid(theta_grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid: Vec<f64> = theta_grid.iter().copied().filter(|&t| t > 0.0).collect();
    if grid.len() < 2 {
        return Err(invalid("theta_grid", "need at least two positive amplitudes"));
    }
    let weights = intercept_weights(&grid)?;
    Ok((grid, weights))
}

/// Slope of E{t|H₁} at θ = 0 for every case, sharing host and noise draws.
///
/// Each trial gives the difference quotients q_j = (t(θ_j) - t(0)) / θ_j on
/// the same host and noise, and the least-squares intercept of q over θ
/// estimates the derivative. The outer `Result` covers invalid input; a
/// case whose slope is within three standard errors of zero gets
/// `Err(NoisySlope)`.
pub fn estimate_efficacy_batch(
    cases: &[EfficacyCase<'_>],
    host: &HostModel,
    theta_grid: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Vec<Result<EfficacyEstimate>>> {
    let (grid, weights) = positive_grid(theta_grid)?;
    for c in cases {
        check_len(c.scheme, host.len())?;
    }
    if budget < 2 {
        return Err(Error::BudgetTooSmall {
            budget,
            reason: "need at least two trials",
        });
    }
    let n = host.len();
    let noisy = cases.iter().any(|c| c.channel.is_noisy());
    let paths: Vec<_> = cases.iter().map(|c| c.channel.path()).collect();
    let parts = map_chunks(budget, TRIAL_CHUNK, |c, range| {
        let mut rng = substream(seed, labels::HOST_H1, c as u64);
        let mut nrng = substream(seed, labels::NOISE_H1, c as u64);
        let mut s = vec![0.0; n];
        let mut z = vec![0.0; if noisy { n } else { 0 }];
        let mut out = vec![0.0; grid.len() + 1];
        let mut acc = vec![Moments::new(); cases.len()];
        for _ in range {
            host.draw(&mut rng, &mut s);
            fill_normal(&mut nrng, &mut z);
            for ((a, case), path) in acc.iter_mut().zip(cases).zip(&paths) {
                let zc: &[f64] = if case.channel.is_noisy() { &z } else { &[] };
                case.scheme.path_values(&s, zc, path, &grid, &mut out);
                let t0 = out[0];
                let d: f64 = grid
                    .iter()
                    .zip(&weights)
                    .zip(&out[1..])
                    .map(|((th, cw), t)| cw * (t - t0) / th)
                    .sum();
                a.push(d);
            }
        }
        acc
    });
    let mut acc = vec![Moments::new(); cases.len()];
    for part in &parts {
        for (a, b) in acc.iter_mut().zip(part) {
            a.merge(b);
        }
    }
    let nf = n as f64;
    Ok(acc
        .iter()
        .map(|a| {
            let slope = a.mean();
            let se = a.std_err_mean();
            if !(slope.abs() >= 3.0 * se) {
                return Err(Error::NoisySlope {
                    slope,
                    std_err: se,
                });
            }
            Ok(EfficacyEstimate {
                eta: slope * slope / nf,
                std_err: 2.0 * slope.abs() * se / nf,
                slope,
                slope_std_err: se,
                trials: budget,
            })
        })
        .collect())
}

/// η̂ = (dE{t|H₁}/dθ|₀)² / n by common-random-number finite differences.
pub fn estimate_efficacy(
    scheme: &Scheme,
    host: &HostModel,
    channel: &AttackChannel,
    theta_grid: &[f64],
    budget: usize,
    seed: u64,
) -> Result<EfficacyEstimate> {
    let case = EfficacyCase {
        scheme,
        channel: *channel,
    };
    estimate_efficacy_batch(&[case], host, theta_grid, budget, seed)?
        .pop()
        .expect("one case in, one result out")
}

// ---------------------------------------------------------------------------
// ROC

/// Confidence level of the binomial bands.
pub const ROC_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub alpha: f64,
    pub tau: f64,
    pub p_fa: f64,
    pub p_fa_lo: f64,
    pub p_fa_hi: f64,
    pub p_p: f64,
    pub p_p_std_err: f64,
    pub p_p_lo: f64,
    pub p_p_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub theta: f64,
    pub trials: usize,
    pub points: Vec<RocPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct RocCase<'a> {
    pub scheme: &'a Scheme,
    pub channel: AttackChannel,
    pub theta: f64,
}

/// Empirical ROC curves for several cases, sharing host and noise draws.
///
/// τ(α) is the empirical (1 - α) quantile of t under H₀ (attacked when the
/// channel also hits unwatermarked content); P_fa is read off the same
/// sample and P_p off an independent H₁ sample. Bands are Clopper–Pearson.
pub fn roc_batch(
    cases: &[RocCase<'_>],
    host: &HostModel,
    alphas: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Vec<RocCurve>> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(invalid("alpha_grid", "levels must lie in (0, 1)"));
    }
    let min_alpha = alphas.iter().copied().fold(1.0, f64::min);
    if min_alpha * (budget as f64) < 100.0 {
        return Err(Error::BudgetTooSmall {
            budget,
            reason: "need budget * min(alpha) >= 100",
        });
    }
    for c in cases {
        check_len(c.scheme, host.len())?;
    }
    let n = host.len();
    let m = cases.len();
    let noisy = cases.iter().any(|c| c.channel.is_noisy());
    let run = |h1: bool| {
        let (hl, nl) = if h1 {
            (labels::HOST_H1, labels::NOISE_H1)
        } else {
            (labels::HOST_H0, labels::NOISE_H0)
        };
        let parts = map_chunks(budget, TRIAL_CHUNK, |c, range| {
            let mut rng = substream(seed, hl, c as u64);
            let mut nrng = substream(seed, nl, c as u64);
            let mut s = vec![0.0; n];
            let mut z = vec![0.0; if noisy { n } else { 0 }];
            let mut vals = [0.0; 2];
            let mut out = vec![Vec::with_capacity(range.len()); m];
            for _ in range {
                host.draw(&mut rng, &mut s);
                fill_normal(&mut nrng, &mut z);
                for (o, case) in out.iter_mut().zip(cases) {
                    let zc: &[f64] = if case.channel.is_noisy() { &z } else { &[] };
                    let mut path = case.channel.path();
                    if h1 {
                        case.scheme.path_values(&s, zc, &path, &[case.theta], &mut vals);
                        o.push(vals[1]);
                    } else {
                        path.embed_scale = 0.0;
                        case.scheme.path_values(&s, zc, &path, &[], &mut vals);
                        o.push(vals[0]);
                    }
                }
            }
            out
        });
        let mut all = vec![Vec::with_capacity(budget); m];
        for part in parts {
            for (a, b) in all.iter_mut().zip(part) {
                a.extend(b);
            }
        }
        for v in all.iter_mut() {
            v.sort_by(|a, b| a.total_cmp(b));
        }
        all
    };
    let h0 = run(false);
    let h1 = run(true);
    let nt = budget as u64;
    Ok(cases
        .iter()
        .zip(h0.iter().zip(&h1))
        .map(|(case, (t0, t1))| {
            let points = alphas
                .iter()
                .map(|&alpha| {
                    let tau = upper_quantile_sorted(t0, alpha);
                    let k0 = count_above(t0, tau) as u64;
                    let k1 = count_above(t1, tau) as u64;
                    let (fa_lo, fa_hi) = clopper_pearson(k0, nt, ROC_CONFIDENCE);
                    let (p_lo, p_hi) = clopper_pearson(k1, nt, ROC_CONFIDENCE);
                    let p_p = k1 as f64 / budget as f64;
                    RocPoint {
                        alpha,
                        tau,
                        p_fa: k0 as f64 / budget as f64,
                        p_fa_lo: fa_lo,
                        p_fa_hi: fa_hi,
                        p_p,
                        p_p_std_err: binomial_std_err(p_p, nt),
                        p_p_lo: p_lo,
                        p_p_hi: p_hi,
                    }
                })
                .collect();
            RocCurve {
                theta: case.theta,
                trials: budget,
                points,
            }
        })
        .collect())
}

/// Empirical ROC of one scheme at amplitude θ.
pub fn roc(
    scheme: &Scheme,
    host: &HostModel,
    channel: &AttackChannel,
    theta: f64,
    alphas: &[f64],
    budget: usize,
    seed: u64,
) -> Result<RocCurve> {
    let case = RocCase {
        scheme,
        channel: *channel,
        theta,
    };
    Ok(roc_batch(&[case], host, alphas, budget, seed)?.remove(0))
}

// ---------------------------------------------------------------------------
// Pitman regularity

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityRow {
    pub n: usize,
    pub theta: f64,
    /// (dE{t|H₁}/dθ at θ_n) / (dE{t|H₁}/dθ at 0).
    pub slope_ratio: f64,
    pub slope_ratio_std_err: f64,
    /// Var{t|H₁}(θ_n) / Var{t|H₀}.
    pub variance_ratio: f64,
    pub variance_ratio_std_err: f64,
}

/// Both regularity ratios at θ_n = k / √n for each n.
pub fn pitman_regularity(
    scheme_for: &dyn Fn(usize) -> Result<Scheme>,
    host: &HostModel,
    k: f64,
    n_list: &[usize],
    budget: usize,
    seed: u64,
) -> Result<Vec<RegularityRow>> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(invalid("k", "must be positive"));
    }
    regularity_along(scheme_for, host, &|n| k / (n as f64).sqrt(), n_list, budget, seed)
}

/// Regularity ratios along an arbitrary amplitude schedule θ(n).
pub fn regularity_along(
    scheme_for: &dyn Fn(usize) -> Result<Scheme>,
    host: &HostModel,
    theta_of: &dyn Fn(usize) -> f64,
    n_list: &[usize],
    budget: usize,
    seed: u64,
) -> Result<Vec<RegularityRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("n_list", "must be strictly increasing"));
    }
    if budget < 2 {
        return Err(Error::BudgetTooSmall {
            budget,
            reason: "need at least two trials",
        });
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let scheme = scheme_for(n)?;
        let host_n = host.with_len(n)?;
        check_len(&scheme, n)?;
        let theta = theta_of(n);
        if !(theta > 0.0) {
            return Err(invalid("theta", "amplitude must be positive"));
        }
        let h = 0.25 * theta;
        // Amplitudes: 0, h, 2h for the slope at 0; θ ± h for the slope at θ.
        let amps = [0.0, h, 2.0 * h, theta - h, theta, theta + h];
        let c0 = intercept_weights(&[h, 2.0 * h])?;
        let parts = map_chunks(budget, TRIAL_CHUNK, |c, range| {
            let mut rng = substream(seed ^ n as u64, labels::HOST_H1, c as u64);
            let mut s = vec![0.0; n];
            let mut t = [0.0; 6];
            let mut acc = [Moments::new(); 4];
            let mut cross = Moments::new();
            let path = AttackChannel::None.path();
            for _ in range {
                host_n.draw(&mut rng, &mut s);
                scheme.path_values(&s, &[], &path, &amps[1..], &mut t);
                let d0 = c0[0] * (t[1] - t[0]) / h + c0[1] * (t[2] - t[0]) / (2.0 * h);
                let dt = (t[5] - t[3]) / (2.0 * h);
                acc[0].push(dt);
                acc[1].push(d0);
                acc[2].push(t[0]);
                acc[3].push(t[4]);
                cross.push(dt * d0);
            }
            (acc, cross)
        });
        let mut acc = [Moments::new(); 4];
        let mut cross = Moments::new();
        for (a, c) in &parts {
            for i in 0..4 {
                acc[i].merge(&a[i]);
            }
            cross.merge(c);
        }
        let (ma, mb) = (acc[0].mean(), acc[1].mean());
        let ratio = ma / mb;
        // Delta method with the sample covariance of the paired quotients.
        let nf = budget as f64;
        let cov = (cross.mean() - ma * mb) * nf / (nf - 1.0);
        let var = acc[0].variance() - 2.0 * ratio * cov + ratio * ratio * acc[1].variance();
        let slope_se = (var.max(0.0) / nf).sqrt() / mb.abs();
        let (v0, v1) = (acc[2].variance(), acc[3].variance());
        let vr = v1 / v0;
        let vr_se = vr
            * ((acc[3].std_err_variance() / v1).powi(2) + (acc[2].std_err_variance() / v0).powi(2))
                .sqrt();
        rows.push(RegularityRow {
            n,
            theta,
            slope_ratio: ratio,
            slope_ratio_std_err: slope_se,
            variance_ratio: vr,
            variance_ratio_std_err: vr_se,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_coefficients_match_closed_rows() {
        assert_eq!(variance_h1_coefficients(1).unwrap(), [1.0, 0.0, 0.0]);
        let c2 = variance_h1_coefficients(2).unwrap();
        assert!((c2[1] - 4.0).abs() < 1e-12 && (c2[2] - 6.0).abs() < 1e-12);
        let c3 = variance_h1_coefficients(3).unwrap();
        assert_eq!(c3[1], 0.0);
        let c4 = variance_h1_coefficients(4).unwrap();
        assert!((c4[1] - 12.0 * 6f64.sqrt()).abs() < 1e-9);
        assert!((c4[2] - 608.0).abs() < 1e-9);
    }

    #[test]
    fn quadrature_variance_of_multiplicative_rule() {
        for &th in &[0.0, 0.05, 0.3] {
            let v = variance_h1_quadrature(2, th).unwrap();
            assert!((v - (1.0f64 + th).powi(4)).abs() < 1e-12, "{th} {v}");
        }
    }

    #[test]
    fn efficacy_needs_two_amplitudes() {
        let sch = Scheme::polynomial(1, 1.0, 4, SignKey::Unit).unwrap();
        let host = HostModel::gaussian(4, 1.0).unwrap();
        let r = estimate_efficacy(&sch, &host, &AttackChannel::None, &[0.0], 100, 1);
        assert!(matches!(r, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn roc_budget_guard() {
        let sch = Scheme::polynomial(1, 1.0, 4, SignKey::Unit).unwrap();
        let host = HostModel::gaussian(4, 1.0).unwrap();
        let r = roc(&sch, &host, &AttackChannel::None, 0.1, &[1e-3], 1000, 1);
        assert!(matches!(r, Err(Error::BudgetTooSmall { .. })));
    }

    #[test]
    fn residual_stats_order() {
        let s = ResidualStats::from_abs(vec![3.0, 1.0, 2.0, 4.0]);
        assert_eq!(s.max_abs, 4.0);
        assert_eq!(s.mean_abs, 2.5);
        assert_eq!(s.median_abs, 2.0);
        assert!(s.median_abs <= s.q90_abs && s.q90_abs <= s.q99_abs && s.q99_abs <= s.max_abs);
    }
}
