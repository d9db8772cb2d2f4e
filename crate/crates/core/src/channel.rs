//! Attack channels and closed-form attacked efficacies.
//!
//! Efficacy under attack is the squared slope of E{t(r)|H₁} at θ = 0 divided
//! by n, with t normalized for the unattacked host.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::host::HostModel;
use crate::rng::{labels, map_chunks, substream, TRIAL_CHUNK};
use crate::schemes::{check_len, AffinePath, Family, Scheme};
use crate::specfn::{erfc, jacobi_theta3, Quadrature, SeriesControl};

/// Attack applied to the received signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackChannel {
    None,
    /// Watermark-scaled noise θ g^{-1/2} z̃, added under H₁ only.
    FixedWnr { g: f64 },
    /// r = y + σ_z z under both hypotheses.
    Additive { sigma_z: f64 },
    /// r = γ (y + σ_z z) under both hypotheses.
    Sawgn { gamma: f64, sigma_z: f64 },
}

impl AttackChannel {
    pub fn fixed_wnr(g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(invalid("g", "must be positive"));
        }
        Ok(Self::FixedWnr { g })
    }

    pub fn additive(sigma_z: f64) -> Result<Self> {
        if !(sigma_z >= 0.0 && sigma_z.is_finite()) {
            return Err(invalid("sigma_z", "must be nonnegative"));
        }
        Ok(Self::Additive { sigma_z })
    }

    pub fn sawgn(gamma: f64, sigma_z: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1]"));
        }
        if !(sigma_z >= 0.0 && sigma_z.is_finite()) {
            return Err(invalid("sigma_z", "must be nonnegative"));
        }
        Ok(Self::Sawgn { gamma, sigma_z })
    }

    /// SAWGN with the Wiener gain γ = 1/√(1+σ_z²) for unit-variance hosts.
    pub fn wiener(sigma_z: f64) -> Result<Self> {
        Self::sawgn(1.0 / (1.0 + sigma_z * sigma_z).sqrt(), sigma_z)
    }

    /// (γ, σ_z) of the fixed-DNR family; the identity for the other kinds.
    pub fn gain_and_noise(&self) -> (f64, f64) {
        match *self {
            Self::Additive { sigma_z } => (1.0, sigma_z),
            Self::Sawgn { gamma, sigma_z } => (gamma, sigma_z),
            Self::None | Self::FixedWnr { .. } => (1.0, 0.0),
        }
    }

    /// The received signal as an affine function of θ for the matched embedder.
    pub fn path(&self) -> AffinePath {
        let (gamma, sigma_z) = self.gain_and_noise();
        let noise_gain = match *self {
            Self::FixedWnr { g } => 1.0 / g.sqrt(),
            _ => 0.0,
        };
        AffinePath {
            gamma,
            sigma_z,
            noise_gain,
            embed_scale: 1.0,
        }
    }

    /// Whether the attack also hits unwatermarked content.
    pub fn applies_under_h0(&self) -> bool {
        matches!(self, Self::Additive { .. } | Self::Sawgn { .. })
    }

    /// Whether `apply` consumes Gaussian draws.
    pub fn is_noisy(&self) -> bool {
        match *self {
            Self::None => false,
            Self::FixedWnr { .. } => true,
            Self::Additive { sigma_z } | Self::Sawgn { sigma_z, .. } => sigma_z > 0.0,
        }
    }

    /// Attacks `y` given a pre-drawn standard normal vector `noise`.
    pub fn apply_with_noise(&self, y: &[f64], theta: f64, noise: &[f64], out: &mut [f64]) {
        match *self {
            Self::None => out.copy_from_slice(y),
            Self::FixedWnr { g } => {
                let c = theta / g.sqrt();
                for ((o, a), z) in out.iter_mut().zip(y).zip(noise) {
                    *o = a + c * z;
                }
            }
            Self::Additive { sigma_z } => {
                for ((o, a), z) in out.iter_mut().zip(y).zip(noise) {
                    *o = a + sigma_z * z;
                }
            }
            Self::Sawgn { gamma, sigma_z } => {
                for ((o, a), z) in out.iter_mut().zip(y).zip(noise) {
                    *o = gamma * (a + sigma_z * z);
                }
            }
        }
    }

    /// Attacks `y` drawing fresh noise from `rng`.
    pub fn apply_rng<R: Rng + ?Sized>(&self, y: &[f64], theta: f64, rng: &mut R, out: &mut [f64]) {
        let noise: Vec<f64> = if self.is_noisy() {
            (0..y.len()).map(|_| rng.sample(StandardNormal)).collect()
        } else {
            vec![0.0; y.len()]
        };
        self.apply_with_noise(y, theta, &noise, out);
    }

    /// Attacked copy of `y`, reproducible from `seed`.
    pub fn apply(&self, y: &[f64], theta: f64, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, labels::NOISE, 0);
        let mut out = vec![0.0; y.len()];
        self.apply_rng(y, theta, &mut rng, &mut out);
        out
    }
}

// ---------------------------------------------------------------------------
// Closed forms

/// Attacked efficacy η(γ, σ_z) of a family, where the closed form is known.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyMap {
    family: Family,
}

impl EfficiencyMap {
    pub fn new(family: Family) -> Self {
        Self { family }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn eval(&self, gamma: f64, sigma_z: f64) -> Result<f64> {
        family_efficiency(&self.family, gamma, sigma_z)
    }
}

/// Nominal efficacy η(1, 0) of a family description.
pub fn nominal_efficiency(family: &Family) -> f64 {
    match family {
        Family::Polynomial { k, sigma } => *k as f64 / (sigma * sigma),
        Family::Sinusoidal { k, eta_base } => (*k * *k) as f64 * eta_base,
        Family::Janis { p, sigma } => *p as f64 / (sigma * sigma),
        Family::MultiHermite { orders, sigma } => {
            orders.iter().sum::<usize>() as f64 / (sigma * sigma)
        }
        Family::Hyperboloid { sigma, .. } => 2.0 / (sigma * sigma),
        Family::SphereHardening { eta, .. } => *eta,
        Family::Projection { base, lambda_norm } => {
            nominal_efficiency(base) * lambda_norm * lambda_norm
        }
        Family::LatticeSinusoid { eta, .. } | Family::LatticeDcdm { eta } => *eta,
        Family::Mixture {
            components,
            weights,
        } => components
            .iter()
            .zip(weights)
            .map(|(c, w)| w * w * nominal_efficiency(c))
            .sum(),
    }
}

fn out_of_validity(msg: alloc::string::String) -> Error {
    Error::OutOfValidity(msg)
}

fn family_efficiency(family: &Family, gamma: f64, sigma_z: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0 && sigma_z >= 0.0) {
        return Err(invalid("gamma/sigma_z", "need 0 < gamma <= 1 and sigma_z >= 0"));
    }
    let eta0 = nominal_efficiency(family);
    if gamma == 1.0 && sigma_z == 0.0 {
        return Ok(eta0);
    }
    match family {
        Family::Polynomial { k, sigma } => {
            let wiener = sigma / (sigma * sigma + sigma_z * sigma_z).sqrt();
            if *k <= 2 || (gamma - wiener).abs() <= 1e-9 {
                Ok(eta0 * gamma.powi(2 * *k as i32))
            } else {
                Err(out_of_validity(format!(
                    "polynomial order {k} needs the Wiener gain {wiener:.6}, got {gamma:.6}"
                )))
            }
        }
        Family::Janis { p, .. } => Ok(eta0 * gamma.powi(2 * *p as i32)),
        Family::Sinusoidal { .. } | Family::LatticeSinusoid { .. } => {
            if gamma != 1.0 {
                return Err(out_of_validity(
                    "sinusoidal closed form needs additive noise (gamma = 1)".into(),
                ));
            }
            Ok(eta0 * (-eta0 * sigma_z * sigma_z).exp())
        }
        Family::Mixture {
            components,
            weights,
        } => mixture_efficiency(components, weights, gamma, sigma_z),
        other => Err(out_of_validity(format!(
            "no closed form for {other:?} under an attack"
        ))),
    }
}

/// Closed-form efficacy of a scheme's family under a channel.
///
/// Fixed-WNR noise leaves the efficacy unchanged at first order.
pub fn closed_form_efficiency(family: &Family, channel: &AttackChannel) -> Result<f64> {
    match channel {
        AttackChannel::None | AttackChannel::FixedWnr { .. } => Ok(nominal_efficiency(family)),
        _ => {
            let (g, s) = channel.gain_and_noise();
            family_efficiency(family, g, s)
        }
    }
}

/// Mixture efficacy (Σ ω_j² √(η_j(1,0) η_j(γ,σ_z)))² / Σ ω_j² η_j(1,0).
///
/// Valid when every component has a closed form at (γ, σ_z).
pub fn mixture_efficiency(
    components: &[Family],
    weights: &[f64],
    gamma: f64,
    sigma_z: f64,
) -> Result<f64> {
    if components.is_empty() || components.len() != weights.len() {
        return Err(invalid("weights", "need one weight per component"));
    }
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if (s2 - 1.0).abs() > 1e-9 {
        return Err(invalid("weights", "squared weights must sum to 1"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, w) in components.iter().zip(weights) {
        let e0 = nominal_efficiency(c);
        let e = family_efficiency(c, gamma, sigma_z)?;
        num += w * w * (e0 * e).sqrt();
        den += w * w * e0;
    }
    Ok(num * num / den)
}

/// Efficacy 60/Δ² scaled SCS curve η_SCS(1, σ_z) from the Fourier-weight series.
///
/// With η = (2π/Δ)², η_SCS = (90η/π⁴)(Σ_j j^{-2} e^{-j²ησ²/2})² / ζ(2). The
/// numerator sum is truncated once the tail (estimated by the midpoint
/// integral and added back) is below the tolerance.
pub fn scs_efficiency(delta: f64, sigma_z: f64, ctl: SeriesControl) -> Result<f64> {
    check_scs(delta, sigma_z)?;
    let eta = (2.0 * PI / delta).powi(2);
    let c = eta * sigma_z * sigma_z / 2.0;
    let mut sum = 0.0;
    for j in 1..=ctl.max_terms {
        let jf = j as f64;
        sum += (-c * jf * jf).exp() / (jf * jf);
        let a = jf + 0.5;
        // Midpoint-rule error of the tail integral is about f'(a)/24.
        let err = (-c * a * a).exp() * (1.0 / (12.0 * a * a * a) + c / (12.0 * a));
        if err <= ctl.abs_tol.max(ctl.rel_tol * sum) {
            sum += tail_integral(a, c);
            return Ok(scs_scale(eta) * sum * sum);
        }
    }
    Err(Error::NonConvergence {
        terms: ctl.max_terms,
    })
}

/// Truncated series with j ≤ j_max in the numerator (denominator kept exact).
pub fn scs_partial_efficiency(delta: f64, sigma_z: f64, j_max: usize) -> Result<f64> {
    check_scs(delta, sigma_z)?;
    if j_max == 0 {
        return Err(invalid("j_max", "must be at least 1"));
    }
    let eta = (2.0 * PI / delta).powi(2);
    let c = eta * sigma_z * sigma_z / 2.0;
    let sum: f64 = (1..=j_max)
        .map(|j| {
            let jf = j as f64;
            (-c * jf * jf).exp() / (jf * jf)
        })
        .sum();
    Ok(scs_scale(eta) * sum * sum)
}

/// The same curve through the theta-function integral
/// (60/Δ²)(1 + 6σ²/Δ² - (3/π) ∫_0^{2πσ²/Δ²} ϑ₃(0, e^{-πu}) du)².
pub fn scs_efficiency_theta(delta: f64, sigma_z: f64, ctl: SeriesControl) -> Result<f64> {
    check_scs(delta, sigma_z)?;
    let x = 2.0 * PI * sigma_z * sigma_z / (delta * delta);
    let integral = theta_integral(x, ctl)?;
    let f = 1.0 + 3.0 * x / PI - 3.0 / PI * integral;
    Ok(60.0 / (delta * delta) * f * f)
}

fn check_scs(delta: f64, sigma_z: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", "must be positive"));
    }
    if !(sigma_z >= 0.0 && sigma_z.is_finite()) {
        return Err(invalid("sigma_z", "must be nonnegative"));
    }
    Ok(())
}

fn scs_scale(eta: f64) -> f64 {
    90.0 * eta / PI.powi(4) / (PI * PI / 6.0)
}

/// ∫_a^∞ x^{-2} e^{-c x²} dx.
fn tail_integral(a: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 1.0 / a;
    }
    (-c * a * a).exp() / a - (PI * c).sqrt() * erfc(c.sqrt() * a)
}

/// ∫_0^x ϑ₃(0, e^{-πu}) du, using ϑ₃(e^{-πu}) = u^{-1/2} ϑ₃(e^{-π/u}) below u = 1.
fn theta_integral(x: f64, ctl: SeriesControl) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    // u = v²: ∫_0^{min(x,1)} u^{-1/2} ϑ₃(e^{-π/u}) du = 2 ∫_0^{√min(x,1)} ϑ₃(e^{-π/v²}) dv.
    let v_max = x.min(1.0).sqrt();
    let quad = Quadrature::gauss_legendre(64, 0.0, v_max)?;
    for (&v, &w) in quad.nodes.iter().zip(&quad.weights) {
        total += 2.0 * w * jacobi_theta3(0.0, (-PI / (v * v)).exp(), ctl)?;
    }
    let mut lo = 1.0;
    while lo < x {
        let hi = (lo + 1.0).min(x);
        let quad = Quadrature::gauss_legendre(32, lo, hi)?;
        for (&u, &w) in quad.nodes.iter().zip(&quad.weights) {
            total += w * jacobi_theta3(0.0, (-PI * u).exp(), ctl)?;
        }
        lo = hi;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Robustness scores

/// Which attack coupling the robustness score integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobustnessKind {
    /// Sinusoids under additive noise: integrate over σ_z ∈ [0, ∞) at γ = 1.
    Sinusoidal,
    /// Polynomials under Wiener SAWGN: integrate over γ ∈ [0, 1].
    Polynomial,
}

fn check_mixture(weights: &[f64], etas: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.len() != etas.len() {
        return Err(invalid("weights", "need one weight per component"));
    }
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if (s2 - 1.0).abs() > 1e-9 {
        return Err(invalid("weights", "squared weights must sum to 1"));
    }
    if etas.iter().any(|e| !(*e > 0.0)) {
        return Err(invalid("eta", "component efficacies must be positive"));
    }
    Ok(())
}

/// Score g = √(η(1,0) η(attack)) of a mixture at σ_z (sinusoidal) or γ (polynomial).
pub fn robustness_score(kind: RobustnessKind, weights: &[f64], etas: &[f64], x: f64) -> Result<f64> {
    check_mixture(weights, etas)?;
    Ok(weights
        .iter()
        .zip(etas)
        .map(|(w, e)| {
            let decay = match kind {
                RobustnessKind::Sinusoidal => (-e * x * x / 2.0).exp(),
                RobustnessKind::Polynomial => x.powf(*e),
            };
            w * w * e * decay
        })
        .sum())
}

/// Closed-form integrated score G of a mixture.
pub fn robustness_integral(kind: RobustnessKind, weights: &[f64], etas: &[f64]) -> Result<f64> {
    check_mixture(weights, etas)?;
    let s: f64 = weights
        .iter()
        .zip(etas)
        .map(|(w, e)| {
            w * w
                * match kind {
                    RobustnessKind::Sinusoidal => e.sqrt(),
                    RobustnessKind::Polynomial => e / (e + 1.0),
                }
        })
        .sum();
    Ok(match kind {
        RobustnessKind::Sinusoidal => (PI / 2.0).sqrt() * s,
        RobustnessKind::Polynomial => s,
    })
}

/// Integrated score G of the pure solution with efficacy `eta`.
pub fn pure_robustness_integral(kind: RobustnessKind, eta: f64) -> f64 {
    match kind {
        RobustnessKind::Sinusoidal => (PI / 2.0).sqrt() * eta.sqrt(),
        RobustnessKind::Polynomial => eta / (eta + 1.0),
    }
}

/// Quadrature of the score, independent of [`robustness_integral`].
pub fn robustness_integral_numeric(
    kind: RobustnessKind,
    weights: &[f64],
    etas: &[f64],
) -> Result<f64> {
    check_mixture(weights, etas)?;
    let quad_panels = |a: f64, b: f64, panels: usize| -> Result<f64> {
        let mut total = 0.0;
        let h = (b - a) / panels as f64;
        for i in 0..panels {
            let q = Quadrature::gauss_legendre(24, a + i as f64 * h, a + (i + 1) as f64 * h)?;
            for (&x, &w) in q.nodes.iter().zip(&q.weights) {
                total += w * robustness_score(kind, weights, etas, x)?;
            }
        }
        Ok(total)
    };
    match kind {
        RobustnessKind::Sinusoidal => {
            let eta_min = etas.iter().cloned().fold(f64::INFINITY, f64::min);
            quad_panels(0.0, 12.0 / eta_min.sqrt(), 64)
        }
        RobustnessKind::Polynomial => quad_panels(0.0, 1.0, 64),
    }
}

// ---------------------------------------------------------------------------
// Counter-attack embedding

/// Monte Carlo estimate of E_Z{∇t(γ(s+z))} for a fixed-DNR channel.
pub fn expected_gradient(
    scheme: &Scheme,
    channel: &AttackChannel,
    s: &[f64],
    mc_budget: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_len(scheme, s.len())?;
    if !matches!(channel, AttackChannel::Additive { .. } | AttackChannel::Sawgn { .. }) {
        return Err(invalid("channel", "counter-attack needs an additive or SAWGN channel"));
    }
    if mc_budget < 100 {
        return Err(Error::BudgetTooSmall {
            budget: mc_budget,
            reason: "inner expectation needs at least 100 noise draws",
        });
    }
    let n = s.len();
    let parts = map_chunks(mc_budget, TRIAL_CHUNK, |c, range| {
        let mut rng = substream(seed, labels::INNER, c as u64);
        let mut acc = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut g = vec![0.0; n];
        for _ in range {
            channel.apply_rng(s, 0.0, &mut rng, &mut r);
            scheme.gradient(&r, &mut g);
            for (a, v) in acc.iter_mut().zip(&g) {
                *a += v;
            }
        }
        acc
    });
    let mut mean = vec![0.0; n];
    for part in parts {
        for (m, v) in mean.iter_mut().zip(&part) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= mc_budget as f64);
    Ok(mean)
}

/// Embedder w(s) ∝ E_Z{∇t(γ(s+z))} that knows the attack, scaled so that E‖w‖² = n.
#[derive(Debug, Clone)]
pub struct CounterAttackEmbedder {
    scheme: Scheme,
    channel: AttackChannel,
    inner_budget: usize,
    gain: f64,
}

impl CounterAttackEmbedder {
    /// Fixes the gain from `outer_budget` host draws.
    pub fn calibrate(
        scheme: Scheme,
        channel: AttackChannel,
        host: &HostModel,
        inner_budget: usize,
        outer_budget: usize,
        seed: u64,
    ) -> Result<Self> {
        check_len(&scheme, host.len())?;
        if outer_budget < 10 {
            return Err(Error::BudgetTooSmall {
                budget: outer_budget,
                reason: "power normalization needs at least 10 host draws",
            });
        }
        let n = host.len();
        let mut power = 0.0;
        for (i, s) in host.sample(seed, outer_budget).iter().enumerate() {
            let v = expected_gradient(&scheme, &channel, s, inner_budget, seed ^ (i as u64 + 1))?;
            power += v.iter().map(|x| x * x).sum::<f64>();
        }
        power /= outer_budget as f64;
        if !(power > 0.0) {
            return Err(Error::Domain("expected gradient vanishes under this channel"));
        }
        Ok(Self {
            scheme,
            channel,
            inner_budget,
            gain: (n as f64 / power).sqrt(),
        })
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn embedding(&self, s: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut v = expected_gradient(&self.scheme, &self.channel, s, self.inner_budget, seed)?;
        v.iter_mut().for_each(|x| *x *= self.gain);
        Ok(v)
    }
}
