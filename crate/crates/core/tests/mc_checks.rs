//! Monte Carlo cross-checks at desk-scale budgets.

use std::sync::Arc;

use zerobit_core::analysis::{
    estimate_efficacy, h1_moments, pitman_regularity, regularity_along, variance_h1_quadrature,
};
use zerobit_core::channel::closed_form_efficiency;
use zerobit_core::engine::{block_quadrature, embed, lmp_from_embedding, AsymmetricEmbedder};
use zerobit_core::rng::substream;
use zerobit_core::schemes::SignKey;
use zerobit_core::stats::Moments;
use zerobit_core::{AttackChannel, HostModel, Scheme};

const GRID: [f64; 3] = [0.01, 0.02, 0.03];

/// E‖∇t_block‖² over the block quadrature, the gradient form of the efficacy.
fn quadrature_efficacy(scheme: &Scheme, host: &HostModel) -> f64 {
    let (points, weights) = block_quadrature(host, 48).unwrap();
    let p = scheme.block_dim();
    let mut g = vec![0.0; p];
    points
        .chunks_exact(p)
        .zip(&weights)
        .map(|(x, w)| {
            scheme.block().gradient(x, &mut g);
            w * g.iter().map(|v| v * v).sum::<f64>()
        })
        .sum()
}

#[test]
fn efficacy_triangle() {
    let n = 60;
    let gauss = HostModel::gaussian(n, 1.0).unwrap();
    let flat = HostModel::flat_interval(n, 1e4).unwrap();
    let cases: Vec<(Scheme, &HostModel)> = vec![
        (Scheme::polynomial(1, 1.0, n, SignKey::Seeded(1)).unwrap(), &gauss),
        (Scheme::polynomial(2, 1.0, n, SignKey::Seeded(1)).unwrap(), &gauss),
        (Scheme::polynomial(3, 1.0, n, SignKey::Seeded(1)).unwrap(), &gauss),
        (Scheme::janis(2, 1.0, n, SignKey::Seeded(1)).unwrap(), &gauss),
        (Scheme::janis(3, 1.0, n, SignKey::Seeded(1)).unwrap(), &gauss),
        (Scheme::sinusoidal(1, 2.0, n, SignKey::Seeded(1)).unwrap(), &flat),
    ];
    for (i, (sch, host)) in cases.iter().enumerate() {
        let closed = closed_form_efficiency(sch.family(), &AttackChannel::None).unwrap();
        let block_host = HostModel::new(n, sch.block_dim(), host.kind().clone()).unwrap();
        let quad = quadrature_efficacy(sch, &block_host);
        let mc = estimate_efficacy(sch, host, &AttackChannel::None, &GRID, 20_000, 5 + i as u64)
            .unwrap();
        assert!((closed - sch.eta0()).abs() < 1e-12 * closed, "case {i}");
        assert!((quad - closed).abs() < 0.05 * closed, "case {i}: quad {quad} vs {closed}");
        assert!((mc.eta - closed).abs() < 0.05 * closed, "case {i}: mc {} vs {closed}", mc.eta);
    }
}

#[test]
fn attacked_efficacy_follows_the_decay_law() {
    let n = 100;
    let host = HostModel::gaussian(n, 1.0).unwrap();
    let ch = AttackChannel::wiener(0.5).unwrap();
    for k in 1..=2 {
        let sch = Scheme::polynomial(k, 1.0, n, SignKey::Seeded(3)).unwrap();
        let want = closed_form_efficiency(sch.family(), &ch).unwrap();
        let got = estimate_efficacy(&sch, &host, &ch, &GRID, 50_000, 9).unwrap();
        assert!((got.eta - want).abs() < 4.0 * got.std_err + 0.02 * want, "k={k}: {} vs {want}", got.eta);
    }
}

#[test]
fn h1_variance_matches_exact_quadrature() {
    // Unit signs: with a keyed sign flip the H₁ law of an even detector changes.
    // From k = 4 on the exact variance at these amplitudes is carried by rare
    // tail events (k = 5, θ = 0.05 gives ≈ 235) and no desk-scale sample sees them.
    let host = HostModel::gaussian(1, 1.0).unwrap();
    for k in 1..=3 {
        let sch = Scheme::polynomial(k, 1.0, 1, SignKey::Unit).unwrap();
        let thetas = [0.05, 0.1];
        let rows = h1_moments(&sch, &host, &AttackChannel::None, &thetas, 400_000, 40 + k as u64)
            .unwrap();
        for row in rows {
            let exact = variance_h1_quadrature(k, row.theta).unwrap();
            assert!(
                (row.variance - exact).abs() < 3.0 * row.variance_std_err,
                "k={k} θ={}: {} ± {} vs {exact}",
                row.theta,
                row.variance,
                row.variance_std_err
            );
        }
    }
}

#[test]
fn fixed_wnr_noise_keeps_the_slope() {
    let n = 100;
    let host = HostModel::gaussian(n, 1.0).unwrap();
    let sch = Scheme::polynomial(2, 1.0, n, SignKey::Seeded(2)).unwrap();
    let clean = estimate_efficacy(&sch, &host, &AttackChannel::None, &GRID, 40_000, 77).unwrap();
    let noisy =
        estimate_efficacy(&sch, &host, &AttackChannel::fixed_wnr(1.0).unwrap(), &GRID, 40_000, 78)
            .unwrap();
    let se = clean.slope_std_err.hypot(noisy.slope_std_err);
    assert!((clean.slope - noisy.slope).abs() < 3.0 * se);
}

#[test]
fn asymmetric_embedder_meets_its_distortion_budget() {
    let n = 200;
    let host = HostModel::gaussian(n, 1.0).unwrap();
    let sch = Scheme::polynomial(2, 1.0, n, SignKey::Seeded(8)).unwrap();
    let emb = AsymmetricEmbedder::calibrate(sch, &host, 1.0, 20_000, 3).unwrap();
    let (a, _) = emb.a();
    let (b, _) = emb.b();
    let nf = n as f64;
    assert!((a + b * nf * emb.eta() - nf).abs() < 1e-9 * nf);
    // Independent draws: E‖x/θ‖² = n.
    let mut rng = substream(99, 1, 0);
    let mut s = vec![0.0; n];
    let mut m = Moments::new();
    for _ in 0..5000 {
        host.draw(&mut rng, &mut s);
        let y = emb.embed(&s, 1.0).unwrap();
        m.push(y.iter().zip(&s).map(|(u, v)| (u - v) * (u - v)).sum());
    }
    assert!((m.mean() - nf).abs() < 4.0 * m.std_err_mean(), "{} ± {}", m.mean(), m.std_err_mean());
}

#[test]
fn lmp_round_trip_recovers_scalar_detectors() {
    let gauss = HostModel::gaussian(1, 1.0).unwrap();
    let flat = HostModel::flat_interval(1, 40.0).unwrap();
    let mut cases: Vec<(Scheme, &HostModel)> = (1..=5)
        .map(|k| (Scheme::polynomial(k, 1.0, 1, SignKey::Unit).unwrap(), &gauss))
        .collect();
    for k in 1..=3 {
        cases.push((Scheme::sinusoidal(k, 1.0, 1, SignKey::Unit).unwrap(), &flat));
    }
    for (sch, host) in cases {
        let block = sch.block().clone();
        let c = (1.0 / sch.eta0()).sqrt();
        let field = Arc::new(move |r: &[f64], out: &mut [f64]| {
            block.gradient(r, out);
            out.iter_mut().for_each(|v| *v *= c);
        });
        let lmp = lmp_from_embedding(field, None, host, 1).unwrap();
        let (points, weights) = block_quadrature(host, 64).unwrap();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, w) in points.iter().zip(&weights) {
            let a = lmp.value(&[*x]).unwrap();
            let b = sch.block().value(&[*x]);
            sxy += w * a * b;
            sxx += w * a * a;
            syy += w * b * b;
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho > 0.9999, "{:?}: ρ = {rho}", sch.family());
    }
}

#[test]
fn regularity_ratios() {
    let host = HostModel::gaussian(100, 1.0).unwrap();
    let lin = |n: usize| Scheme::polynomial(1, 1.0, n, SignKey::Seeded(4));
    let rows = pitman_regularity(&lin, &host, 2.0, &[100, 400], 20_000, 6).unwrap();
    for r in &rows {
        assert!((r.slope_ratio - 1.0).abs() < 1e-9);
        assert!((r.variance_ratio - 1.0).abs() < 4.0 * r.variance_ratio_std_err);
    }
    // A fixed amplitude keeps the multiplicative variance ratio at (1 + θ)⁴.
    let mult = |n: usize| Scheme::polynomial(2, 1.0, n, SignKey::Unit);
    let rows = regularity_along(&mult, &host, &|_| 0.2, &[100, 400], 20_000, 7).unwrap();
    for r in &rows {
        let want = 1.2f64.powi(4);
        assert!((r.variance_ratio - want).abs() < 4.0 * r.variance_ratio_std_err + 0.01, "{r:?}");
    }
}

#[test]
fn embedding_has_unit_power_per_sample() {
    let n = 300;
    let host = HostModel::gaussian(n, 1.0).unwrap();
    let sch = Scheme::polynomial(3, 1.0, n, SignKey::Seeded(5)).unwrap();
    let mut rng = substream(12, 2, 0);
    let mut s = vec![0.0; n];
    let mut m = Moments::new();
    for _ in 0..4000 {
        host.draw(&mut rng, &mut s);
        let y = embed(&sch, &s, 1.0).unwrap();
        m.push(y.iter().zip(&s).map(|(u, v)| (u - v) * (u - v)).sum::<f64>() / n as f64);
    }
    assert!((m.mean() - 1.0).abs() < 4.0 * m.std_err_mean());
}
