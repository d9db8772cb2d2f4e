//! Invariants as property tests.

use proptest::prelude::*;

use zerobit_core::analysis::{estimate_efficacy, pde_residual, roc};
use zerobit_core::channel::{
    mixture_efficiency, nominal_efficiency, robustness_integral, robustness_integral_numeric,
    RobustnessKind,
};
use zerobit_core::schemes::{Family, SignKey};
use zerobit_core::stats::clopper_pearson;
use zerobit_core::{AttackChannel, HostModel, Lattice, Scheme};

fn lattices() -> impl Strategy<Value = Lattice> {
    prop_oneof![
        (1usize..=4).prop_map(|p| Lattice::integer(p).unwrap()),
        Just(Lattice::a2()),
        // Sheared 2-D generator with a reasonable condition number.
        (-0.6f64..0.6, 0.6f64..1.6).prop_map(|(sh, d)| {
            Lattice::general(2, vec![1.0, sh, 0.0, d]).unwrap()
        }),
    ]
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantizer_is_translation_invariant(
        lat in lattices(),
        r in prop::collection::vec(-5.0f64..5.0, 4),
        m in prop::collection::vec(-3i64..=3, 4),
    ) {
        let p = lat.dim();
        let r = &r[..p];
        let shift = lat.point(&m[..p]);
        let moved: Vec<f64> = r.iter().zip(&shift).map(|(a, b)| a + b).collect();
        // Ties between Voronoi cells may resolve either way.
        prop_assume!(lat.boundary_gap(r) > 1e-9);
        let q0 = lat.quantize(r);
        let q1 = lat.quantize(&moved);
        for i in 0..p {
            prop_assert!((q1[i] - q0[i] - shift[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn quantizer_returns_the_nearest_point(
        lat in lattices(),
        r in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let p = lat.dim();
        let r = &r[..p];
        let q = lat.quantize(r);
        let c = lat.quantize_coords(r);
        let d = dist2(r, &q);
        // Compare against every neighbour within two steps in each coordinate.
        let steps = 5i64.pow(p as u32);
        for idx in 0..steps {
            let mut m = c.clone();
            let mut rest = idx;
            for v in m.iter_mut() {
                *v += rest % 5 - 2;
                rest /= 5;
            }
            prop_assert!(d <= dist2(r, &lat.point(&m)) + 1e-9);
        }
    }

    #[test]
    fn quantizer_commutes_with_scaling(
        lat in lattices(),
        beta in 0.1f64..4.0,
        r in prop::collection::vec(-5.0f64..5.0, 4),
    ) {
        let p = lat.dim();
        let r = &r[..p];
        prop_assume!(lat.boundary_gap(r) > 1e-6);
        let scaled = lat.scaled(beta).unwrap();
        let br: Vec<f64> = r.iter().map(|v| v * beta).collect();
        let q = lat.quantize(r);
        let qb = scaled.quantize(&br);
        for i in 0..p {
            prop_assert!((qb[i] - beta * q[i]).abs() < 1e-9 * (1.0 + beta));
        }
        prop_assert!((scaled.volume() - lat.volume() * beta.powi(p as i32)).abs()
            < 1e-9 * scaled.volume());
    }

    #[test]
    fn integer_moments_scale_with_beta(p in 1usize..=4, beta in 0.1f64..4.0) {
        let base = Lattice::integer(p).unwrap().voronoi_moments(0, 0).unwrap();
        let m = Lattice::integer(p).unwrap().scaled(beta).unwrap().voronoi_moments(0, 0).unwrap();
        prop_assert!((m.i2 - base.i2 * beta * beta).abs() < 1e-12 * m.i2.max(1.0));
        prop_assert!((m.efficiency() - base.efficiency() / (beta * beta)).abs()
            < 1e-9 * m.efficiency());
    }

    #[test]
    fn gains_multiply_to_inverse_efficacy(k in 1usize..=7, sigma in 0.2f64..3.0, blocks in 1usize..50) {
        let sch = Scheme::polynomial(k, sigma, blocks, SignKey::Seeded(7)).unwrap();
        let eta = sch.eta0();
        prop_assert!((sch.k_w() * sch.k_t() - 1.0 / eta).abs() < 1e-12 / eta);
        prop_assert!((eta - k as f64 / (sigma * sigma)).abs() < 1e-12 * eta);
    }

    #[test]
    fn polynomial_solutions_satisfy_the_equation(k in 1usize..=7, sigma in 0.3f64..3.0, seed in any::<u64>()) {
        let sch = Scheme::polynomial(k, sigma, 1, SignKey::Unit).unwrap();
        let host = HostModel::gaussian(1, sigma).unwrap();
        let st = pde_residual(&sch, &host, 200, seed).unwrap();
        let scale = (k as f64 / (sigma * sigma)) * 1e-9 * 10f64.powi(k as i32);
        prop_assert!(st.max_abs < scale, "k={} max={}", k, st.max_abs);
    }

    #[test]
    fn sinusoids_satisfy_the_equation_on_flat_hosts(freq in 0.5f64..20.0, seed in any::<u64>()) {
        let eta = freq * freq;
        let sch = Scheme::sinusoidal(1, eta, 1, SignKey::Unit).unwrap();
        let host = HostModel::flat_interval(1, 1e6).unwrap();
        let st = pde_residual(&sch, &host, 100, seed).unwrap();
        prop_assert!(st.max_abs < 1e-9 * eta);
    }

    #[test]
    fn mixtures_never_beat_their_best_component(
        raw in prop::collection::vec(0.05f64..1.0, 2..5),
        etas in prop::collection::vec(0.2f64..30.0, 4),
        sigma_z in 0.0f64..1.0,
    ) {
        let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        let weights: Vec<f64> = raw.iter().map(|w| w / norm).collect();
        let etas = &etas[..weights.len()];
        let fams: Vec<Family> = etas
            .iter()
            .map(|&e| Family::Sinusoidal { k: 1, eta_base: e })
            .collect();
        let mix = mixture_efficiency(&fams, &weights, 1.0, sigma_z).unwrap();
        let best = fams
            .iter()
            .map(|f| mixture_efficiency(core::slice::from_ref(f), &[1.0], 1.0, sigma_z).unwrap())
            .fold(0.0f64, f64::max);
        prop_assert!(mix <= best * (1.0 + 1e-12));
        // With no attack the mixture efficacy is the weighted average.
        let nominal = mixture_efficiency(&fams, &weights, 1.0, 0.0).unwrap();
        let avg: f64 = fams.iter().zip(&weights).map(|(f, w)| w * w * nominal_efficiency(f)).sum();
        prop_assert!((nominal - avg).abs() < 1e-10 * avg);
        // x^η has an endpoint singularity for small η, which slows the quadrature.
        for (kind, tol) in [(RobustnessKind::Sinusoidal, 1e-8), (RobustnessKind::Polynomial, 1e-4)] {
            let g = robustness_integral(kind, &weights, etas).unwrap();
            let gn = robustness_integral_numeric(kind, &weights, etas).unwrap();
            prop_assert!((g - gn).abs() < tol * g, "{:?}: {} {}", kind, g, gn);
        }
    }

    #[test]
    fn clopper_pearson_brackets_the_estimate(n in 1u64..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as u64;
        let (lo, hi) = clopper_pearson(k, n, 0.95);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        let (lo99, hi99) = clopper_pearson(k, n, 0.99);
        prop_assert!(lo99 <= lo + 1e-12 && hi99 >= hi - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn roc_is_monotone(k in 1usize..=4, seed in any::<u64>()) {
        let n = 64;
        let sch = Scheme::polynomial(k, 1.0, n, SignKey::Seeded(seed)).unwrap();
        let host = HostModel::gaussian(n, 1.0).unwrap();
        let alphas = [0.01, 0.05, 0.1, 0.2, 0.5];
        let curve = roc(&sch, &host, &AttackChannel::wiener(0.5).unwrap(), 0.1, &alphas, 20_000, seed)
            .unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[0].tau >= w[1].tau);
            prop_assert!(w[0].p_fa <= w[1].p_fa);
            prop_assert!(w[0].p_p <= w[1].p_p);
        }
        for pt in &curve.points {
            prop_assert!(pt.p_fa_lo <= pt.p_fa && pt.p_fa <= pt.p_fa_hi);
            prop_assert!(pt.p_p_lo <= pt.p_p && pt.p_p <= pt.p_p_hi);
        }
    }

    #[test]
    fn estimates_are_deterministic(k in 1usize..=3, seed in any::<u64>()) {
        let n = 32;
        let sch = Scheme::polynomial(k, 1.0, n, SignKey::Seeded(seed)).unwrap();
        let host = HostModel::gaussian(n, 1.0).unwrap();
        let ch = AttackChannel::wiener(0.5).unwrap();
        let a = estimate_efficacy(&sch, &host, &ch, &[0.01, 0.02], 2000, seed).unwrap();
        let b = estimate_efficacy(&sch, &host, &ch, &[0.01, 0.02], 2000, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
