//! Closed-form values checked against independent oracles written here.

use std::f64::consts::PI;

use zerobit_core::analysis::{variance_h1_coefficients, variance_h1_quadrature, variance_h1_series};
use zerobit_core::channel::{scs_efficiency, scs_efficiency_theta, scs_partial_efficiency};
use zerobit_core::lattice::{MomentMethod, VoronoiMoments};
use zerobit_core::schemes::{scs_weights, SignKey};
use zerobit_core::specfn::{hyp1f1, jacobi_theta3, Quadrature};
use zerobit_core::{Lattice, Scheme, SeriesControl};

/// The first seven detectors, written out by hand as polynomials in r.
fn table_row(k: usize, r: f64) -> f64 {
    let s6 = 6f64.sqrt();
    match k {
        1 => r,
        2 => (r * r - 1.0) / 2f64.sqrt(),
        3 => (r.powi(3) - 3.0 * r) / s6,
        4 => (3.0 - 6.0 * r * r + r.powi(4)) / (2.0 * s6),
        5 => (15.0 * r - 10.0 * r.powi(3) + r.powi(5)) / (2.0 * 30f64.sqrt()),
        6 => (-15.0 + 45.0 * r * r - 15.0 * r.powi(4) + r.powi(6)) / (12.0 * 5f64.sqrt()),
        7 => (-105.0 * r + 105.0 * r.powi(3) - 21.0 * r.powi(5) + r.powi(7)) / (12.0 * 35f64.sqrt()),
        _ => unreachable!(),
    }
}

/// Embedder rows: w_k is the detector of order k - 1 (w_1 = 1).
fn table_embedder(k: usize, s: f64) -> f64 {
    if k == 1 {
        1.0
    } else {
        table_row(k - 1, s)
    }
}

const SAMPLE_POINTS: [f64; 9] = [-3.0, -2.5, -1.5, -0.5, 0.0, 0.25, 1.0, 2.0, 3.5];

#[test]
fn polynomial_family_matches_hand_written_rows() {
    for k in 1..=7 {
        let sch = Scheme::polynomial(k, 1.0, 1, SignKey::Unit).unwrap();
        assert_eq!(sch.eta0(), k as f64);
        let mut w = [0.0];
        for &x in &SAMPLE_POINTS {
            let t = sch.value(&[x]);
            assert!((t - table_row(k, x)).abs() < 1e-12, "t k={k} x={x}");
            sch.embedding(&[x], &mut w);
            assert!((w[0] - table_embedder(k, x)).abs() < 1e-12, "w k={k} x={x}");
        }
    }
}

/// Numeric derivative of a hand-written row, for the series oracle below.
fn row_derivs(k: usize, x: f64) -> (f64, f64, f64) {
    let h = 1e-3;
    let f = |y: f64| table_row(k, y);
    // Five-point stencils are exact for polynomials of degree ≤ 4 and very
    // accurate beyond at this step.
    let d1 = (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
    let d2 = (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h))
        / (12.0 * h * h);
    (f(x), d1, d2)
}

#[test]
fn variance_series_coefficients_match_quadrature_of_taylor_terms() {
    // c1 = 2E{w t' t}, c2 = E{w²(t'² + t t'')} - (E{w t'})².
    let q = Quadrature::gauss_hermite(60).unwrap();
    for k in 1..=7 {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut m = 0.0;
        for (&x, &wt) in q.nodes.iter().zip(&q.weights) {
            let (t, d1, d2) = row_derivs(k, x);
            let w = table_embedder(k, x);
            a += wt * w * d1 * t;
            b += wt * w * w * (d1 * d1 + t * d2);
            m += wt * w * d1;
        }
        let c = variance_h1_coefficients(k).unwrap();
        let (c1, c2) = (2.0 * a, b - m * m);
        assert!((c[1] - c1).abs() < 1e-6 * (1.0 + c1.abs()), "k={k}: {} vs {c1}", c[1]);
        assert!((c[2] - c2).abs() < 1e-6 * (1.0 + c2.abs()), "k={k}: {} vs {c2}", c[2]);
    }
}

#[test]
fn variance_series_rows() {
    let expect: [(usize, f64, f64); 7] = [
        (1, 0.0, 0.0),
        (2, 4.0, 6.0),
        (3, 0.0, 66.0),
        (4, 12.0 * 6f64.sqrt(), 608.0),
        (5, 0.0, 5470.0),
        (6, 40.0 * 30f64.sqrt(), 49122.0),
        (7, 0.0, 441392.0),
    ];
    for (k, c1, c2) in expect {
        let c = variance_h1_coefficients(k).unwrap();
        assert!((c[1] - c1).abs() < 1e-9, "k={k}");
        assert!((c[2] - c2).abs() < 1e-9 * c2.max(1.0), "k={k}");
    }
}

#[test]
fn variance_series_is_second_order_accurate() {
    // The gap to the exact variance shrinks like θ³.
    for k in 2..=6 {
        let gap = |th: f64| {
            (variance_h1_quadrature(k, th).unwrap() - variance_h1_series(k, th).unwrap()).abs()
        };
        let (g1, g2) = (gap(2e-3), gap(1e-3));
        assert!(g2 < g1 / 6.0 || g2 < 1e-10, "k={k}: {g1} {g2}");
    }
}

#[test]
fn multiplicative_variance_is_exact() {
    for th in [0.01, 0.1, 0.5] {
        let v = variance_h1_quadrature(2, th).unwrap();
        assert!((v - (1.0f64 + th).powi(4)).abs() < 1e-12);
    }
}

#[test]
fn scs_series_agrees_with_theta_form() {
    let ctl = SeriesControl::new(1_000_000, 1e-14, 0.0).unwrap();
    for &delta in &[0.5, 1.0, 2.0] {
        let base = scs_efficiency(delta, 0.0, ctl).unwrap();
        assert!((base - 60.0 / (delta * delta)).abs() < 1e-6 * base);
        for &sz in &[0.05, 0.1, 0.3, 0.7] {
            let a = scs_efficiency(delta, sz, ctl).unwrap();
            let b = scs_efficiency_theta(delta, sz, ctl).unwrap();
            assert!((a - b).abs() < 1e-8 * a.max(1e-12), "Δ={delta} σ={sz}: {a} {b}");
        }
    }
}

#[test]
fn scs_partial_sums_increase_towards_the_limit() {
    let ctl = SeriesControl::new(1_000_000, 1e-14, 0.0).unwrap();
    let full = scs_efficiency(1.0, 0.0, ctl).unwrap();
    let mut prev = 0.0;
    for j in [1, 3, 5, 10, 20, 100] {
        let v = scs_partial_efficiency(1.0, 0.0, j).unwrap();
        assert!(v > prev && v < full);
        prev = v;
    }
    let w = scs_weights(10_000);
    let total: f64 = w.iter().map(|v| v * v).sum();
    let zeta4 = PI.powi(4) / 90.0;
    let partial_zeta: f64 = (1..=10_000).map(|j| 1.0 / (j as f64).powi(4)).sum();
    // The weights are normalized for the infinite series.
    assert!((total - partial_zeta / zeta4).abs() < 1e-12);
}

#[test]
fn lattice_constants() {
    let z1 = Lattice::integer(1).unwrap().voronoi_moments(0, 0).unwrap();
    assert_eq!(z1.method, MomentMethod::ClosedForm);
    assert!((z1.efficiency() - 60.0).abs() < 1e-12);
    for p in 1..=4 {
        let m = Lattice::integer(p).unwrap().voronoi_moments(0, 0).unwrap();
        // η = 4 I2 / (I4 - I2²) with I2 = p/12, I4 = p/80 + p(p-1)/144.
        let pf = p as f64;
        let i2 = pf / 12.0;
        let i4 = pf / 80.0 + pf * (pf - 1.0) / 144.0;
        assert!((m.efficiency() - 4.0 * i2 / (i4 - i2 * i2)).abs() < 1e-10);
    }
    let ball = VoronoiMoments::ball(2, 1.0);
    assert!((ball.i2 - 0.5).abs() < 1e-15);
    assert!((ball.i4 - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn special_function_anchors() {
    let ctl = SeriesControl::default();
    // ₁F₁(a; a; x) = eˣ and ₁F₁(1; 2; x) = (eˣ - 1)/x.
    assert!((hyp1f1(0.7, 0.7, 1.3, ctl).unwrap() - 1.3f64.exp()).abs() < 1e-14);
    let x = 2.5f64;
    assert!((hyp1f1(1.0, 2.0, x, ctl).unwrap() - (x.exp() - 1.0) / x).abs() < 1e-13);
    // ϑ₃(0, e^{-π}) = π^{1/4} / Γ(3/4).
    let v = jacobi_theta3(0.0, (-PI).exp(), ctl).unwrap();
    assert!((v - 1.086_434_811_213_308_0).abs() < 1e-14);
}

#[test]
fn hexagonal_efficacy_matches_closed_form() {
    let lat = Lattice::a2();
    let m = lat.voronoi_moments(400_000, 11).unwrap();
    assert_eq!(m.method, MomentMethod::MonteCarlo);
    // Unit cell volume: η = 1800√3/43 and I2 = 5/(18√3) for the hexagonal cell.
    let eta = 1800.0 * 3f64.sqrt() / 43.0;
    assert!((m.efficiency() - eta).abs() < 4.0 * m.eta_std_err, "{} ± {}", m.efficiency(), m.eta_std_err);
    assert!((m.i2 - 5.0 / (18.0 * 3f64.sqrt())).abs() < 4.0 * m.i2_std_err);
}
