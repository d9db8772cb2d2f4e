//! Polynomial-family table, detector curves, and the scalar Costa efficacy curve.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use zerobit_core::analysis::{
    h1_moments, variance_h1_coefficients, variance_h1_quadrature, variance_h1_series,
};
use zerobit_core::channel::{scs_efficiency, scs_partial_efficiency};
use zerobit_core::schemes::{scs_weights, SignKey};
use zerobit_core::specfn::{factorial, hermite_coefficients};
use zerobit_core::{AttackChannel, HostModel, Scheme, SeriesControl};

use super::Ctx;
use crate::config::{linspace, positive, positive_f};
use crate::report::{Cell, Report, Table};

/// Published polynomial rows: (integer coefficients in increasing powers, divisor).
/// Row k is the order-k detector; the order-k embedder is row k - 1.
const PUBLISHED: [(&[f64], f64); 8] = [
    (&[1.0], 1.0),
    (&[0.0, 1.0], 1.0),
    (&[-1.0, 0.0, 1.0], 1.414_213_562_373_095_1),
    (&[0.0, -3.0, 0.0, 1.0], 2.449_489_742_783_178),
    (&[3.0, 0.0, -6.0, 0.0, 1.0], 4.898_979_485_566_356),
    (&[0.0, 15.0, 0.0, -10.0, 0.0, 1.0], 10.954_451_150_103_322),
    (&[-15.0, 0.0, 45.0, 0.0, -15.0, 0.0, 1.0], 26.832_815_729_997_478),
    (&[0.0, -105.0, 0.0, 105.0, 0.0, -21.0, 0.0, 1.0], 70.992_957_397_195_4),
];

/// Rational points at which the constructed functions are compared.
const SAMPLE_POINTS: [f64; 9] = [-3.0, -2.0, -1.5, -0.5, 0.0, 1.0 / 3.0, 1.0, 2.5, 3.5];

fn published(k: usize, x: f64) -> f64 {
    let (c, d) = PUBLISHED[k];
    c.iter().rev().fold(0.0, |acc, a| acc * x + a) / d
}

fn coefficient_cells(k: usize, width: usize) -> Result<Vec<Cell>> {
    let scale = 1.0 / factorial(k)?.sqrt();
    let c = hermite_coefficients(k);
    Ok((0..width)
        .map(|i| Cell::Num(c.get(i).map_or(0.0, |v| v * scale)))
        .collect())
}

pub(super) fn table1(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let ks = cfg.k.clone().unwrap_or_else(|| (1..=7).collect());
    if ks.iter().any(|&k| k == 0 || k > 7) {
        bail!("field `k`: table orders must lie in 1..=7");
    }
    let mc_ks = cfg.mc_k.clone().unwrap_or_else(|| vec![2]);
    let theta = positive_f(cfg.theta.unwrap_or(0.1), "theta")?;
    let n = positive(cfg.n.unwrap_or(10_000), "n")?;
    let budget = cfg.budget.unwrap_or(100_000);

    let mut cols: Vec<String> = vec!["k".into(), "eta".into()];
    cols.extend((0..=7).map(|i| format!("t_r{i}")));
    cols.extend((0..=6).map(|i| format!("w_s{i}")));
    cols.extend(
        [
            "var_c0", "var_c1", "var_c2", "t_max_err", "w_max_err", "theta", "var_series",
            "var_exact", "var_mc", "var_mc_se",
        ]
        .map(String::from),
    );
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = Report::new("table1", "default", ctx.seed, Table::new(&col_refs));
    report.n = Some(n);
    report.budget = Some(budget);

    let mut worst_t: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    let mut worst_eta: f64 = 0.0;
    for &k in &ks {
        let sch = Scheme::polynomial(k, 1.0, 1, SignKey::Unit)?;
        let mut w = [0.0];
        let (mut et, mut ew) = (0.0f64, 0.0f64);
        for &x in &SAMPLE_POINTS {
            et = et.max((sch.value(&[x]) - published(k, x)).abs());
            sch.embedding(&[x], &mut w);
            ew = ew.max((w[0] - published(k - 1, x)).abs());
        }
        worst_t = worst_t.max(et);
        worst_w = worst_w.max(ew);
        worst_eta = worst_eta.max((sch.eta0() - k as f64).abs());
        let var = variance_h1_coefficients(k)?;

        let (mut mc, mut mc_se) = (None, None);
        if budget > 0 && mc_ks.contains(&k) {
            let scheme = Scheme::polynomial(k, 1.0, n, SignKey::Unit)?;
            let host = HostModel::gaussian(n, 1.0)?;
            let m = h1_moments(
                &scheme,
                &host,
                &AttackChannel::None,
                &[theta],
                budget,
                ctx.sub_seed(k as u64),
            )?;
            mc = Some(m[0].variance);
            mc_se = Some(m[0].variance_std_err);
            report.estimate(format!("var_h1_k{k}"), m[0].variance, m[0].variance_std_err);
            if k == 2 {
                let target = (1.0 + theta).powi(4);
                report.headline("var_h1_k2", m[0].variance, m[0].variance_std_err);
                report.check_below(
                    2,
                    format!("|var_mc - (1+θ)^4| / std_err (k=2, θ={theta})"),
                    (m[0].variance - target).abs() / m[0].variance_std_err,
                    3.0,
                );
            }
        }

        let mut row: Vec<Cell> = vec![k.into(), sch.eta0().into()];
        row.extend(coefficient_cells(k, 8)?);
        let mut wc = coefficient_cells(k - 1, 7)?;
        if k == 1 {
            wc = (0..7).map(|i| Cell::Num(if i == 0 { 1.0 } else { 0.0 })).collect();
        }
        row.extend(wc);
        row.extend([
            var[0].into(),
            var[1].into(),
            var[2].into(),
            et.into(),
            ew.into(),
            theta.into(),
            variance_h1_series(k, theta)?.into(),
            variance_h1_quadrature(k, theta)?.into(),
            mc.into(),
            mc_se.into(),
        ]);
        report.table.push(row);
    }

    report.check_below(1, "max |t - published t| at sample points", worst_t, 1e-12);
    report.check_below(1, "max |w - published w| at sample points", worst_w, 1e-12);
    report.check_below(1, "max |eta - k|", worst_eta, 0.0);
    if ks.contains(&4) {
        let c1 = variance_h1_coefficients(4)?[1];
        report.check_below(2, "|var_c1(k=4) - 12√6|", (c1 - 12.0 * 6f64.sqrt()).abs(), 1e-9);
    }
    if report.summary.name.is_empty() {
        report.headline("max_t_err", worst_t, 0.0);
    }
    Ok(report)
}

pub(super) fn hermite_plot(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let ks = cfg.k.clone().unwrap_or_else(|| (1..=7).collect());
    if ks.iter().any(|&k| k == 0) {
        bail!("field `k`: orders start at 1");
    }
    let span = cfg.range.unwrap_or([-3.0, 3.0]);
    let points = positive(cfg.points.unwrap_or(121), "points")?;
    let mut cols = vec!["r".to_owned()];
    cols.extend(ks.iter().map(|k| format!("t_k{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = Report::new("hermite-plot", "default", ctx.seed, Table::new(&col_refs));
    let schemes: Vec<Scheme> = ks
        .iter()
        .map(|&k| Scheme::polynomial(k, 1.0, 1, SignKey::Unit))
        .collect::<zerobit_core::Result<_>>()?;
    let mut peak: f64 = 0.0;
    for r in linspace(span, points) {
        let mut row: Vec<Cell> = vec![r.into()];
        for s in &schemes {
            let v = s.value(&[r]);
            peak = peak.max(v.abs());
            row.push(v.into());
        }
        report.table.push(row);
    }
    report.headline("max_abs_t", peak, 0.0);
    Ok(report)
}

pub(super) fn scs_curve(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let eta = positive_f(cfg.eta.unwrap_or(1.0), "eta")?;
    let span = cfg.sigma_range.unwrap_or([0.0, 1.0]);
    if span[0] < 0.0 {
        bail!("field `sigma_range`: noise levels must be nonnegative");
    }
    let points = positive(cfg.points.unwrap_or(101), "points")?;
    let jmax = cfg.jmax.clone().unwrap_or_else(|| vec![3, 5, 10, 20, 100]);
    if jmax.contains(&0) {
        bail!("field `jmax`: truncation orders start at 1");
    }
    let pure_ratio = positive_f(cfg.pure_eta.unwrap_or(1.52), "pure_eta")?;
    let pure_eta = pure_ratio * eta;
    let delta = 2.0 * PI / eta.sqrt();
    let ctl = SeriesControl::new(1_000_000, 0.0, 1e-15)?;
    let scs = |s: f64| scs_efficiency(delta, s, ctl);
    let pure = |s: f64| pure_eta * (-pure_eta * s * s).exp();

    let mut cols = vec!["sigma_z".to_owned(), "scs".to_owned()];
    cols.extend(jmax.iter().map(|j| format!("scs_j{j}")));
    cols.push("pure".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = Report::new("scs-curve", "default", ctx.seed, Table::new(&col_refs));
    for s in linspace(span, points) {
        let mut row: Vec<Cell> = vec![s.into(), scs(s)?.into()];
        for &j in &jmax {
            row.push(scs_partial_efficiency(delta, s, j)?.into());
        }
        row.push(pure(s).into());
        report.table.push(row);
    }

    let nominal = scs(0.0)?;
    report.headline("eta_scs_nominal", nominal, 0.0);
    report.check_below(6, "|eta_scs(1,0) - 60/Δ²|", (nominal - 60.0 / (delta * delta)).abs(), 1e-6);
    let norm: f64 = scs_weights(10_000).iter().map(|w| w * w).sum();
    report.check_below(6, "|Σω_j² - 1| at j_max = 1e4", (norm - 1.0).abs(), 1e-10);

    // Dominance of the pure curve on (0, 1/√η], the range shown for η = 1.
    let small: Vec<f64> = (1..=100).map(|i| i as f64 / (100.0 * eta.sqrt())).collect();
    let mut worst = f64::INFINITY;
    for &s in &small {
        worst = worst.min(pure(s) - scs(s)?);
    }
    report.check_above(6, "min (pure - scs) on small σ_z", worst, 0.0);

    // Tail decay exponents, d ln η / d σ², in units of η.
    let slope = |f: &dyn Fn(f64) -> Result<f64>, s: f64| -> Result<f64> {
        let h = 1e-3 / eta.sqrt();
        Ok((f(s + h)?.ln() - f(s - h)?.ln()) / ((s + h).powi(2) - (s - h).powi(2)) / eta)
    };
    let s_tail = 3.0 / eta.sqrt();
    let scs_rate = slope(&|s| scs(s).map_err(Into::into), s_tail)?;
    let pure_rate = slope(&|s| Ok(pure(s)), s_tail)?;
    report.estimate("scs_tail_rate", scs_rate, 0.0);
    report.estimate("pure_tail_rate", pure_rate, 0.0);
    report.check_below(6, "|scs tail rate + 1|", (scs_rate + 1.0).abs(), 1e-3);
    report.check_above(6, "scs rate - pure rate (slower decay)", scs_rate - pure_rate, 0.0);

    // Crossing point by bisection on (small end, tail).
    let (mut lo, mut hi) = (1.0 / eta.sqrt(), s_tail);
    if pure(lo) > scs(lo)? && pure(hi) < scs(hi)? {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pure(mid) > scs(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        report.estimate("crossing_sigma_z", 0.5 * (lo + hi), 0.0);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_divisors() {
        let want = [
            1.0,
            1.0,
            2f64.sqrt(),
            6f64.sqrt(),
            2.0 * 6f64.sqrt(),
            2.0 * 30f64.sqrt(),
            12.0 * 5f64.sqrt(),
            12.0 * 35f64.sqrt(),
        ];
        for (k, w) in want.iter().enumerate() {
            assert!((PUBLISHED[k].1 - w).abs() < 1e-14 * w);
        }
    }
}
