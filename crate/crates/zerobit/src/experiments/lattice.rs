//! Voronoi-cell moments and DC-DM efficacies of the supported lattices.

use anyhow::Result;
use zerobit_core::lattice::{MomentMethod, VoronoiMoments};
use zerobit_core::Lattice;

use super::Ctx;
use crate::config::positive_f;
use crate::report::{Cell, Report, Table};

fn method_name(m: MomentMethod) -> &'static str {
    match m {
        MomentMethod::ClosedForm => "closed_form",
        MomentMethod::MonteCarlo => "monte_carlo",
    }
}

fn row(name: &str, lat: &Lattice, m: &VoronoiMoments, target: Option<f64>) -> Vec<Cell> {
    let eta = m.efficiency();
    vec![
        name.into(),
        lat.dim().into(),
        lat.beta().into(),
        method_name(m.method).into(),
        m.samples.into(),
        m.i2.into(),
        m.i2_std_err.into(),
        m.i4.into(),
        m.i4_std_err.into(),
        eta.into(),
        m.eta_std_err.into(),
        target.into(),
        target.map(|t| (eta - t) / t).into(),
    ]
}

pub(super) fn lattice_eff(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let budget = cfg.budget.unwrap_or(10_000_000);
    let betas = cfg.beta.clone().unwrap_or_else(|| vec![0.5, 2.0]);
    for &b in &betas {
        positive_f(b, "beta")?;
    }
    let table = Table::new(&[
        "lattice", "p", "beta", "method", "samples", "i2", "i2_se", "i4", "i4_se", "eta",
        "eta_se", "eta_target", "rel_err",
    ]);
    let mut report = Report::new("lattice-eff", "default", ctx.seed, table);
    report.budget = Some(budget);

    let mut entries: Vec<(String, Lattice, Option<f64>)> = Vec::new();
    if let Some(desc) = &cfg.lattice {
        entries.push(("custom".into(), desc.build("lattice")?, None));
    } else {
        for p in 1..=4 {
            let lat = Lattice::integer(p)?;
            let pf = p as f64;
            let i2 = pf / 12.0;
            let i4 = pf / 80.0 + pf * (pf - 1.0) / 144.0;
            entries.push((format!("Z{p}"), lat, Some(4.0 * i2 / (i4 - i2 * i2))));
        }
        entries.push(("A2".into(), Lattice::a2(), Some(1800.0 * 3f64.sqrt() / 43.0)));
    }

    let mut scaling_err: f64 = 0.0;
    for (i, (name, lat, target)) in entries.iter().enumerate() {
        let seed = ctx.sub_seed(i as u64);
        let m = lat.voronoi_moments(budget, seed)?;
        report.table.push(row(name, lat, &m, *target));
        report.estimate(format!("eta_{name}"), m.efficiency(), m.eta_std_err);
        match name.as_str() {
            "Z1" => report.check_below(5, "|eta(Z1) - 60|", (m.efficiency() - 60.0).abs(), 1e-12),
            "A2" => {
                let t = target.expect("A2 has a closed form");
                report.headline("eta_A2", m.efficiency(), m.eta_std_err);
                report.check_below(5, "|eta(A2) - 1800√3/43| / target", (m.efficiency() - t).abs() / t, 0.005);
            }
            _ => {}
        }
        for &b in &betas {
            let scaled = lat.scaled(b)?;
            // Same seed, so Monte Carlo moments see the same points up to scaling.
            let ms = scaled.voronoi_moments(budget, seed)?;
            report.table.push(row(&format!("{name}*{b}"), &scaled, &ms, target.map(|t| t / (b * b))));
            let rel = (ms.efficiency() * b * b / m.efficiency() - 1.0).abs();
            scaling_err = scaling_err.max(rel);
        }
    }
    if !betas.is_empty() {
        report.check_below(5, "max |β² eta(βΛ) / eta(Λ) - 1|", scaling_err, 1e-10);
    }
    if report.summary.name.is_empty() {
        let first = &report.estimates[0];
        report.summary = first.clone();
    }
    Ok(report)
}
