//! Monte Carlo efficacy under attack, fixed-WNR invariance, and mixture robustness.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use zerobit_core::analysis::{estimate_efficacy, estimate_efficacy_batch, EfficacyCase, EfficacyEstimate};
use zerobit_core::channel::{
    closed_form_efficiency, pure_robustness_integral, robustness_integral, RobustnessKind,
};
use zerobit_core::rng::substream;
use zerobit_core::schemes::SignKey;
use zerobit_core::{AttackChannel, HostModel, Scheme};

use super::{theta_grid, Ctx};
use crate::config::positive;
use crate::report::{Cell, Report, Table};

/// Relative tolerance of the decay-law comparison.
const DECAY_TOL: f64 = 0.05;

pub(super) fn efficacy(ctx: &Ctx) -> Result<Report> {
    let default = if ctx.cfg.scheme.is_some() { "custom" } else { "decay" };
    match ctx.suite(default, &["decay", "fixed-wnr", "mixture", "custom"])?.as_str() {
        "decay" => decay(ctx),
        "fixed-wnr" => fixed_wnr(ctx),
        "mixture" => mixture(ctx),
        _ => custom(ctx),
    }
}

fn channel_label(ch: &AttackChannel) -> (String, f64, f64) {
    let (g, s) = ch.gain_and_noise();
    let name = match ch {
        AttackChannel::None => "none".to_owned(),
        AttackChannel::FixedWnr { g } => format!("fixed_wnr g={g}"),
        AttackChannel::Additive { .. } => "awgn".to_owned(),
        AttackChannel::Sawgn { .. } => "sawgn".to_owned(),
    };
    (name, g, s)
}

fn efficacy_table() -> Table {
    Table::new(&[
        "case", "channel", "gamma", "sigma_z", "eta_hat", "eta_hat_se", "slope", "slope_se",
        "eta_closed", "rel_err", "trials",
    ])
}

fn push_row(report: &mut Report, name: &str, ch: &AttackChannel, est: &EfficacyEstimate, closed: Option<f64>) {
    let (chname, g, s) = channel_label(ch);
    report.table.push(vec![
        name.into(),
        chname.into(),
        g.into(),
        s.into(),
        est.eta.into(),
        est.std_err.into(),
        est.slope.into(),
        est.slope_std_err.into(),
        closed.into(),
        closed.map(|c| (est.eta - c) / c).into(),
        est.trials.into(),
    ]);
}

fn decay(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let n = positive(cfg.n.unwrap_or(1000), "n")?;
    let budget = cfg.budget.unwrap_or(1_000_000);
    let grid = theta_grid(cfg);
    let mut report = Report::new("efficacy", "decay", ctx.seed, efficacy_table());
    report.n = Some(n);
    report.budget = Some(budget);
    let key = SignKey::Seeded(ctx.sub_seed(100));

    // Gaussian-host families under Wiener SAWGN, sharing host and noise draws.
    let mut gauss_cases: Vec<(String, Scheme, AttackChannel)> = Vec::new();
    for &sz in &[0.2, 0.5] {
        let ch = AttackChannel::wiener(sz)?;
        for l in 1..=3 {
            gauss_cases.push((format!("polynomial k={l} σz={sz}"), Scheme::polynomial(l, 1.0, n, key)?, ch));
        }
        gauss_cases.push((format!("janis p=2 σz={sz}"), Scheme::janis(2, 1.0, n, key)?, ch));
    }
    // Sinusoid η₀ = 1 on a flat host with whole periods, under AWGN.
    let mut flat_cases: Vec<(String, Scheme, AttackChannel)> = Vec::new();
    for &sz in &[0.3, 0.6] {
        flat_cases.push((
            format!("sinusoidal eta0=1 σz={sz}"),
            Scheme::sinusoidal(1, 1.0, n, key)?,
            AttackChannel::additive(sz)?,
        ));
    }
    let gauss = HostModel::gaussian(n, 1.0)?;
    let flat = HostModel::flat_interval(n, 2.0 * PI)?;

    let mut worst: f64 = 0.0;
    for (part, (cases, host)) in [(&gauss_cases, &gauss), (&flat_cases, &flat)].into_iter().enumerate() {
        let batch: Vec<EfficacyCase> = cases
            .iter()
            .map(|(_, s, ch)| EfficacyCase {
                scheme: s,
                channel: *ch,
            })
            .collect();
        let results = estimate_efficacy_batch(&batch, host, &grid, budget, ctx.sub_seed(part as u64))?;
        for ((name, sch, ch), res) in cases.iter().zip(results) {
            let est = res?;
            let closed = closed_form_efficiency(sch.family(), ch)?;
            push_row(&mut report, name, ch, &est, Some(closed));
            report.estimate(format!("eta_hat {name}"), est.eta, est.std_err);
            let rel = (est.eta - closed).abs() / closed;
            worst = worst.max(rel);
            report.check_below(7, format!("|eta_hat/closed - 1| {name}"), rel, DECAY_TOL);
        }
    }
    report.headline("max_rel_err", worst, 0.0);
    Ok(report)
}

fn fixed_wnr(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let n = positive(cfg.n.unwrap_or(1000), "n")?;
    let budget = cfg.budget.unwrap_or(200_000);
    let grid = theta_grid(cfg);
    let mut report = Report::new("efficacy", "fixed-wnr", ctx.seed, efficacy_table());
    report.n = Some(n);
    report.budget = Some(budget);
    let sch = Scheme::polynomial(2, 1.0, n, SignKey::Seeded(ctx.sub_seed(100)))?;
    let host = HostModel::gaussian(n, 1.0)?;
    let closed = closed_form_efficiency(sch.family(), &AttackChannel::None)?;
    // Independent runs, so the two standard errors combine in quadrature.
    let clean = estimate_efficacy(&sch, &host, &AttackChannel::None, &grid, budget, ctx.sub_seed(1))?;
    let wnr = AttackChannel::fixed_wnr(1.0)?;
    let noisy = estimate_efficacy(&sch, &host, &wnr, &grid, budget, ctx.sub_seed(2))?;
    push_row(&mut report, "polynomial k=2 noiseless", &AttackChannel::None, &clean, Some(closed));
    push_row(&mut report, "polynomial k=2 fixed WNR", &wnr, &noisy, Some(closed));
    let diff = noisy.slope - clean.slope;
    let se = clean.slope_std_err.hypot(noisy.slope_std_err);
    report.estimate("slope_noiseless", clean.slope, clean.slope_std_err);
    report.estimate("slope_fixed_wnr", noisy.slope, noisy.slope_std_err);
    report.headline("slope_difference", diff, se);
    report.check_below(8, "|slope_wnr - slope_clean| / std_err", diff.abs() / se, 3.0);
    Ok(report)
}

fn mixture(ctx: &Ctx) -> Result<Report> {
    let trials = positive(ctx.cfg.trials.unwrap_or(100), "trials")?;
    let orders = 5;
    let mut cols = vec!["kind".to_owned(), "trial".to_owned()];
    cols.extend((1..=orders).map(|k| format!("w{k}")));
    cols.extend(["eta_nominal", "g_mixture", "g_pure", "margin"].map(String::from));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = Report::new("efficacy", "mixture", ctx.seed, Table::new(&col_refs));
    let mut min_margin = f64::INFINITY;
    for (part, kind) in [RobustnessKind::Sinusoidal, RobustnessKind::Polynomial].into_iter().enumerate() {
        // Component efficacies: k² for sinusoids on a unit base, k for polynomials.
        let etas: Vec<f64> = (1..=orders)
            .map(|k| match kind {
                RobustnessKind::Sinusoidal => (k * k) as f64,
                RobustnessKind::Polynomial => k as f64,
            })
            .collect();
        let label = match kind {
            RobustnessKind::Sinusoidal => "sinusoidal",
            RobustnessKind::Polynomial => "polynomial",
        };
        let mut rng = substream(ctx.seed, 0x4d49_5800 + part as u64, 0);
        let mut failures = 0usize;
        let mut strict = 0usize;
        for t in 0..trials {
            let raw: Vec<f64> = (0..orders).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w: Vec<f64> = raw.iter().map(|v| v / norm).collect();
            let eta_nom: f64 = w.iter().zip(&etas).map(|(a, e)| a * a * e).sum();
            let gm = robustness_integral(kind, &w, &etas)?;
            let gp = pure_robustness_integral(kind, eta_nom);
            let margin = gp - gm;
            let degenerate = w.iter().filter(|v| v.abs() > 1e-12).count() <= 1;
            if margin < -1e-12 * gp {
                failures += 1;
            }
            if margin > 0.0 || degenerate {
                strict += 1;
            }
            min_margin = min_margin.min(margin / gp);
            let mut row: Vec<Cell> = vec![label.into(), t.into()];
            row.extend(w.iter().map(|v| Cell::Num(*v)));
            row.extend([eta_nom.into(), gm.into(), gp.into(), margin.into()]);
            report.table.push(row);
        }
        report.check_below(11, format!("{label}: trials with G_M > G_P"), failures as f64, 0.0);
        report.check_above(
            11,
            format!("{label}: trials with G_M < G_P or degenerate weights"),
            strict as f64,
            trials as f64 - 0.5,
        );
    }
    report.headline("min_relative_margin", min_margin, 0.0);
    Ok(report)
}

fn custom(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let n = positive(cfg.n.or(cfg.host.as_ref().and_then(|h| h.n)).unwrap_or(1000), "n")?;
    let budget = cfg.budget.unwrap_or(100_000);
    let Some((sch, host, ch)) = ctx.custom_case(n)? else {
        bail!("field `scheme`: the custom suite needs a scheme descriptor");
    };
    let grid = theta_grid(cfg);
    let mut report = Report::new("efficacy", "custom", ctx.seed, efficacy_table());
    report.n = Some(n);
    report.budget = Some(budget);
    let est = estimate_efficacy(&sch, &host, &ch, &grid, budget, ctx.sub_seed(0))?;
    let closed = closed_form_efficiency(sch.family(), &ch).ok();
    push_row(&mut report, "custom", &ch, &est, closed);
    report.headline("eta_hat", est.eta, est.std_err);
    if closed.is_none() {
        report.note("no closed-form efficacy for this scheme and channel");
    }
    Ok(report)
}
