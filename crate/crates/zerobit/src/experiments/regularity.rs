//! Pitman regularity ratios along vanishing and fixed amplitude schedules.

use anyhow::Result;
use zerobit_core::analysis::{regularity_along, RegularityRow};
use zerobit_core::schemes::SignKey;
use zerobit_core::{HostModel, Scheme};

use super::Ctx;
use crate::config::{positive, positive_f};
use crate::report::{Report, Table};

/// Standard errors allowed between a ratio and its exact value.
const Z_LIMIT: f64 = 4.0;

pub(super) fn regularity(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let n_list = cfg.n_list.clone().unwrap_or_else(|| vec![100, 400, 1600, 6400]);
    for &n in &n_list {
        positive(n, "n_list")?;
    }
    let budget = cfg.budget.unwrap_or(20_000);
    let scale = positive_f(cfg.k_scale.unwrap_or(2.0), "k_scale")?;
    let fixed = positive_f(cfg.theta.unwrap_or(0.2), "theta")?;
    let host = HostModel::gaussian(n_list[0].max(1), 1.0)?;

    let table = Table::new(&[
        "case", "n", "theta", "slope_ratio", "slope_ratio_se", "slope_ratio_exact",
        "variance_ratio", "variance_ratio_se", "variance_ratio_exact",
    ]);
    let mut report = Report::new("regularity", "default", ctx.seed, table);
    report.budget = Some(budget);

    // Unit signs keep every sample on the same side, so exact ratios are closed form.
    let poly = |k: usize| move |n: usize| Scheme::polynomial(k, 1.0, n, SignKey::Unit);
    let vanishing = |n: usize| scale / (n as f64).sqrt();
    let constant = |_: usize| fixed;
    type Exact = fn(usize, f64) -> (f64, f64);
    let linear: Exact = |_, _| (1.0, 1.0);
    let quadratic: Exact = |_, th| (1.0 + th, (1.0 + th).powi(4));
    let cases: [(&str, usize, &dyn Fn(usize) -> f64, Exact); 3] = [
        ("polynomial k=1, theta=k/sqrt(n)", 1, &vanishing, linear),
        ("polynomial k=2, theta=k/sqrt(n)", 2, &vanishing, quadratic),
        ("polynomial k=2, fixed theta", 2, &constant, quadratic),
    ];
    let mut worst: f64 = 0.0;
    let mut last_ratio = None;
    for (i, (name, k, schedule, exact)) in cases.into_iter().enumerate() {
        let rows: Vec<RegularityRow> =
            regularity_along(&poly(k), &host, schedule, &n_list, budget, ctx.sub_seed(i as u64))?;
        for r in &rows {
            let (s_exact, v_exact) = exact(k, r.theta);
            report.table.push(vec![
                name.into(),
                r.n.into(),
                r.theta.into(),
                r.slope_ratio.into(),
                r.slope_ratio_std_err.into(),
                s_exact.into(),
                r.variance_ratio.into(),
                r.variance_ratio_std_err.into(),
                v_exact.into(),
            ]);
            // Quadratic detectors have exact central differences; allow rounding only.
            let sz = (r.slope_ratio - s_exact).abs() / (r.slope_ratio_std_err + 1e-9);
            let vz = (r.variance_ratio - v_exact).abs() / r.variance_ratio_std_err;
            worst = worst.max(vz);
            report.check_below(0, format!("{name}, n={}: |slope ratio - exact| / std_err", r.n), sz, Z_LIMIT);
            report.check_below(0, format!("{name}, n={}: |variance ratio - exact| / std_err", r.n), vz, Z_LIMIT);
        }
        if i == 1 {
            last_ratio = rows.last().copied();
        }
    }
    if let Some(r) = last_ratio {
        report.headline(format!("variance ratio k=2 at n={}", r.n), r.variance_ratio, r.variance_ratio_std_err);
    }
    report.estimate("max_variance_z", worst, 0.0);
    Ok(report)
}
