//! Variance-shaping embedder: slope of Var{t|H₁} at θ = 0 and the distortion identity.

use anyhow::Result;
use zerobit_core::engine::AsymmetricEmbedder;
use zerobit_core::rng::{map_chunks, substream, TRIAL_CHUNK};
use zerobit_core::schemes::SignKey;
use zerobit_core::stats::{intercept_weights, Moments};
use zerobit_core::{HostModel, Scheme};

use super::{theta_grid, Ctx};
use crate::config::{positive, positive_f};
use crate::report::{Report, Table};

/// Per-trial statistics at θ = 0 and on the grid, plus ‖x/θ‖².
fn draw_trials(
    emb: &AsymmetricEmbedder,
    host: &HostModel,
    grid: &[f64],
    budget: usize,
    seed: u64,
) -> Vec<(Vec<f64>, f64)> {
    let n = host.len();
    let sch = emb.scheme();
    let parts = map_chunks(budget, TRIAL_CHUNK, |ch, range| {
        let mut rng = substream(seed, 0x4153_5900, ch as u64);
        let mut s = vec![0.0; n];
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut out = Vec::with_capacity(range.len());
        for _ in range {
            host.draw(&mut rng, &mut s);
            emb.watermark_unit(&s, &mut x);
            let mut t = Vec::with_capacity(grid.len() + 1);
            t.push(sch.value(&s));
            for &th in grid {
                r.iter_mut().zip(s.iter().zip(&x)).for_each(|(o, (a, b))| *o = a + th * b);
                t.push(sch.value(&r));
            }
            out.push((t, x.iter().map(|v| v * v).sum::<f64>()));
        }
        out
    });
    parts.into_iter().flatten().collect()
}

pub(super) fn asymmetric(ctx: &Ctx) -> Result<Report> {
    let cfg = ctx.cfg;
    let n = positive(cfg.n.unwrap_or(1000), "n")?;
    let budget = cfg.budget.unwrap_or(200_000);
    let cs = cfg.c.clone().unwrap_or_else(|| vec![0.5, 1.0]);
    let grid = theta_grid(cfg);
    let cw = intercept_weights(&grid)?;
    let k = cfg.k.as_ref().and_then(|v| v.first().copied()).unwrap_or(2);
    let host = HostModel::gaussian(n, 1.0)?;
    let sch = Scheme::polynomial(k, 1.0, n, SignKey::Seeded(ctx.sub_seed(100)))?;

    let table = Table::new(&[
        "c", "eta", "a", "a_se", "b", "b_se", "cross", "cross_se", "dvar", "dvar_se",
        "dvar_target", "distortion", "distortion_se", "distortion_pred", "budget_identity",
    ]);
    let mut report = Report::new("asymmetric", "default", ctx.seed, table);
    report.n = Some(n);
    report.budget = Some(budget);
    let nf = n as f64;
    let mut worst_z: f64 = 0.0;
    for (i, &c) in cs.iter().enumerate() {
        positive_f(c, "c")?;
        let emb = AsymmetricEmbedder::calibrate(sch.clone(), &host, c, budget, ctx.sub_seed(2 * i as u64))?;
        let trials = draw_trials(&emb, &host, &grid, budget, ctx.sub_seed(2 * i as u64 + 1));
        let m = trials.len() as f64;
        let means: Vec<f64> = (0..=grid.len())
            .map(|j| trials.iter().map(|(t, _)| t[j]).sum::<f64>() / m)
            .collect();
        // Influence of each trial on the intercept of (Var t(θ_j) - Var t(0)) / θ_j.
        let mut infl = Moments::new();
        let mut dist = Moments::new();
        for (t, x2) in &trials {
            let d0 = (t[0] - means[0]).powi(2);
            let v: f64 = grid
                .iter()
                .zip(&cw)
                .enumerate()
                .map(|(j, (th, w))| w * ((t[j + 1] - means[j + 1]).powi(2) - d0) / th)
                .sum();
            infl.push(v);
            dist.push(*x2);
        }
        let dvar = infl.mean() * m / (m - 1.0);
        let dvar_se = infl.std_err_mean();
        let target = -2.0 * c;
        let z = (dvar - target).abs() / dvar_se;
        worst_z = worst_z.max(z);

        // E‖x/θ‖² = b n η - 2c√(nη) E{t/‖∇t‖²} + a c², and a c² + b n η = n by calibration.
        let (a, a_se) = emb.a();
        let (b, b_se) = emb.b();
        let (cross, cross_se) = emb.cross_term();
        let eta = emb.eta();
        let root = (nf * eta).sqrt();
        let pred = nf - 2.0 * c * root * cross;
        let identity = a * c * c + b * nf * eta;
        let dist_se = (dist.std_err_mean().powi(2)
            + (c.powi(4) * a_se * a_se)
            + (nf * eta * b_se).powi(2)
            + (2.0 * c * root * cross_se).powi(2))
        .sqrt();
        report.table.push(vec![
            c.into(),
            eta.into(),
            a.into(),
            a_se.into(),
            b.into(),
            b_se.into(),
            cross.into(),
            cross_se.into(),
            dvar.into(),
            dvar_se.into(),
            target.into(),
            dist.mean().into(),
            dist.std_err_mean().into(),
            pred.into(),
            identity.into(),
        ]);
        report.estimate(format!("dvar c={c}"), dvar, dvar_se);
        report.estimate(format!("eta c={c}"), eta, 0.0);
        report.check_below(10, format!("|dVar/dθ + 2c| / std_err, c={c}"), z, 3.0);
        report.check_below(
            10,
            format!("|E‖x/θ‖² - (n - 2c√(nη) E{{t/‖∇t‖²}})| / std_err, c={c}"),
            (dist.mean() - pred).abs() / dist_se,
            3.0,
        );
        report.check_below(10, format!("|a c² + b n η - n| / n, c={c}"), (identity - nf).abs() / nf, 1e-12);
        if i == 0 {
            report.headline(format!("dvar c={c}"), dvar, dvar_se);
        }
    }
    report.estimate("max_z", worst_z, 0.0);
    Ok(report)
}
