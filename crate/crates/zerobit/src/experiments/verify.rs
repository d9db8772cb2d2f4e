//! Deterministic verification: equation residuals, LMP round trips, Gram matrices.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::{bail, Result};
use zerobit_core::analysis::{gram_matrix, pde_residual, pde_residual_fd, GramMethod, ResidualStats};
use zerobit_core::engine::{block_quadrature, lmp_from_embedding, BlockDivergence, BlockField};
use zerobit_core::host::HostKind;
use zerobit_core::schemes::{HyperboloidDetector, SignKey, SphereVariant};
use zerobit_core::{HostModel, Lattice, Scheme};

use super::Ctx;
use crate::config::positive;
use crate::report::{Report, Table};

/// Tolerances for analytic and finite-difference derivatives.
const ANALYTIC_TOL: f64 = 1e-8;
const FD_TOL: f64 = 1e-4;

struct ResidualCase {
    name: String,
    scheme: Scheme,
    host: HostModel,
    fd: bool,
}

fn residual_cases(seed: u64) -> Result<Vec<ResidualCase>> {
    let mut out = Vec::new();
    let mut push = |name: String, scheme: Scheme, host: HostModel, fd: bool| {
        out.push(ResidualCase {
            name,
            scheme,
            host,
            fd,
        })
    };
    let gauss1 = HostModel::gaussian(1, 1.0)?;
    // One full period of the base frequency keeps the flat host's cells aligned.
    let flat = HostModel::flat_interval(1, 2.0 * PI)?;
    for k in 1..=7 {
        push(format!("polynomial k={k}"), Scheme::polynomial(k, 1.0, 1, SignKey::Unit)?, gauss1.clone(), false);
    }
    for k in 1..=3 {
        push(format!("sinusoidal k={k}"), Scheme::sinusoidal(k, 1.0, 1, SignKey::Unit)?, flat.clone(), false);
    }
    for p in 1..=4 {
        let host = HostModel::new(p, p, HostKind::GaussianIid { sigma: 1.0 })?;
        push(format!("janis p={p}"), Scheme::janis(p, 1.0, p, SignKey::Unit)?, host, false);
    }
    let axis = HyperboloidDetector::keyed_axis(3, seed);
    let host3 = HostModel::new(3, 3, HostKind::GaussianIid { sigma: 1.0 })?;
    push("hyperboloid p=3".into(), Scheme::hyperboloid(axis, 1.0, 3, SignKey::Unit)?, host3, false);
    for (name, lat, k) in [
        ("lattice-sinusoid A2 (1,0)", Lattice::a2(), vec![1, 0]),
        ("lattice-sinusoid A2 (1,1)", Lattice::a2(), vec![1, 1]),
        ("lattice-sinusoid Z2 (2,1)", Lattice::integer(2)?, vec![2, 1]),
    ] {
        let sch = Scheme::lattice_sinusoid(&lat, k, 2, SignKey::Unit)?;
        push(name.into(), sch, HostModel::flat_lattice(2, lat)?, false);
    }
    let eta = 4.0 * PI * PI;
    push(
        "sphere-hardening p=3 sine".into(),
        Scheme::sphere_hardening(3, 1.0, eta, SphereVariant::Sine, 3, SignKey::Unit)?,
        HostModel::radial(3, 3, 1.0)?,
        false,
    );
    push("polynomial k=5 (fd)".into(), Scheme::polynomial(5, 1.0, 1, SignKey::Unit)?, gauss1, true);
    push("sinusoidal k=2 (fd)".into(), Scheme::sinusoidal(2, 1.0, 1, SignKey::Unit)?, flat, true);
    let host2 = HostModel::new(2, 2, HostKind::GaussianIid { sigma: 1.0 })?;
    push("janis p=2 (fd)".into(), Scheme::janis(2, 1.0, 2, SignKey::Unit)?, host2, true);
    Ok(out)
}

pub(super) fn pde_check(ctx: &Ctx) -> Result<Report> {
    match ctx.suite("residual", &["residual", "lmp"])?.as_str() {
        "residual" => residuals(ctx),
        _ => lmp_round_trip(ctx),
    }
}

fn residuals(ctx: &Ctx) -> Result<Report> {
    let count = positive(ctx.cfg.count.unwrap_or(1000), "count")?;
    let table = Table::new(&[
        "scheme", "derivatives", "count", "max_abs", "mean_abs", "median_abs", "q90_abs",
        "q99_abs", "threshold", "passed",
    ]);
    let mut report = Report::new("pde-check", "residual", ctx.seed, table);
    let mut worst = [0.0f64; 2];
    for (i, case) in residual_cases(ctx.seed)?.into_iter().enumerate() {
        let seed = ctx.sub_seed(i as u64);
        let st: ResidualStats = if case.fd {
            pde_residual_fd(&case.scheme, &case.host, count, seed)?
        } else {
            pde_residual(&case.scheme, &case.host, count, seed)?
        };
        let tol = if case.fd { FD_TOL } else { ANALYTIC_TOL };
        worst[case.fd as usize] = worst[case.fd as usize].max(st.max_abs);
        report.table.push(vec![
            case.name.as_str().into(),
            if case.fd { "finite_difference" } else { "analytic" }.into(),
            st.count.into(),
            st.max_abs.into(),
            st.mean_abs.into(),
            st.median_abs.into(),
            st.q90_abs.into(),
            st.q99_abs.into(),
            tol.into(),
            (st.max_abs < tol).into(),
        ]);
    }
    report.headline("max_abs_residual_analytic", worst[0], 0.0);
    report.estimate("max_abs_residual_fd", worst[1], 0.0);
    report.check_below(3, "max |residual|, analytic derivatives", worst[0], ANALYTIC_TOL);
    report.check_below(3, "max |residual|, finite differences", worst[1], FD_TOL);
    Ok(report)
}

fn lmp_round_trip(ctx: &Ctx) -> Result<Report> {
    let nodes = positive(ctx.cfg.nodes.unwrap_or(64), "nodes")?;
    let table = Table::new(&["scheme", "rho", "lmp_mean", "k_t"]);
    let mut report = Report::new("pde-check", "lmp", ctx.seed, table);
    let gauss = HostModel::gaussian(1, 1.0)?;
    let flat = HostModel::flat_interval(1, 2.0 * PI)?;
    let mut cases: Vec<(String, Scheme, &HostModel)> = Vec::new();
    for k in 1..=7 {
        cases.push((format!("polynomial k={k}"), Scheme::polynomial(k, 1.0, 1, SignKey::Unit)?, &gauss));
    }
    for k in 1..=5 {
        cases.push((format!("sinusoidal k={k}"), Scheme::sinusoidal(k, 1.0, 1, SignKey::Unit)?, &flat));
    }
    let mut worst: f64 = 1.0;
    for (i, (name, sch, host)) in cases.into_iter().enumerate() {
        // Matched embedder k_w ∇t on one block, k_w = 1/√η per sample.
        let c = 1.0 / sch.eta0().sqrt();
        let b1 = sch.block().clone();
        let b2 = sch.block().clone();
        let field: BlockField = Arc::new(move |r: &[f64], out: &mut [f64]| {
            b1.gradient(r, out);
            out.iter_mut().for_each(|v| *v *= c);
        });
        let div: BlockDivergence = Arc::new(move |r: &[f64]| c * b2.laplacian(r));
        let lmp = lmp_from_embedding(field, Some(div), host, ctx.sub_seed(i as u64))?;
        let Some((points, weights)) = block_quadrature(host, nodes) else {
            bail!("no quadrature rule for the host of {name}");
        };
        let (mut ma, mut mb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, w) in points.iter().zip(&weights) {
            let a = lmp.value(&[*x])?;
            let b = sch.block().value(&[*x]);
            ma += w * a;
            mb += w * b;
            sab += w * a * b;
            saa += w * a * a;
            sbb += w * b * b;
        }
        let rho = (sab - ma * mb) / ((saa - ma * ma) * (sbb - mb * mb)).sqrt();
        worst = worst.min(rho);
        report.table.push(vec![name.into(), rho.into(), lmp.mean().0.into(), lmp.k_t().into()]);
    }
    report.headline("min_rho", worst, 0.0);
    report.check_above(9, "min correlation of LMP(k_w ∇t) with t", worst, 0.9999);
    Ok(report)
}

pub(super) fn ortho(ctx: &Ctx) -> Result<Report> {
    let nodes = positive(ctx.cfg.nodes.unwrap_or(64), "nodes")?;
    let table = Table::new(&["family", "i", "j", "value", "value_se"]);
    let mut report = Report::new("ortho", "default", ctx.seed, table);
    let method = GramMethod::Quadrature { nodes };

    let hermite: Vec<Scheme> = (1..=7)
        .map(|k| Scheme::polynomial(k, 1.0, 1, SignKey::Unit))
        .collect::<zerobit_core::Result<_>>()?;
    let sines: Vec<Scheme> = (1..=5)
        .map(|k| Scheme::sinusoidal(k, 1.0, 1, SignKey::Unit))
        .collect::<zerobit_core::Result<_>>()?;
    // Equal total order 2 on two-sample blocks: equal efficacy, different index vectors.
    let multi: Vec<Scheme> = [vec![2, 0], vec![1, 1], vec![0, 2]]
        .into_iter()
        .map(|o| Scheme::multi_hermite(o, 1.0, 2, SignKey::Unit))
        .collect::<zerobit_core::Result<_>>()?;
    let groups: [(&str, &[Scheme], HostModel, u32); 3] = [
        ("hermite k=1..7", &hermite, HostModel::gaussian(1, 1.0)?, 4),
        ("sinusoidal k=1..5", &sines, HostModel::flat_interval(1, 2.0 * PI)?, 4),
        ("multivariate hermite |m|=2", &multi, HostModel::new(2, 2, HostKind::GaussianIid { sigma: 1.0 })?, 0),
    ];
    let mut worst: f64 = 0.0;
    for (i, (name, schemes, host, criterion)) in groups.into_iter().enumerate() {
        let g = gram_matrix(schemes, &host, method, ctx.sub_seed(i as u64))?;
        for a in 0..g.size {
            for b in 0..g.size {
                report.table.push(vec![
                    name.into(),
                    (a + 1).into(),
                    (b + 1).into(),
                    g.get(a, b).into(),
                    g.std_err[a * g.size + b].into(),
                ]);
            }
        }
        let (diag, off) = g.identity_error();
        worst = worst.max(diag).max(off);
        report.check_below(criterion, format!("{name}: max |G_ii - 1|"), diag, 1e-8);
        report.check_below(criterion, format!("{name}: max |G_ij|, i ≠ j"), off, 1e-8);
    }
    report.headline("max_identity_error", worst, 0.0);
    Ok(report)
}
