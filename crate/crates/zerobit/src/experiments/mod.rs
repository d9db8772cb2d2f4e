//! One function per subcommand, each turning a resolved configuration into a report.

use anyhow::{bail, Result};
use zerobit_core::rng::mix64;
use zerobit_core::{AttackChannel, HostModel, Scheme};

use crate::config::ExperimentConfig;
use crate::descriptors::{ChannelDesc, HostDesc};
use crate::report::Report;

mod asymmetric;
mod efficacy;
mod lattice;
mod regularity;
mod roc;
mod tables;
mod verify;

pub const EXPERIMENTS: [&str; 10] = [
    "table1",
    "hermite-plot",
    "scs-curve",
    "lattice-eff",
    "pde-check",
    "ortho",
    "efficacy",
    "roc",
    "asymmetric",
    "regularity",
];

/// Runs the named experiment.
pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<Report> {
    if let Some(e) = &cfg.experiment {
        if e != name {
            bail!("field `experiment`: config is for `{e}`, not `{name}`");
        }
    }
    let seed = cfg.seed()?;
    let ctx = Ctx { cfg, seed };
    match name {
        "table1" => tables::table1(&ctx),
        "hermite-plot" => tables::hermite_plot(&ctx),
        "scs-curve" => tables::scs_curve(&ctx),
        "lattice-eff" => lattice::lattice_eff(&ctx),
        "pde-check" => verify::pde_check(&ctx),
        "ortho" => verify::ortho(&ctx),
        "efficacy" => efficacy::efficacy(&ctx),
        "roc" => roc::roc(&ctx),
        "asymmetric" => asymmetric::asymmetric(&ctx),
        "regularity" => regularity::regularity(&ctx),
        other => bail!("unknown experiment `{other}`"),
    }
}

pub(crate) struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
}

impl Ctx<'_> {
    /// Independent seed for one part of the experiment.
    pub fn sub_seed(&self, part: u64) -> u64 {
        mix64(self.seed ^ mix64(part.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }

    pub fn suite(&self, default: &str, allowed: &[&str]) -> Result<String> {
        let s = self.cfg.suite.clone().unwrap_or_else(|| default.to_owned());
        if !allowed.contains(&s.as_str()) {
            bail!("field `suite`: `{s}` is not one of {allowed:?}");
        }
        Ok(s)
    }

    /// The configured custom case, if a scheme descriptor is present.
    pub fn custom_case(&self, n: usize) -> Result<Option<(Scheme, HostModel, AttackChannel)>> {
        let Some(desc) = &self.cfg.scheme else {
            return Ok(None);
        };
        let scheme = desc.build(n)?;
        let host = self
            .cfg
            .host
            .clone()
            .unwrap_or_else(|| HostDesc::gaussian(1.0))
            .build(n)?;
        let channel = self.cfg.channel.unwrap_or_else(ChannelDesc::none).build()?;
        Ok(Some((scheme, host, channel)))
    }
}

/// Theta grid for slope estimates: configured or a small default.
pub(crate) fn theta_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    cfg.theta_grid.clone().unwrap_or_else(|| vec![0.01, 0.02, 0.03])
}
