//! Experiment configuration: JSON file, command-line overrides, defaults.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::descriptors::{ChannelDesc, HostDesc, LatticeDesc, SchemeDesc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything an experiment may read. Unset fields fall back to the
/// subcommand defaults; command-line values win over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
    pub format: Option<Format>,
    pub suite: Option<String>,
    pub n: Option<usize>,
    pub budget: Option<usize>,
    pub theta: Option<f64>,
    pub theta_grid: Option<Vec<f64>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub k: Option<Vec<usize>>,
    pub mc_k: Option<Vec<usize>>,
    pub range: Option<[f64; 2]>,
    pub points: Option<usize>,
    pub eta: Option<f64>,
    pub sigma_range: Option<[f64; 2]>,
    pub jmax: Option<Vec<usize>>,
    pub pure_eta: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub count: Option<usize>,
    pub nodes: Option<usize>,
    pub trials: Option<usize>,
    pub c: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub k_scale: Option<f64>,
    pub theta_scale: Option<f64>,
    pub scheme: Option<SchemeDesc>,
    pub host: Option<HostDesc>,
    pub channel: Option<ChannelDesc>,
    pub lattice: Option<LatticeDesc>,
}

macro_rules! overlay_fields {
    ($top:ident, $base:ident; $($f:ident),* $(,)?) => {
        ExperimentConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                anyhow!("invalid config: {}", e.inner())
            } else {
                anyhow!("invalid config: field `{path}`: {}", e.inner())
            }
        })
    }

    /// Fields set in `self` win; the rest come from `base`.
    pub fn overlay(self, base: Self) -> Self {
        let top = self;
        overlay_fields!(top, base;
            experiment, seed, workers, out, format, suite, n, budget, theta, theta_grid,
            alpha_grid, k, mc_k, range, points, eta, sigma_range, jmax, pure_eta, beta,
            count, nodes, trials, c, n_list, k_scale, theta_scale, scheme, host, channel,
            lattice,
        )
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| anyhow!("missing field `seed`: pass --seed or set it in the config"))
    }
}

pub fn positive(v: usize, field: &str) -> Result<usize> {
    if v == 0 {
        bail!("field `{field}`: must be positive");
    }
    Ok(v)
}

pub fn positive_f(v: f64, field: &str) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("field `{field}`: must be positive");
    }
    Ok(v)
}

/// `a..b` (inclusive) or a comma list.
pub fn parse_index_list(s: &str) -> Result<Vec<usize>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|e| format!("{b:?}: {e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// `a:b` with a < b.
pub fn parse_span(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(a < b) {
        return Err(format!("need a < b in {s:?}"));
    }
    Ok([a, b])
}

/// Evenly spaced grid of `points` values over the span.
pub fn linspace(span: [f64; 2], points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![span[0]];
    }
    let h = (span[1] - span[0]) / (points - 1) as f64;
    (0..points).map(|i| span[0] + h * i as f64).collect()
}
