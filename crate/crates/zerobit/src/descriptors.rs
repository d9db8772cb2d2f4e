//! JSON descriptors for hosts, schemes, lattices and channels.
//!
//! Every descriptor validates on `build` and reports the offending field by
//! its JSON path.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use zerobit_core::host::HostKind;
use zerobit_core::schemes::{SignKey, SphereVariant};
use zerobit_core::{AttackChannel, HostModel, Lattice, Scheme};

fn need<T: Copy>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing field `{field}`"))
}

fn need_ref<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing field `{field}`"))
}

// ---------------------------------------------------------------------------
// Lattice

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeTag {
    Z,
    A2,
    #[serde(rename = "general")]
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeDesc {
    pub kind: LatticeTag,
    #[serde(default)]
    pub p: Option<usize>,
    /// Row-major generator, columns are basis vectors.
    #[serde(rename = "G", default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<f64>,
}

impl LatticeDesc {
    pub fn build(&self, path: &str) -> Result<Lattice> {
        let base = match self.kind {
            LatticeTag::Z => Lattice::integer(self.p.unwrap_or(1)),
            LatticeTag::A2 => {
                if let Some(p) = self.p {
                    if p != 2 {
                        bail!("field `{path}.p`: A2 is two-dimensional");
                    }
                }
                Ok(Lattice::a2())
            }
            LatticeTag::General => {
                let p = need(self.p, &format!("{path}.p"))?;
                let g = need_ref(&self.g, &format!("{path}.G"))?;
                Lattice::general(p, g.clone())
            }
        }
        .with_context(|| format!("field `{path}`"))?;
        match self.beta {
            None => Ok(base),
            Some(b) => base.scaled(b).with_context(|| format!("field `{path}.beta`")),
        }
    }
}

// ---------------------------------------------------------------------------
// Host

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostTag {
    Gaussian,
    FlatInterval,
    FlatLattice,
    Radial,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostParams {
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub lattice: Option<LatticeDesc>,
    #[serde(default)]
    pub r0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostDesc {
    pub kind: HostTag,
    #[serde(default)]
    pub params: HostParams,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
}

impl HostDesc {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: HostTag::Gaussian,
            params: HostParams {
                sigma: Some(sigma),
                ..HostParams::default()
            },
            n: None,
            p: None,
        }
    }

    /// Builds the host of length `n`; a descriptor `n` must agree with it.
    pub fn build(&self, n: usize) -> Result<HostModel> {
        if let Some(m) = self.n {
            if m != n {
                bail!("field `host.n`: {m} disagrees with the experiment length {n}");
            }
        }
        let pr = &self.params;
        let (p, kind) = match self.kind {
            HostTag::Gaussian => (
                self.p.unwrap_or(1),
                HostKind::GaussianIid {
                    sigma: pr.sigma.unwrap_or(1.0),
                },
            ),
            HostTag::FlatInterval => (
                self.p.unwrap_or(1),
                HostKind::FlatInterval {
                    width: need(pr.width, "host.params.width")?,
                    weights: pr.weights.clone().unwrap_or_else(|| vec![1.0]),
                },
            ),
            HostTag::FlatLattice => {
                let lat = need_ref(&pr.lattice, "host.params.lattice")?.build("host.params.lattice")?;
                (self.p.unwrap_or(lat.dim()), HostKind::FlatLattice { lattice: lat })
            }
            HostTag::Radial => (
                need(self.p, "host.p")?,
                HostKind::Radial {
                    r0: need(pr.r0, "host.params.r0")?,
                },
            ),
        };
        HostModel::new(n, p, kind).context("field `host`")
    }
}

// ---------------------------------------------------------------------------
// Scheme

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Polynomial,
    Sinusoidal,
    Janis,
    MultiHermite,
    Hyperboloid,
    SphereHardening,
    LatticeSinusoid,
    LatticeDcdm,
    PolynomialMixture,
    SinusoidalMixture,
    Scs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    Cosine,
    Sine,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub eta_base: Option<f64>,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub orders: Option<Vec<usize>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub axis: Option<Vec<f64>>,
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub variant: Option<VariantTag>,
    #[serde(default)]
    pub lattice: Option<LatticeDesc>,
    #[serde(default)]
    pub index: Option<Vec<i64>>,
    #[serde(default)]
    pub moment_budget: Option<usize>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub j_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeDesc {
    pub family: FamilyTag,
    #[serde(default)]
    pub params: SchemeParams,
    /// Key for the per-block signs; absent means all signs +1.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SchemeDesc {
    pub fn polynomial(k: usize, seed: Option<u64>) -> Self {
        Self {
            family: FamilyTag::Polynomial,
            params: SchemeParams {
                k: Some(k),
                sigma: Some(1.0),
                ..SchemeParams::default()
            },
            seed,
        }
    }

    pub fn key(&self) -> SignKey {
        match self.seed {
            Some(s) => SignKey::Seeded(s),
            None => SignKey::Unit,
        }
    }

    pub fn build(&self, n: usize) -> Result<Scheme> {
        let pr = &self.params;
        let key = self.key();
        let sigma = pr.sigma.unwrap_or(1.0);
        let eta_base = pr.eta_base.unwrap_or(1.0);
        let lattice = || -> Result<Lattice> {
            need_ref(&pr.lattice, "scheme.params.lattice")?.build("scheme.params.lattice")
        };
        let s = match self.family {
            FamilyTag::Polynomial => {
                Scheme::polynomial(need(pr.k, "scheme.params.k")?, sigma, n, key)
            }
            FamilyTag::Sinusoidal => Scheme::sinusoidal(pr.k.unwrap_or(1), eta_base, n, key),
            FamilyTag::Janis => Scheme::janis(need(pr.p, "scheme.params.p")?, sigma, n, key),
            FamilyTag::MultiHermite => Scheme::multi_hermite(
                need_ref(&pr.orders, "scheme.params.orders")?.clone(),
                sigma,
                n,
                key,
            ),
            FamilyTag::Hyperboloid => {
                Scheme::hyperboloid(need_ref(&pr.axis, "scheme.params.axis")?.clone(), sigma, n, key)
            }
            FamilyTag::SphereHardening => {
                let variant = match pr.variant.unwrap_or(VariantTag::Sine) {
                    VariantTag::Cosine => SphereVariant::Cosine,
                    VariantTag::Sine => SphereVariant::Sine,
                };
                Scheme::sphere_hardening(
                    need(pr.p, "scheme.params.p")?,
                    need(pr.r0, "scheme.params.r0")?,
                    need(pr.eta, "scheme.params.eta")?,
                    variant,
                    n,
                    key,
                )
            }
            FamilyTag::LatticeSinusoid => Scheme::lattice_sinusoid(
                &lattice()?,
                need_ref(&pr.index, "scheme.params.index")?.clone(),
                n,
                key,
            ),
            FamilyTag::LatticeDcdm => {
                let lat = lattice()?;
                let moments = lat
                    .voronoi_moments(pr.moment_budget.unwrap_or(1_000_000), self.seed.unwrap_or(0))
                    .context("field `scheme.params.moment_budget`")?;
                Scheme::lattice_dcdm(lat, moments, n, key)
            }
            FamilyTag::PolynomialMixture => Scheme::polynomial_mixture(
                need_ref(&pr.orders, "scheme.params.orders")?,
                need_ref(&pr.weights, "scheme.params.weights")?.clone(),
                sigma,
                n,
                key,
            ),
            FamilyTag::SinusoidalMixture => Scheme::sinusoidal_mixture(
                need_ref(&pr.orders, "scheme.params.orders")?,
                need_ref(&pr.weights, "scheme.params.weights")?.clone(),
                eta_base,
                n,
                key,
            ),
            FamilyTag::Scs => Scheme::scs(
                need(pr.delta, "scheme.params.delta")?,
                pr.j_max.unwrap_or(100),
                n,
                key,
            ),
        };
        s.context("field `scheme`")
    }
}

// ---------------------------------------------------------------------------
// Channel

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelTag {
    None,
    FixedWnr,
    Additive,
    Sawgn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDesc {
    pub kind: ChannelTag,
    #[serde(default)]
    pub sigma_z: Option<f64>,
    /// Watermark-to-noise power ratio of the fixed-WNR channel.
    #[serde(default)]
    pub g: Option<f64>,
    /// SAWGN gain set to 1/√(1 + σ_z²).
    #[serde(default)]
    pub wiener: Option<bool>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl ChannelDesc {
    pub fn none() -> Self {
        Self {
            kind: ChannelTag::None,
            sigma_z: None,
            g: None,
            wiener: None,
            gamma: None,
        }
    }

    pub fn build(&self) -> Result<AttackChannel> {
        let ch = match self.kind {
            ChannelTag::None => Ok(AttackChannel::None),
            ChannelTag::FixedWnr => AttackChannel::fixed_wnr(need(self.g, "channel.g")?),
            ChannelTag::Additive => AttackChannel::additive(need(self.sigma_z, "channel.sigma_z")?),
            ChannelTag::Sawgn => {
                let sz = need(self.sigma_z, "channel.sigma_z")?;
                if self.wiener.unwrap_or(false) {
                    if self.gamma.is_some() {
                        bail!("field `channel.gamma`: conflicts with `wiener: true`");
                    }
                    AttackChannel::wiener(sz)
                } else {
                    AttackChannel::sawgn(need(self.gamma, "channel.gamma")?, sz)
                }
            }
        };
        ch.context("field `channel`")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors_round_trip_and_build() {
        let js = r#"{"family":"janis","params":{"p":3,"sigma":1.0},"seed":5}"#;
        let d: SchemeDesc = serde_json::from_str(js).unwrap();
        let s = d.build(12).unwrap();
        assert_eq!(s.block_dim(), 3);
        let back = serde_json::to_string(&d).unwrap();
        let again: SchemeDesc = serde_json::from_str(&back).unwrap();
        assert_eq!(d, again);

        let lat: LatticeDesc = serde_json::from_str(r#"{"kind":"A2","beta":2.0}"#).unwrap();
        assert!((lat.build("lattice").unwrap().volume() - 4.0).abs() < 1e-12);

        let ch: ChannelDesc =
            serde_json::from_str(r#"{"kind":"sawgn","sigma_z":0.5,"wiener":true}"#).unwrap();
        let (g, s) = ch.build().unwrap().gain_and_noise();
        assert!((g - 1.0 / 1.25f64.sqrt()).abs() < 1e-15 && s == 0.5);
    }

    #[test]
    fn errors_name_the_field() {
        let d: SchemeDesc = serde_json::from_str(r#"{"family":"polynomial"}"#).unwrap();
        let e = format!("{:#}", d.build(4).unwrap_err());
        assert!(e.contains("scheme.params.k"), "{e}");
        let h: HostDesc = serde_json::from_str(r#"{"kind":"gaussian","n":8}"#).unwrap();
        let e = format!("{:#}", h.build(4).unwrap_err());
        assert!(e.contains("host.n"), "{e}");
        let bad = serde_json::from_str::<ChannelDesc>(r#"{"kind":"additive","sigmaz":1}"#);
        assert!(bad.unwrap_err().to_string().contains("sigmaz"));
    }
}
