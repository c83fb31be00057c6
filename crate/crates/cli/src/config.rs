//! TOML configuration for `weightlab extrapolate`.
//!
//! ```toml
//! seed = 42
//!
//! [space]
//! kind = "dyadic"
//! levels = 4
//!
//! [operator]
//! kind = "product"
//! arity = 2
//!
//! [params]
//! q0 = "2"
//! p0 = ["4", "4"]
//! s0 = ["2", "2"]
//! r0 = ["2", "2"]
//! gamma_recip = [-0.125, -0.125]
//!
//! [variant]
//! kind = "multilinear"
//!
//! [harness]
//! trials = 200
//! kappa = 2.0
//!
//! [output]
//! json = "report.json"
//! csv = "trials.csv"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use weightlab::extrapolate::{HarnessOptions, MultiParams, OperatorSpec};
use weightlab::space::{make_cyclic_space, make_dyadic_space, product_space, SetBasis, SpaceFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceSpec {
    Dyadic { levels: u32 },
    Cyclic { n: usize },
    File { path: PathBuf },
    Product { inner: Box<SpaceSpec>, outer: Box<SpaceSpec> },
}

impl SpaceSpec {
    pub fn build(&self, base: &Path) -> anyhow::Result<SetBasis> {
        Ok(match self {
            SpaceSpec::Dyadic { levels } => make_dyadic_space(*levels)?,
            SpaceSpec::Cyclic { n } => make_cyclic_space(*n)?.0,
            SpaceSpec::File { path } => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                let file: SpaceFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                file.into_basis()?
            }
            SpaceSpec::Product { inner, outer } => product_space(&inner.build(base)?, &outer.build(base)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VariantSpec {
    #[default]
    Multilinear,
    /// Second level on `outer_space` (the main space if absent).
    Mixed {
        outer_gamma_recip: Vec<f64>,
        #[serde(default)]
        outer_space: Option<SpaceSpec>,
        #[serde(default = "default_inner_duals")]
        inner_duals: usize,
    },
    Weak {
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Vector {
        k: usize,
    },
}

fn default_inner_duals() -> usize {
    4
}

fn default_levels() -> usize {
    16
}

/// Harness settings other than the seed, which lives at the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    pub trials: usize,
    pub kappa: f64,
    pub dual_samples: usize,
    pub opnorm_restarts: usize,
    pub opnorm_iterations: usize,
    pub weights: weightlab::weights::sampling::WeightSampler,
    pub equal_weights: bool,
    pub zero_prob: f64,
    pub tolerance: f64,
    pub max_retries: usize,
}

impl Default for HarnessSection {
    fn default() -> Self {
        let d = HarnessOptions::default();
        Self {
            trials: d.trials,
            kappa: d.kappa,
            dual_samples: d.dual_samples,
            opnorm_restarts: d.opnorm_budget.restarts,
            opnorm_iterations: d.opnorm_budget.iterations,
            weights: d.weights,
            equal_weights: d.equal_weights,
            zero_prob: d.zero_prob,
            tolerance: d.tolerance,
            max_retries: d.max_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub space: SpaceSpec,
    pub operator: OperatorSpec,
    pub params: MultiParams,
    #[serde(default)]
    pub variant: VariantSpec,
    #[serde(default)]
    pub harness: HarnessSection,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let h = &self.harness;
        if !(h.tolerance > 0.0 && h.tolerance.is_finite()) {
            bail!("harness.tolerance must be positive, got {}", h.tolerance);
        }
        if !(h.kappa > 1.0 && h.kappa.is_finite()) {
            bail!("harness.kappa must exceed 1, got {}", h.kappa);
        }
        if !(0.0..1.0).contains(&h.zero_prob) {
            bail!("harness.zero_prob must lie in [0, 1), got {}", h.zero_prob);
        }
        if h.trials == 0 {
            bail!("harness.trials must be positive");
        }
        self.params.validate().context("params")?;
        Ok(())
    }

    pub fn harness_options(&self) -> HarnessOptions {
        let h = &self.harness;
        HarnessOptions {
            trials: h.trials,
            seed: self.seed,
            kappa: h.kappa,
            dual_samples: h.dual_samples,
            opnorm_budget: weightlab::maximal::AscentBudget {
                restarts: h.opnorm_restarts,
                iterations: h.opnorm_iterations,
                seed: self.seed,
            },
            weights: h.weights,
            equal_weights: h.equal_weights,
            zero_prob: h.zero_prob,
            tolerance: h.tolerance,
            max_retries: h.max_retries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
[space]
kind = "dyadic"
levels = 3
[operator]
kind = "identity"
[params]
q0 = "2"
p0 = ["2/3"]
s0 = ["1"]
r0 = ["inf"]
gamma_recip = [-0.5]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.variant, VariantSpec::Multilinear);
        assert_eq!(c.harness.trials, 200);
        assert_eq!(c.harness_options().seed, 7);
    }

    #[test]
    fn seed_is_required() {
        let text = MINIMAL.replace("seed = 7", "");
        let err = RunConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}\n[harness]\ntrails = 3\n");
        let err = format!("{:#}", RunConfig::from_toml(&text).unwrap_err());
        assert!(err.contains("trails"), "{err}");
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let text = format!("{MINIMAL}\n[harness]\ntolerance = 0.0\n");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn variants_parse() {
        let text = format!("{MINIMAL}\n[variant]\nkind = \"mixed\"\nouter_gamma_recip = [-0.1]\n");
        let c = RunConfig::from_toml(&text).unwrap();
        assert!(matches!(c.variant, VariantSpec::Mixed { inner_duals: 4, .. }));
    }
}
