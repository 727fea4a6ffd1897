//! JSON experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{CoaxGeometry, HierarchySpec, Strategy};
use crate::mlmc::MlmcConfig;
use crate::problems::{coax_input_model, FieldRegime};
use crate::random::{RandomInputModel, UniformParam};

/// Frequency of the harmonic benchmark in Hz.
pub const BENCHMARK_FREQUENCY_HZ: f64 = 0.172413790292;

/// The configuration shipped with the command-line tool.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Coax {
        regime: FieldRegime,
        #[serde(default = "coax_inputs")]
        inputs: Vec<UniformParam>,
        #[serde(default = "CoaxGeometry::nominal")]
        geometry: CoaxGeometry,
        #[serde(default = "default_current")]
        current: f64,
        #[serde(default = "default_mu_r")]
        mu_r: f64,
        #[serde(default = "default_sigma")]
        sigma_pipe: f64,
    },
    Layered {
        regime: FieldRegime,
        #[serde(default = "default_layers")]
        n_layers: usize,
        /// Mean and half-width of every layer's relative reluctivity.
        #[serde(default = "default_nu_r")]
        nu_r: (f64, f64),
    },
    /// `W_l = y0 + (1 + y1) h_l^order` on the configured hierarchy.
    PowerLaw {
        inputs: Vec<UniformParam>,
        #[serde(default = "default_order")]
        order: f64,
    },
    Constant {
        value: f64,
    },
}

fn coax_inputs() -> Vec<UniformParam> {
    coax_input_model().params().to_vec()
}
fn default_current() -> f64 {
    100.0
}
fn default_mu_r() -> f64 {
    1000.0
}
fn default_sigma() -> f64 {
    58e6
}
fn default_layers() -> usize {
    48
}
fn default_nu_r() -> (f64, f64) {
    (1e-3, 4e-4)
}
fn default_order() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub hierarchy: HierarchySpec,
    pub eps: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub mlmc: MlmcConfig,
    /// Independent runs per strategy in the mean-square-error study.
    pub repetitions: usize,
    /// Samples per level for the variance-rate estimate of `convergence`.
    pub rate_samples: u64,
    /// Highest level sampled for the variance-rate estimate.
    pub rate_max_level: usize,
    /// Collocation degree; `p + 1` Gauss nodes per input.
    pub collocation_degree: usize,
    /// Radial grid points of the harmonic reference oracle.
    pub reference_points: usize,
    pub out_dir: PathBuf,
    /// Reference-value cache file; defaults to `out_dir/reference_cache.csv`.
    #[serde(default)]
    pub reference_cache: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("shipped default config is valid")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| Error::Config(format!("field '{name}': {e}"));
        self.hierarchy.validate().map_err(|e| field("hierarchy", e))?;
        self.mlmc.validate().map_err(|e| field("mlmc", e))?;
        if self.mlmc.richardson.delta != self.hierarchy.delta {
            return Err(Error::Config(format!(
                "field 'mlmc.richardson.delta': {} differs from hierarchy.delta {}",
                self.mlmc.richardson.delta, self.hierarchy.delta
            )));
        }
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config("field 'eps': need at least one positive tolerance".into()));
        }
        if self.rate_samples < 2 {
            return Err(Error::Config("field 'rate_samples': need at least 2".into()));
        }
        if self.reference_points < 2 {
            return Err(Error::Config("field 'reference_points': need at least 2".into()));
        }
        match &self.problem {
            ProblemConfig::Coax { inputs, geometry, .. } => {
                RandomInputModel::new(inputs.clone()).map_err(|e| field("problem.inputs", e))?;
                geometry.validate().map_err(|e| field("problem.geometry", e))?;
            }
            ProblemConfig::Layered { n_layers, nu_r, .. } => {
                if *n_layers == 0 || !(nu_r.0 - nu_r.1 > 0.0) {
                    return Err(Error::Config(
                        "field 'problem': need n_layers >= 1 and positive reluctivities".into(),
                    ));
                }
            }
            ProblemConfig::PowerLaw { inputs, .. } => {
                if inputs.len() != 2 {
                    return Err(Error::Config("field 'problem.inputs': power law takes two inputs".into()));
                }
                RandomInputModel::new(inputs.clone()).map_err(|e| field("problem.inputs", e))?;
            }
            ProblemConfig::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::Config("field 'problem.value' must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.hierarchy.strategy = strategy;
        self
    }

    pub fn reference_cache_path(&self) -> PathBuf {
        self.reference_cache
            .clone()
            .unwrap_or_else(|| self.out_dir.join("reference_cache.csv"))
    }

    /// Benchmark cable configuration in the given regime.
    pub fn coax(regime: FieldRegime) -> Self {
        let mut cfg = Self::default();
        cfg.problem = ProblemConfig::Coax {
            regime,
            inputs: coax_inputs(),
            geometry: CoaxGeometry::nominal(),
            current: default_current(),
            mu_r: default_mu_r(),
            sigma_pipe: default_sigma(),
        };
        cfg
    }
}
