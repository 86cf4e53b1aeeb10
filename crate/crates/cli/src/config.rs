//! Experiment configuration files.
//!
//! JSON with a versioned schema (see `schemas/experiment-config.v1.json` at
//! the repository root). Every numeric range is validated before any
//! computation starts, and a config survives an emit/parse round trip
//! unchanged.

use serde::{Deserialize, Serialize};

use fanova_select::combinatorics::{Frequency, Subset};
use fanova_select::error::{Error, Result};
use fanova_select::generators::Generator;
use fanova_select::model::{benchmark_instance, ComponentSpec, ModelInstance, Orders};
use fanova_select::selector::SelectorConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// One active component in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    /// 1-based coordinates, strictly increasing.
    pub subset: Vec<u32>,
    /// Tensor-product factors (one generator per coordinate) ...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<Generator>>,
    /// ... or explicit (frequency, coefficient) pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<(Vec<i32>, f64)>>,
    /// Signal scale α, default 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// Model section of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d: u32,
    pub orders: Orders,
    pub sigma: f64,
    pub epsilon_noise: f64,
    /// Use the six-component benchmark layout for the given order instead of
    /// listing components.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentConfig>,
}

/// Optional signal-strength sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub subset: Vec<u32>,
    pub alphas: Vec<f64>,
}

/// Top-level experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub selector: SelectorConfig,
    pub replicates: u32,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("config parse error: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialization");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported config version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument(
                "replicates must be at least 1".into(),
            ));
        }
        self.selector.validate()?;
        if self.model.benchmark.is_some() && !self.model.components.is_empty() {
            return Err(Error::InvalidArgument(
                "config must use either the benchmark layout or explicit components".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.alphas.is_empty() || sweep.alphas.iter().any(|&a| a <= 0.0) {
                return Err(Error::InvalidArgument(
                    "sweep scales must be positive and nonempty".into(),
                ));
            }
        }
        // building the instance runs the full model validation
        self.build_instance()?;
        Ok(())
    }

    /// Materialize the model instance this config describes.
    pub fn build_instance(&self) -> Result<ModelInstance> {
        let m = &self.model;
        let mut instance = if let Some(k) = m.benchmark {
            if m.orders != Orders::Single(k) {
                return Err(Error::InvalidArgument(format!(
                    "benchmark layout for order {k} requires orders = single {k}"
                )));
            }
            benchmark_instance(m.d, k, m.sigma, m.epsilon_noise)?
        } else {
            let active = m
                .components
                .iter()
                .map(|c| {
                    let subset = Subset::new(c.subset.clone(), m.d)?;
                    let spec = match (&c.factors, &c.explicit) {
                        (Some(gs), None) => ComponentSpec::Factors(gs.clone()),
                        (None, Some(entries)) => {
                            let map = entries
                                .iter()
                                .map(|(entries, theta)| {
                                    Ok((Frequency::new(entries.clone())?, *theta))
                                })
                                .collect::<Result<_>>()?;
                            ComponentSpec::Explicit(map)
                        }
                        _ => {
                            return Err(Error::InvalidArgument(format!(
                                "component {:?} must give exactly one of factors/explicit",
                                c.subset
                            )))
                        }
                    };
                    Ok((subset, spec))
                })
                .collect::<Result<Vec<_>>>()?;
            ModelInstance::new(m.d, m.orders, m.sigma, m.epsilon_noise, active)?
        };
        for c in &m.components {
            if let Some(scale) = c.scale {
                let subset = Subset::new(c.subset.clone(), m.d)?;
                instance = instance.scale_signal(&subset, scale)?;
            }
        }
        Ok(instance)
    }

    /// Subset of the sweep section, validated against the instance.
    pub fn sweep_subset(&self) -> Result<Option<(Subset, Vec<f64>)>> {
        match &self.sweep {
            None => Ok(None),
            Some(s) => Ok(Some((
                Subset::new(s.subset.clone(), self.model.d)?,
                s.alphas.clone(),
            ))),
        }
    }
}
