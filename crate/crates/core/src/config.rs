//! Run configuration and the provenance header embedded in every output.
//!
//! Text outputs start with comment lines:
//!
//! ```text
//! # pvs-eval 0.1.0
//! # schema: metrics/1
//! # config: {"connectivity":26,...}
//! ```
//!
//! The config line holds every setting that can change a result. Thread
//! count is left out, since outputs are identical for any thread count.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::Connectivity;
use crate::error::{Error, Result, ResultExt};
use crate::metrics::{DscNumMode, MetricsConfig, RegionClusterMode, ZeroPolicy};
use crate::schedules::{AggregateConfig, SdConvention};
use crate::volume::Spacing;
use crate::volume_ops::ClampScaling;

pub const TOOL_NAME: &str = "pvs-eval";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "PVS_EVAL_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub connectivity: Connectivity,
    pub dsc_num_mode: DscNumMode,
    pub region_cluster_mode: RegionClusterMode,
    /// Smallest dataset for which correlations are reported.
    pub min_n_for_corr: usize,
    pub target_spacing: Spacing,
    pub zero_policy: ZeroPolicy,
    pub sd: SdConvention,
    pub clamp_scaling: ClampScaling,
    pub seed: u64,
    /// Stratify five-fold assignment by dataset.
    pub stratify: bool,
    /// Resample predictions onto the manual grid (nearest neighbour) instead
    /// of failing when the grids differ.
    pub allow_resample: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            connectivity: Connectivity::TwentySix,
            dsc_num_mode: DscNumMode::Symmetric,
            region_cluster_mode: RegionClusterMode::SplitAfterMasking,
            min_n_for_corr: 7,
            target_spacing: Spacing::default(),
            zero_policy: ZeroPolicy::default(),
            sd: SdConvention::Sample,
            clamp_scaling: ClampScaling::Ratio,
            seed: 0,
            stratify: true,
            allow_resample: false,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).context(|| format!("in config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_n_for_corr < 2 {
            return Err(Error::InvalidArgument(format!(
                "min_n_for_corr must be at least 2, got {}",
                self.min_n_for_corr
            )));
        }
        for (name, v) in [
            ("zero_policy.both_empty_dsc", self.zero_policy.both_empty_dsc),
            ("zero_policy.one_empty_dsc", self.zero_policy.one_empty_dsc),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn metrics(&self) -> MetricsConfig {
        MetricsConfig {
            connectivity: self.connectivity,
            dsc_num_mode: self.dsc_num_mode,
            region_cluster_mode: self.region_cluster_mode,
            zero_policy: self.zero_policy,
        }
    }

    pub fn aggregate(&self) -> AggregateConfig {
        AggregateConfig {
            min_n_for_corr: self.min_n_for_corr,
            sd: self.sd,
        }
    }

    /// Worker count: the config value, else the environment variable, else
    /// the number of available cores.
    pub fn resolved_threads(&self) -> Result<usize> {
        if let Some(n) = self.threads {
            return Ok(n);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(Error::InvalidArgument(format!("{THREADS_ENV}='{v}' is not a positive integer"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// Settings that affect results, as compact JSON.
    pub fn provenance_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("threads");
        }
        value.to_string()
    }

    pub fn from_provenance_json(text: &str) -> Result<Self> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }
}

/// Comment lines that open every text output.
pub fn provenance_header(schema: &str, config: &RunConfig) -> String {
    format!(
        "# {TOOL_NAME} {VERSION}\n# schema: {schema}\n# config: {}\n",
        config.provenance_json()
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub tool: String,
    pub schema: String,
    /// Config JSON exactly as written.
    pub config: String,
}

/// Read the provenance comment lines at the top of a text output.
pub fn parse_provenance(text: &str) -> Result<Provenance> {
    let mut tool = None;
    let mut schema = None;
    let mut config = None;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some(v) = body.strip_prefix("schema:") {
            schema = Some(v.trim().to_string());
        } else if let Some(v) = body.strip_prefix("config:") {
            config = Some(v.trim().to_string());
        } else if body.starts_with(TOOL_NAME) {
            tool = Some(body.to_string());
        }
    }
    match (tool, schema, config) {
        (Some(tool), Some(schema), Some(config)) => Ok(Provenance { tool, schema, config }),
        _ => Err(Error::Schema("missing provenance header".into())),
    }
}
