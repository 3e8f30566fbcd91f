//! Run configuration: a JSON file whose fields command-line flags override.

use std::path::{Path, PathBuf};

use chanmetrics::synth::{ChannelModel, ModelKind};
use chanmetrics::{ArrayGeometry, ArrayKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub experiments: ExperimentsConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceConfig {
    Dataset(PathBuf),
    Model(ModelSpec),
}

/// Flat model description shared by the config file and the CLI flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `iid`, `kronecker` or `multipath`.
    pub kind: Option<String>,
    pub rho: Option<f64>,
    pub angles: Option<Vec<f64>>,
    pub powers: Option<Vec<f64>>,
    pub noise_floor: Option<f64>,
    pub antennas: Option<usize>,
    pub snapshots: Option<usize>,
    pub freqs: Option<usize>,
    pub positions: Option<usize>,
    /// `ula` or `ura`.
    pub array: Option<String>,
    pub rows: Option<usize>,
}

macro_rules! override_fields {
    ($dst:ident, $src:ident, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ModelSpec {
    pub fn is_empty(&self) -> bool {
        self == &ModelSpec::default()
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged(mut self, other: &ModelSpec) -> ModelSpec {
        override_fields!(self, other, kind, rho, angles, powers, noise_floor, antennas, snapshots, freqs, positions, array, rows);
        self
    }

    pub fn channel_model(&self) -> Result<ChannelModel, CliError> {
        let kind = match self.kind.as_deref().unwrap_or("iid") {
            "iid" => ModelKind::IidRayleigh,
            "kronecker" => ModelKind::KroneckerExponential {
                rho: self
                    .rho
                    .ok_or_else(|| CliError::Usage("kronecker model needs --rho".into()))?,
            },
            "multipath" => ModelKind::SparseMultipath {
                steering_angles: self
                    .angles
                    .clone()
                    .ok_or_else(|| CliError::Usage("multipath model needs --angles".into()))?,
                path_powers: self
                    .powers
                    .clone()
                    .ok_or_else(|| CliError::Usage("multipath model needs --powers".into()))?,
                noise_floor: self.noise_floor.unwrap_or(0.0),
            },
            other => return Err(CliError::Usage(format!("unknown model kind {other:?}"))),
        };
        let model = ChannelModel {
            kind,
            antennas: self.antennas.unwrap_or(32),
            snapshots: self.snapshots.unwrap_or(6000),
            freqs: self.freqs.unwrap_or(2),
        };
        model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(model)
    }

    pub fn positions(&self) -> usize {
        self.positions.unwrap_or(10)
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, CliError> {
        let m = self.antennas.unwrap_or(32);
        match self.array.as_deref().unwrap_or("ula") {
            "ula" => Ok(ArrayGeometry::ula(m)),
            "ura" => {
                let rows = self.rows.unwrap_or(4);
                if rows == 0 || !m.is_multiple_of(rows) {
                    return Err(CliError::Usage(format!(
                        "URA with {rows} rows cannot hold {m} antennas"
                    )));
                }
                Ok(chanmetrics::ingest::canonical_numbering(ArrayKind::Ura, rows, m / rows))
            }
            other => Err(CliError::Usage(format!("unknown array kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentsConfig {
    pub hardening: Option<HardeningConfig>,
    pub correlation: Option<CorrelationConfig>,
    pub condition: Option<ConditionConfig>,
    pub eigen: Option<EigenSection>,
    pub schedule: Option<ScheduleConfig>,
}

pub const EXPERIMENT_NAMES: [&str; 5] = ["hardening", "correlation", "condition", "eigen", "schedule"];

impl ExperimentsConfig {
    pub fn names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.hardening.is_some() {
            names.push("hardening");
        }
        if self.correlation.is_some() {
            names.push("correlation");
        }
        if self.condition.is_some() {
            names.push("condition");
        }
        if self.eigen.is_some() {
            names.push("eigen");
        }
        if self.schedule.is_some() {
            names.push("schedule");
        }
        names
    }

    /// Adds a default section for `name` unless one is configured.
    pub fn enable(&mut self, name: &str) -> Result<(), CliError> {
        match name {
            "hardening" => {
                self.hardening.get_or_insert_with(Default::default);
            }
            "correlation" => {
                self.correlation.get_or_insert_with(Default::default);
            }
            "condition" => {
                self.condition.get_or_insert_with(Default::default);
            }
            "eigen" => {
                self.eigen.get_or_insert_with(Default::default);
            }
            "schedule" => {
                self.schedule.get_or_insert_with(Default::default);
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown experiment {other:?} (expected one of {})",
                    EXPERIMENT_NAMES.join(", ")
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardeningConfig {
    pub window_length: Option<usize>,
    pub antenna_counts: Option<Vec<usize>>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub antenna_counts: Option<Vec<usize>>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub node_counts: Option<Vec<usize>>,
    pub antenna_count: Option<usize>,
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenSection {
    pub window_length: Option<usize>,
    pub p: Option<usize>,
    pub frequency: Option<usize>,
    pub antenna_counts: Option<Vec<usize>>,
    pub group_a: Option<Vec<String>>,
    pub group_b: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub window_length: Option<usize>,
    pub p: Option<usize>,
    pub group_size: Option<usize>,
    /// `chordal` (default) or `correlation`.
    pub metric: Option<String>,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let json = r#"{
            "seed": 3,
            "out": "res",
            "threads": 2,
            "source": {"model": {"kind": "kronecker", "rho": 0.5, "antennas": 8, "positions": 4}},
            "experiments": {
                "hardening": {"window_length": 100, "antenna_counts": [1, 8]},
                "schedule": {"group_size": 2}
            }
        }"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.experiments.names(), vec!["hardening", "schedule"]);
        let Some(SourceConfig::Model(spec)) = cfg.source else { panic!() };
        let model = spec.channel_model().unwrap();
        assert_eq!(model.antennas, 8);
        assert_eq!(model.kind, ModelKind::KroneckerExponential { rho: 0.5 });
    }

    #[test]
    fn rejects_unknown_fields_and_names() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let mut e = ExperimentsConfig::default();
        assert!(e.enable("hardening").is_ok());
        assert!(matches!(e.enable("bogus"), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_override_config() {
        let base = ModelSpec {
            kind: Some("iid".into()),
            antennas: Some(8),
            ..Default::default()
        };
        let flags = ModelSpec {
            antennas: Some(16),
            ..Default::default()
        };
        let merged = base.merged(&flags);
        assert_eq!(merged.antennas, Some(16));
        assert_eq!(merged.kind.as_deref(), Some("iid"));
    }

    #[test]
    fn ura_geometry_from_spec() {
        let spec = ModelSpec {
            antennas: Some(32),
            array: Some("ura".into()),
            rows: Some(4),
            ..Default::default()
        };
        let g = spec.geometry().unwrap();
        assert_eq!((g.rows(), g.cols()), (4, 8));
        let bad = ModelSpec { rows: Some(5), ..spec };
        assert!(bad.geometry().is_err());
    }
}
