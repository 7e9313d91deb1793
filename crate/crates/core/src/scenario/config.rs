//! JSON scenario configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decision::{DecisionConfig, DecisionKind};
use crate::error::{Error, Result};
use crate::hypothesis::{ThresholdConfig, Verdict};
use crate::measurement::ChannelDef;
use crate::model::{
    assemble, make_ideal_source, make_rl_branch, DeviceModel, NetworkModel, NodePhase, PerUnitBases, ProtectionZone,
    BASE_FREQUENCY_HZ,
};
use crate::sim::{Event, EventSchedule, InitialCondition};

/// One device of the network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeviceSpec {
    /// Ideal cosine voltage source pinning `node`.
    Source {
        name: String,
        node: NodePhase,
        amplitude: f64,
        #[serde(default)]
        phase_angle: f64,
    },
    /// Series R-L branch; `l` in per-unit seconds.
    RlBranch {
        name: String,
        from: NodePhase,
        to: NodePhase,
        r: f64,
        #[serde(default)]
        l: f64,
    },
    /// R-L load from `node` to ground.
    Load {
        name: String,
        node: NodePhase,
        r: f64,
        #[serde(default)]
        l: f64,
    },
}

impl DeviceSpec {
    pub fn build(&self) -> Result<DeviceModel> {
        match self {
            DeviceSpec::Source {
                name,
                node,
                amplitude,
                phase_angle,
            } => make_ideal_source(name, *amplitude, *phase_angle, node.clone()),
            DeviceSpec::RlBranch { name, from, to, r, l } => make_rl_branch(name, *r, *l, from.clone(), to.clone()),
            DeviceSpec::Load { name, node, r, l } => make_rl_branch(name, *r, *l, node.clone(), NodePhase::ground()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_frequency")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub bases: PerUnitBases,
    pub devices: Vec<DeviceSpec>,
    pub zones: Vec<ProtectionZone>,
    #[serde(default)]
    pub breakers: Vec<String>,
}

fn default_frequency() -> f64 {
    BASE_FREQUENCY_HZ
}

impl NetworkConfig {
    pub fn build(&self) -> Result<NetworkModel> {
        if (self.frequency_hz - BASE_FREQUENCY_HZ).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "only {BASE_FREQUENCY_HZ} Hz systems are supported, got {}",
                self.frequency_hz
            )));
        }
        let devices = self.devices.iter().map(DeviceSpec::build).collect::<Result<Vec<_>>>()?;
        let mut net = assemble(devices, self.zones.clone(), self.breakers.clone())?;
        net.bases = self.bases;
        Ok(net)
    }
}

/// Optional checks evaluated at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// Verdicts that must appear in the timeline.
    #[serde(default)]
    pub verdicts: Vec<Verdict>,
    /// Decision kinds that must be issued.
    #[serde(default)]
    pub decisions: Vec<DecisionKind>,
    #[serde(default)]
    pub no_decisions: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_mean_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub network: NetworkConfig,
    pub channels: Vec<ChannelDef>,
    #[serde(default)]
    pub events: Vec<Event>,
    pub duration: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub thresholds: ThresholdConfig,
    #[serde(default)]
    pub decision: DecisionConfig,
    /// Estimate every `stride`-th window.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expectations: Option<Expectations>,
}

fn default_stride() -> usize {
    1
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    pub fn schedule(&self) -> EventSchedule {
        EventSchedule::new(self.events.clone())
    }

    /// Structural checks that do not need the assembled network.
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Config("duration must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        for (k, ev) in self.events.iter().enumerate() {
            if ev.end() > self.duration + 1e-9 {
                return Err(Error::Config(format!(
                    "event {k} ends at {} s, after the {} s run",
                    ev.end(),
                    self.duration
                )));
            }
        }
        self.thresholds.validate()?;
        self.decision.validate()?;
        Ok(())
    }
}
