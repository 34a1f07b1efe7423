use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dqn::DqnConfig;
use crate::env::EnvConfig;
use crate::error::{Result, XrError};
use crate::network::{BandwidthProfile, DEFAULT_DWELL_S};
use crate::policy::PolicyKind;

pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
pub const DEFAULT_STABLE_MBPS: f64 = 1000.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    /// The default five-level cycle.
    #[default]
    Variable,
    Stable {
        #[serde(default = "default_stable")]
        bandwidth_mbps: f64,
    },
    Cyclic {
        levels: Vec<f64>,
        #[serde(default = "default_dwell")]
        dwell_s: f64,
    },
    /// Plain-text `bandwidth dwell` pairs, one per line.
    File { path: PathBuf },
}

fn default_stable() -> f64 {
    DEFAULT_STABLE_MBPS
}

fn default_dwell() -> f64 {
    DEFAULT_DWELL_S
}

impl ProfileSpec {
    pub fn stable(bandwidth_mbps: f64) -> Self {
        ProfileSpec::Stable { bandwidth_mbps }
    }

    pub fn build(&self) -> Result<BandwidthProfile> {
        match self {
            ProfileSpec::Variable => Ok(BandwidthProfile::variable()),
            ProfileSpec::Stable { bandwidth_mbps } => BandwidthProfile::stable(*bandwidth_mbps),
            ProfileSpec::Cyclic { levels, dwell_s } => BandwidthProfile::cyclic(levels, *dwell_s),
            ProfileSpec::File { path } => BandwidthProfile::load(path),
        }
    }

    /// Short name used for output directories.
    pub fn label(&self) -> String {
        match self {
            ProfileSpec::Variable => "variable".into(),
            ProfileSpec::Stable { bandwidth_mbps } => format!("stable-{bandwidth_mbps}"),
            ProfileSpec::Cyclic { .. } => "cyclic".into(),
            ProfileSpec::File { path } => format!(
                "file-{}",
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            ),
        }
    }
}

/// Everything needed to reproduce a batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: Option<String>,
    pub policy: PolicyKind,
    pub seeds: Vec<u64>,
    pub profile: ProfileSpec,
    /// Whether GREEDY's forecast accounts for frames already queued.
    pub greedy_include_queue: bool,
    pub env: EnvConfig,
    pub dqn: DqnConfig,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: None,
            policy: PolicyKind::Rl,
            seeds: DEFAULT_SEEDS.to_vec(),
            profile: ProfileSpec::Variable,
            greedy_include_queue: true,
            env: EnvConfig::default(),
            dqn: DqnConfig::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn new(policy: PolicyKind, profile: ProfileSpec) -> Self {
        Self {
            policy,
            profile,
            ..Self::default()
        }
    }

    pub fn with_seeds(mut self, seeds: &[u64]) -> Self {
        self.seeds = seeds.to_vec();
        self
    }

    pub fn with_horizon(mut self, horizon_s: f64) -> Self {
        self.env.horizon_s = horizon_s;
        self
    }

    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("{}-{}", self.policy, self.profile.label()),
        }
    }

    /// Resolved environment configuration including the bandwidth profile.
    pub fn env_config(&self) -> Result<EnvConfig> {
        let mut cfg = self.env.clone();
        cfg.profile = self.profile.build()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(XrError::InvalidScenario("at least one seed is required".into()));
        }
        if !(self.env.horizon_s > 0.0) {
            return Err(XrError::InvalidScenario("horizon must be positive".into()));
        }
        self.env_config()?;
        if self.policy == PolicyKind::Rl {
            self.dqn.validate()?;
        }
        Ok(())
    }

    pub fn parse_toml(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a TOML scenario; a relative profile path is resolved against
    /// the scenario file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| XrError::io(path, e))?;
        let mut spec = Self::parse_toml(&text).map_err(|reason| XrError::Parse {
            path: path.to_path_buf(),
            reason,
        })?;
        if let ProfileSpec::File { path: p } = &mut spec.profile {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }
}
