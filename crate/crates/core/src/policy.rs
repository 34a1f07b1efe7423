//! Controllers that choose an execution configuration once per decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config_space::ActionId;
use crate::dqn::{argmax, DqnAgent, Transition};
use crate::env::XrEnv;
use crate::error::Result;

/// Bandwidth above which THRESHOLD offloads.
pub const THRESHOLD_MBPS: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Local,
    Offload,
    Greedy,
    Threshold,
    Rl,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Local,
        PolicyKind::Offload,
        PolicyKind::Greedy,
        PolicyKind::Threshold,
        PolicyKind::Rl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Local => "local",
            PolicyKind::Offload => "offload",
            PolicyKind::Greedy => "greedy",
            PolicyKind::Threshold => "threshold",
            PolicyKind::Rl => "rl",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown policy {s:?} (expected local, offload, greedy, threshold or rl)"))
    }
}

/// HIGH quality, HIGH IMU rate, on device.
pub fn static_local() -> ActionId {
    ActionId::new(4).expect("valid id")
}

/// HIGH quality, HIGH IMU rate, offloaded.
pub fn static_offload() -> ActionId {
    ActionId::new(5).expect("valid id")
}

pub fn threshold_select(bandwidth_mbps: f64) -> ActionId {
    if bandwidth_mbps > THRESHOLD_MBPS {
        static_offload()
    } else {
        static_local()
    }
}

/// Action with the highest model-predicted reward for the next interval.
pub fn greedy_select(env: &XrEnv, include_queue: bool) -> ActionId {
    let predicted: Vec<f64> = ActionId::all()
        .map(|a| env.predict_interval(a, include_queue).reward)
        .collect();
    ActionId::new(argmax(&predicted)).expect("valid id")
}

/// Common interface for the controllers driven by the experiment loop.
pub trait Policy {
    fn kind(&self) -> PolicyKind;

    fn decide(&mut self, env: &XrEnv) -> Result<ActionId>;

    /// Called once per completed decision. Returns a training loss if the
    /// policy learned from the transition.
    fn feedback(&mut self, _t: Transition) -> Option<f64> {
        None
    }

    fn epsilon(&self) -> Option<f64> {
        None
    }
}

pub struct StaticPolicy {
    kind: PolicyKind,
    action: ActionId,
}

impl StaticPolicy {
    pub fn local() -> Self {
        Self {
            kind: PolicyKind::Local,
            action: static_local(),
        }
    }

    pub fn offload() -> Self {
        Self {
            kind: PolicyKind::Offload,
            action: static_offload(),
        }
    }
}

impl Policy for StaticPolicy {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn decide(&mut self, _env: &XrEnv) -> Result<ActionId> {
        Ok(self.action)
    }
}

pub struct ThresholdPolicy;

impl Policy for ThresholdPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Threshold
    }

    fn decide(&mut self, env: &XrEnv) -> Result<ActionId> {
        Ok(threshold_select(env.state().bandwidth_mbps))
    }
}

pub struct GreedyPolicy {
    pub include_queue: bool,
}

impl Policy for GreedyPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Greedy
    }

    fn decide(&mut self, env: &XrEnv) -> Result<ActionId> {
        Ok(greedy_select(env, self.include_queue))
    }
}

pub struct RlPolicy {
    pub agent: DqnAgent,
}

impl Policy for RlPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Rl
    }

    fn decide(&mut self, env: &XrEnv) -> Result<ActionId> {
        self.agent.act(&env.observe())
    }

    fn feedback(&mut self, t: Transition) -> Option<f64> {
        self.agent.learn(t)
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.agent.epsilon())
    }
}
