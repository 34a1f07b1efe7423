//! Client power draw and battery state of charge.

use serde::{Deserialize, Serialize};

use crate::config_space::ExecutionConfig;
use crate::error::{Result, XrError};
use crate::latency::{proc_time, ProcTimeTable};

const J_PER_WH: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerParams {
    pub p_base_w: f64,
    pub tdp_proc_w: f64,
    pub w_proc: f64,
    pub w_cpu: f64,
    pub w_gpu: f64,
    pub p_cpu_w: f64,
    pub p_gpu_w: f64,
    pub tau_frame_ms: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        Self {
            p_base_w: 0.5,
            tdp_proc_w: 35.0,
            w_proc: 1.0,
            w_cpu: 0.0,
            w_gpu: 0.0,
            p_cpu_w: 0.0,
            p_gpu_w: 0.0,
            tau_frame_ms: 50.0,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_base_w >= 0.0 && self.p_base_w.is_finite()) {
            return Err(XrError::param("power.p_base_w", "must be non-negative"));
        }
        if !(self.tdp_proc_w > 0.0 && self.tdp_proc_w.is_finite()) {
            return Err(XrError::param("power.tdp_proc_w", "must be positive"));
        }
        if !(self.tau_frame_ms > 0.0) {
            return Err(XrError::param("power.tau_frame_ms", "must be positive"));
        }
        for (name, v) in [
            ("power.w_proc", self.w_proc),
            ("power.w_cpu", self.w_cpu),
            ("power.w_gpu", self.w_gpu),
            ("power.p_cpu_w", self.p_cpu_w),
            ("power.p_gpu_w", self.p_gpu_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(XrError::param(name, "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Processor power scaled by duty cycle within one frame slot.
pub fn proc_power(cfg: ExecutionConfig, table: &ProcTimeTable, params: &PowerParams) -> f64 {
    duty_power(proc_time(cfg, table), params)
}

fn duty_power(t_proc_ms: f64, params: &PowerParams) -> f64 {
    t_proc_ms / params.tau_frame_ms * params.tdp_proc_w
}

/// Total client draw. Depends on the configuration only, never on the network.
pub fn client_power(cfg: ExecutionConfig, table: &ProcTimeTable, params: &PowerParams) -> f64 {
    params.p_base_w
        + params.w_proc * proc_power(cfg, table, params)
        + params.w_cpu * params.p_cpu_w
        + params.w_gpu * params.p_gpu_w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub capacity_wh: f64,
    /// Percent, in `[0, 100]`.
    pub soc: f64,
    pub drain_accel: f64,
}

impl Default for BatteryState {
    fn default() -> Self {
        Self {
            capacity_wh: 16.6,
            soc: 100.0,
            drain_accel: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocStep {
    pub battery: BatteryState,
    /// Seconds of `dt` actually spent before the battery emptied.
    pub elapsed_s: f64,
    pub depleted: bool,
}

impl BatteryState {
    pub fn new(capacity_wh: f64, drain_accel: f64) -> Result<Self> {
        if !(capacity_wh > 0.0 && capacity_wh.is_finite()) {
            return Err(XrError::param("battery.capacity_wh", "must be positive"));
        }
        if !(drain_accel > 0.0 && drain_accel.is_finite()) {
            return Err(XrError::param("battery.drain_accel", "must be positive"));
        }
        Ok(Self {
            capacity_wh,
            soc: 100.0,
            drain_accel,
        })
    }

    pub fn is_depleted(&self) -> bool {
        self.soc <= 0.0
    }

    /// Percent of charge consumed by drawing `power_w` for `dt_s`.
    pub fn drain_pct(&self, power_w: f64, dt_s: f64) -> f64 {
        self.drain_accel * power_w * dt_s / (self.capacity_wh * J_PER_WH) * 100.0
    }

    /// Seconds until empty at constant `power_w`.
    pub fn time_to_empty_s(&self, power_w: f64) -> f64 {
        if power_w <= 0.0 {
            return f64::INFINITY;
        }
        self.soc / 100.0 * self.capacity_wh * J_PER_WH / (self.drain_accel * power_w)
    }
}

/// Advances the battery by `dt_s` at constant `power_w`.
///
/// If the charge runs out inside the step, the step is cut at the exact
/// depletion instant and `elapsed_s` reports how much of `dt_s` was used.
pub fn soc_step(batt: BatteryState, power_w: f64, dt_s: f64) -> SocStep {
    assert!(power_w >= 0.0, "power must be non-negative");
    assert!(dt_s > 0.0, "dt must be positive");
    let drop = batt.drain_pct(power_w, dt_s);
    if drop < batt.soc {
        SocStep {
            battery: BatteryState {
                soc: batt.soc - drop,
                ..batt
            },
            elapsed_s: dt_s,
            depleted: false,
        }
    } else {
        SocStep {
            battery: BatteryState { soc: 0.0, ..batt },
            elapsed_s: batt.time_to_empty_s(power_w).min(dt_s),
            depleted: true,
        }
    }
}

/// Remaining lifetime in hours at constant `power_w`.
pub fn lifetime_projection(batt: &BatteryState, power_w: f64) -> Result<f64> {
    if !(power_w > 0.0) {
        return Err(XrError::param("power", format!("must be positive, got {power_w}")));
    }
    Ok(batt.soc / 100.0 * batt.capacity_wh / (batt.drain_accel * power_w))
}
