//! Frame-granular closed loop tying network, latency and energy together.
//!
//! One call to [`XrEnv::step`] holds an execution configuration for a
//! decision interval. Each 50 ms tick samples the network, produces one
//! frame, and drains the battery. The interval reward and the state observed
//! at its end are returned to the controller.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config_space::{ActionId, ExecutionConfig, ExecutionMode, QualityLevel};
use crate::energy::{client_power, soc_step, BatteryState, PowerParams};
use crate::error::{Result, XrError};
use crate::latency::{
    mtp_local, offload_fixed_ms, violation, FrameSizeModel, ProcTimeTable, UplinkQueue,
};
use crate::network::{BandwidthProfile, RttModel, RttSampler};

/// Independent generator stream derived from a run seed.
///
/// Stream 0 drives the environment, stream 1 the agent, so exploration never
/// perturbs the network trace.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const ENV_STREAM: u64 = 0;
pub const AGENT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatteryParams {
    pub capacity_wh: f64,
    pub drain_accel: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        let b = BatteryState::default();
        Self {
            capacity_wh: b.capacity_wh,
            drain_accel: b.drain_accel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub lambda: f64,
    pub bonus_compliant: f64,
    pub alpha_power: f64,
    pub beta_battery: f64,
    /// Power that maps to a full `alpha_power` penalty.
    pub p_max_w: f64,
    /// Per-frame violation ceiling inside the reward (metrics stay uncapped).
    pub violation_cap: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            bonus_compliant: 0.2,
            alpha_power: 0.05,
            beta_battery: 0.05,
            p_max_w: 5.0,
            violation_cap: 2.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(XrError::param("reward.lambda", "must be positive"));
        }
        if !(self.p_max_w > 0.0) {
            return Err(XrError::param("reward.p_max_w", "must be positive"));
        }
        if !(self.violation_cap > 0.0) {
            return Err(XrError::param("reward.violation_cap", "must be positive"));
        }
        for (name, v) in [
            ("reward.bonus_compliant", self.bonus_compliant),
            ("reward.alpha_power", self.alpha_power),
            ("reward.beta_battery", self.beta_battery),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(XrError::param(name, "must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Interval reward from per-frame violations, client power and end-of-interval SoC.
pub fn reward(violations: &[f64], power_w: f64, soc: f64, p: &RewardParams) -> f64 {
    let mean_v = if violations.is_empty() {
        0.0
    } else {
        violations.iter().map(|v| v.min(p.violation_cap)).sum::<f64>() / violations.len() as f64
    };
    let r_mtp = if mean_v == 0.0 {
        p.bonus_compliant
    } else {
        -p.lambda * mean_v
    };
    r_mtp - p.alpha_power * power_w / p.p_max_w + p.beta_battery * soc / 100.0
}

/// Lifetime minus the weighted sum of per-decision mean violations.
pub fn objective_value(survived_s: f64, violations: impl IntoIterator<Item = f64>, lambda: f64) -> f64 {
    survived_s - lambda * violations.into_iter().sum::<f64>()
}

/// Extra latency on frames captured right after the execution mode changes,
/// while the pose pipeline re-establishes state on the other side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwitchTransient {
    pub penalty_ms: f64,
    pub frames: u32,
}

impl Default for SwitchTransient {
    fn default() -> Self {
        Self {
            penalty_ms: 30.0,
            frames: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObsScale {
    pub power_max_w: f64,
    pub rtt_max_ms: f64,
    pub mtp_max_ms: f64,
}

impl Default for ObsScale {
    fn default() -> Self {
        Self {
            power_max_w: 20.8,
            rtt_max_ms: 50.0,
            mtp_max_ms: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Set from the scenario's profile section rather than serialized here.
    #[serde(skip)]
    pub profile: BandwidthProfile,
    pub rtt: RttModel,
    pub latency: ProcTimeTable,
    pub frame: FrameSizeModel,
    pub power: PowerParams,
    pub battery: BatteryParams,
    pub reward: RewardParams,
    pub obs: ObsScale,
    pub switch: SwitchTransient,
    pub tau_mtp_ms: f64,
    pub decision_interval_s: f64,
    pub horizon_s: f64,
    pub max_queue_depth: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            profile: BandwidthProfile::variable(),
            rtt: RttModel::default(),
            latency: ProcTimeTable::default(),
            frame: FrameSizeModel::default(),
            power: PowerParams::default(),
            battery: BatteryParams::default(),
            reward: RewardParams::default(),
            obs: ObsScale::default(),
            switch: SwitchTransient::default(),
            tau_mtp_ms: 30.0,
            decision_interval_s: 1.0,
            horizon_s: 1200.0,
            max_queue_depth: 20,
        }
    }
}

fn whole_ticks(span_s: f64, tick_s: f64) -> Option<u64> {
    let n = span_s / tick_s;
    let r = n.round();
    ((n - r).abs() < 1e-6 && r >= 0.0).then_some(r as u64)
}

impl EnvConfig {
    pub fn frame_period_s(&self) -> f64 {
        self.power.tau_frame_ms / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        self.rtt.validate()?;
        self.latency.validate()?;
        self.power.validate()?;
        self.reward.validate()?;
        BatteryState::new(self.battery.capacity_wh, self.battery.drain_accel)?;
        if !(self.frame.d_base_mbit > 0.0) {
            return Err(XrError::param("frame.d_base_mbit", "must be positive"));
        }
        if !(self.tau_mtp_ms > 0.0) {
            return Err(XrError::param("tau_mtp_ms", "must be positive"));
        }
        if self.max_queue_depth == 0 {
            return Err(XrError::param("max_queue_depth", "must be at least 1"));
        }
        if !(self.switch.penalty_ms >= 0.0) {
            return Err(XrError::param("switch.penalty_ms", "must be non-negative"));
        }
        let o = self.obs;
        if !(o.power_max_w > 0.0 && o.rtt_max_ms > 0.0 && o.mtp_max_ms > 0.0) {
            return Err(XrError::param("obs", "scales must be positive"));
        }
        let tick = self.frame_period_s();
        match whole_ticks(self.decision_interval_s, tick) {
            Some(n) if n > 0 => {}
            _ => {
                return Err(XrError::InvalidScenario(format!(
                    "decision interval {} s is not a positive multiple of the {} s frame period",
                    self.decision_interval_s, tick
                )))
            }
        }
        if !(self.horizon_s >= 0.0) || whole_ticks(self.horizon_s, tick).is_none() {
            return Err(XrError::InvalidScenario(format!(
                "horizon {} s is not a non-negative multiple of the frame period",
                self.horizon_s
            )));
        }
        Ok(())
    }

    pub fn ticks_per_decision(&self) -> u64 {
        whole_ticks(self.decision_interval_s, self.frame_period_s()).unwrap_or(1)
    }

    pub fn horizon_ticks(&self) -> u64 {
        whole_ticks(self.horizon_s, self.frame_period_s()).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub soc: f64,
    pub power_w: f64,
    pub rtt_ms: f64,
    pub bandwidth_mbps: f64,
    pub mtp_ms: f64,
}

pub const STATE_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedState(pub [f64; STATE_DIM]);

impl NormalizedState {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl SystemState {
    pub fn normalize(&self, s: &ObsScale) -> NormalizedState {
        let c = |x: f64| x.clamp(0.0, 1.0);
        NormalizedState([
            c(self.soc / 100.0),
            c(self.power_w / s.power_max_w),
            c(self.rtt_ms / s.rtt_max_ms),
            c(self.bandwidth_mbps.log10() / 3.0),
            c(self.mtp_ms / s.mtp_max_ms),
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t_capture: f64,
    pub mtp_ms: f64,
    pub violation: f64,
    pub compliant: bool,
    pub mode: ExecutionMode,
    pub quality: QualityLevel,
    /// Bandwidth in effect when the frame was captured.
    pub bandwidth_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalInfo {
    pub action: ActionId,
    pub t_start: f64,
    pub t_end: f64,
    pub ticks: u64,
    pub bandwidth_mbps: f64,
    pub rtt_ms: f64,
    pub power_w: f64,
    pub energy_j: f64,
    pub soc: f64,
    pub delivered: usize,
    pub compliant: usize,
    pub dropped: u64,
    pub queue_depth: usize,
    /// Mean MTP of delivered frames, or of the stalled head frame if none.
    pub mean_mtp_ms: f64,
    pub mean_violation: f64,
    pub switched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: SystemState,
    pub obs: NormalizedState,
    pub reward: f64,
    pub done: bool,
    pub depleted: bool,
    pub frames: Vec<FrameRecord>,
    pub info: IntervalInfo,
}

/// One-interval forecast used by model-based baselines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean_violation: f64,
    pub power_w: f64,
    pub soc: f64,
    pub reward: f64,
}

#[derive(Debug, Clone)]
struct Pipeline {
    queue: UplinkQueue,
    mode: ExecutionMode,
    transient_left: u32,
    battery: BatteryState,
}

struct TickOut {
    elapsed_s: f64,
    depleted: bool,
}

impl Pipeline {
    fn boot(c: &EnvConfig) -> Self {
        Self {
            queue: UplinkQueue::new(c.max_queue_depth),
            mode: ExecutionMode::Local,
            transient_left: 0,
            battery: BatteryState {
                capacity_wh: c.battery.capacity_wh,
                soc: 100.0,
                drain_accel: c.battery.drain_accel,
            },
        }
    }

    /// Returns true if the execution mode changed.
    fn apply(&mut self, cfg: ExecutionConfig, c: &EnvConfig) -> bool {
        if cfg.mode == self.mode {
            return false;
        }
        if self.mode == ExecutionMode::Offload {
            self.queue.flush();
        }
        self.mode = cfg.mode;
        self.transient_left = c.switch.frames;
        true
    }

    #[allow(clippy::too_many_arguments)]
    fn tick(
        &mut self,
        cfg: ExecutionConfig,
        c: &EnvConfig,
        power_w: f64,
        t: f64,
        dt: f64,
        bandwidth: f64,
        rtt: f64,
        frames: &mut Vec<FrameRecord>,
    ) -> TickOut {
        let s = soc_step(self.battery, power_w, dt);
        self.battery = s.battery;
        let extra = if self.transient_left > 0 {
            self.transient_left -= 1;
            c.switch.penalty_ms
        } else {
            0.0
        };
        let tau = c.tau_mtp_ms;
        let record = |t_capture: f64, mtp_ms: f64, quality| {
            let v = violation(mtp_ms, tau);
            FrameRecord {
                t_capture,
                mtp_ms,
                violation: v,
                compliant: v == 0.0,
                mode: cfg.mode,
                quality,
                bandwidth_mbps: bandwidth,
            }
        };
        match cfg.mode {
            ExecutionMode::Local => {
                let mtp = mtp_local(cfg, &c.latency).expect("local config") + extra;
                frames.push(record(t, mtp, cfg.quality));
            }
            ExecutionMode::Offload => {
                self.queue.enqueue_frame(t, cfg.quality, &c.frame, extra);
                if s.elapsed_s > 0.0 {
                    for d in self.queue.drain_step(t, s.elapsed_s, bandwidth, rtt, &c.latency) {
                        frames.push(record(d.t_capture, d.mtp_ms, d.quality));
                    }
                }
            }
        }
        TickOut {
            elapsed_s: s.elapsed_s,
            depleted: s.depleted,
        }
    }

    /// Latency the head-of-line frame would report if it completed at `t_end`.
    fn stalled_mtp(&self, t_end: f64, rtt: f64, c: &EnvConfig) -> Option<f64> {
        self.queue
            .pending()
            .next()
            .map(|f| (t_end - f.t_capture) * 1000.0 + offload_fixed_ms(f.quality, rtt, &c.latency) + f.extra_ms)
    }
}

fn interval_violations(frames: &[FrameRecord], stalled: Option<f64>, tau: f64) -> Vec<f64> {
    if frames.is_empty() {
        stalled.map(|m| vec![violation(m, tau)]).unwrap_or_default()
    } else {
        frames.iter().map(|f| f.violation).collect()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Simulated XR client. Not thread-safe by design; one instance per run.
#[derive(Debug, Clone)]
pub struct XrEnv {
    cfg: EnvConfig,
    pipe: Pipeline,
    rtt: RttSampler,
    tick: u64,
    horizon_ticks: u64,
    ticks_per_decision: u64,
    state: SystemState,
    done: bool,
    depleted: bool,
    survived_s: f64,
    energy_j: f64,
}

impl XrEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut env = Self {
            pipe: Pipeline::boot(&cfg),
            rtt: RttSampler::new(cfg.rtt, stream_rng(seed, ENV_STREAM)),
            tick: 0,
            horizon_ticks: cfg.horizon_ticks(),
            ticks_per_decision: cfg.ticks_per_decision(),
            state: SystemState {
                soc: 100.0,
                power_w: 0.0,
                rtt_ms: 0.0,
                bandwidth_mbps: 0.0,
                mtp_ms: 0.0,
            },
            done: false,
            depleted: false,
            survived_s: 0.0,
            energy_j: 0.0,
            cfg,
        };
        env.reset(seed);
        Ok(env)
    }

    pub fn reset(&mut self, seed: u64) -> SystemState {
        self.pipe = Pipeline::boot(&self.cfg);
        self.rtt = RttSampler::new(self.cfg.rtt, stream_rng(seed, ENV_STREAM));
        self.tick = 0;
        self.done = self.horizon_ticks == 0;
        self.depleted = false;
        self.survived_s = 0.0;
        self.energy_j = 0.0;
        self.state = SystemState {
            soc: 100.0,
            power_w: self.cfg.power.p_base_w,
            rtt_ms: self.rtt.sample(),
            bandwidth_mbps: self.cfg.profile.bandwidth_at(0.0),
            mtp_ms: 0.0,
        };
        self.state
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> SystemState {
        self.state
    }

    pub fn observe(&self) -> NormalizedState {
        self.state.normalize(&self.cfg.obs)
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_depleted(&self) -> bool {
        self.depleted
    }

    pub fn time_s(&self) -> f64 {
        self.tick_time(self.tick)
    }

    /// Seconds survived so far; equals the horizon if the battery lasted.
    pub fn survived_s(&self) -> f64 {
        self.survived_s
    }

    /// Client energy drawn so far, before drain acceleration.
    pub fn energy_j(&self) -> f64 {
        self.energy_j
    }

    pub fn battery(&self) -> BatteryState {
        self.pipe.battery
    }

    pub fn queue(&self) -> &UplinkQueue {
        &self.pipe.queue
    }

    pub fn mode(&self) -> ExecutionMode {
        self.pipe.mode
    }

    fn tick_time(&self, k: u64) -> f64 {
        k as f64 * self.cfg.power.tau_frame_ms / 1000.0
    }

    pub fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        if self.done {
            return Err(XrError::EpisodeFinished);
        }
        let c = &self.cfg;
        let cfg = action.config();
        let power_w = client_power(cfg, &c.latency, &c.power);
        let dt = c.frame_period_s();
        let t_start = self.tick_time(self.tick);
        let bw_start = c.profile.bandwidth_at(t_start);
        let dropped_before = self.pipe.queue.dropped();
        let switched = self.pipe.apply(cfg, c);

        let n = self.ticks_per_decision.min(self.horizon_ticks - self.tick);
        let mut frames = Vec::with_capacity(n as usize);
        let mut ticks = 0;
        let mut last_elapsed = 0.0;
        let mut energy = 0.0;
        let mut rtt = self.state.rtt_ms;
        for _ in 0..n {
            let t = self.tick_time(self.tick);
            let bw = c.profile.bandwidth_at(t);
            rtt = self.rtt.sample();
            let first_new = frames.len();
            let out = self.pipe.tick(cfg, c, power_w, t, dt, bw, rtt, &mut frames);
            for f in &mut frames[first_new..] {
                f.bandwidth_mbps = c.profile.bandwidth_at(f.t_capture);
            }
            self.tick += 1;
            ticks += 1;
            last_elapsed = out.elapsed_s;
            energy += power_w * out.elapsed_s;
            if out.depleted {
                self.depleted = true;
                break;
            }
        }
        // Exact tick times avoid drift from summing 0.05 s steps.
        let t_end = if self.depleted {
            self.tick_time(self.tick - 1) + last_elapsed
        } else {
            self.tick_time(self.tick)
        };
        self.survived_s = t_end;
        self.energy_j += energy;
        self.done = self.depleted || self.tick >= self.horizon_ticks;

        let stalled = self.pipe.stalled_mtp(t_end, rtt, c);
        let vs = interval_violations(&frames, stalled, c.tau_mtp_ms);
        let mean_mtp = if frames.is_empty() {
            stalled.unwrap_or(self.state.mtp_ms)
        } else {
            mean(&frames.iter().map(|f| f.mtp_ms).collect::<Vec<_>>())
        };
        let last_mtp = frames.last().map(|f| f.mtp_ms).or(stalled).unwrap_or(self.state.mtp_ms);
        let soc = self.pipe.battery.soc;
        let r = reward(&vs, power_w, soc, &c.reward);

        self.state = SystemState {
            soc,
            power_w,
            rtt_ms: rtt,
            bandwidth_mbps: c.profile.bandwidth_at(self.tick_time(self.tick)),
            mtp_ms: last_mtp,
        };
        let info = IntervalInfo {
            action,
            t_start,
            t_end,
            ticks,
            bandwidth_mbps: bw_start,
            rtt_ms: rtt,
            power_w,
            energy_j: energy,
            soc,
            delivered: frames.len(),
            compliant: frames.iter().filter(|f| f.compliant).count(),
            dropped: self.pipe.queue.dropped() - dropped_before,
            queue_depth: self.pipe.queue.depth(),
            mean_mtp_ms: mean_mtp,
            mean_violation: mean(&vs),
            switched,
        };
        Ok(StepOutcome {
            state: self.state,
            obs: self.observe(),
            reward: r,
            done: self.done,
            depleted: self.depleted,
            frames,
            info,
        })
    }

    /// Forecasts the next interval under `action` with the true latency and
    /// energy models, holding bandwidth at its observed value and RTT at its
    /// base. With `include_queue` false the current backlog is ignored.
    pub fn predict_interval(&self, action: ActionId, include_queue: bool) -> Prediction {
        let c = &self.cfg;
        let cfg = action.config();
        let power_w = client_power(cfg, &c.latency, &c.power);
        let mut pipe = self.pipe.clone();
        if !include_queue {
            pipe.queue = UplinkQueue::new(c.max_queue_depth);
        }
        pipe.apply(cfg, c);
        let bw = self.state.bandwidth_mbps;
        let rtt = c.rtt.base_ms;
        let dt = c.frame_period_s();
        let n = self.ticks_per_decision.min(self.horizon_ticks.saturating_sub(self.tick)).max(1);
        let mut frames = Vec::new();
        let mut t = self.tick_time(self.tick);
        for k in 0..n {
            t = self.tick_time(self.tick + k);
            let out = pipe.tick(cfg, c, power_w, t, dt, bw, rtt, &mut frames);
            if out.depleted {
                break;
            }
        }
        let stalled = pipe.stalled_mtp(t + dt, rtt, c);
        let vs = interval_violations(&frames, stalled, c.tau_mtp_ms);
        let soc = pipe.battery.soc;
        Prediction {
            mean_violation: mean(&vs),
            power_w,
            soc,
            reward: reward(&vs, power_w, soc, &c.reward),
        }
    }
}
