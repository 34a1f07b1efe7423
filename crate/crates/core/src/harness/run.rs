use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{
    action_histogram, aggregate_seeds, compliance_pct, median, pct, per_bandwidth_compliance, percentile,
    MetricsRecord, SeedSummary, TimingRecord, SCHEMA_VERSION,
};
use super::scenario::ScenarioSpec;
use crate::config_space::{ExecutionMode, ImuRate, QualityLevel};
use crate::dqn::{DqnAgent, Transition};
use crate::energy::{lifetime_projection, BatteryState};
use crate::env::{objective_value, stream_rng, FrameRecord, XrEnv, AGENT_STREAM};
use crate::error::{Result, XrError};
use crate::policy::{GreedyPolicy, Policy, PolicyKind, RlPolicy, StaticPolicy, ThresholdPolicy};

/// One row of `decisions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub t: f64,
    pub action: usize,
    pub q: QualityLevel,
    pub r: ImuRate,
    pub m: ExecutionMode,
    pub bandwidth: f64,
    pub rtt: f64,
    pub mtp_mean: f64,
    pub v_mean: f64,
    pub power: f64,
    pub soc: f64,
    pub reward: f64,
    pub loss: Option<f64>,
    pub epsilon: Option<f64>,
    pub queue_depth: usize,
    pub delivered: usize,
    pub dropped: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub metrics: MetricsRecord,
    pub timing: TimingRecord,
    pub decisions: Vec<DecisionRow>,
    pub frames: Vec<FrameRecord>,
}

pub fn make_policy(spec: &ScenarioSpec, seed: u64) -> Result<Box<dyn Policy + Send>> {
    Ok(match spec.policy {
        PolicyKind::Local => Box::new(StaticPolicy::local()),
        PolicyKind::Offload => Box::new(StaticPolicy::offload()),
        PolicyKind::Threshold => Box::new(ThresholdPolicy),
        PolicyKind::Greedy => Box::new(GreedyPolicy {
            include_queue: spec.greedy_include_queue,
        }),
        PolicyKind::Rl => Box::new(RlPolicy {
            agent: DqnAgent::new(spec.dqn.clone(), stream_rng(seed, AGENT_STREAM))?,
        }),
    })
}

/// Runs one seed of `spec` to completion.
pub fn run_experiment(spec: &ScenarioSpec, seed: u64) -> Result<RunResult> {
    let mut policy = make_policy(spec, seed)?;
    run_with_policy(spec, seed, policy.as_mut())
}

pub fn run_with_policy(spec: &ScenarioSpec, seed: u64, policy: &mut dyn Policy) -> Result<RunResult> {
    let cfg = spec.env_config()?;
    let mut env = XrEnv::new(cfg.clone(), seed)?;
    let wall = Instant::now();
    let mut decisions = Vec::new();
    let mut frames = Vec::new();
    let mut latencies_us = Vec::new();
    let mut rewards = Vec::new();
    while !env.is_done() {
        let obs = env.observe();
        let epsilon = policy.epsilon();
        let t0 = Instant::now();
        let action = policy.decide(&env)?;
        latencies_us.push(t0.elapsed().as_secs_f64() * 1e6);
        let out = env.step(action)?;
        let loss = policy.feedback(Transition {
            state: obs,
            action,
            reward: out.reward,
            next_state: out.obs,
            done: out.depleted,
        });
        let c = action.config();
        let i = &out.info;
        decisions.push(DecisionRow {
            t: i.t_start,
            action: action.index(),
            q: c.quality,
            r: c.imu,
            m: c.mode,
            bandwidth: i.bandwidth_mbps,
            rtt: i.rtt_ms,
            mtp_mean: i.mean_mtp_ms,
            v_mean: i.mean_violation,
            power: i.power_w,
            soc: i.soc,
            reward: out.reward,
            loss,
            epsilon,
            queue_depth: i.queue_depth,
            delivered: i.delivered,
            dropped: i.dropped,
        });
        rewards.push(out.reward);
        frames.extend(out.frames);
    }

    let survived = env.survived_s();
    let energy = env.energy_j();
    let avg_power = if survived > 0.0 { energy / survived } else { 0.0 };
    let full = BatteryState {
        soc: 100.0,
        capacity_wh: cfg.battery.capacity_wh,
        drain_accel: cfg.battery.drain_accel,
    };
    let lifetime_min = lifetime_projection(&full, avg_power).map(|h| h * 60.0).unwrap_or(f64::INFINITY);
    let n = decisions.len() as u64;
    let n_local = decisions.iter().filter(|d| d.m == ExecutionMode::Local).count() as u64;
    let compliance = compliance_pct(&frames);
    let compliant = frames.iter().filter(|f| f.compliant).count() as u64;
    let metrics = MetricsRecord {
        schema_version: SCHEMA_VERSION,
        scenario: spec.label(),
        policy: spec.policy,
        seed,
        decisions: n,
        frames_delivered: frames.len() as u64,
        frames_compliant: compliant,
        frames_dropped: env.queue().dropped(),
        compliance_pct: compliance,
        avg_power_w: avg_power,
        projected_lifetime_min: lifetime_min,
        survived_s: survived,
        depleted: env.is_depleted(),
        final_soc: env.battery().soc,
        energy_j: energy,
        local_fraction_pct: pct(n_local, n),
        offload_fraction_pct: pct(n - n_local, n),
        compliance_per_watt: if avg_power > 0.0 { compliance / avg_power } else { 0.0 },
        objective: objective_value(survived, decisions.iter().map(|d| d.v_mean), cfg.reward.lambda),
        mean_reward: if rewards.is_empty() { 0.0 } else { rewards.iter().sum::<f64>() / rewards.len() as f64 },
        per_bandwidth: per_bandwidth_compliance(&frames, &cfg.profile),
        action_histogram: action_histogram(decisions.iter().map(|d| d.action)),
    };
    let timing = TimingRecord {
        decision_latency_median_us: if latencies_us.is_empty() { 0.0 } else { median(&latencies_us) },
        decision_latency_p95_us: percentile(&latencies_us, 95.0),
        wall_time_s: wall.elapsed().as_secs_f64(),
    };
    Ok(RunResult {
        metrics,
        timing,
        decisions,
        frames,
    })
}

/// Runs every seed of `spec` in parallel, returned in seed order.
pub fn run_seeds(spec: &ScenarioSpec) -> Result<Vec<RunResult>> {
    spec.validate()?;
    spec.seeds.par_iter().map(|&s| run_experiment(spec, s)).collect()
}

pub fn seed_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("seed-{seed}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| XrError::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| XrError::io(path, e))
}

/// Writes traces and metrics for one run into `dir`.
pub fn write_run(dir: &Path, run: &RunResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| XrError::io(dir, e))?;
    write_csv(&dir.join("decisions.csv"), &run.decisions)?;
    write_csv(&dir.join("frames.csv"), &run.frames)?;
    write_json(&dir.join("metrics.json"), &run.metrics)?;
    write_json(&dir.join("timing.json"), &run.timing)
}

pub fn write_summary(dir: &Path, summary: &SeedSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| XrError::io(dir, e))?;
    write_json(&dir.join("summary.json"), summary)
}

pub fn read_metrics(path: &Path) -> Result<MetricsRecord> {
    let text = fs::read_to_string(path).map_err(|e| XrError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_decisions(path: &Path) -> Result<Vec<DecisionRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn read_frames(path: &Path) -> Result<Vec<FrameRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Runs all seeds, writes per-seed directories plus `scenario.toml` and
/// `summary.json` under `out`, and returns the summary.
pub fn run_scenario(spec: &ScenarioSpec, out: Option<&Path>) -> Result<(Vec<RunResult>, SeedSummary)> {
    let runs = run_seeds(spec)?;
    let records: Vec<MetricsRecord> = runs.iter().map(|r| r.metrics.clone()).collect();
    let summary = aggregate_seeds(&records)?;
    if let Some(root) = out {
        for r in &runs {
            write_run(&seed_dir(root, r.metrics.seed), r)?;
        }
        let path = root.join("scenario.toml");
        fs::write(&path, spec.to_toml()).map_err(|e| XrError::io(&path, e))?;
        write_summary(root, &summary)?;
    }
    Ok((runs, summary))
}
