use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config_space::NUM_ACTIONS;
use crate::env::FrameRecord;
use crate::error::{Result, XrError};
use crate::network::BandwidthProfile;
use crate::policy::PolicyKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthBucket {
    pub bandwidth_mbps: f64,
    pub frames: u64,
    pub compliant: u64,
    pub compliance_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub schema_version: u32,
    pub scenario: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub decisions: u64,
    pub frames_delivered: u64,
    pub frames_compliant: u64,
    pub frames_dropped: u64,
    pub compliance_pct: f64,
    pub avg_power_w: f64,
    pub projected_lifetime_min: f64,
    pub survived_s: f64,
    pub depleted: bool,
    pub final_soc: f64,
    pub energy_j: f64,
    pub local_fraction_pct: f64,
    pub offload_fraction_pct: f64,
    pub compliance_per_watt: f64,
    pub objective: f64,
    pub mean_reward: f64,
    pub per_bandwidth: Vec<BandwidthBucket>,
    pub action_histogram: Vec<u64>,
}

impl MetricsRecord {
    /// Scalar metrics by name, in a fixed order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("compliance_pct", self.compliance_pct),
            ("avg_power_w", self.avg_power_w),
            ("projected_lifetime_min", self.projected_lifetime_min),
            ("survived_s", self.survived_s),
            ("final_soc", self.final_soc),
            ("local_fraction_pct", self.local_fraction_pct),
            ("offload_fraction_pct", self.offload_fraction_pct),
            ("compliance_per_watt", self.compliance_per_watt),
            ("objective", self.objective),
            ("mean_reward", self.mean_reward),
            ("frames_delivered", self.frames_delivered as f64),
            ("frames_dropped", self.frames_dropped as f64),
            ("decisions", self.decisions as f64),
        ]
    }

    pub fn bucket(&self, bandwidth_mbps: f64) -> Option<&BandwidthBucket> {
        self.per_bandwidth.iter().find(|b| b.bandwidth_mbps == bandwidth_mbps)
    }
}

/// Wall-clock measurements; kept apart from metrics so those stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub decision_latency_median_us: f64,
    pub decision_latency_p95_us: f64,
    pub wall_time_s: f64,
}

pub fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Delivered-frame compliance, in percent.
pub fn compliance_pct(frames: &[FrameRecord]) -> f64 {
    let ok = frames.iter().filter(|f| f.compliant).count() as u64;
    pct(ok, frames.len() as u64)
}

/// Frames grouped by the bandwidth level in effect at capture time, ordered
/// by the profile's first visit to each level.
pub fn per_bandwidth_compliance(frames: &[FrameRecord], profile: &BandwidthProfile) -> Vec<BandwidthBucket> {
    let levels = profile.levels();
    let mut frames_at = vec![0u64; levels.len()];
    let mut ok_at = vec![0u64; levels.len()];
    for f in frames {
        let bw = profile.bandwidth_at(f.t_capture);
        let i = levels.iter().position(|&l| l == bw).expect("level from profile");
        frames_at[i] += 1;
        ok_at[i] += u64::from(f.compliant);
    }
    levels
        .into_iter()
        .enumerate()
        .map(|(i, bw)| BandwidthBucket {
            bandwidth_mbps: bw,
            frames: frames_at[i],
            compliant: ok_at[i],
            compliance_pct: pct(ok_at[i], frames_at[i]),
        })
        .collect()
}

/// Trailing-window mean of the LOCAL indicator. The first `window - 1`
/// entries average over the decisions seen so far.
pub fn mode_fraction_series(is_local: &[bool], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    let mut out = Vec::with_capacity(is_local.len());
    let mut count = 0usize;
    for i in 0..is_local.len() {
        count += usize::from(is_local[i]);
        if i >= window {
            count -= usize::from(is_local[i - window]);
        }
        out.push(count as f64 / (i + 1).min(window) as f64);
    }
    out
}

pub fn action_histogram(actions: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut h = vec![0u64; NUM_ACTIONS];
    for a in actions {
        h[a] += 1;
    }
    h
}

pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Nearest-rank percentile, `p` in `[0, 100]`.
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        Self {
            median: median(xs),
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub policy: PolicyKind,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, Stat>,
    /// Per-level compliance statistics, keyed by bandwidth in Mbps.
    pub per_bandwidth: Vec<(f64, Stat)>,
}

impl SeedSummary {
    pub fn median(&self, metric: &str) -> f64 {
        self.metrics[metric].median
    }
}

/// Elementwise median, min and max across seeds.
pub fn aggregate_seeds(records: &[MetricsRecord]) -> Result<SeedSummary> {
    let first = records
        .first()
        .ok_or_else(|| XrError::InvalidScenario("no records to aggregate".into()))?;
    let mut metrics = BTreeMap::new();
    for (i, (name, _)) in first.scalars().into_iter().enumerate() {
        let xs: Vec<f64> = records.iter().map(|r| r.scalars()[i].1).collect();
        metrics.insert(name.to_string(), Stat::of(&xs));
    }
    let per_bandwidth = first
        .per_bandwidth
        .iter()
        .map(|b| {
            let xs: Vec<f64> = records
                .iter()
                .filter_map(|r| r.bucket(b.bandwidth_mbps).map(|x| x.compliance_pct))
                .collect();
            (b.bandwidth_mbps, Stat::of(&xs))
        })
        .collect();
    Ok(SeedSummary {
        schema_version: SCHEMA_VERSION,
        scenario: first.scenario.clone(),
        policy: first.policy,
        seeds: records.iter().map(|r| r.seed).collect(),
        metrics,
        per_bandwidth,
    })
}
