//! Bandwidth profiles and round-trip-time sampling.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, XrError};

/// Default cyclic levels, in the order they are visited.
pub const DEFAULT_LEVELS_MBPS: [f64; 5] = [1000.0, 500.0, 100.0, 10.0, 1.0];
pub const DEFAULT_DWELL_S: f64 = 60.0;

// Absorbs representation error when `t` lands exactly on a segment boundary.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub bandwidth_mbps: f64,
    pub dwell_s: f64,
}

/// Piecewise-constant bandwidth that repeats with period [`cycle_length`](Self::cycle_length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthProfile {
    segments: Vec<Segment>,
}

impl BandwidthProfile {
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let p = Self { segments };
        p.validate()?;
        Ok(p)
    }

    /// Re-checks invariants; needed after deserializing.
    pub fn validate(&self) -> Result<()> {
        let segments = &self.segments;
        if segments.is_empty() {
            return Err(XrError::param("profile", "at least one segment is required"));
        }
        for s in segments {
            if !(s.bandwidth_mbps.is_finite() && s.bandwidth_mbps > 0.0) {
                return Err(XrError::param(
                    "bandwidth_mbps",
                    format!("must be positive, got {}", s.bandwidth_mbps),
                ));
            }
            if !(s.dwell_s.is_finite() && s.dwell_s > 0.0) {
                return Err(XrError::param("dwell_s", format!("must be positive, got {}", s.dwell_s)));
            }
        }
        Ok(())
    }

    /// Equal dwell time at every level.
    pub fn cyclic(levels: &[f64], dwell_s: f64) -> Result<Self> {
        Self::from_segments(
            levels
                .iter()
                .map(|&bandwidth_mbps| Segment { bandwidth_mbps, dwell_s })
                .collect(),
        )
    }

    /// 1000 → 500 → 100 → 10 → 1 Mbps, 60 s each.
    pub fn variable() -> Self {
        Self::cyclic(&DEFAULT_LEVELS_MBPS, DEFAULT_DWELL_S).expect("default profile is valid")
    }

    pub fn stable(bandwidth_mbps: f64) -> Result<Self> {
        // The dwell is arbitrary for a single level.
        Self::cyclic(&[bandwidth_mbps], DEFAULT_DWELL_S)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn cycle_length(&self) -> f64 {
        self.segments.iter().map(|s| s.dwell_s).sum()
    }

    /// Distinct levels in first-visit order.
    pub fn levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.bandwidth_mbps) {
                out.push(s.bandwidth_mbps);
            }
        }
        out
    }

    pub fn is_stable(&self) -> bool {
        self.levels().len() == 1
    }

    /// Index of the segment active at `t`.
    pub fn segment_index_at(&self, t: f64) -> usize {
        if self.segments.len() == 1 {
            return 0;
        }
        let cycle = self.cycle_length();
        let mut phase = (t.max(0.0) + BOUNDARY_EPS) % cycle;
        for (i, s) in self.segments.iter().enumerate() {
            if phase < s.dwell_s {
                return i;
            }
            phase -= s.dwell_s;
        }
        self.segments.len() - 1
    }

    pub fn bandwidth_at(&self, t: f64) -> f64 {
        self.segments[self.segment_index_at(t)].bandwidth_mbps
    }

    /// Parses `<bandwidth_mbps> <dwell_s>` pairs, one per line. Commas also
    /// separate fields; `#` starts a comment.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut segments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(format!("line {}: expected `<bandwidth_mbps> <dwell_s>`", lineno + 1));
            }
            let num = |f: &str| {
                f.parse::<f64>()
                    .map_err(|e| format!("line {}: `{f}`: {e}", lineno + 1))
            };
            segments.push(Segment {
                bandwidth_mbps: num(fields[0])?,
                dwell_s: num(fields[1])?,
            });
        }
        Self::from_segments(segments).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| XrError::io(path, e))?;
        Self::parse(&text).map_err(|reason| XrError::Parse {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# bandwidth_mbps dwell_s\n");
        for s in &self.segments {
            out.push_str(&format!("{} {}\n", s.bandwidth_mbps, s.dwell_s));
        }
        out
    }
}

impl Default for BandwidthProfile {
    fn default() -> Self {
        Self::variable()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterDistribution {
    None,
    LogNormal,
}

/// RTT = base + jitter, where jitter is `jitter_scale_ms · exp(σ·Z)` for the
/// lognormal case, so `jitter_scale_ms` is the jitter median.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RttModel {
    pub base_ms: f64,
    pub jitter_scale_ms: f64,
    pub jitter_sigma: f64,
    pub distribution: JitterDistribution,
}

impl Default for RttModel {
    fn default() -> Self {
        Self {
            base_ms: 4.0,
            jitter_scale_ms: 0.7,
            jitter_sigma: 0.8,
            distribution: JitterDistribution::LogNormal,
        }
    }
}

impl RttModel {
    pub fn fixed(base_ms: f64) -> Self {
        Self {
            base_ms,
            jitter_scale_ms: 0.0,
            jitter_sigma: 0.0,
            distribution: JitterDistribution::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_ms.is_finite() && self.base_ms > 0.0) {
            return Err(XrError::param("rtt.base_ms", "must be positive"));
        }
        if self.distribution == JitterDistribution::LogNormal
            && !(self.jitter_scale_ms >= 0.0 && self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite())
        {
            return Err(XrError::param("rtt.jitter", "scale and sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn mean_ms(&self) -> f64 {
        match self.distribution {
            JitterDistribution::None => self.base_ms,
            JitterDistribution::LogNormal => {
                self.base_ms + self.jitter_scale_ms * (0.5 * self.jitter_sigma * self.jitter_sigma).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.distribution {
            JitterDistribution::None => self.base_ms,
            JitterDistribution::LogNormal => {
                if self.jitter_scale_ms == 0.0 {
                    return self.base_ms;
                }
                let z = LogNormal::new(0.0, self.jitter_sigma).expect("sigma validated");
                self.base_ms + self.jitter_scale_ms * z.sample(rng)
            }
        }
    }
}

/// Owns the generator so RTT sequences are reproducible per seed.
#[derive(Debug, Clone)]
pub struct RttSampler {
    model: RttModel,
    rng: ChaCha8Rng,
}

impl RttSampler {
    pub fn new(model: RttModel, rng: ChaCha8Rng) -> Self {
        Self { model, rng }
    }

    pub fn model(&self) -> &RttModel {
        &self.model
    }

    pub fn sample(&mut self) -> f64 {
        self.model.sample(&mut self.rng)
    }
}

pub fn rtt_sample(model: &RttModel, rng: &mut ChaCha8Rng) -> f64 {
    model.sample(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkCondition {
    pub bandwidth_mbps: f64,
    pub rtt_ms: f64,
    pub timestamp_s: f64,
}
