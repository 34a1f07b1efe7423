//! Motion-to-photon latency for local and offloaded execution.
//!
//! Local frames pay on-device processing plus a fixed capture/render
//! overhead. Offloaded frames go through a FIFO uplink queue that serializes
//! payload at the current bandwidth; a frame's MTP counts from its capture,
//! so frames that waited behind a congested backlog stay late even after
//! bandwidth recovers.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::config_space::{ExecutionConfig, ExecutionMode, ImuRate, QualityLevel};
use crate::error::{Result, XrError};

/// Per-IMU-rate multiplier on local processing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateFactor {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl Default for RateFactor {
    fn default() -> Self {
        Self {
            high: 1.0,
            medium: 0.85,
            low: 0.7,
        }
    }
}

impl RateFactor {
    pub fn get(&self, r: ImuRate) -> f64 {
        match r {
            ImuRate::High => self.high,
            ImuRate::Medium => self.medium,
            ImuRate::Low => self.low,
        }
    }
}

/// Processing times at HIGH quality, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcTimeTable {
    pub t0_local_ms: f64,
    pub t0_encode_ms: f64,
    pub t_server_ms: f64,
    pub t_decode_ms: f64,
    /// Capture + render overhead added to every local frame.
    pub local_overhead_ms: f64,
    pub rate_factor: RateFactor,
}

impl Default for ProcTimeTable {
    fn default() -> Self {
        Self {
            t0_local_ms: 29.0,
            t0_encode_ms: 10.0,
            t_server_ms: 8.0,
            t_decode_ms: 1.0,
            local_overhead_ms: 1.0,
            rate_factor: RateFactor::default(),
        }
    }
}

impl ProcTimeTable {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("latency.t0_local_ms", self.t0_local_ms),
            ("latency.t0_encode_ms", self.t0_encode_ms),
            ("latency.t_server_ms", self.t_server_ms),
            ("latency.t_decode_ms", self.t_decode_ms),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(XrError::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.local_overhead_ms >= 0.0) {
            return Err(XrError::param("latency.local_overhead_ms", "must be non-negative"));
        }
        let rf = self.rate_factor;
        if !(rf.high >= rf.medium && rf.medium >= rf.low && rf.low > 0.0) {
            return Err(XrError::param(
                "latency.rate_factor",
                "must satisfy high >= medium >= low > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameSizeModel {
    /// Uplink payload at HIGH quality, in megabits.
    pub d_base_mbit: f64,
}

impl Default for FrameSizeModel {
    fn default() -> Self {
        // 752x480 stereo, 8-bit grayscale
        Self { d_base_mbit: 5.8 }
    }
}

impl FrameSizeModel {
    pub fn payload_mbit(&self, q: QualityLevel) -> f64 {
        self.d_base_mbit * q.scale()
    }
}

/// Uplink serialization delay plus RTT, in milliseconds.
pub fn net_delay(frame: &FrameSizeModel, q: QualityLevel, bandwidth_mbps: f64, rtt_ms: f64) -> Result<f64> {
    if !(bandwidth_mbps > 0.0) {
        return Err(XrError::param("bandwidth", format!("must be positive, got {bandwidth_mbps}")));
    }
    if !(rtt_ms >= 0.0) {
        return Err(XrError::param("rtt", format!("must be non-negative, got {rtt_ms}")));
    }
    Ok(frame.payload_mbit(q) / bandwidth_mbps * 1000.0 + rtt_ms)
}

/// Client-side processing time for one frame.
///
/// Offloaded configurations only pay the encode/stream cost on the client;
/// the IMU rate affects local processing only.
pub fn proc_time(cfg: ExecutionConfig, table: &ProcTimeTable) -> f64 {
    let phi = cfg.quality.scale();
    match cfg.mode {
        ExecutionMode::Local => table.t0_local_ms * phi * table.rate_factor.get(cfg.imu),
        ExecutionMode::Offload => table.t0_encode_ms * phi,
    }
}

pub fn mtp_local(cfg: ExecutionConfig, table: &ProcTimeTable) -> Result<f64> {
    if cfg.mode != ExecutionMode::Local {
        return Err(XrError::param("mode", "mtp_local called with an OFFLOAD configuration"));
    }
    Ok(proc_time(cfg, table) + table.local_overhead_ms)
}

/// Everything an offloaded frame pays besides uplink waiting/serialization.
pub fn offload_fixed_ms(q: QualityLevel, rtt_ms: f64, table: &ProcTimeTable) -> f64 {
    let phi = q.scale();
    rtt_ms + table.t_server_ms * phi + table.t_decode_ms + table.t0_encode_ms * phi
}

/// Fractional excess of `mtp` over `tau`, clamped at zero.
pub fn violation(mtp_ms: f64, tau_ms: f64) -> f64 {
    debug_assert!(tau_ms > 0.0);
    ((mtp_ms - tau_ms) / tau_ms).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueuedFrame {
    pub t_capture: f64,
    pub quality: QualityLevel,
    pub payload_mbit: f64,
    pub remaining_mbit: f64,
    /// Additional latency attached at capture (reconfiguration transient).
    pub extra_ms: f64,
}

impl QueuedFrame {
    fn in_transmission(&self) -> bool {
        self.remaining_mbit < self.payload_mbit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delivery {
    pub t_capture: f64,
    pub t_complete: f64,
    pub mtp_ms: f64,
    pub quality: QualityLevel,
}

/// Bounded FIFO of frames awaiting uplink transmission.
///
/// When full, the oldest frame that has not started transmitting is dropped;
/// a frame already on the wire is allowed to finish.
#[derive(Debug, Clone)]
pub struct UplinkQueue {
    pending: VecDeque<QueuedFrame>,
    max_depth: usize,
    enqueued: u64,
    delivered: u64,
    dropped: u64,
}

impl UplinkQueue {
    pub fn new(max_depth: usize) -> Self {
        assert!(max_depth > 0, "max_depth must be > 0");
        Self {
            pending: VecDeque::with_capacity(max_depth),
            max_depth,
            enqueued: 0,
            delivered: 0,
            dropped: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.pending.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn enqueued(&self) -> u64 {
        self.enqueued
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn pending(&self) -> impl Iterator<Item = &QueuedFrame> {
        self.pending.iter()
    }

    pub fn oldest_capture(&self) -> Option<f64> {
        self.pending.front().map(|f| f.t_capture)
    }

    /// Appends a frame captured at `t_capture`; returns the dropped frame if the
    /// queue was full.
    pub fn enqueue_frame(
        &mut self,
        t_capture: f64,
        quality: QualityLevel,
        frame: &FrameSizeModel,
        extra_ms: f64,
    ) -> Option<QueuedFrame> {
        if let Some(tail) = self.pending.back() {
            assert!(
                t_capture > tail.t_capture,
                "capture timestamps must increase ({} after {})",
                t_capture,
                tail.t_capture
            );
        }
        let mut evicted = None;
        if self.pending.len() == self.max_depth {
            let victim = match self.pending.front() {
                Some(head) if head.in_transmission() && self.pending.len() > 1 => 1,
                _ => 0,
            };
            evicted = self.pending.remove(victim);
            self.dropped += 1;
        }
        let payload = frame.payload_mbit(quality);
        self.pending.push_back(QueuedFrame {
            t_capture,
            quality,
            payload_mbit: payload,
            remaining_mbit: payload,
            extra_ms,
        });
        self.enqueued += 1;
        evicted
    }

    /// Transmits at `bandwidth_mbps` from `start_s` for `dt_s` seconds.
    /// Partially sent frames carry over to the next call.
    pub fn drain_step(
        &mut self,
        start_s: f64,
        dt_s: f64,
        bandwidth_mbps: f64,
        rtt_ms: f64,
        table: &ProcTimeTable,
    ) -> Vec<Delivery> {
        assert!(dt_s > 0.0, "dt must be positive");
        assert!(bandwidth_mbps > 0.0, "bandwidth must be positive");
        let mut budget = bandwidth_mbps * dt_s;
        let mut elapsed = 0.0;
        let mut out = Vec::new();
        while let Some(head) = self.pending.front_mut() {
            if head.remaining_mbit <= budget {
                budget -= head.remaining_mbit;
                elapsed += head.remaining_mbit / bandwidth_mbps;
                let t_complete = start_s + elapsed;
                let mtp_ms = (t_complete - head.t_capture) * 1000.0
                    + offload_fixed_ms(head.quality, rtt_ms, table)
                    + head.extra_ms;
                out.push(Delivery {
                    t_capture: head.t_capture,
                    t_complete,
                    mtp_ms,
                    quality: head.quality,
                });
                self.pending.pop_front();
                self.delivered += 1;
            } else {
                head.remaining_mbit -= budget;
                break;
            }
        }
        out
    }

    /// Discards everything pending; the discarded frames count as drops.
    pub fn flush(&mut self) -> usize {
        let n = self.pending.len();
        self.pending.clear();
        self.dropped += n as u64;
        n
    }
}
