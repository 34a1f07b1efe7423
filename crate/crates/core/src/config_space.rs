//! Discrete execution-configuration space.
//!
//! An execution configuration is the `(image quality, IMU rate, mode)` tuple
//! held fixed for one decision interval. The 18 configurations are addressed
//! by an [`ActionId`]; the numbering iterates IMU rate outermost
//! (HIGH, MEDIUM, LOW), image quality next (LOW, MEDIUM, HIGH) and execution
//! mode innermost (LOCAL, OFFLOAD).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, XrError};

/// Number of distinct execution configurations.
pub const NUM_ACTIONS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QualityLevel {
    Low,
    Medium,
    High,
}

impl QualityLevel {
    pub const ALL: [QualityLevel; 3] = [QualityLevel::Low, QualityLevel::Medium, QualityLevel::High];

    /// Frame resolution as `(width, height)` in pixels.
    pub fn resolution(self) -> (u32, u32) {
        match self {
            QualityLevel::Low => (376, 240),
            QualityLevel::Medium => (564, 360),
            QualityLevel::High => (752, 480),
        }
    }

    pub fn pixel_count(self) -> u32 {
        let (w, h) = self.resolution();
        w * h
    }

    /// Relative data volume φ(q): pixel count normalized to the HIGH level.
    pub fn scale(self) -> f64 {
        f64::from(self.pixel_count()) / f64::from(QualityLevel::High.pixel_count())
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Free-function form of [`QualityLevel::scale`].
pub fn quality_scale(q: QualityLevel) -> f64 {
    q.scale()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ImuRate {
    Low,
    Medium,
    High,
}

impl ImuRate {
    pub const ALL: [ImuRate; 3] = [ImuRate::Low, ImuRate::Medium, ImuRate::High];

    pub fn hz(self) -> u32 {
        match self {
            ImuRate::Low => 100,
            ImuRate::Medium => 150,
            ImuRate::High => 200,
        }
    }

    // Position in the action table (HIGH first).
    fn table_index(self) -> usize {
        match self {
            ImuRate::High => 0,
            ImuRate::Medium => 1,
            ImuRate::Low => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExecutionMode {
    Local,
    Offload,
}

impl ExecutionMode {
    /// Numeric mode flag: 0 for LOCAL, 1 for OFFLOAD.
    pub fn flag(self) -> u8 {
        match self {
            ExecutionMode::Local => 0,
            ExecutionMode::Offload => 1,
        }
    }

    pub fn is_local(self) -> bool {
        self == ExecutionMode::Local
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExecutionConfig {
    pub quality: QualityLevel,
    pub imu: ImuRate,
    pub mode: ExecutionMode,
}

impl ExecutionConfig {
    pub fn new(quality: QualityLevel, imu: ImuRate, mode: ExecutionMode) -> Self {
        Self { quality, imu, mode }
    }

    pub fn action(self) -> ActionId {
        encode_action(self)
    }
}

impl fmt::Display for ExecutionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IMU={:?} Q={:?} {:?}", self.imu, self.quality, self.mode)
    }
}

/// Index into the 18-entry action table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ActionId(u8);

impl ActionId {
    pub fn new(id: usize) -> Result<Self> {
        if id < NUM_ACTIONS {
            Ok(ActionId(id as u8))
        } else {
            Err(XrError::InvalidAction(id))
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn all() -> impl Iterator<Item = ActionId> {
        (0..NUM_ACTIONS as u8).map(ActionId)
    }

    pub fn config(self) -> ExecutionConfig {
        decode_action(self)
    }
}

impl TryFrom<usize> for ActionId {
    type Error = XrError;

    fn try_from(id: usize) -> Result<Self> {
        ActionId::new(id)
    }
}

impl From<ActionId> for usize {
    fn from(a: ActionId) -> usize {
        a.index()
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

const IMU_BY_TABLE: [ImuRate; 3] = [ImuRate::High, ImuRate::Medium, ImuRate::Low];
const MODE_BY_TABLE: [ExecutionMode; 2] = [ExecutionMode::Local, ExecutionMode::Offload];

pub fn decode_action(id: ActionId) -> ExecutionConfig {
    let i = id.index();
    ExecutionConfig {
        imu: IMU_BY_TABLE[i / 6],
        quality: QualityLevel::ALL[(i / 2) % 3],
        mode: MODE_BY_TABLE[i % 2],
    }
}

pub fn encode_action(cfg: ExecutionConfig) -> ActionId {
    let id = cfg.imu.table_index() * 6 + cfg.quality.index() * 2 + usize::from(cfg.mode.flag());
    ActionId(id as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExecutionMode::*;

    fn cfg(imu: ImuRate, q: QualityLevel, m: ExecutionMode) -> ExecutionConfig {
        ExecutionConfig::new(q, imu, m)
    }

    #[test]
    fn decode_matches_table_rows() {
        let a = |i| ActionId::new(i).unwrap();
        assert_eq!(decode_action(a(0)), cfg(ImuRate::High, QualityLevel::Low, Local));
        assert_eq!(decode_action(a(12)), cfg(ImuRate::Low, QualityLevel::Low, Local));
        assert_eq!(decode_action(a(17)), cfg(ImuRate::Low, QualityLevel::High, Offload));
        assert_eq!(decode_action(a(4)), cfg(ImuRate::High, QualityLevel::High, Local));
        assert_eq!(decode_action(a(9)), cfg(ImuRate::Medium, QualityLevel::Medium, Offload));
    }

    #[test]
    fn encode_matches_table_rows() {
        assert_eq!(encode_action(cfg(ImuRate::High, QualityLevel::High, Offload)).index(), 5);
        assert_eq!(encode_action(cfg(ImuRate::Medium, QualityLevel::Medium, Local)).index(), 8);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(matches!(ActionId::new(18), Err(XrError::InvalidAction(18))));
        assert!(serde_json::from_str::<ActionId>("25").is_err());
    }

    #[test]
    fn bijection_over_all_ids_and_tuples() {
        let mut seen = std::collections::HashSet::new();
        for id in ActionId::all() {
            let c = decode_action(id);
            assert_eq!(encode_action(c), id);
            assert!(seen.insert(c));
        }
        for q in QualityLevel::ALL {
            for r in ImuRate::ALL {
                for m in [Local, Offload] {
                    let c = cfg(r, q, m);
                    assert_eq!(decode_action(encode_action(c)), c);
                }
            }
        }
        assert_eq!(seen.len(), NUM_ACTIONS);
    }

    #[test]
    fn quality_scale_is_pixel_ratio() {
        assert_eq!(quality_scale(QualityLevel::High), 1.0);
        // (564*360)/(752*480) and (376*240)/(752*480), by hand
        assert!((quality_scale(QualityLevel::Medium) - 0.5625).abs() < 1e-15);
        assert!((quality_scale(QualityLevel::Low) - 0.25).abs() < 1e-15);
        assert!(quality_scale(QualityLevel::Low) < quality_scale(QualityLevel::Medium));
    }

    #[test]
    fn imu_rates() {
        assert_eq!(ImuRate::High.hz(), 200);
        assert_eq!(ImuRate::Medium.hz(), 150);
        assert_eq!(ImuRate::Low.hz(), 100);
    }
}
