//! Force calibration and threshold-based binary contact detection: the real
//! twin's contact signal path.
//!
//! Sensors carry static offsets, so each episode starts with a stationary
//! calibration window whose mean reading is subtracted from everything that
//! follows. Contact is then a threshold rule on the calibrated force; the
//! default is the L1-sum rule (|Fx| + |Fy| + |Fz| > 0.3 N), with a
//! force-magnitude variant behind a config switch.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TactileError {
    #[error("calibration window too short: {got:.3} s of readings, need {need:.3} s")]
    WindowTooShort { got: f64, need: f64 },
    #[error("invalid tactile config: {0}")]
    InvalidConfig(String),
    #[error("non-finite force reading")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, TactileError>;

/// Aggregated 3-D contact force at one fingertip, newtons.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FingerForce {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FingerForce {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn l1(&self) -> f64 {
        self.x.abs() + self.y.abs() + self.z.abs()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn sub(&self, other: &FingerForce) -> FingerForce {
        FingerForce::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn add(&self, other: &FingerForce) -> FingerForce {
        FingerForce::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Which calibrated-force statistic the threshold applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContactRule {
    /// |Fx| + |Fy| + |Fz| > threshold (the fully specified default).
    L1Sum,
    /// ||F||_2 > threshold; stands in for the per-fingertip normal-force
    /// rule, since only the aggregate force vector is modeled.
    ForceNorm,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TactileConfig {
    /// Stationary window used for offset calibration, seconds.
    pub calibration_window_s: f64,
    /// Contact threshold, newtons.
    pub threshold_newtons: f64,
    /// Per-axis sensor noise scale, newtons.
    pub sensor_noise: f64,
    pub rule: ContactRule,
}

impl Default for TactileConfig {
    fn default() -> Self {
        Self {
            calibration_window_s: 3.0,
            threshold_newtons: 0.3,
            sensor_noise: 0.05,
            rule: ContactRule::L1Sum,
        }
    }
}

impl TactileConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.calibration_window_s > 0.0) {
            return Err(TactileError::InvalidConfig(format!(
                "calibration window must be positive, got {}",
                self.calibration_window_s
            )));
        }
        if !(self.threshold_newtons > 0.0) {
            return Err(TactileError::InvalidConfig(format!(
                "threshold must be positive, got {}",
                self.threshold_newtons
            )));
        }
        if self.sensor_noise < 0.0 {
            return Err(TactileError::InvalidConfig("negative sensor noise".into()));
        }
        Ok(())
    }
}

/// Static per-finger force offsets estimated from a stationary window.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOffset {
    pub per_finger: Vec<FingerForce>,
}

impl CalibrationOffset {
    /// A no-op calibration for the given finger count.
    pub fn zero(fingers: usize) -> Self {
        Self { per_finger: vec![FingerForce::zero(); fingers] }
    }
}

/// Componentwise mean force over a stationary window sampled at `dt` seconds.
pub fn calibrate_offset(readings: &[FingerForce], dt: f64, cfg: &TactileConfig) -> Result<FingerForce> {
    cfg.validate()?;
    let span = readings.len() as f64 * dt;
    if span < cfg.calibration_window_s {
        return Err(TactileError::WindowTooShort { got: span, need: cfg.calibration_window_s });
    }
    let mut sum = FingerForce::zero();
    for r in readings {
        if !r.is_finite() {
            return Err(TactileError::NonFinite);
        }
        sum = sum.add(r);
    }
    let n = readings.len() as f64;
    Ok(FingerForce::new(sum.x / n, sum.y / n, sum.z / n))
}

/// Calibrate every finger from its own stationary readings.
pub fn calibrate_offsets(
    per_finger: &[Vec<FingerForce>],
    dt: f64,
    cfg: &TactileConfig,
) -> Result<CalibrationOffset> {
    let per_finger = per_finger
        .iter()
        .map(|readings| calibrate_offset(readings, dt, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationOffset { per_finger })
}

/// Per-fingertip contact flag: subtract the offset, then apply the threshold
/// rule to the calibrated force.
pub fn detect_contact(force: &FingerForce, offset: &FingerForce, cfg: &TactileConfig) -> bool {
    let calibrated = force.sub(offset);
    let stat = match cfg.rule {
        ContactRule::L1Sum => calibrated.l1(),
        ContactRule::ForceNorm => calibrated.norm(),
    };
    stat > cfg.threshold_newtons
}

/// Hand-level label: 1 iff any fingertip is in contact.
pub fn hand_contact(forces: &[FingerForce], offsets: &CalibrationOffset, cfg: &TactileConfig) -> bool {
    forces
        .iter()
        .zip(offsets.per_finger.iter())
        .any(|(f, o)| detect_contact(f, o, cfg))
}
