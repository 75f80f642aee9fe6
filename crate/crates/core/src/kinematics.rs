//! Four-wheel omnidirectional drive with a gear stage between motor and wheel.
//!
//! Wheel `i` sits at angle `θᵢ` on a circle of radius `R`, rolling
//! tangentially. Its rim speed for a body twist `(vx, vy, ω)` is
//! `−sin θᵢ·vx + cos θᵢ·vy + R·ω`; the gear makes the wheel turn `G` times
//! faster than the motor, so the motor rate is `rim / (r·G)`.

use nalgebra::{Matrix3, Matrix4x3, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::servo::{VELOCITY_LIMIT, VELOCITY_UNIT_RPM};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KinematicsError {
    #[error("wheel geometry must be positive (chassis {chassis_radius}, wheel {wheel_radius}, gear {gear_ratio})")]
    NonPositiveGeometry {
        chassis_radius: f64,
        wheel_radius: f64,
        gear_ratio: f64,
    },
    #[error("wheel angles do not span the plane (projection rank < 3)")]
    RankDeficient,
}

/// Chassis velocity in the robot frame: x forward, y left, ω counterclockwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyTwist {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl BodyTwist {
    pub const ZERO: BodyTwist = BodyTwist {
        vx: 0.0,
        vy: 0.0,
        omega: 0.0,
    };

    pub fn new(vx: f64, vy: f64, omega: f64) -> Self {
        Self { vx, vy, omega }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self::new(self.vx * k, self.vy * k, self.omega * k)
    }

    pub fn linear_speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn is_finite(&self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.omega.is_finite()
    }
}

impl std::ops::Add for BodyTwist {
    type Output = BodyTwist;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.vx + rhs.vx, self.vy + rhs.vy, self.omega + rhs.omega)
    }
}

/// Motor-shaft angular velocities (rad/s), wheels 1..4.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WheelRates(pub [f64; 4]);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WheelConfig {
    /// Wheel positions on the chassis circle, radians from robot forward.
    pub wheel_angles: [f64; 4],
    pub chassis_radius: f64,
    pub wheel_radius: f64,
    /// Wheel speed divided by motor speed.
    pub gear_ratio: f64,
}

impl Default for WheelConfig {
    fn default() -> Self {
        Self {
            wheel_angles: [45f64, 135.0, 225.0, 315.0].map(f64::to_radians),
            chassis_radius: 0.08,
            wheel_radius: 0.027,
            gear_ratio: 14.0,
        }
    }
}

impl WheelConfig {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.chassis_radius) && positive(self.wheel_radius) && positive(self.gear_ratio)) {
            return Err(KinematicsError::NonPositiveGeometry {
                chassis_radius: self.chassis_radius,
                wheel_radius: self.wheel_radius,
                gear_ratio: self.gear_ratio,
            });
        }
        let sv = self.projection().singular_values();
        let (min, max) = sv.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        if min.is_nan() || min <= max * 1e-9 {
            return Err(KinematicsError::RankDeficient);
        }
        Ok(())
    }

    /// Maps a twist to rim speeds (m/s).
    pub fn projection(&self) -> Matrix4x3<f64> {
        let mut m = Matrix4x3::zeros();
        for (i, &theta) in self.wheel_angles.iter().enumerate() {
            m[(i, 0)] = -theta.sin();
            m[(i, 1)] = theta.cos();
            m[(i, 2)] = self.chassis_radius;
        }
        m
    }

    /// Motor rate (rad/s) per unit of rim speed (m/s).
    fn motor_per_rim(&self) -> f64 {
        1.0 / (self.wheel_radius * self.gear_ratio)
    }
}

/// Rim speeds (m/s) for a twist.
pub fn rim_speeds(twist: BodyTwist, cfg: &WheelConfig) -> [f64; 4] {
    cfg.wheel_angles.map(|theta| -theta.sin() * twist.vx + theta.cos() * twist.vy + cfg.chassis_radius * twist.omega)
}

/// Body twist to motor-shaft rates.
pub fn inverse(twist: BodyTwist, cfg: &WheelConfig) -> WheelRates {
    let k = cfg.motor_per_rim();
    WheelRates(rim_speeds(twist, cfg).map(|s| s * k))
}

/// Least-squares twist for the given motor rates, plus the rim-speed residual norm (m/s).
pub fn forward_with_residual(
    rates: &WheelRates,
    cfg: &WheelConfig,
) -> Result<(BodyTwist, f64), KinematicsError> {
    let j = cfg.projection();
    let rim = Vector4::from_iterator(rates.0.iter().map(|w| w * cfg.wheel_radius * cfg.gear_ratio));
    let normal: Matrix3<f64> = j.transpose() * j;
    let rhs: Vector3<f64> = j.transpose() * rim;
    let chol = normal.cholesky().ok_or(KinematicsError::RankDeficient)?;
    let x = chol.solve(&rhs);
    let residual = (j * x - rim).norm();
    Ok((BodyTwist::new(x[0], x[1], x[2]), residual))
}

/// Motor-shaft rates to body twist (least squares over all four wheels).
pub fn forward(rates: &WheelRates, cfg: &WheelConfig) -> Result<BodyTwist, KinematicsError> {
    forward_with_residual(rates, cfg).map(|(t, _)| t)
}

const RAD_S_PER_UNIT: f64 = VELOCITY_UNIT_RPM * 2.0 * std::f64::consts::PI / 60.0;

/// A rate in servo velocity units, and whether it had to be clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DxlVelocity {
    pub units: i32,
    pub saturated: bool,
}

/// rad/s → 0.229 rpm units, rounded and saturated at ±265.
pub fn to_dxl_units(rate: f64) -> DxlVelocity {
    let raw = (rate / RAD_S_PER_UNIT).round();
    let limit = VELOCITY_LIMIT as f64;
    if raw.abs() > limit || raw.is_nan() {
        DxlVelocity {
            units: if raw.is_sign_negative() { -VELOCITY_LIMIT as i32 } else { VELOCITY_LIMIT as i32 },
            saturated: true,
        }
    } else {
        DxlVelocity {
            units: raw as i32,
            saturated: false,
        }
    }
}

pub fn from_dxl_units(units: i64) -> f64 {
    units as f64 * RAD_S_PER_UNIT
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_gear() -> WheelConfig {
        WheelConfig {
            gear_ratio: 1.5,
            ..WheelConfig::default()
        }
    }

    #[test]
    fn zero_twist_zero_rates() {
        assert_eq!(inverse(BodyTwist::ZERO, &paper_gear()), WheelRates([0.0; 4]));
        let t = forward(&WheelRates([0.0; 4]), &paper_gear()).unwrap();
        assert_eq!(t, BodyTwist::ZERO);
    }

    #[test]
    fn pure_rotation_equal_rates() {
        let rates = inverse(BodyTwist::new(0.0, 0.0, 1.0), &paper_gear());
        let expected: f64 = 0.08 / (0.027 * 1.5);
        assert!((expected - 1.975_308_641_975_308_6).abs() < 1e-12);
        for r in rates.0 {
            assert!((r - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_translation_rim_speeds() {
        let s = rim_speeds(BodyTwist::new(1.0, 0.0, 0.0), &WheelConfig::default());
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in s.iter().zip([-h, -h, h, h]) {
            assert!((got - want).abs() < 1e-12, "{s:?}");
        }
    }

    #[test]
    fn inconsistent_rates_least_squares() {
        let cfg = paper_gear();
        let rates = WheelRates([1.0, 1.0, 1.0, -1.0].map(|v| v * 3.0));
        let (twist, residual) = forward_with_residual(&rates, &cfg).unwrap();
        assert!(residual > 1e-3);

        // Independent normal-equation solve by Cramer's rule.
        let rim: Vec<f64> = rates.0.iter().map(|w| w * cfg.wheel_radius * cfg.gear_ratio).collect();
        let rows: Vec<[f64; 3]> = cfg
            .wheel_angles
            .iter()
            .map(|t| [-t.sin(), t.cos(), cfg.chassis_radius])
            .collect();
        let mut a = [[0.0; 3]; 3];
        let mut b = [0.0; 3];
        for (row, s) in rows.iter().zip(&rim) {
            for i in 0..3 {
                b[i] += row[i] * s;
                for k in 0..3 {
                    a[i][k] += row[i] * row[k];
                }
            }
        }
        let det = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det(a);
        let solve = |col: usize| {
            let mut m = a;
            for i in 0..3 {
                m[i][col] = b[i];
            }
            det(m) / d
        };
        assert!((twist.vx - solve(0)).abs() < 1e-9);
        assert!((twist.vy - solve(1)).abs() < 1e-9);
        assert!((twist.omega - solve(2)).abs() < 1e-9);

        // Any perturbation of the solution does no better.
        let base: f64 = residual;
        for d in [[1e-3, 0.0, 0.0], [0.0, 1e-3, 0.0], [0.0, 0.0, 1e-3], [-1e-3, 1e-3, -1e-3]] {
            let t = BodyTwist::new(twist.vx + d[0], twist.vy + d[1], twist.omega + d[2]);
            let s = rim_speeds(t, &cfg);
            let r: f64 = s.iter().zip(&rim).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(r >= base);
        }
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let cfg = WheelConfig {
            wheel_angles: [0.3; 4],
            ..WheelConfig::default()
        };
        assert_eq!(cfg.validate(), Err(KinematicsError::RankDeficient));
        assert!(forward(&WheelRates([1.0; 4]), &cfg).is_err());
        let cfg = WheelConfig {
            gear_ratio: 0.0,
            ..WheelConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(KinematicsError::NonPositiveGeometry { .. })));
        assert!(WheelConfig::default().validate().is_ok());
    }

    #[test]
    fn unit_conversion_examples() {
        assert_eq!(to_dxl_units(0.0), DxlVelocity { units: 0, saturated: false });
        assert_eq!(to_dxl_units(1.0).units, 42);
        assert_eq!(to_dxl_units(4.796).units, 200);
        assert_eq!(to_dxl_units(-4.796).units, -200);
        assert_eq!(to_dxl_units(100.0), DxlVelocity { units: 265, saturated: true });
        assert_eq!(to_dxl_units(-100.0), DxlVelocity { units: -265, saturated: true });
        assert_eq!(to_dxl_units(from_dxl_units(265)), DxlVelocity { units: 265, saturated: false });
    }

    proptest! {
        #[test]
        fn inverse_is_linear(
            a in -5.0..5.0f64, b in -5.0..5.0f64,
            t in prop::array::uniform3(-4.0..4.0f64),
            u in prop::array::uniform3(-4.0..4.0f64),
        ) {
            let cfg = WheelConfig::default();
            let t = BodyTwist::new(t[0], t[1], t[2]);
            let u = BodyTwist::new(u[0], u[1], u[2]);
            let lhs = inverse(t.scaled(a) + u.scaled(b), &cfg);
            let (it, iu) = (inverse(t, &cfg), inverse(u, &cfg));
            for i in 0..4 {
                let rhs = a * it.0[i] + b * iu.0[i];
                prop_assert!((lhs.0[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }

        #[test]
        fn unit_roundtrip_within_half_unit(rate in -6.3..6.3f64) {
            let v = to_dxl_units(rate);
            prop_assert!(!v.saturated);
            prop_assert!((from_dxl_units(v.units as i64) - rate).abs() <= 0.5 * RAD_S_PER_UNIT + 1e-12);
        }

        #[test]
        fn saturation_is_flagged(rate in -1e3..1e3f64) {
            let v = to_dxl_units(rate);
            prop_assert!(v.units.abs() <= 265);
            prop_assert_eq!(v.saturated, (rate / RAD_S_PER_UNIT).round().abs() > 265.0);
        }
    }
}
