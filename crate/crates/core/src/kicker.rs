//! Capacitor-discharge kicker: constant-current boost charger, relay dump
//! through an electromagnet, and the resulting ball launch speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum KickerError {
    #[error("kicker parameter {name} = {value} is out of range")]
    OutOfRange { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KickerParams {
    /// Boost converter output, volts.
    pub v_max: f64,
    /// Battery side of the boost converter, volts. Informational.
    pub supply: f64,
    /// Farads.
    pub capacitance: f64,
    /// Amperes.
    pub charge_current: f64,
    /// Fraction of stored energy that ends up in the ball.
    pub efficiency: f64,
    /// Kilograms.
    pub ball_mass: f64,
    /// Seconds after a trigger during which the relay is locked out.
    pub lockout: f64,
}

impl Default for KickerParams {
    fn default() -> Self {
        Self {
            v_max: 190.0,
            supply: 12.0,
            capacitance: 2200e-6,
            charge_current: 0.5,
            efficiency: 0.02,
            ball_mass: 0.046,
            lockout: 0.05,
        }
    }
}

impl KickerParams {
    pub fn validate(&self) -> Result<(), KickerError> {
        let check = |name, value: f64, ok: bool| {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(KickerError::OutOfRange { name, value })
            }
        };
        check("v_max", self.v_max, self.v_max > 0.0)?;
        check("capacitance", self.capacitance, self.capacitance > 0.0)?;
        check("charge_current", self.charge_current, self.charge_current > 0.0)?;
        check("efficiency", self.efficiency, self.efficiency > 0.0 && self.efficiency <= 1.0)?;
        check("ball_mass", self.ball_mass, self.ball_mass > 0.0)?;
        check("lockout", self.lockout, self.lockout >= 0.0)
    }

    /// Energy stored at `v_cap` volts, joules.
    pub fn stored_energy(&self, v_cap: f64) -> f64 {
        0.5 * self.capacitance * v_cap * v_cap
    }

    /// Ball speed produced by dumping a capacitor charged to `v_cap`.
    pub fn launch_speed(&self, v_cap: f64) -> f64 {
        (2.0 * self.efficiency * self.stored_energy(v_cap) / self.ball_mass).sqrt()
    }

    /// Seconds from empty to `v_max`.
    pub fn time_to_full(&self) -> f64 {
        self.capacitance * self.v_max / self.charge_current
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KickerState {
    pub v_cap: f64,
    pub charging: bool,
    /// Simulation time before which neither charging nor triggering happens.
    pub lockout_until: f64,
}

impl KickerState {
    pub fn charged(params: &KickerParams) -> Self {
        Self {
            v_cap: params.v_max,
            charging: true,
            lockout_until: 0.0,
        }
    }

    pub fn charge_step(&mut self, params: &KickerParams, now: f64, dt: f64) {
        debug_assert!(dt > 0.0);
        if self.charging && now >= self.lockout_until {
            let dv = params.charge_current * dt / params.capacitance;
            self.v_cap = (self.v_cap + dv).min(params.v_max);
        }
    }

    /// Fire the relay. Returns the ball speed (0 while locked out).
    pub fn trigger(&mut self, params: &KickerParams, now: f64) -> f64 {
        if now < self.lockout_until {
            return 0.0;
        }
        let speed = params.launch_speed(self.v_cap);
        self.v_cap = 0.0;
        self.lockout_until = now + params.lockout;
        speed
    }
}
