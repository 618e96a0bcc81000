//! Projectile flight in the vertical throwing plane.
//!
//! A flight state is `(r, z, r_dot, z_dot)`: horizontal distance along the
//! throwing direction, height, and their rates. Without drag the landing
//! position is available in closed form, so membership in the backward
//! reachable tube (BRT) of a landing target is an analytic test on the
//! flowmap rather than a set computation.

use serde::{Deserialize, Serialize};

use crate::bounds::Box2;
use crate::error::{Error, Result};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Discriminant below which the flowmap gradient is treated as singular.
pub const GRADIENT_DISCRIMINANT_MIN: f64 = 1e-9;

/// Planar ballistic state of the object (or the end effector carrying it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightState {
    pub r: f64,
    pub z: f64,
    pub r_dot: f64,
    pub z_dot: f64,
}

impl FlightState {
    /// Builds a throw state. Rejects non-finite fields and backward throws.
    pub fn new(r: f64, z: f64, r_dot: f64, z_dot: f64) -> Result<Self> {
        let s = FlightState { r, z, r_dot, z_dot };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.r, self.z, self.r_dot, self.z_dot]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::invalid(format!("non-finite flight state {self:?}")));
        }
        if self.r_dot < 0.0 {
            return Err(Error::invalid(format!(
                "throw state must move forward, got r_dot = {}",
                self.r_dot
            )));
        }
        Ok(())
    }

    pub fn position(&self) -> [f64; 2] {
        [self.r, self.z]
    }

    pub fn velocity(&self) -> [f64; 2] {
        [self.r_dot, self.z_dot]
    }
}

/// Landing target set: a horizontal landing position with slack at a given
/// landing height, and optionally a box on the landing velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub r_target: f64,
    pub z_land: f64,
    pub r_slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_land_box: Option<Box2>,
}

impl TargetSpec {
    pub fn new(r_target: f64, z_land: f64, r_slack: f64) -> Result<Self> {
        let t = TargetSpec {
            r_target,
            z_land,
            r_slack,
            v_land_box: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_landing_velocity_box(mut self, b: Box2) -> Result<Self> {
        b.validate()?;
        self.v_land_box = Some(b);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.r_target.is_finite() || !self.z_land.is_finite() {
            return Err(Error::invalid("target position must be finite"));
        }
        if !(self.r_slack >= 0.0) {
            return Err(Error::invalid(format!(
                "landing slack must be non-negative, got {}",
                self.r_slack
            )));
        }
        if let Some(b) = &self.v_land_box {
            b.validate()?;
        }
        Ok(())
    }
}

/// Projectile model parametrized by gravitational acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ballistics {
    pub g: f64,
}

impl Default for Ballistics {
    fn default() -> Self {
        Ballistics {
            g: STANDARD_GRAVITY,
        }
    }
}

impl Ballistics {
    pub fn new(g: f64) -> Result<Self> {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("gravity must be positive, got {g}")));
        }
        Ok(Ballistics { g })
    }

    /// `z_dot^2 + 2 g (z - z_land)`; negative when the apex is below `z_land`.
    pub fn discriminant(&self, z: f64, z_dot: f64, z_land: f64) -> f64 {
        z_dot * z_dot + 2.0 * self.g * (z - z_land)
    }

    /// Time until the descending crossing of `z_land`.
    pub fn flight_time(&self, z: f64, z_dot: f64, z_land: f64) -> Result<f64> {
        let disc = self.discriminant(z, z_dot, z_land);
        if !(disc >= 0.0) {
            return Err(Error::domain(format!(
                "trajectory never reaches landing height {z_land} (discriminant {disc})"
            )));
        }
        let t = (z_dot + disc.sqrt()) / self.g;
        if t < 0.0 {
            return Err(Error::domain(format!(
                "state is below landing height {z_land} and descending"
            )));
        }
        Ok(t)
    }

    /// Flowmap: horizontal landing position of unforced flight from `state`.
    pub fn landing_position(&self, state: &FlightState, z_land: f64) -> Result<f64> {
        let t = self.flight_time(state.z, state.z_dot, z_land)?;
        Ok(state.r + state.r_dot * t)
    }

    /// Partial derivatives of the landing position with respect to
    /// `(r_dot, z_dot)`.
    pub fn flowmap_gradient(&self, state: &FlightState, z_land: f64) -> Result<(f64, f64)> {
        let disc = self.discriminant(state.z, state.z_dot, z_land);
        if !(disc > GRADIENT_DISCRIMINANT_MIN) {
            return Err(Error::domain(format!(
                "flowmap gradient is singular at discriminant {disc}"
            )));
        }
        let sq = disc.sqrt();
        let t = (state.z_dot + sq) / self.g;
        if t < 0.0 {
            return Err(Error::domain(format!(
                "state is below landing height {z_land} and descending"
            )));
        }
        Ok((t, state.r_dot * (1.0 + state.z_dot / sq) / self.g))
    }

    /// Velocity at the landing instant.
    pub fn landing_velocity(&self, state: &FlightState, z_land: f64) -> Result<[f64; 2]> {
        let t = self.flight_time(state.z, state.z_dot, z_land)?;
        Ok([state.r_dot, state.z_dot - self.g * t])
    }

    /// Unforced flight for `t` seconds.
    pub fn propagate(&self, state: &FlightState, t: f64) -> FlightState {
        FlightState {
            r: state.r + state.r_dot * t,
            z: state.z + state.z_dot * t - 0.5 * self.g * t * t,
            r_dot: state.r_dot,
            z_dot: state.z_dot - self.g * t,
        }
    }

    /// Vertical release velocity that lands on `target.r_target` from
    /// `release = (r, z)` with horizontal speed `r_dot`.
    pub fn nominal_release_velocity(
        &self,
        release: [f64; 2],
        target: &TargetSpec,
        r_dot: f64,
    ) -> Result<f64> {
        if !(r_dot > 0.0) {
            return Err(Error::domain(format!(
                "horizontal release velocity must be positive, got {r_dot}"
            )));
        }
        let dist = target.r_target - release[0];
        if !(dist > 0.0) {
            return Err(Error::domain(format!(
                "target at r = {} is not ahead of release at r = {}",
                target.r_target, release[0]
            )));
        }
        let t = dist / r_dot;
        let z_dot = (target.z_land - release[1]) / t + 0.5 * self.g * t;
        // The landing crossing must be the descending one.
        if t < z_dot / self.g {
            return Err(Error::domain(
                "target height is only reached on the ascending branch",
            ));
        }
        Ok(z_dot)
    }

    /// BRT membership: the unforced trajectory reaches `z_land` inside the
    /// position slack and, when given, inside the landing-velocity box.
    pub fn in_brt(&self, state: &FlightState, target: &TargetSpec) -> bool {
        let Ok(t) = self.flight_time(state.z, state.z_dot, target.z_land) else {
            return false;
        };
        let r_land = state.r + state.r_dot * t;
        if !((r_land - target.r_target).abs() <= target.r_slack) {
            return false;
        }
        match &target.v_land_box {
            Some(b) => b.contains([state.r_dot, state.z_dot - self.g * t]),
            None => true,
        }
    }
}

pub fn flight_time(z: f64, z_dot: f64, z_land: f64) -> Result<f64> {
    Ballistics::default().flight_time(z, z_dot, z_land)
}

pub fn landing_position(state: &FlightState, z_land: f64) -> Result<f64> {
    Ballistics::default().landing_position(state, z_land)
}

pub fn flowmap_gradient(state: &FlightState, z_land: f64) -> Result<(f64, f64)> {
    Ballistics::default().flowmap_gradient(state, z_land)
}

pub fn nominal_release_velocity(release: [f64; 2], target: &TargetSpec, r_dot: f64) -> Result<f64> {
    Ballistics::default().nominal_release_velocity(release, target, r_dot)
}

pub fn in_brt(state: &FlightState, target: &TargetSpec) -> bool {
    Ballistics::default().in_brt(state, target)
}

/// Reduces a 3D end-effector state to the throwing plane through the world
/// origin and `target_xy`. Returns `(r, z, r_dot, z_dot)`; the lateral
/// component is dropped.
pub fn planar_reduce(p: [f64; 3], v: [f64; 3], target_xy: [f64; 2]) -> Result<FlightState> {
    let n = target_xy[0].hypot(target_xy[1]);
    if !(n > 0.0) {
        return Err(Error::invalid("target direction is undefined"));
    }
    let u = [target_xy[0] / n, target_xy[1] / n];
    FlightState::new(
        p[0] * u[0] + p[1] * u[1],
        p[2],
        v[0] * u[0] + v[1] * u[1],
        v[2],
    )
}
