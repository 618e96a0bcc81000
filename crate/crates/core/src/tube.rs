//! Pullback tube acceleration.
//!
//! Given the measured end-effector state and the time left in the release
//! window, the end-effector position is extrapolated at constant velocity to
//! the window end, the landing flowmap is linearized in the terminal velocity
//! around the measured velocity, and the squared landing error is minimized
//! over the acceleration box. In the throwing plane every constraint is a
//! bound on the acceleration, so the program is a two-variable box QP.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::ballistics::{Ballistics, FlightState, TargetSpec};
use crate::bounds::{Box2, Interval};
use crate::error::{Error, Result};
use crate::qp::BoxQp2;

/// Weight on `|a|^2`; makes the rank-one objective strictly convex and picks
/// the minimum-norm command among equally good ones.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

/// Online measurement of the end-effector state in the throwing plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeMeasurement {
    /// Position `(r, z)` in m.
    pub p: [f64; 2],
    /// Velocity `(r_dot, z_dot)` in m/s.
    pub v: [f64; 2],
}

impl EeMeasurement {
    pub fn new(p: [f64; 2], v: [f64; 2]) -> Result<Self> {
        if !p.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite end-effector measurement"));
        }
        Ok(EeMeasurement { p, v })
    }

    pub fn from_state(s: &FlightState) -> Self {
        EeMeasurement {
            p: s.position(),
            v: s.velocity(),
        }
    }

    pub fn as_state(&self) -> FlightState {
        FlightState {
            r: self.p[0],
            z: self.p[1],
            r_dot: self.v[0],
            z_dot: self.v[1],
        }
    }
}

/// Terminal-velocity and acceleration limits of the program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeBounds {
    pub v_bounds: Box2,
    pub a_bounds: Box2,
    /// Pin the radial acceleration to zero.
    #[serde(default)]
    pub vertical_only: bool,
}

impl Default for TubeBounds {
    fn default() -> Self {
        TubeBounds {
            v_bounds: Box2 {
                r: Interval { lo: 0.0, hi: 15.0 },
                z: Interval { lo: -10.0, hi: 10.0 },
            },
            a_bounds: Box2 {
                r: Interval { lo: -40.0, hi: 40.0 },
                z: Interval { lo: -40.0, hi: 40.0 },
            },
            vertical_only: false,
        }
    }
}

impl TubeBounds {
    pub fn unbounded() -> Self {
        TubeBounds {
            v_bounds: Box2::UNBOUNDED,
            a_bounds: Box2::UNBOUNDED,
            vertical_only: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.v_bounds.validate()?;
        self.a_bounds.validate()
    }

    /// Actuator box, with the vertical-only restriction applied.
    fn actuator_box(&self) -> Box2 {
        let mut b = self.a_bounds;
        if self.vertical_only {
            b.r = b.r.intersect(&Interval { lo: 0.0, hi: 0.0 });
        }
        b
    }
}

/// A linearized program instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeProblem {
    pub ee: EeMeasurement,
    pub time_to_go: f64,
    pub target: TargetSpec,
    pub bounds: TubeBounds,
    pub regularization: f64,
    /// `(p_T, v_EE)`: position extrapolated to the window end.
    pub extrapolated: FlightState,
    /// Landing position of the extrapolated state.
    pub r_land0: f64,
    /// `d r_land / d(r_dot, z_dot)` at the extrapolated state.
    pub gradient: [f64; 2],
    /// Intersection of the actuator box with the preimage of `v_bounds`.
    pub accel_box: Box2,
}

impl TubeProblem {
    pub fn residual(&self) -> f64 {
        self.r_land0 - self.target.r_target
    }

    /// Landing-position sensitivity to acceleration, `T * gradient`.
    pub fn sensitivity(&self) -> [f64; 2] {
        [
            self.time_to_go * self.gradient[0],
            self.time_to_go * self.gradient[1],
        ]
    }

    pub fn terminal_velocity(&self, a: [f64; 2]) -> [f64; 2] {
        [
            self.ee.v[0] + self.time_to_go * a[0],
            self.ee.v[1] + self.time_to_go * a[1],
        ]
    }

    /// Linearized landing position for command `a`.
    pub fn predicted_landing(&self, a: [f64; 2]) -> f64 {
        let w = self.sensitivity();
        self.r_land0 + w[0] * a[0] + w[1] * a[1]
    }

    pub fn landing_error_sq(&self, a: [f64; 2]) -> f64 {
        let e = self.predicted_landing(a) - self.target.r_target;
        e * e
    }

    /// Full objective including the regularization term.
    pub fn objective(&self, a: [f64; 2]) -> f64 {
        self.landing_error_sq(a) + self.regularization * (a[0] * a[0] + a[1] * a[1])
    }

    /// The instance as `1/2 a'Ha + c'a` (constant term dropped).
    pub fn to_qp(&self) -> Result<BoxQp2> {
        let w = self.sensitivity();
        let rho = self.residual();
        let eps = self.regularization;
        let h = [
            [2.0 * (w[0] * w[0] + eps), 2.0 * w[0] * w[1]],
            [2.0 * w[1] * w[0], 2.0 * (w[1] * w[1] + eps)],
        ];
        BoxQp2::new(h, [2.0 * rho * w[0], 2.0 * rho * w[1]], self.accel_box)
    }

    /// Same instance without the terminal-velocity limits.
    fn actuator_only(&self) -> TubeProblem {
        TubeProblem {
            accel_box: self.bounds.actuator_box(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// The velocity and actuator boxes did not intersect; solved over the
    /// actuator box alone.
    ClampedInfeasibleBoxes,
    /// Flowmap undefined at the extrapolated state; zero command.
    DomainError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeSolution {
    pub a_tube: [f64; 2],
    pub predicted_r_land: f64,
    /// Squared linearized landing error, m^2.
    pub objective: f64,
    pub status: SolveStatus,
    pub solve_time: Duration,
}

/// Assembles and solves tube programs. Holds no state between calls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeSolver {
    pub ballistics: Ballistics,
    pub regularization: f64,
}

impl Default for TubeSolver {
    fn default() -> Self {
        TubeSolver {
            ballistics: Ballistics::default(),
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

impl TubeSolver {
    pub fn new(ballistics: Ballistics, regularization: f64) -> Result<Self> {
        if !(regularization > 0.0) || !regularization.is_finite() {
            return Err(Error::invalid(format!(
                "regularization must be positive, got {regularization}"
            )));
        }
        Ok(TubeSolver {
            ballistics,
            regularization,
        })
    }

    pub fn assemble(
        &self,
        ee: &EeMeasurement,
        time_to_go: f64,
        target: &TargetSpec,
        bounds: &TubeBounds,
    ) -> Result<TubeProblem> {
        if !(time_to_go > 0.0) || !time_to_go.is_finite() {
            return Err(Error::invalid(format!(
                "time to go must be positive, got {time_to_go}"
            )));
        }
        bounds.validate()?;
        let extrapolated = FlightState {
            r: ee.p[0] + time_to_go * ee.v[0],
            z: ee.p[1] + time_to_go * ee.v[1],
            r_dot: ee.v[0],
            z_dot: ee.v[1],
        };
        let r_land0 = self.ballistics.landing_position(&extrapolated, target.z_land)?;
        let (d_rdot, d_zdot) = self.ballistics.flowmap_gradient(&extrapolated, target.z_land)?;

        let v_pre = |iv: &Interval, v: f64| Interval {
            lo: (iv.lo - v) / time_to_go,
            hi: (iv.hi - v) / time_to_go,
        };
        let v_box = Box2 {
            r: v_pre(&bounds.v_bounds.r, ee.v[0]),
            z: v_pre(&bounds.v_bounds.z, ee.v[1]),
        };
        let accel_box = bounds.actuator_box().intersect(&v_box);

        let problem = TubeProblem {
            ee: *ee,
            time_to_go,
            target: *target,
            bounds: *bounds,
            regularization: self.regularization,
            extrapolated,
            r_land0,
            gradient: [d_rdot, d_zdot],
            accel_box,
        };
        if accel_box.is_empty() {
            return Err(Error::EmptyBox(format!(
                "terminal velocity limits unreachable within acceleration limits \
                 (r: [{:.6}, {:.6}], z: [{:.6}, {:.6}])",
                accel_box.r.lo, accel_box.r.hi, accel_box.z.lo, accel_box.z.hi
            )));
        }
        Ok(problem)
    }

    pub fn solve(&self, problem: &TubeProblem) -> Result<TubeSolution> {
        let start = Instant::now();
        let sol = problem.to_qp()?.solve()?;
        Ok(TubeSolution {
            a_tube: sol.x,
            predicted_r_land: problem.predicted_landing(sol.x),
            objective: problem.landing_error_sq(sol.x),
            status: SolveStatus::Optimal,
            solve_time: start.elapsed(),
        })
    }

    pub fn pullback_command(
        &self,
        ee: &EeMeasurement,
        target: &TargetSpec,
        time_to_go: f64,
        bounds: &TubeBounds,
    ) -> Result<[f64; 2]> {
        let problem = self.assemble(ee, time_to_go, target, bounds)?;
        Ok(self.solve(&problem)?.a_tube)
    }

    /// Closed-loop entry point: always returns a command. An empty box falls
    /// back to the actuator limits alone; an undefined flowmap yields zero.
    pub fn command(
        &self,
        ee: &EeMeasurement,
        target: &TargetSpec,
        time_to_go: f64,
        bounds: &TubeBounds,
    ) -> TubeSolution {
        let start = Instant::now();
        let fallback = |status| TubeSolution {
            a_tube: [0.0; 2],
            predicted_r_land: f64::NAN,
            objective: f64::NAN,
            status,
            solve_time: start.elapsed(),
        };
        match self.assemble(ee, time_to_go, target, bounds) {
            Ok(p) => self
                .solve(&p)
                .unwrap_or_else(|_| fallback(SolveStatus::DomainError)),
            Err(Error::EmptyBox(_)) => {
                let Ok(p) = self.assemble(ee, time_to_go, target, &TubeBounds {
                    v_bounds: Box2::UNBOUNDED,
                    ..*bounds
                }) else {
                    return fallback(SolveStatus::DomainError);
                };
                match self.solve(&p.actuator_only()) {
                    Ok(mut s) => {
                        s.status = SolveStatus::ClampedInfeasibleBoxes;
                        s
                    }
                    Err(_) => fallback(SolveStatus::DomainError),
                }
            }
            Err(_) => fallback(SolveStatus::DomainError),
        }
    }
}

pub fn assemble(
    ee: &EeMeasurement,
    time_to_go: f64,
    target: &TargetSpec,
    bounds: &TubeBounds,
) -> Result<TubeProblem> {
    TubeSolver::default().assemble(ee, time_to_go, target, bounds)
}

pub fn solve(problem: &TubeProblem) -> Result<TubeSolution> {
    TubeSolver::default().solve(problem)
}

pub fn pullback_command(
    ee: &EeMeasurement,
    target: &TargetSpec,
    time_to_go: f64,
    bounds: &TubeBounds,
) -> Result<[f64; 2]> {
    TubeSolver::default().pullback_command(ee, target, time_to_go, bounds)
}
