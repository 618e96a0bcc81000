//! Release-window simulation.
//!
//! The end effector is a planar double integrator driven by a zero-order-held
//! controller command plus Gaussian actuation noise. At every simulation
//! step the hypothetical landing error (the error if the object detached at
//! that instant) is recorded.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ballistics::{Ballistics, FlightState, TargetSpec};
use crate::error::{Error, Result};
use crate::tube::{EeMeasurement, TubeBounds, TubeSolver};

/// Relative tolerance used when mapping times to steps and control ticks.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Fresh noise at every simulation step.
    PerStep,
    /// Noise drawn at each control tick and held with the command.
    PerTick,
}

/// What the commanded acceleration acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Plant {
    /// The end effector itself: zero command keeps velocity constant.
    EndEffector,
    /// Command is added on top of free fall: zero command is unforced flight.
    Ballistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Controller rate, Hz.
    pub control_freq: f64,
    /// Actuation noise standard deviation per axis, m/s^2.
    pub noise_std: f64,
    /// Gripper dwell, s. Detach can happen in `[dwell, window]`.
    pub dwell: f64,
    /// Release window length, s.
    pub window: f64,
    pub seed: u64,
    pub noise_mode: NoiseMode,
    pub plant: Plant,
    /// Position/velocity measurement noise std (m, m/s); zero means exact.
    pub measurement_noise_std: f64,
    pub gravity: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.001,
            control_freq: 400.0,
            noise_std: 2.0,
            dwell: 0.050,
            window: 0.100,
            seed: 0,
            noise_mode: NoiseMode::PerStep,
            plant: Plant::EndEffector,
            measurement_noise_std: 0.0,
            gravity: crate::ballistics::STANDARD_GRAVITY,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("dt", self.dt)?;
        positive("control_freq", self.control_freq)?;
        positive("window", self.window)?;
        positive("gravity", self.gravity)?;
        if 1.0 / self.control_freq < self.dt * (1.0 - TIME_EPS) {
            return Err(Error::invalid(format!(
                "control period {} s is shorter than the timestep {} s",
                1.0 / self.control_freq,
                self.dt
            )));
        }
        if !(self.dwell >= 0.0 && self.dwell <= self.window) {
            return Err(Error::invalid(format!(
                "dwell {} must lie in [0, window = {}]",
                self.dwell, self.window
            )));
        }
        if !(self.noise_std >= 0.0) || !(self.measurement_noise_std >= 0.0) {
            return Err(Error::invalid("noise standard deviations must be non-negative"));
        }
        let steps = self.window / self.dt;
        if (steps - steps.round()).abs() > TIME_EPS * steps.max(1.0) {
            return Err(Error::invalid(format!(
                "window {} is not a whole number of timesteps {}",
                self.window, self.dt
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.window / self.dt).round() as usize
    }

    /// Index of the control period containing step `k`.
    fn tick_index(&self, k: usize) -> u64 {
        (k as f64 * self.dt * self.control_freq + TIME_EPS).floor() as u64
    }

    pub fn control_period(&self) -> f64 {
        1.0 / self.control_freq
    }

    /// ChaCha stream for trial `stream` under this config's seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Controller {
    /// No commanded acceleration.
    ConstantVelocity,
    /// Closed-loop pullback tube acceleration.
    Pullback { bounds: TubeBounds },
}

impl Controller {
    pub fn pullback() -> Self {
        Controller::Pullback {
            bounds: TubeBounds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandSample {
    pub time: f64,
    pub accel: [f64; 2],
}

/// Per-step record of one release window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseTrace {
    pub times: Vec<f64>,
    pub states: Vec<FlightState>,
    /// One entry per control tick.
    pub commands: Vec<CommandSample>,
    /// |landing position - r_target| at every instant, m.
    pub landing_errors: Vec<f64>,
    /// Number of instants where the flowmap was undefined and the error was
    /// taken at the last crossing of the landing height.
    pub undefined_flowmap_steps: usize,
}

impl ReleaseTrace {
    /// Command held at sample `i`.
    pub fn held_command(&self, i: usize) -> [f64; 2] {
        let t = self.times[i];
        let k = self
            .commands
            .partition_point(|c| c.time <= t + TIME_EPS * t.abs().max(1.0));
        if k == 0 {
            [0.0; 2]
        } else {
            self.commands[k - 1].accel
        }
    }

    /// CSV with columns time_s, r, z, r_dot, z_dot, cmd_ar, cmd_az,
    /// landing_error_m.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "time_s",
            "r",
            "z",
            "r_dot",
            "z_dot",
            "cmd_ar",
            "cmd_az",
            "landing_error_m",
        ])?;
        for i in 0..self.times.len() {
            let s = &self.states[i];
            let a = self.held_command(i);
            wtr.serialize((
                self.times[i],
                s.r,
                s.z,
                s.r_dot,
                s.z_dot,
                a[0],
                a[1],
                self.landing_errors[i],
            ))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Simulates with the stream-0 RNG of `config.seed`.
pub fn simulate_release(
    controller: &Controller,
    initial: &FlightState,
    target: &TargetSpec,
    config: &SimConfig,
) -> Result<ReleaseTrace> {
    let mut rng = config.rng(0);
    simulate_release_with_rng(controller, initial, target, config, &mut rng)
}

pub fn simulate_release_with_rng<R: Rng>(
    controller: &Controller,
    initial: &FlightState,
    target: &TargetSpec,
    config: &SimConfig,
    rng: &mut R,
) -> Result<ReleaseTrace> {
    config.validate()?;
    target.validate()?;
    if let Controller::Pullback { bounds } = controller {
        bounds.validate()?;
    }
    let ballistics = Ballistics::new(config.gravity)?;
    ballistics.landing_position(initial, target.z_land)?;
    let solver = TubeSolver {
        ballistics,
        ..TubeSolver::default()
    };

    let n = config.steps();
    let mut trace = ReleaseTrace {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        commands: Vec::new(),
        landing_errors: Vec::with_capacity(n + 1),
        undefined_flowmap_steps: 0,
    };
    let mut landing = LandingTracker::new(ballistics, *target);
    let mut s = *initial;
    let gravity = match config.plant {
        Plant::EndEffector => 0.0,
        Plant::Ballistic => config.gravity,
    };
    let mut command = [0.0; 2];
    let mut noise = [0.0; 2];
    let mut last_tick = None;

    for k in 0..=n {
        let t = k as f64 * config.dt;
        trace.times.push(t);
        trace.states.push(s);
        trace.landing_errors.push(landing.error(&s));
        if k == n {
            break;
        }

        let tick = config.tick_index(k);
        let new_tick = last_tick != Some(tick);
        if new_tick {
            last_tick = Some(tick);
            command = match controller {
                Controller::ConstantVelocity => [0.0; 2],
                Controller::Pullback { bounds } => {
                    let ee = measure(&s, config.measurement_noise_std, rng);
                    let time_to_go = (config.window - t).max(config.control_period());
                    solver.command(&ee, target, time_to_go, bounds).a_tube
                }
            };
            trace.commands.push(CommandSample { time: t, accel: command });
        }
        if config.noise_std > 0.0 && (new_tick || config.noise_mode == NoiseMode::PerStep) {
            noise = [
                config.noise_std * rng.sample::<f64, _>(StandardNormal),
                config.noise_std * rng.sample::<f64, _>(StandardNormal),
            ];
        }

        // Semi-implicit Euler for the commanded part; gravity is integrated
        // exactly so that unforced ballistic flight keeps its landing point.
        let dt = config.dt;
        let ar = command[0] + noise[0];
        let az = command[1] + noise[1] - gravity;
        s.r_dot += ar * dt;
        s.z_dot += az * dt;
        s.r += s.r_dot * dt;
        s.z += s.z_dot * dt + 0.5 * gravity * dt * dt;
    }
    trace.undefined_flowmap_steps = landing.undefined_steps;
    Ok(trace)
}

fn measure<R: Rng>(s: &FlightState, std: f64, rng: &mut R) -> EeMeasurement {
    let mut ee = EeMeasurement::from_state(s);
    if std > 0.0 {
        for x in ee.p.iter_mut().chain(ee.v.iter_mut()) {
            *x += std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    ee
}

/// Landing error per instant; falls back to the horizontal position where
/// the state last crossed the landing height when the flowmap is undefined.
struct LandingTracker {
    ballistics: Ballistics,
    target: TargetSpec,
    prev: Option<FlightState>,
    crossing_r: Option<f64>,
    undefined_steps: usize,
}

impl LandingTracker {
    fn new(ballistics: Ballistics, target: TargetSpec) -> Self {
        LandingTracker {
            ballistics,
            target,
            prev: None,
            crossing_r: None,
            undefined_steps: 0,
        }
    }

    fn error(&mut self, s: &FlightState) -> f64 {
        let zl = self.target.z_land;
        if let Some(p) = self.prev {
            if p.z >= zl && s.z < zl {
                let f = (p.z - zl) / (p.z - s.z);
                self.crossing_r = Some(p.r + f * (s.r - p.r));
            }
        }
        self.prev = Some(*s);
        match self.ballistics.landing_position(s, zl) {
            Ok(r) => (r - self.target.r_target).abs(),
            Err(_) => {
                self.undefined_steps += 1;
                (self.crossing_r.unwrap_or(s.r) - self.target.r_target).abs()
            }
        }
    }
}

/// Largest landing error over the possible detach instants `[dwell, window]`.
pub fn max_error_in_detach_window(trace: &ReleaseTrace, config: &SimConfig) -> f64 {
    let tol = TIME_EPS * config.window.max(1.0);
    trace
        .times
        .iter()
        .zip(&trace.landing_errors)
        .filter(|(t, _)| **t >= config.dwell - tol && **t <= config.window + tol)
        .map(|(_, e)| *e)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballistics::landing_position;

    fn mesh_case(er: f64, ez: f64) -> (FlightState, TargetSpec) {
        let nominal = FlightState::new(0.0, 1.0, 7.0, 2.0).unwrap();
        let target = TargetSpec::new(landing_position(&nominal, 0.0).unwrap(), 0.0, 0.25).unwrap();
        let s = FlightState::new(0.0, 1.0, 7.0 * (1.0 + er), 2.0 * (1.0 + ez)).unwrap();
        (s, target)
    }

    fn quiet(plant: Plant) -> SimConfig {
        SimConfig {
            noise_std: 0.0,
            plant,
            ..SimConfig::default()
        }
    }

    #[test]
    fn ballistic_plant_constant_velocity_keeps_zero_error() {
        let (s, target) = mesh_case(0.0, 0.0);
        let tr = simulate_release(&Controller::ConstantVelocity, &s, &target, &quiet(Plant::Ballistic)).unwrap();
        assert_eq!(tr.landing_errors.len(), 101);
        assert!(tr.landing_errors.iter().all(|e| *e < 1e-12), "{:?}", tr.landing_errors);
    }

    #[test]
    fn ballistic_plant_constant_velocity_keeps_initial_error() {
        let (s, target) = mesh_case(0.1, 0.0);
        let tr = simulate_release(&Controller::ConstantVelocity, &s, &target, &quiet(Plant::Ballistic)).unwrap();
        let e0 = tr.landing_errors[0];
        assert!(e0 > 0.4);
        assert!(tr.landing_errors.iter().all(|e| (e - e0).abs() < 1e-12));
    }

    #[test]
    fn end_effector_plant_constant_velocity_is_a_straight_line() {
        let (s, target) = mesh_case(0.0, 0.0);
        let tr = simulate_release(&Controller::ConstantVelocity, &s, &target, &quiet(Plant::EndEffector)).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            assert!((st.r - 7.0 * t).abs() < 1e-12);
            assert!((st.z - (1.0 + 2.0 * t)).abs() < 1e-12);
            let expect = (landing_position(st, 0.0).unwrap() - target.r_target).abs();
            assert!((expect - tr.landing_errors[tr.times.iter().position(|x| x == t).unwrap()]).abs() < 1e-15);
        }
        // drifting away from the target while moving in a straight line
        assert!(tr.landing_errors[100] > 0.9);
    }

    #[test]
    fn control_ticks_at_400hz_on_1ms_grid() {
        let (s, target) = mesh_case(0.05, 0.0);
        let tr = simulate_release(&Controller::pullback(), &s, &target, &quiet(Plant::EndEffector)).unwrap();
        let ticks: Vec<usize> = tr.commands.iter().map(|c| (c.time * 1000.0).round() as usize).collect();
        assert_eq!(&ticks[..6], &[0, 3, 5, 8, 10, 13]);
        assert_eq!(ticks.len(), 40);
    }

    #[test]
    fn pullback_reduces_error() {
        let (s, target) = mesh_case(0.1, -0.1);
        let cfg = SimConfig::default();
        let tr = simulate_release(&Controller::pullback(), &s, &target, &cfg).unwrap();
        let cv = simulate_release(&Controller::ConstantVelocity, &s, &target, &cfg).unwrap();
        assert!(tr.landing_errors[100] < 0.05);
        assert!(max_error_in_detach_window(&tr, &cfg) < max_error_in_detach_window(&cv, &cfg));
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let (s, target) = mesh_case(-0.05, 0.1);
        let cfg = SimConfig { seed: 7, ..SimConfig::default() };
        let a = simulate_release(&Controller::pullback(), &s, &target, &cfg).unwrap();
        let b = simulate_release(&Controller::pullback(), &s, &target, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_release(&Controller::pullback(), &s, &target, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.landing_errors, c.landing_errors);
    }

    #[test]
    fn max_error_examples() {
        let cfg = SimConfig::default();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.001).collect();
        let mk = |errs: Vec<f64>| ReleaseTrace {
            states: vec![FlightState { r: 0.0, z: 1.0, r_dot: 1.0, z_dot: 0.0 }; errs.len()],
            times: times.clone(),
            commands: vec![],
            landing_errors: errs,
            undefined_flowmap_steps: 0,
        };
        assert_eq!(max_error_in_detach_window(&mk(vec![0.4; 101]), &cfg), 0.4);
        let decay = mk(times.iter().map(|t| 1.0 - t).collect());
        assert_eq!(max_error_in_detach_window(&decay, &cfg), 1.0 - times[50]);
    }

    #[test]
    fn max_error_matches_scan_of_stochastic_trace() {
        let (s, target) = mesh_case(0.1, 0.1);
        let cfg = SimConfig { seed: 3, ..SimConfig::default() };
        let tr = simulate_release(&Controller::pullback(), &s, &target, &cfg).unwrap();
        let mut scan = f64::MIN;
        for i in 50..=100 {
            scan = scan.max(tr.landing_errors[i]);
        }
        assert_eq!(max_error_in_detach_window(&tr, &cfg), scan);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dwell: 0.2, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { control_freq: 2000.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { dt: 0.0007, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig::default().validate().is_ok());
    }

    #[test]
    fn per_tick_noise_is_held_between_ticks() {
        let (s, target) = mesh_case(0.0, 0.0);
        let cfg = SimConfig {
            control_freq: 100.0,
            noise_mode: NoiseMode::PerTick,
            ..SimConfig::default()
        };
        let tr = simulate_release(&Controller::ConstantVelocity, &s, &target, &cfg).unwrap();
        // within one 10 ms hold the velocity changes linearly
        let dv: Vec<f64> = (1..10).map(|k| tr.states[k + 1].r_dot - tr.states[k].r_dot).collect();
        assert!(dv.iter().all(|d| (d - dv[0]).abs() < 1e-15));
        assert!(dv[0] != 0.0);
    }

    #[test]
    fn falls_back_to_crossing_when_flowmap_undefined() {
        let target = TargetSpec::new(1.0, 0.0, 0.25).unwrap();
        let s = FlightState::new(0.0, 0.002, 2.0, -1.0).unwrap();
        let cfg = SimConfig { noise_std: 0.0, ..SimConfig::default() };
        // Straight-line descent crosses z = 0 after 2 ms at r = 4 mm; the
        // flowmap stays defined only while the state is above ground.
        let tr = simulate_release(&Controller::ConstantVelocity, &s, &target, &cfg).unwrap();
        assert!(tr.undefined_flowmap_steps > 0);
        let last = *tr.landing_errors.last().unwrap();
        assert!((last - (1.0 - 0.004)).abs() < 1e-9, "{last}");
    }

    #[test]
    fn csv_has_expected_header() {
        let (s, target) = mesh_case(0.0, 0.0);
        let tr = simulate_release(&Controller::pullback(), &s, &target, &SimConfig::default()).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "time_s,r,z,r_dot,z_dot,cmd_ar,cmd_az,landing_error_m"
        );
        assert_eq!(lines.count(), 101);
    }
}
