//! Batch Monte-Carlo release experiments over a grid of perturbed end-effector
//! states.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballistics::{Ballistics, FlightState, TargetSpec};
use crate::error::{Error, Result};
use crate::sim::{
    max_error_in_detach_window, simulate_release_with_rng, Controller, Plant, SimConfig,
};
use crate::tube::TubeBounds;

/// Landing slack used for BRT-entry diagnostics, m.
pub const SUCCESS_SLACK: f64 = 0.25;

/// Grid of nominal release states and velocity error ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionMesh {
    pub heights: Vec<f64>,
    pub r_dots: Vec<f64>,
    pub z_dots: Vec<f64>,
    pub r_error_ratios: Vec<f64>,
    pub z_error_ratios: Vec<f64>,
}

impl Default for ConditionMesh {
    fn default() -> Self {
        let ratios = vec![-0.10, -0.05, 0.0, 0.05, 0.10];
        ConditionMesh {
            heights: vec![0.5, 1.0, 1.5],
            r_dots: vec![5.0, 6.0, 7.0, 8.0, 9.0],
            z_dots: vec![1.0, 2.0, 3.0, 4.0],
            r_error_ratios: ratios.clone(),
            z_error_ratios: ratios,
        }
    }
}

impl ConditionMesh {
    pub fn len(&self) -> usize {
        self.heights.len()
            * self.r_dots.len()
            * self.z_dots.len()
            * self.r_error_ratios.len()
            * self.z_error_ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One initial state of the release window and the target its nominal state
/// lands on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub index: usize,
    pub z: f64,
    pub r_dot_nom: f64,
    pub z_dot_nom: f64,
    pub e_r: f64,
    pub e_z: f64,
    pub initial: FlightState,
    pub target: TargetSpec,
}

/// Expands the mesh. Release is at `r = 0` and targets are at ground level.
pub fn build_mesh(spec: &ConditionMesh) -> Result<Vec<Condition>> {
    build_mesh_with(spec, &Ballistics::default())
}

pub fn build_mesh_with(spec: &ConditionMesh, ballistics: &Ballistics) -> Result<Vec<Condition>> {
    if spec.is_empty() {
        return Err(Error::invalid("condition mesh has an empty axis"));
    }
    let mut out = Vec::with_capacity(spec.len());
    for &z in &spec.heights {
        for &r_dot_nom in &spec.r_dots {
            for &z_dot_nom in &spec.z_dots {
                let nominal = FlightState::new(0.0, z, r_dot_nom, z_dot_nom)?;
                let r_target = ballistics.landing_position(&nominal, 0.0)?;
                let target = TargetSpec::new(r_target, 0.0, SUCCESS_SLACK)?;
                for &e_r in &spec.r_error_ratios {
                    for &e_z in &spec.z_error_ratios {
                        let initial = FlightState::new(
                            0.0,
                            z,
                            r_dot_nom * (1.0 + e_r),
                            z_dot_nom * (1.0 + e_z),
                        )?;
                        out.push(Condition {
                            index: out.len(),
                            z,
                            r_dot_nom,
                            z_dot_nom,
                            e_r,
                            e_z,
                            initial,
                            target,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A controller together with the rate it runs at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub label: String,
    pub controller: Controller,
    pub control_freq: f64,
}

impl ControllerSpec {
    pub fn constant_velocity() -> Self {
        ControllerSpec {
            label: "constant-velocity".into(),
            controller: Controller::ConstantVelocity,
            control_freq: 400.0,
        }
    }

    pub fn pullback(freq: f64, bounds: TubeBounds) -> Self {
        ControllerSpec {
            label: format!("pullback-{freq}hz"),
            controller: Controller::Pullback { bounds },
            control_freq: freq,
        }
    }

    /// The four rows of the profiling table.
    pub fn table4(bounds: TubeBounds) -> Vec<Self> {
        vec![
            Self::constant_velocity(),
            Self::pullback(100.0, bounds),
            Self::pullback(200.0, bounds),
            Self::pullback(400.0, bounds),
        ]
    }

    fn config(&self, base: &SimConfig, seed: u64) -> SimConfig {
        SimConfig {
            control_freq: self.control_freq,
            seed,
            ..*base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub controller: String,
    pub condition: usize,
    pub z: f64,
    pub r_dot_nom: f64,
    pub z_dot_nom: f64,
    pub e_r: f64,
    pub e_z: f64,
    pub seed: u64,
    /// Max landing error over the detach window; `None` if the trial failed.
    pub max_err_m: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub controller: String,
    /// Mean of per-trial max landing errors, m.
    pub mae: f64,
    /// Population standard deviation, m.
    pub std: f64,
    pub n_trials: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub stats: Vec<AggregateStats>,
    pub records: Vec<TrialRecord>,
}

impl BatchResult {
    pub fn stats_for(&self, label: &str) -> Option<&AggregateStats> {
        self.stats.iter().find(|s| s.controller == label)
    }

    /// One row per trial: controller, z, r_dot_nom, z_dot_nom, e_r, e_z,
    /// seed, max_err_m (NaN for failed trials).
    pub fn write_records_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "controller", "z", "r_dot_nom", "z_dot_nom", "e_r", "e_z", "seed", "max_err_m",
        ])?;
        for r in &self.records {
            wtr.serialize((
                &r.controller,
                r.z,
                r.r_dot_nom,
                r.z_dot_nom,
                r.e_r,
                r.e_z,
                r.seed,
                r.max_err_m.unwrap_or(f64::NAN),
            ))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_records_csv(std::fs::File::create(path)?)
    }

    pub fn save_summary_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, &self.stats)?;
        Ok(())
    }
}

/// Everything a batch run needs; the JSON input format of the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchConfig {
    pub mesh: ConditionMesh,
    pub sim: SimConfig,
    pub seeds: Vec<u64>,
    pub bounds: TubeBounds,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            mesh: ConditionMesh::default(),
            sim: SimConfig::default(),
            seeds: (0..5).collect(),
            bounds: TubeBounds::default(),
        }
    }
}

impl BatchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn check_inputs(conditions: &[Condition], seeds: &[u64], config: &SimConfig) -> Result<()> {
    if conditions.is_empty() {
        return Err(Error::invalid("no conditions"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("no seeds"));
    }
    config.validate()
}

/// Runs every (condition, seed) trial for every controller. Trials run in
/// parallel on the current rayon pool; results do not depend on scheduling.
pub fn run_batch(
    conditions: &[Condition],
    controllers: &[ControllerSpec],
    seeds: &[u64],
    config: &SimConfig,
) -> Result<BatchResult> {
    check_inputs(conditions, seeds, config)?;
    if controllers.is_empty() {
        return Err(Error::invalid("no controllers"));
    }
    let mut stats = Vec::with_capacity(controllers.len());
    let mut records = Vec::with_capacity(controllers.len() * conditions.len() * seeds.len());
    for spec in controllers {
        let trials: Vec<TrialRecord> = trial_grid(conditions, seeds)
            .into_par_iter()
            .map(|(c, seed)| {
                let cfg = spec.config(config, seed);
                let mut rng = cfg.rng(c.index as u64);
                let outcome =
                    simulate_release_with_rng(&spec.controller, &c.initial, &c.target, &cfg, &mut rng)
                        .map(|tr| max_error_in_detach_window(&tr, &cfg));
                TrialRecord {
                    controller: spec.label.clone(),
                    condition: c.index,
                    z: c.z,
                    r_dot_nom: c.r_dot_nom,
                    z_dot_nom: c.z_dot_nom,
                    e_r: c.e_r,
                    e_z: c.e_z,
                    seed,
                    max_err_m: outcome.as_ref().ok().copied(),
                    error: outcome.err().map(|e| e.to_string()),
                }
            })
            .collect();
        let values: Vec<f64> = trials.iter().filter_map(|t| t.max_err_m).collect();
        let (mae, std) = mean_std(&values);
        stats.push(AggregateStats {
            controller: spec.label.clone(),
            mae,
            std,
            n_trials: trials.len(),
            n_failed: trials.len() - values.len(),
        });
        records.extend(trials);
    }
    Ok(BatchResult { stats, records })
}

fn trial_grid(conditions: &[Condition], seeds: &[u64]) -> Vec<(Condition, u64)> {
    seeds
        .iter()
        .flat_map(|&s| conditions.iter().map(move |c| (*c, s)))
        .collect()
}

/// Mean and population standard deviation, summed in slice order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Pointwise-in-time landing-error statistics over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub controller: String,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub n_trials: usize,
    pub n_failed: usize,
}

impl TraceSummary {
    /// Largest mean error over `[t0, t1]`.
    pub fn max_mean_over(&self, t0: f64, t1: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.mean)
            .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
            .map(|(_, m)| *m)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns time_s, mean_err_m, std_err_m, min_err_m, max_err_m.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_s", "mean_err_m", "std_err_m", "min_err_m", "max_err_m"])?;
        for i in 0..self.times.len() {
            wtr.serialize((self.times[i], self.mean[i], self.std[i], self.min[i], self.max[i]))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn error_trace_summary(
    conditions: &[Condition],
    spec: &ControllerSpec,
    seeds: &[u64],
    config: &SimConfig,
) -> Result<TraceSummary> {
    check_inputs(conditions, seeds, config)?;
    let traces: Vec<Option<Vec<f64>>> = trial_grid(conditions, seeds)
        .into_par_iter()
        .map(|(c, seed)| {
            let cfg = spec.config(config, seed);
            let mut rng = cfg.rng(c.index as u64);
            simulate_release_with_rng(&spec.controller, &c.initial, &c.target, &cfg, &mut rng)
                .ok()
                .map(|tr| tr.landing_errors)
        })
        .collect();
    let ok: Vec<&Vec<f64>> = traces.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::domain("every trial failed"));
    }
    let n = config.steps() + 1;
    let times: Vec<f64> = (0..n).map(|k| k as f64 * config.dt).collect();
    let mut summary = TraceSummary {
        controller: spec.label.clone(),
        times,
        mean: Vec::with_capacity(n),
        std: Vec::with_capacity(n),
        min: Vec::with_capacity(n),
        max: Vec::with_capacity(n),
        n_trials: traces.len(),
        n_failed: traces.len() - ok.len(),
    };
    let mut column = Vec::with_capacity(ok.len());
    for k in 0..n {
        column.clear();
        column.extend(ok.iter().map(|tr| tr[k]));
        let (m, s) = mean_std(&column);
        summary.mean.push(m);
        summary.std.push(s);
        summary.min.push(column.iter().copied().fold(f64::INFINITY, f64::min));
        summary.max.push(column.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(summary)
}

/// Mean landing error of the initial states; no simulation involved.
pub fn initial_mae(conditions: &[Condition], ballistics: &Ballistics) -> Result<f64> {
    let errs = conditions
        .iter()
        .map(|c| {
            Ok((ballistics.landing_position(&c.initial, c.target.z_land)? - c.target.r_target).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_std(&errs).0)
}

/// Noise-free constant-velocity MAE of the detach-window max error in
/// closed form. On the end-effector plant the state moves on a straight line,
/// so the error at step `k` is that of `(p0 + k dt v0, v0)`; on the ballistic
/// plant the landing point never moves.
pub fn constant_velocity_reference(conditions: &[Condition], config: &SimConfig) -> Result<f64> {
    config.validate()?;
    let b = Ballistics::new(config.gravity)?;
    let first = ((config.dwell / config.dt) - 1e-9).ceil() as usize;
    let errs = conditions
        .iter()
        .map(|c| {
            let err_at = |t: f64| -> Result<f64> {
                let s = FlightState {
                    r: c.initial.r + c.initial.r_dot * t,
                    z: c.initial.z + c.initial.z_dot * t,
                    ..c.initial
                };
                Ok((b.landing_position(&s, c.target.z_land)? - c.target.r_target).abs())
            };
            match config.plant {
                Plant::Ballistic => err_at(0.0),
                Plant::EndEffector => (first..=config.steps())
                    .map(|k| err_at(k as f64 * config.dt))
                    .try_fold(0.0f64, |m, e| Ok(m.max(e?))),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_std(&errs).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mesh_has_1500_conditions() {
        let mesh = ConditionMesh::default();
        assert_eq!(mesh.len(), 1500);
        assert_eq!(build_mesh(&mesh).unwrap().len(), 1500);
    }

    #[test]
    fn unperturbed_conditions_start_on_target() {
        let b = Ballistics::default();
        for c in build_mesh(&ConditionMesh::default()).unwrap() {
            if c.e_r == 0.0 && c.e_z == 0.0 {
                let land = b.landing_position(&c.initial, 0.0).unwrap();
                assert_eq!(land, c.target.r_target);
            }
        }
    }

    #[test]
    fn nominal_target_for_mid_height() {
        let mesh = build_mesh(&ConditionMesh::default()).unwrap();
        let c = mesh
            .iter()
            .find(|c| c.z == 1.0 && c.r_dot_nom == 7.0 && c.z_dot_nom == 2.0)
            .unwrap();
        // integration oracle: 4.895034 m
        assert!((c.target.r_target - 4.895034).abs() < 1e-6);
    }

    #[test]
    fn rejects_empty_axis() {
        let mesh = ConditionMesh {
            heights: vec![],
            ..ConditionMesh::default()
        };
        assert!(build_mesh(&mesh).is_err());
    }

    #[test]
    fn mean_std_is_population() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    fn tiny_mesh() -> Vec<Condition> {
        build_mesh(&ConditionMesh {
            heights: vec![1.0],
            r_dots: vec![6.0, 8.0],
            z_dots: vec![2.0],
            r_error_ratios: vec![-0.1, 0.1],
            z_error_ratios: vec![0.05],
        })
        .unwrap()
    }

    #[test]
    fn batch_is_reproducible_and_pool_independent() {
        let mesh = tiny_mesh();
        let ctrls = ControllerSpec::table4(TubeBounds::default());
        let cfg = SimConfig::default();
        let a = run_batch(&mesh, &ctrls, &[3], &cfg).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_batch(&mesh, &ctrls, &[3], &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.stats[0].n_trials, 4);
        assert_eq!(a.records.len(), 16);
    }

    #[test]
    fn trace_summary_starts_at_initial_mae() {
        let mesh = tiny_mesh();
        let cfg = SimConfig::default();
        let s = error_trace_summary(&mesh, &ControllerSpec::constant_velocity(), &[0, 1], &cfg).unwrap();
        let expect = initial_mae(&mesh, &Ballistics::default()).unwrap();
        assert!((s.mean[0] - expect).abs() < 1e-15);
        assert!(s.std[0] >= 0.0);
        assert_eq!(s.times.len(), 101);
    }
}
