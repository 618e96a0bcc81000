use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pullback_core::bounds::Interval;
use pullback_core::sim::{NoiseMode, Plant, SimConfig};
use pullback_core::tube::TubeBounds;

pub const MESH_HELP: &str = "\
Default condition mesh (1500 initial states):
  nominal EE height z [m]      {0.5, 1.0, 1.5}
  nominal EE r_dot [m/s]       {5, 6, 7, 8, 9}
  nominal EE z_dot [m/s]       {1, 2, 3, 4}
  r_dot error ratios           {-10%, -5%, 0%, 5%, 10%}
  z_dot error ratios           {-10%, -5%, 0%, 5%, 10%}
Targets are the nominal landing points at ground level (z_land = 0), release at r = 0.
Default simulation: dt 1 ms, window 100 ms, dwell 50 ms, noise 2 m/s^2 per axis per step,
seeds 0..4, a_tube in [-40, 40]^2 m/s^2, v_T radial in [0, 15], vertical in [-10, 10] m/s.";

#[derive(Debug, Parser)]
#[command(name = "pullback", version, about = "Pullback tube acceleration: solve, simulate, reproduce")]
pub struct Cli {
    /// Worker threads for batch runs (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one tube program and print the command as JSON.
    Solve(SolveArgs),
    /// Simulate one release window and write its trace CSV.
    Simulate(SimulateArgs),
    /// Run a batch over the condition mesh and write trial CSV + summary JSON.
    #[command(after_help = MESH_HELP)]
    Batch(BatchArgs),
    /// Run the profiling table (constant velocity, pullback at 100/200/400 Hz).
    #[command(name = "reproduce-table4", after_help = MESH_HELP)]
    ReproduceTable4(BatchArgs),
    /// Pointwise-in-time landing error statistics as CSV.
    #[command(after_help = MESH_HELP)]
    Trace(TraceArgs),
    /// Time assemble + solve on random mesh-derived problems.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseModeArg {
    PerStep,
    PerTick,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlantArg {
    EndEffector,
    Ballistic,
}

/// Overrides on top of the simulation defaults or a config file.
#[derive(Debug, Args, Default)]
pub struct SimArgs {
    /// Integration step [s] (default 0.001).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Controller rate [Hz] (default 400).
    #[arg(long)]
    pub control_freq: Option<f64>,
    /// Actuation noise std per axis [m/s^2] (default 2.0).
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Gripper dwell [s] (default 0.05).
    #[arg(long)]
    pub dwell: Option<f64>,
    /// Release window [s] (default 0.1).
    #[arg(long)]
    pub window: Option<f64>,
    /// Noise application (default per-step).
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseModeArg>,
    /// Plant model (default end-effector).
    #[arg(long, value_enum)]
    pub plant: Option<PlantArg>,
}

impl SimArgs {
    pub fn apply(&self, cfg: &mut SimConfig) {
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.control_freq {
            cfg.control_freq = v;
        }
        if let Some(v) = self.noise_std {
            cfg.noise_std = v;
        }
        if let Some(v) = self.dwell {
            cfg.dwell = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(m) = self.noise_mode {
            cfg.noise_mode = match m {
                NoiseModeArg::PerStep => NoiseMode::PerStep,
                NoiseModeArg::PerTick => NoiseMode::PerTick,
            };
        }
        if let Some(p) = self.plant {
            cfg.plant = match p {
                PlantArg::EndEffector => Plant::EndEffector,
                PlantArg::Ballistic => Plant::Ballistic,
            };
        }
    }
}

/// Acceleration and terminal-velocity limits.
#[derive(Debug, Args, Default)]
pub struct BoundsArgs {
    /// Radial acceleration lower bound [m/s^2] (default -40).
    #[arg(long, allow_negative_numbers = true)]
    pub a_r_min: Option<f64>,
    /// Radial acceleration upper bound [m/s^2] (default 40).
    #[arg(long, allow_negative_numbers = true)]
    pub a_r_max: Option<f64>,
    /// Vertical acceleration lower bound [m/s^2] (default -40).
    #[arg(long, allow_negative_numbers = true)]
    pub a_z_min: Option<f64>,
    /// Vertical acceleration upper bound [m/s^2] (default 40).
    #[arg(long, allow_negative_numbers = true)]
    pub a_z_max: Option<f64>,
    /// Terminal radial velocity lower bound [m/s] (default 0).
    #[arg(long, allow_negative_numbers = true)]
    pub v_r_min: Option<f64>,
    /// Terminal radial velocity upper bound [m/s] (default 15).
    #[arg(long, allow_negative_numbers = true)]
    pub v_r_max: Option<f64>,
    /// Terminal vertical velocity lower bound [m/s] (default -10).
    #[arg(long, allow_negative_numbers = true)]
    pub v_z_min: Option<f64>,
    /// Terminal vertical velocity upper bound [m/s] (default 10).
    #[arg(long, allow_negative_numbers = true)]
    pub v_z_max: Option<f64>,
    /// Command vertical acceleration only.
    #[arg(long)]
    pub vertical_only: bool,
}

impl BoundsArgs {
    pub fn apply(&self, b: &mut TubeBounds) {
        let set = |iv: &mut Interval, lo: Option<f64>, hi: Option<f64>| {
            if let Some(v) = lo {
                iv.lo = v;
            }
            if let Some(v) = hi {
                iv.hi = v;
            }
        };
        set(&mut b.a_bounds.r, self.a_r_min, self.a_r_max);
        set(&mut b.a_bounds.z, self.a_z_min, self.a_z_max);
        set(&mut b.v_bounds.r, self.v_r_min, self.v_r_max);
        set(&mut b.v_bounds.z, self.v_z_min, self.v_z_max);
        b.vertical_only |= self.vertical_only;
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// EE radial position [m].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub r: f64,
    /// EE height [m].
    #[arg(long, allow_negative_numbers = true)]
    pub z: f64,
    /// EE radial velocity [m/s].
    #[arg(long)]
    pub r_dot: f64,
    /// EE vertical velocity [m/s].
    #[arg(long, allow_negative_numbers = true)]
    pub z_dot: f64,
    /// Target landing position [m].
    #[arg(long, allow_negative_numbers = true)]
    pub r_target: f64,
    /// Landing height [m].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub z_land: f64,
    /// Landing position slack [m].
    #[arg(long, default_value_t = 0.25)]
    pub slack: f64,
    /// Time left in the release window [s].
    #[arg(long, default_value_t = 0.1)]
    pub time_to_go: f64,
    /// Leave solve_time_s out of the output (for reproducible files).
    #[arg(long)]
    pub omit_timing: bool,
    #[command(flatten)]
    pub bounds: BoundsArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Controller: constant, pullback or pullback@<Hz>.
    #[arg(long, default_value = "pullback")]
    pub controller: String,
    /// Initial height [m].
    #[arg(long, default_value_t = 1.0)]
    pub z: f64,
    /// Initial radial velocity [m/s].
    #[arg(long, default_value_t = 7.7)]
    pub r_dot: f64,
    /// Initial vertical velocity [m/s].
    #[arg(long, default_value_t = 2.2, allow_negative_numbers = true)]
    pub z_dot: f64,
    /// Target landing position [m] (default: landing point of the nominal state).
    #[arg(long)]
    pub r_target: Option<f64>,
    /// Nominal radial velocity defining the default target [m/s].
    #[arg(long, default_value_t = 7.0)]
    pub r_dot_nom: f64,
    /// Nominal vertical velocity defining the default target [m/s].
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub z_dot_nom: f64,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trace CSV path (default: <out-dir>/trace.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "PULLBACK_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub bounds: BoundsArgs,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// JSON config with optional mesh, sim, seeds and bounds fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON condition mesh replacing the config's mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Use seeds 0..N (default 5).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Controllers, comma separated: constant, pullback@100, pullback@200, pullback@400.
    /// Defaults to all four.
    #[arg(long, value_delimiter = ',')]
    pub controller: Vec<String>,
    /// Output directory for trials.csv and summary.json.
    #[arg(long, env = "PULLBACK_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub bounds: BoundsArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Controller: constant, pullback or pullback@<Hz>.
    #[arg(long, default_value = "pullback@400")]
    pub controller: String,
    /// JSON config with optional mesh, sim, seeds and bounds fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Only conditions with this nominal height [m].
    #[arg(long = "select-z")]
    pub select_z: Option<f64>,
    /// Only conditions with this nominal radial velocity [m/s].
    #[arg(long = "select-r-dot")]
    pub select_r_dot: Option<f64>,
    /// Only conditions with this nominal vertical velocity [m/s].
    #[arg(long = "select-z-dot")]
    pub select_z_dot: Option<f64>,
    /// Use seeds 0..N (default 5).
    #[arg(long)]
    pub seeds: Option<u64>,
    /// CSV path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub bounds: BoundsArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Number of problems.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Problem generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
