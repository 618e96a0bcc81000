//! Subcommand implementations for the `pullback` binary.

pub mod args;

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use pullback_core::ballistics::Ballistics;
use pullback_core::experiments::{
    build_mesh, error_trace_summary, run_batch, BatchConfig, BatchResult, ConditionMesh,
    ControllerSpec,
};
use pullback_core::latency::{random_instances, run_benchmark};
use pullback_core::sim::{max_error_in_detach_window, simulate_release, SimConfig};
use pullback_core::tube::{SolveStatus, TubeBounds, TubeSolution, TubeSolver};
use pullback_core::{EeMeasurement, FlightState, TargetSpec};

use args::{BatchArgs, BenchArgs, Cli, Command, SimulateArgs, SolveArgs, TraceArgs};

/// Exit status for domain errors, empty boxes and bad input.
pub const EXIT_FAILURE: i32 = 2;

pub fn run(cli: Cli) -> Result<i32> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Batch(a) => cmd_batch(&a, false),
        Command::ReproduceTable4(a) => cmd_batch(&a, true),
        Command::Trace(a) => cmd_trace(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub a_tube_mps2: [f64; 2],
    pub predicted_r_land_m: f64,
    pub objective_m2: f64,
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_time_s: Option<f64>,
}

impl SolveOutput {
    pub fn new(s: &TubeSolution, with_timing: bool) -> Self {
        SolveOutput {
            a_tube_mps2: s.a_tube,
            predicted_r_land_m: s.predicted_r_land,
            objective_m2: s.objective,
            status: s.status,
            solve_time_s: with_timing.then_some(s.solve_time.as_secs_f64()),
        }
    }
}

fn cmd_solve(a: &SolveArgs) -> Result<i32> {
    let mut bounds = TubeBounds::default();
    a.bounds.apply(&mut bounds);
    let ee = EeMeasurement::new([a.r, a.z], [a.r_dot, a.z_dot])?;
    let target = TargetSpec::new(a.r_target, a.z_land, a.slack)?;
    let solver = TubeSolver::default();
    let problem = solver.assemble(&ee, a.time_to_go, &target, &bounds)?;
    let sol = solver.solve(&problem)?;
    println!("{}", serde_json::to_string_pretty(&SolveOutput::new(&sol, !a.omit_timing))?);
    Ok(0)
}

/// Parses `constant`, `constant-velocity`, `pullback` or `pullback@<Hz>`.
pub fn parse_controller(name: &str, default_freq: f64, bounds: TubeBounds) -> Result<ControllerSpec> {
    let name = name.trim();
    match name {
        "constant" | "constant-velocity" => Ok(ControllerSpec {
            control_freq: default_freq,
            ..ControllerSpec::constant_velocity()
        }),
        "pullback" => Ok(ControllerSpec::pullback(default_freq, bounds)),
        _ => match name.strip_prefix("pullback@") {
            Some(f) => {
                let freq: f64 = f
                    .trim_end_matches("Hz")
                    .trim_end_matches("hz")
                    .parse()
                    .with_context(|| format!("bad controller frequency in {name:?}"))?;
                Ok(ControllerSpec::pullback(freq, bounds))
            }
            None => bail!("unknown controller {name:?} (expected constant, pullback or pullback@<Hz>)"),
        },
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let mut cfg = SimConfig {
        seed: a.seed,
        ..SimConfig::default()
    };
    a.sim.apply(&mut cfg);
    let mut bounds = TubeBounds::default();
    a.bounds.apply(&mut bounds);
    let spec = parse_controller(&a.controller, cfg.control_freq, bounds)?;
    cfg.control_freq = spec.control_freq;

    let b = Ballistics::new(cfg.gravity)?;
    let r_target = match a.r_target {
        Some(r) => r,
        None => b.landing_position(&FlightState::new(0.0, a.z, a.r_dot_nom, a.z_dot_nom)?, 0.0)?,
    };
    let target = TargetSpec::new(r_target, 0.0, 0.25)?;
    let initial = FlightState::new(0.0, a.z, a.r_dot, a.z_dot)?;
    let trace = simulate_release(&spec.controller, &initial, &target, &cfg)?;

    let path = a.out.clone().unwrap_or_else(|| a.out_dir.join("trace.csv"));
    ensure_parent(&path)?;
    trace.save_csv(&path)?;
    let summary = serde_json::json!({
        "controller": spec.label,
        "r_target_m": r_target,
        "initial_error_m": trace.landing_errors[0],
        "final_error_m": trace.landing_errors.last(),
        "max_error_in_detach_window_m": max_error_in_detach_window(&trace, &cfg),
        "trace_csv": path,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn load_batch_config(config: Option<&Path>, mesh: Option<&Path>, seeds: Option<u64>) -> Result<BatchConfig> {
    let mut bc = match config {
        Some(p) => BatchConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => BatchConfig::default(),
    };
    if let Some(p) = mesh {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        bc.mesh = serde_json::from_str::<ConditionMesh>(&text)
            .with_context(|| format!("parsing {}", p.display()))?;
    }
    if let Some(n) = seeds {
        bc.seeds = (0..n).collect();
    }
    Ok(bc)
}

fn cmd_batch(a: &BatchArgs, table: bool) -> Result<i32> {
    let mut bc = load_batch_config(a.config.as_deref(), a.mesh.as_deref(), a.seeds)?;
    a.sim.apply(&mut bc.sim);
    a.bounds.apply(&mut bc.bounds);
    let controllers = if a.controller.is_empty() {
        ControllerSpec::table4(bc.bounds)
    } else {
        a.controller
            .iter()
            .map(|c| parse_controller(c, bc.sim.control_freq, bc.bounds))
            .collect::<Result<_>>()?
    };
    let conditions = build_mesh(&bc.mesh)?;
    let result = run_batch(&conditions, &controllers, &bc.seeds, &bc.sim)?;

    fs::create_dir_all(&a.out_dir)?;
    let trials = a.out_dir.join("trials.csv");
    let summary = a.out_dir.join("summary.json");
    result.save_records_csv(&trials)?;
    result.save_summary_json(&summary)?;

    let mut out = io::stdout().lock();
    if table {
        print_table(&mut out, &result)?;
    } else {
        writeln!(out, "{}", serde_json::to_string_pretty(&result.stats)?)?;
    }
    writeln!(out, "trials: {}", trials.display())?;
    writeln!(out, "summary: {}", summary.display())?;
    let failed: usize = result.stats.iter().map(|s| s.n_failed).sum();
    if failed > 0 {
        writeln!(out, "warning: {failed} trials failed; statistics cover the remaining trials")?;
    }
    Ok(0)
}

pub fn print_table<W: Write>(w: &mut W, result: &BatchResult) -> io::Result<()> {
    writeln!(w, "{:<24} {:>26} {:>22} {:>8}", "release motion command", "max landing error [cm]", "MAE / std [m]", "trials")?;
    for s in &result.stats {
        writeln!(
            w,
            "{:<24} {:>26} {:>22} {:>8}",
            s.controller,
            format!("{:.1} (+-{:.1})", 100.0 * s.mae, 100.0 * s.std),
            format!("{:.4} / {:.4}", s.mae, s.std),
            s.n_trials
        )?;
    }
    Ok(())
}

fn cmd_trace(a: &TraceArgs) -> Result<i32> {
    let mut bc = load_batch_config(a.config.as_deref(), None, a.seeds)?;
    a.sim.apply(&mut bc.sim);
    a.bounds.apply(&mut bc.bounds);
    let spec = parse_controller(&a.controller, bc.sim.control_freq, bc.bounds)?;
    let conditions: Vec<_> = build_mesh(&bc.mesh)?
        .into_iter()
        .filter(|c| a.select_z.is_none_or(|v| c.z == v))
        .filter(|c| a.select_r_dot.is_none_or(|v| c.r_dot_nom == v))
        .filter(|c| a.select_z_dot.is_none_or(|v| c.z_dot_nom == v))
        .collect();
    if conditions.is_empty() {
        bail!("condition selector matches no mesh entry");
    }
    let summary = error_trace_summary(&conditions, &spec, &bc.seeds, &bc.sim)?;
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            summary.write_csv(fs::File::create(p)?)?;
        }
        None => summary.write_csv(io::stdout().lock())?,
    }
    Ok(0)
}

fn cmd_bench(a: &BenchArgs) -> Result<i32> {
    let instances = random_instances(a.n, a.seed)?;
    let report = run_benchmark(&instances, &TubeBounds::default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.p50_us >= 1000.0 {
        eprintln!("p50 latency {:.1} us exceeds 1 ms", report.p50_us);
        return Ok(1);
    }
    Ok(0)
}

fn ensure_parent(p: &Path) -> Result<()> {
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controller_names() {
        let b = TubeBounds::default();
        assert_eq!(parse_controller("constant", 400.0, b).unwrap().label, "constant-velocity");
        assert_eq!(parse_controller("pullback", 200.0, b).unwrap().control_freq, 200.0);
        assert_eq!(parse_controller("pullback@100Hz", 400.0, b).unwrap().control_freq, 100.0);
        assert!(parse_controller("pullback@fast", 400.0, b).is_err());
        assert!(parse_controller("lqr", 400.0, b).is_err());
    }
}
