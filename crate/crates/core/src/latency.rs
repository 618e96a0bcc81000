//! Latency benchmark for assembling and solving tube programs.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ballistics::TargetSpec;
use crate::error::{Error, Result};
use crate::experiments::{build_mesh, ConditionMesh};
use crate::tube::{EeMeasurement, SolveStatus, TubeBounds, TubeSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub ee: EeMeasurement,
    pub target: TargetSpec,
    pub time_to_go: f64,
}

/// Problems drawn around the default mesh: a random condition, a random
/// instant of the release window along its straight-line path, and a random
/// velocity offset of up to 0.5 m/s per axis.
pub fn random_instances(n: usize, seed: u64) -> Result<Vec<BenchInstance>> {
    let mesh = build_mesh(&ConditionMesh::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let c = &mesh[rng.random_range(0..mesh.len())];
            let t: f64 = rng.random_range(0.0..0.1);
            let s = c.initial;
            BenchInstance {
                ee: EeMeasurement {
                    p: [s.r + s.r_dot * t, s.z + s.z_dot * t],
                    v: [
                        s.r_dot + rng.random_range(-0.5..0.5),
                        s.z_dot + rng.random_range(-0.5..0.5),
                    ],
                },
                target: c.target,
                time_to_go: (0.1 - t).max(0.0025),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub n: usize,
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    pub max_us: f64,
    pub non_optimal: usize,
    /// Hash of every returned command; equal across reruns with one seed.
    pub solution_hash: u64,
}

/// Times `assemble + solve` on each instance individually.
pub fn run_benchmark(instances: &[BenchInstance], bounds: &TubeBounds) -> Result<LatencyReport> {
    if instances.is_empty() {
        return Err(Error::invalid("no benchmark instances"));
    }
    let solver = TubeSolver::default();
    let mut samples = Vec::with_capacity(instances.len());
    let mut hasher = DefaultHasher::new();
    let mut non_optimal = 0;
    for inst in instances {
        let start = Instant::now();
        let sol = solver
            .assemble(&inst.ee, inst.time_to_go, &inst.target, bounds)
            .and_then(|p| solver.solve(&p));
        let elapsed = start.elapsed();
        samples.push(elapsed.as_secs_f64() * 1e6);
        match sol {
            Ok(s) if s.status == SolveStatus::Optimal => {
                s.a_tube[0].to_bits().hash(&mut hasher);
                s.a_tube[1].to_bits().hash(&mut hasher);
            }
            _ => {
                non_optimal += 1;
                u64::MAX.hash(&mut hasher);
            }
        }
    }
    samples.sort_by(f64::total_cmp);
    let pct = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
    Ok(LatencyReport {
        n: samples.len(),
        p50_us: pct(0.50),
        p90_us: pct(0.90),
        p99_us: pct(0.99),
        mean_us: samples.iter().sum::<f64>() / samples.len() as f64,
        max_us: *samples.last().unwrap(),
        non_optimal,
        solution_hash: hasher.finish(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_report() {
        let inst = random_instances(1, 0).unwrap();
        let r = run_benchmark(&inst, &TubeBounds::default()).unwrap();
        assert_eq!(r.n, 1);
        assert_eq!(r.p50_us, r.p99_us);
        assert_eq!(r.non_optimal, 0);
    }

    #[test]
    fn fixed_seed_gives_identical_solutions() {
        let a = run_benchmark(&random_instances(500, 9).unwrap(), &TubeBounds::default()).unwrap();
        let b = run_benchmark(&random_instances(500, 9).unwrap(), &TubeBounds::default()).unwrap();
        assert_eq!(a.solution_hash, b.solution_hash);
        let c = run_benchmark(&random_instances(500, 10).unwrap(), &TubeBounds::default()).unwrap();
        assert_ne!(a.solution_hash, c.solution_hash);
    }

    #[test]
    fn median_is_below_one_millisecond() {
        let r = run_benchmark(&random_instances(2000, 1).unwrap(), &TubeBounds::default()).unwrap();
        assert!(r.p50_us < 1000.0, "{r:?}");
    }
}
