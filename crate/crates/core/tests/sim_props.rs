use proptest::prelude::*;

use pullback_core::ballistics::landing_position;
use pullback_core::experiments::{
    build_mesh, constant_velocity_reference, run_batch, ConditionMesh, ControllerSpec,
};
use pullback_core::sim::{simulate_release, Controller, Plant, SimConfig};
use pullback_core::tube::TubeBounds;
use pullback_core::{FlightState, TargetSpec};

fn quiet(plant: Plant) -> SimConfig {
    SimConfig {
        noise_std: 0.0,
        plant,
        ..SimConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn unforced_flight_keeps_landing_error(
        z in 0.3..2.0f64, rd in 1.0..10.0f64, zd in -1.0..5.0f64, r_target in 0.0..10.0f64,
    ) {
        let s = FlightState::new(0.0, z, rd, zd).unwrap();
        let target = TargetSpec::new(r_target, 0.0, 0.25).unwrap();
        let tr = simulate_release(&Controller::ConstantVelocity, &s, &target, &quiet(Plant::Ballistic)).unwrap();
        let e0 = tr.landing_errors[0];
        for e in &tr.landing_errors {
            prop_assert!((e - e0).abs() < 1e-11);
        }
    }

    #[test]
    fn halving_dt_keeps_final_error(
        z in 0.3..2.0f64, rd in 1.0..10.0f64, zd in 0.0..5.0f64, ballistic in any::<bool>(),
    ) {
        let plant = if ballistic { Plant::Ballistic } else { Plant::EndEffector };
        let s = FlightState::new(0.0, z, rd, zd).unwrap();
        let target = TargetSpec::new(landing_position(&s, 0.0).unwrap() + 0.3, 0.0, 0.25).unwrap();
        let coarse = simulate_release(&Controller::ConstantVelocity, &s, &target, &quiet(plant)).unwrap();
        let fine_cfg = SimConfig { dt: 0.0005, ..quiet(plant) };
        let fine = simulate_release(&Controller::ConstantVelocity, &s, &target, &fine_cfg).unwrap();
        prop_assert_eq!(fine.landing_errors.len(), 201);
        let d = (coarse.landing_errors.last().unwrap() - fine.landing_errors.last().unwrap()).abs();
        prop_assert!(d < 1e-6, "{}", d);
    }
}

#[test]
fn times_step_uniformly() {
    let s = FlightState::new(0.0, 1.0, 7.0, 2.0).unwrap();
    let target = TargetSpec::new(5.0, 0.0, 0.25).unwrap();
    let tr = simulate_release(&Controller::pullback(), &s, &target, &SimConfig::default()).unwrap();
    assert_eq!(tr.times.len(), tr.states.len());
    assert_eq!(tr.times.len(), tr.landing_errors.len());
    for (k, t) in tr.times.iter().enumerate() {
        assert_eq!(*t, k as f64 * 0.001);
    }
}

#[test]
fn noise_free_constant_velocity_batch_matches_closed_form() {
    let mesh = build_mesh(&ConditionMesh::default()).unwrap();
    for plant in [Plant::EndEffector, Plant::Ballistic] {
        let cfg = quiet(plant);
        let sim = run_batch(&mesh, &[ControllerSpec::constant_velocity()], &[0], &cfg).unwrap();
        let closed = constant_velocity_reference(&mesh, &cfg).unwrap();
        let mae = sim.stats[0].mae;
        assert!((mae - closed).abs() < 1e-9, "{plant:?}: {mae} vs {closed}");
    }
}

#[test]
fn pullback_beats_constant_velocity_by_factor_two() {
    let mesh = build_mesh(&ConditionMesh::default()).unwrap();
    let res = run_batch(
        &mesh,
        &ControllerSpec::table4(TubeBounds::default()),
        &[0, 1, 2, 3, 4],
        &SimConfig::default(),
    )
    .unwrap();
    let cv = res.stats[0].mae;
    for s in &res.stats[1..] {
        assert!(2.0 * s.mae <= cv, "{} {} vs {}", s.controller, s.mae, cv);
    }
}

#[test]
fn batch_rerun_and_thread_count_are_irrelevant() {
    let mesh = build_mesh(&ConditionMesh {
        heights: vec![0.5, 1.5],
        r_dots: vec![5.0, 9.0],
        z_dots: vec![1.0, 4.0],
        ..ConditionMesh::default()
    })
    .unwrap();
    let ctrls = ControllerSpec::table4(TubeBounds::default());
    let cfg = SimConfig::default();
    let once = run_batch(&mesh, &ctrls, &[2], &cfg).unwrap();
    let twice = run_batch(&mesh, &ctrls, &[2], &cfg).unwrap();
    assert_eq!(once.stats, twice.stats);
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let r = pool.install(|| run_batch(&mesh, &ctrls, &[2], &cfg).unwrap());
        assert_eq!(r, once);
    }
}
