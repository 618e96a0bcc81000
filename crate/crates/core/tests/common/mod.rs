//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use pullback_core::ballistics::STANDARD_GRAVITY;
use pullback_core::qp::BoxQp2;
use pullback_core::{FlightState, TargetSpec};

fn rk4_step(y: [f64; 4], h: f64) -> [f64; 4] {
    // y = (r, z, r_dot, z_dot), y' = (r_dot, z_dot, 0, -g)
    let f = |y: [f64; 4]| [y[2], y[3], 0.0, -STANDARD_GRAVITY];
    let add = |a: [f64; 4], b: [f64; 4], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]];
    let k1 = f(y);
    let k2 = f(add(y, k1, h / 2.0));
    let k3 = f(add(y, k2, h / 2.0));
    let k4 = f(add(y, k3, h));
    let mut out = y;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// RK4 integration of unforced flight until the descending crossing of
/// `z_land`, located by bisection on the step length. Returns the landing
/// position, or `None` if the state never reaches `z_land` from above.
pub fn ode_landing(s: &FlightState, z_land: f64, h: f64) -> Option<f64> {
    let mut y = [s.r, s.z, s.r_dot, s.z_dot];
    loop {
        let next = rk4_step(y, h);
        if next[1] < z_land && next[3] < 0.0 {
            if y[1] < z_land {
                // apex below the landing height
                return None;
            }
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if rk4_step(y, mid)[1] >= z_land {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(rk4_step(y, 0.5 * (lo + hi))[0]);
        }
        y = next;
    }
}

/// BRT membership written directly from the definition, using the ODE oracle.
pub fn brt_oracle(s: &FlightState, target: &TargetSpec) -> bool {
    let Some(r_land) = ode_landing(s, target.z_land, 1e-3) else {
        return false;
    };
    if (r_land - target.r_target).abs() > target.r_slack {
        return false;
    }
    match &target.v_land_box {
        None => true,
        Some(b) => {
            // vertical landing speed from energy conservation
            let vz = -(s.z_dot * s.z_dot + 2.0 * STANDARD_GRAVITY * (s.z - target.z_land)).sqrt();
            b.r.contains(s.r_dot) && b.z.contains(vz)
        }
    }
}

/// Best point of an `n x n` grid over a bounded box.
pub fn grid_argmin(qp: &BoxQp2, n: usize) -> ([f64; 2], f64) {
    let b = &qp.bounds;
    let mut best = ([0.0; 2], f64::INFINITY);
    for i in 0..n {
        let x0 = b.r.lo + (b.r.hi - b.r.lo) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let x1 = b.z.lo + (b.z.hi - b.z.lo) * j as f64 / (n - 1) as f64;
            let x = [x0, x1];
            let f = qp.objective(x);
            if f < best.1 {
                best = (x, f);
            }
        }
    }
    best
}

/// Largest violation of stationarity, dual sign and primal feasibility,
/// computed from the gradient directly.
pub fn kkt_violation(qp: &BoxQp2, x: [f64; 2]) -> f64 {
    let g = [
        qp.h[0][0] * x[0] + qp.h[0][1] * x[1] + qp.c[0],
        qp.h[1][0] * x[0] + qp.h[1][1] * x[1] + qp.c[1],
    ];
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        let iv = qp.bounds.axis(i);
        worst = worst.max(iv.lo - x[i]).max(x[i] - iv.hi);
        let v = if x[i] == iv.lo && x[i] == iv.hi {
            0.0
        } else if x[i] == iv.lo {
            (-g[i]).max(0.0)
        } else if x[i] == iv.hi {
            g[i].max(0.0)
        } else {
            g[i].abs()
        };
        worst = worst.max(v);
    }
    worst
}
