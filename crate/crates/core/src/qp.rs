//! Exact solver for two-variable box-constrained strictly convex QPs.
//!
//! Minimizes `1/2 x'Hx + c'x` subject to `lo <= x <= hi`. With two variables
//! each bound is either inactive, active at its lower end, or active at its
//! upper end, so the KKT point lies on one of nine faces (interior, four
//! edges, four corners). Every face's stationary point is computed in closed
//! form and the feasible one with the smallest objective is returned. No
//! iteration and no allocation.

use serde::{Deserialize, Serialize};

use crate::bounds::Box2;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Active {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxQp2 {
    pub h: [[f64; 2]; 2],
    pub c: [f64; 2],
    pub bounds: Box2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSolution {
    pub x: [f64; 2],
    pub objective: f64,
    pub active: [Active; 2],
}

const FACES: [Active; 3] = [Active::Free, Active::Lower, Active::Upper];

impl BoxQp2 {
    /// `h` must be symmetric positive definite and the box nonempty.
    pub fn new(h: [[f64; 2]; 2], c: [f64; 2], bounds: Box2) -> Result<Self> {
        if h[0][1] != h[1][0] {
            return Err(Error::invalid("QP Hessian is not symmetric"));
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if !(h[0][0] > 0.0 && det > 0.0) {
            return Err(Error::invalid("QP Hessian is not positive definite"));
        }
        if !c.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("QP linear term is not finite"));
        }
        bounds_nonempty(&bounds)?;
        Ok(BoxQp2 { h, c, bounds })
    }

    pub fn objective(&self, x: [f64; 2]) -> f64 {
        let hx = self.hx(x);
        0.5 * (x[0] * hx[0] + x[1] * hx[1]) + self.c[0] * x[0] + self.c[1] * x[1]
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let hx = self.hx(x);
        [hx[0] + self.c[0], hx[1] + self.c[1]]
    }

    fn hx(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.h[0][0] * x[0] + self.h[0][1] * x[1],
            self.h[1][0] * x[0] + self.h[1][1] * x[1],
        ]
    }

    pub fn solve(&self) -> Result<QpSolution> {
        bounds_nonempty(&self.bounds)?;
        let mut best: Option<QpSolution> = None;
        for a0 in FACES {
            for a1 in FACES {
                let active = [a0, a1];
                let Some(x) = self.face_stationary_point(active) else {
                    continue;
                };
                if !self.bounds.contains_tol(x, feas_tol(x)) {
                    continue;
                }
                let x = self.bounds.clamp(x);
                let objective = self.objective(x);
                if best.is_none_or(|b| objective < b.objective) {
                    best = Some(QpSolution {
                        x,
                        objective,
                        active,
                    });
                }
            }
        }
        // The free face always yields a point when the box is unbounded, and
        // every corner is finite otherwise, so some face is feasible.
        best.ok_or_else(|| Error::EmptyBox("no feasible face (non-finite data)".into()))
    }

    fn face_stationary_point(&self, active: [Active; 2]) -> Option<[f64; 2]> {
        let fixed = |i: usize| -> Option<Option<f64>> {
            let iv = self.bounds.axis(i);
            match active[i] {
                Active::Free => Some(None),
                Active::Lower => iv.lo.is_finite().then_some(Some(iv.lo)),
                Active::Upper => iv.hi.is_finite().then_some(Some(iv.hi)),
            }
        };
        let (f0, f1) = (fixed(0)?, fixed(1)?);
        let (h, c) = (&self.h, &self.c);
        let x = match (f0, f1) {
            (Some(x0), Some(x1)) => [x0, x1],
            (Some(x0), None) => [x0, -(c[1] + h[1][0] * x0) / h[1][1]],
            (None, Some(x1)) => [-(c[0] + h[0][1] * x1) / h[0][0], x1],
            (None, None) => {
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                [
                    (-c[0] * h[1][1] + c[1] * h[0][1]) / det,
                    (-c[1] * h[0][0] + c[0] * h[1][0]) / det,
                ]
            }
        };
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    /// Natural KKT residual `|x - P(x - grad f(x))|_inf`, plus any bound
    /// violation. Zero exactly at the constrained minimizer.
    pub fn kkt_residual(&self, x: [f64; 2]) -> f64 {
        let g = self.gradient(x);
        let step = self.bounds.clamp([x[0] - g[0], x[1] - g[1]]);
        let stationarity = (x[0] - step[0]).abs().max((x[1] - step[1]).abs());
        let p = self.bounds.clamp(x);
        let infeas = (x[0] - p[0]).abs().max((x[1] - p[1]).abs());
        stationarity.max(infeas)
    }
}

fn bounds_nonempty(b: &Box2) -> Result<()> {
    if b.is_empty() {
        return Err(Error::EmptyBox(format!(
            "r in [{}, {}], z in [{}, {}]",
            b.r.lo, b.r.hi, b.z.lo, b.z.hi
        )));
    }
    Ok(())
}

fn feas_tol(x: [f64; 2]) -> f64 {
    1e-12 * (1.0 + x[0].abs().max(x[1].abs()))
}
