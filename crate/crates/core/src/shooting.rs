//! Return-condition residual for the two families.
//!
//! Starting from `r1 = x1, r2 = x2, theta = beta = 0, dr1 = dr2 = 0,
//! dtheta = x3, dbeta = x4` with mass `m2`, the reduced system is
//! integrated to `T` and compared against the same state up to a rotation
//! and a relabeling of equal-mass bodies.

use crate::dynamics::{embed_cartesian, CartesianState, Problem, ReducedState};
use crate::integrator::{integrate_reduced, IntegrationFailure, IntegratorConfig, ReducedSystem};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_6, PI};
use thiserror::Error;

/// The six unknowns searched by the solver, in solver order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unknowns {
    /// Initial `r1`.
    pub x1: f64,
    /// Initial `r2`.
    pub x2: f64,
    /// Initial `dtheta`.
    pub x3: f64,
    /// Initial `dbeta`.
    pub x4: f64,
    pub m2: f64,
    /// Return time.
    pub period: f64,
}

impl Unknowns {
    pub const DIM: usize = 6;

    pub fn to_array(&self) -> [f64; 6] {
        [self.x1, self.x2, self.x3, self.x4, self.m2, self.period]
    }

    pub fn from_slice(z: &[f64]) -> Self {
        assert_eq!(z.len(), Self::DIM, "unknown vector has 6 components");
        Unknowns {
            x1: z[0],
            x2: z[1],
            x3: z[2],
            x4: z[3],
            m2: z[4],
            period: z[5],
        }
    }

    /// Finite with positive radii, mass and return time.
    pub fn is_admissible(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
            && self.x1 > 0.0
            && self.x2 > 0.0
            && self.m2 > 0.0
            && self.period > 0.0
    }

    pub fn initial_state(&self) -> ReducedState {
        ReducedState {
            r1: self.x1,
            r2: self.x2,
            theta: 0.0,
            beta: 0.0,
            dr1: 0.0,
            dr2: 0.0,
            dtheta: self.x3,
            dbeta: self.x4,
        }
    }
}

/// Which family and which member of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSpec {
    pub problem: Problem,
    /// Target `theta(T)` in radians.
    pub theta1: f64,
}

impl ReturnSpec {
    pub fn new(problem: Problem, theta1: f64) -> Self {
        ReturnSpec { problem, theta1 }
    }

    pub fn offset(&self) -> f64 {
        self.problem.return_offset()
    }

    /// Range over which the family is believed to exist.
    pub fn family_range(problem: Problem) -> (f64, f64) {
        match problem {
            Problem::FourBody => (FRAC_PI_6, 2.0 * PI),
            Problem::SixBody => (FRAC_PI_6, PI),
        }
    }

    /// A note when `theta1` lies outside the known family range. Such
    /// targets are still solved.
    pub fn range_warning(&self) -> Option<String> {
        let (lo, hi) = Self::family_range(self.problem);
        let eps = 1e-12;
        (self.theta1 < lo - eps || self.theta1 > hi + eps).then(|| {
            format!(
                "theta1 = {:.6} rad lies outside the known family range [{:.6}, {:.6}]",
                self.theta1, lo, hi
            )
        })
    }
}

/// The eight return conditions, ordered as
/// `(r1 - x1, r2 - x2, dr1, dr2, dtheta - x3, dbeta - x4,
///   theta - beta - offset, theta - theta1)`, all at `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub h: [f64; 8],
    pub evaluable: bool,
}

impl Residual {
    pub fn not_evaluable() -> Self {
        Residual {
            h: [f64::NAN; 8],
            evaluable: false,
        }
    }

    /// Sup norm of `h`, or `+inf` when the residual could not be computed.
    pub fn err(&self) -> f64 {
        if !self.evaluable {
            return f64::INFINITY;
        }
        self.h
            .iter()
            .fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
    }
}

fn final_state(
    z: &Unknowns,
    spec: &ReturnSpec,
    cfg: &IntegratorConfig,
) -> Result<ReducedState, ShootingError> {
    if !z.is_admissible() {
        return Err(ShootingError::Inadmissible);
    }
    let sys = ReducedSystem::new(spec.problem, z.m2).with_floor(cfg.collision_floor);
    integrate_reduced(&sys, &z.initial_state(), z.period, cfg)
        .result
        .map_err(ShootingError::Integration)
}

pub fn residual(z: &Unknowns, spec: &ReturnSpec, cfg: &IntegratorConfig) -> Residual {
    match final_state(z, spec, cfg) {
        Ok(s) => Residual {
            h: [
                s.r1 - z.x1,
                s.r2 - z.x2,
                s.dr1,
                s.dr2,
                s.dtheta - z.x3,
                s.dbeta - z.x4,
                s.theta - s.beta - spec.offset(),
                s.theta - spec.theta1,
            ],
            evaluable: true,
        },
        Err(_) => Residual::not_evaluable(),
    }
}

/// The solver objective: `Err(Z)`.
pub fn err(z: &Unknowns, spec: &ReturnSpec, cfg: &IntegratorConfig) -> f64 {
    residual(z, spec, cfg).err()
}

/// Slice form of [`err`] for the generic solver; wrong-length input is
/// outside the domain.
pub fn err_slice(z: &[f64], spec: &ReturnSpec, cfg: &IntegratorConfig) -> f64 {
    if z.len() != Unknowns::DIM {
        return f64::INFINITY;
    }
    err(&Unknowns::from_slice(z), spec, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ShootingError {
    #[error("candidate has non-positive radius, mass or return time")]
    Inadmissible,
    #[error("integration failed: {0}")]
    Integration(IntegrationFailure),
}

/// How well the rotated, relabeled final configuration matches the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityReport {
    pub max_mismatch: f64,
    /// `permutation[i]` is the index of the body at `T` that takes the
    /// place of body `i` at `t = 0` (zero-based).
    pub permutation: Vec<usize>,
}

impl PeriodicityReport {
    /// Non-identity cycles in one-based notation, e.g. `"(3 4)"`.
    pub fn cycle_notation(&self) -> String {
        cycle_notation(&self.permutation)
    }
}

pub fn cycle_notation(perm: &[usize]) -> String {
    let mut seen = vec![false; perm.len()];
    let mut out = String::new();
    for start in 0..perm.len() {
        if seen[start] || perm[start] == start {
            seen[start] = true;
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push((i + 1).to_string());
            i = perm[i];
        }
        out.push('(');
        out.push_str(&cycle.join(" "));
        out.push(')');
    }
    if out.is_empty() {
        "id".to_string()
    } else {
        out
    }
}

/// All permutations of `items`, lexicographic.
pub(crate) fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Relabelings that only permute bodies inside their equal-mass group.
pub fn group_permutations(problem: Problem) -> Vec<Vec<usize>> {
    let k = problem.group_size();
    let first: Vec<usize> = (0..k).collect();
    let second: Vec<usize> = (k..2 * k).collect();
    let mut out = Vec::new();
    for a in permutations(&first) {
        for b in permutations(&second) {
            let mut p = a.clone();
            p.extend(&b);
            out.push(p);
        }
    }
    out
}

/// Max componentwise difference between `initial` and `later` relabeled
/// by `perm` over positions and velocities.
pub fn relabel_mismatch(initial: &CartesianState, later: &CartesianState, perm: &[usize]) -> f64 {
    let mut worst = 0.0_f64;
    for (i, &j) in perm.iter().enumerate() {
        for c in 0..2 {
            worst = worst.max((initial.positions[i][c] - later.positions[j][c]).abs());
            worst = worst.max((initial.velocities[i][c] - later.velocities[j][c]).abs());
        }
    }
    worst
}

/// Rotates the state at `T` by `-theta(T)` and finds the within-group
/// relabeling closest to the initial configuration.
pub fn periodicity_check(
    z: &Unknowns,
    spec: &ReturnSpec,
    cfg: &IntegratorConfig,
) -> Result<PeriodicityReport, ShootingError> {
    let end = final_state(z, spec, cfg)?;
    let initial = embed_cartesian(&z.initial_state(), z.m2, spec.problem);
    let rotated = embed_cartesian(&end, z.m2, spec.problem).rotated(-end.theta);

    let mut best = PeriodicityReport {
        max_mismatch: f64::INFINITY,
        permutation: (0..spec.problem.body_count()).collect(),
    };
    for perm in group_permutations(spec.problem) {
        let m = relabel_mismatch(&initial, &rotated, &perm);
        if m < best.max_mismatch {
            best = PeriodicityReport {
                max_mismatch: m,
                permutation: perm,
            };
        }
    }
    Ok(best)
}
