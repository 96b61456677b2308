//! Deterministic explicit Runge-Kutta integration over `[0, T]`.
//!
//! Two schemes are provided: the adaptive Dormand-Prince 5(4) pair used
//! for every residual evaluation, and the classical fixed-step RK4 kept as
//! an independent cross-check. Both land exactly on the final time by
//! shortening the last step; there is no dense-output interpolation.

use crate::dynamics::{
    cartesian_accelerations, conserved, reduced_rhs, CartesianState, DomainError, Problem,
    ReducedState, COLLISION_FLOOR,
};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A first-order autonomous-or-not ODE system `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), DomainError>;
}

/// Reduced four- or six-body system with fixed `m2`.
#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem {
    pub problem: Problem,
    pub m2: f64,
    pub collision_floor: f64,
}

impl ReducedSystem {
    pub fn new(problem: Problem, m2: f64) -> Self {
        ReducedSystem {
            problem,
            m2,
            collision_floor: COLLISION_FLOOR,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.collision_floor = floor;
        self
    }
}

impl OdeSystem for ReducedSystem {
    fn dim(&self) -> usize {
        ReducedState::DIM
    }

    fn eval(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), DomainError> {
        let s = ReducedState::from_slice(y);
        let rates = reduced_rhs(self.problem, &s, self.m2, self.collision_floor)?;
        dydt.copy_from_slice(&rates.to_array());
        Ok(())
    }
}

/// Full planar Newtonian N-body system on the flat layout of
/// [`CartesianState::to_flat`].
#[derive(Debug, Clone)]
pub struct CartesianSystem {
    pub masses: Vec<f64>,
    pub collision_floor: f64,
}

impl CartesianSystem {
    pub fn new(masses: Vec<f64>) -> Self {
        CartesianSystem {
            masses,
            collision_floor: COLLISION_FLOOR,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.collision_floor = floor;
        self
    }
}

impl OdeSystem for CartesianSystem {
    fn dim(&self) -> usize {
        4 * self.masses.len()
    }

    fn eval(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), DomainError> {
        let n = self.masses.len();
        let c = CartesianState::from_flat(&self.masses, y);
        let acc = cartesian_accelerations(&c, self.collision_floor)?;
        dydt[..2 * n].copy_from_slice(&y[2 * n..]);
        for (i, a) in acc.iter().enumerate() {
            dydt[2 * n + 2 * i] = a[0];
            dydt[2 * n + 2 * i + 1] = a[1];
        }
        Ok(())
    }
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<(), DomainError>,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) -> Result<(), DomainError> {
        (self.1)(t, y, dydt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dormand-Prince 5(4) with embedded error control.
    AdaptiveRk45,
    /// Classical fourth-order Runge-Kutta with a fixed step.
    FixedRk4,
}

/// Number of equal RK4 steps over `[0, T]` when no explicit step is given.
pub const DEFAULT_RK4_SUBDIVISIONS: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for the adaptive method. `None`
    /// means `T / 200000` for RK4 and an automatic guess otherwise.
    pub step: Option<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: u64,
    pub collision_floor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::AdaptiveRk45,
            step: None,
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_steps: 10_000_000,
            collision_floor: COLLISION_FLOOR,
        }
    }
}

impl IntegratorConfig {
    pub fn adaptive(tol: f64) -> Self {
        IntegratorConfig {
            abs_tol: tol,
            rel_tol: tol,
            ..Default::default()
        }
    }

    pub fn fixed_rk4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::FixedRk4,
            step: Some(step),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(h) = self.step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(format!("step must be positive, got {h}"));
            }
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.max_steps < 1 {
            return Err("max_steps must be at least 1".into());
        }
        if !(self.collision_floor >= 0.0) {
            return Err("collision floor must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    Collision,
    NonFinite,
    StepBudget,
    /// The adaptive step fell below the resolution of the time variable.
    StepUnderflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationFailure {
    pub kind: FailureKind,
    pub time: f64,
}

impl fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at t = {}", self.kind, self.time)
    }
}

impl IntegrationFailure {
    fn from_domain(err: DomainError, time: f64) -> Self {
        let kind = match err {
            DomainError::Collision { .. } => FailureKind::Collision,
            DomainError::NonFinite { .. } => FailureKind::NonFinite,
        };
        IntegrationFailure { kind, time }
    }
}

/// Result of one integration: exactly one of a final state or a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOutcome<S> {
    pub result: Result<S, IntegrationFailure>,
    pub steps_taken: u64,
}

impl<S> IntegrationOutcome<S> {
    pub fn is_completed(&self) -> bool {
        self.result.is_ok()
    }

    pub fn final_state(&self) -> Option<&S> {
        self.result.as_ref().ok()
    }

    pub fn failure(&self) -> Option<IntegrationFailure> {
        self.result.as_ref().err().copied()
    }

    pub fn map<T>(self, f: impl FnOnce(S) -> T) -> IntegrationOutcome<T> {
        IntegrationOutcome {
            result: self.result.map(f),
            steps_taken: self.steps_taken,
        }
    }
}

/// Integrates from `t = 0` to `t_end`.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> IntegrationOutcome<Vec<f64>> {
    integrate_observed(sys, y0, t_end, cfg, &mut |_, _| {})
}

/// Like [`integrate`], calling `observer` at `t = 0` and after every
/// accepted step.
pub fn integrate_observed<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    observer: &mut dyn FnMut(f64, &[f64]),
) -> IntegrationOutcome<Vec<f64>> {
    assert_eq!(y0.len(), sys.dim(), "initial state has wrong dimension");
    if !y0.iter().all(|v| v.is_finite()) {
        return IntegrationOutcome {
            result: Err(IntegrationFailure {
                kind: FailureKind::NonFinite,
                time: 0.0,
            }),
            steps_taken: 0,
        };
    }
    observer(0.0, y0);
    if t_end <= 0.0 {
        return IntegrationOutcome {
            result: Ok(y0.to_vec()),
            steps_taken: 0,
        };
    }
    match cfg.method {
        Method::AdaptiveRk45 => dopri5(sys, y0, t_end, cfg, observer),
        Method::FixedRk4 => rk4(sys, y0, t_end, cfg, observer),
    }
}

/// Typed convenience wrapper for the reduced systems.
pub fn integrate_reduced(
    sys: &ReducedSystem,
    s0: &ReducedState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> IntegrationOutcome<ReducedState> {
    integrate(sys, &s0.to_array(), t_end, cfg).map(|y| ReducedState::from_slice(&y))
}

fn rk4<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    observer: &mut dyn FnMut(f64, &[f64]),
) -> IntegrationOutcome<Vec<f64>> {
    let dim = y0.len();
    let h_nominal = cfg
        .step
        .unwrap_or(t_end / DEFAULT_RK4_SUBDIVISIONS as f64);
    // Steps of size h_nominal, the last one shortened to hit t_end. A
    // trailing sliver below 1e-9 h is absorbed into the previous step.
    let n_steps = ((t_end / h_nominal) * (1.0 - 1e-9)).ceil().max(1.0) as u64;

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    for i in 0..n_steps {
        if i >= cfg.max_steps {
            return IntegrationOutcome {
                result: Err(IntegrationFailure {
                    kind: FailureKind::StepBudget,
                    time: i as f64 * h_nominal,
                }),
                steps_taken: i,
            };
        }
        let t = i as f64 * h_nominal;
        let t_next = if i + 1 == n_steps {
            t_end
        } else {
            (i + 1) as f64 * h_nominal
        };
        let h = t_next - t;

        let fail = |e: DomainError| IntegrationOutcome {
            result: Err(IntegrationFailure::from_domain(e, t)),
            steps_taken: i,
        };

        if let Err(e) = sys.eval(t, &y, &mut k1) {
            return fail(e);
        }
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        if let Err(e) = sys.eval(t + 0.5 * h, &tmp, &mut k2) {
            return fail(e);
        }
        for j in 0..dim {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        if let Err(e) = sys.eval(t + 0.5 * h, &tmp, &mut k3) {
            return fail(e);
        }
        for j in 0..dim {
            tmp[j] = y[j] + h * k3[j];
        }
        if let Err(e) = sys.eval(t_next, &tmp, &mut k4) {
            return fail(e);
        }
        for j in 0..dim {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return IntegrationOutcome {
                result: Err(IntegrationFailure {
                    kind: FailureKind::NonFinite,
                    time: t,
                }),
                steps_taken: i + 1,
            };
        }
        observer(t_next, &y);
    }
    IntegrationOutcome {
        result: Ok(y),
        steps_taken: n_steps,
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn error_norm(err: &[f64], y: &[f64], y_new: &[f64], cfg: &IntegratorConfig) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// Initial step heuristic from Hairer, Norsett & Wanner (II.4).
fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    f0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let dim = y0.len();
    let scale: Vec<f64> = y0
        .iter()
        .map(|v| cfg.abs_tol + cfg.rel_tol * v.abs())
        .collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&scale)
            .map(|(a, s)| (a / s).powi(2))
            .sum::<f64>()
            / dim as f64)
            .sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(t_end);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; dim];
    if sys.eval(h0, &y1, &mut f1).is_err() {
        return h0;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = rms(&diff);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(t_end)
}

fn dopri5<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    observer: &mut dyn FnMut(f64, &[f64]),
) -> IntegrationOutcome<Vec<f64>> {
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];

    let mut t = 0.0;
    let mut steps: u64 = 0;
    let failed = |kind, time, steps| IntegrationOutcome {
        result: Err(IntegrationFailure { kind, time }),
        steps_taken: steps,
    };

    if let Err(e) = sys.eval(t, &y, &mut k[0]) {
        return IntegrationOutcome {
            result: Err(IntegrationFailure::from_domain(e, t)),
            steps_taken: 0,
        };
    }
    let mut h = cfg
        .step
        .unwrap_or_else(|| initial_step(sys, &y, &k[0], t_end, cfg));
    let mut last_rejected = false;

    loop {
        if steps >= cfg.max_steps {
            return failed(FailureKind::StepBudget, t, steps);
        }
        let remaining = t_end - t;
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return failed(FailureKind::StepUnderflow, t, steps);
        }
        steps += 1;

        let stage = |k: &mut Vec<Vec<f64>>,
                     tmp: &mut Vec<f64>,
                     idx: usize,
                     c: f64,
                     coeffs: &[(usize, f64)]|
         -> Result<(), DomainError> {
            for j in 0..dim {
                let mut acc = y[j];
                for &(s, a) in coeffs {
                    acc += h * a * k[s][j];
                }
                tmp[j] = acc;
            }
            sys.eval(t + c * h, tmp, &mut k[idx])
        };

        let stages: [(usize, f64, &[(usize, f64)]); 5] = [
            (1, C2, &[(0, A21)]),
            (2, C3, &[(0, A31), (1, A32)]),
            (3, C4, &[(0, A41), (1, A42), (2, A43)]),
            (4, C5, &[(0, A51), (1, A52), (2, A53), (3, A54)]),
            (5, 1.0, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]),
        ];
        let mut domain_err = None;
        for (idx, c, coeffs) in stages {
            if let Err(e) = stage(&mut k, &mut tmp, idx, c, coeffs) {
                domain_err = Some(e);
                break;
            }
        }
        if domain_err.is_none() {
            for j in 0..dim {
                y_new[j] = y[j]
                    + h * (A71 * k[0][j]
                        + A73 * k[2][j]
                        + A74 * k[3][j]
                        + A75 * k[4][j]
                        + A76 * k[5][j]);
            }
            let t_new = if last { t_end } else { t + h };
            if let Err(e) = sys.eval(t_new, &y_new, &mut k[6]) {
                domain_err = Some(e);
            }
        }
        if let Some(e) = domain_err {
            return IntegrationOutcome {
                result: Err(IntegrationFailure::from_domain(e, t)),
                steps_taken: steps,
            };
        }

        for j in 0..dim {
            err[j] = h
                * (E1 * k[0][j]
                    + E3 * k[2][j]
                    + E4 * k[3][j]
                    + E5 * k[4][j]
                    + E6 * k[5][j]
                    + E7 * k[6][j]);
        }
        let norm = error_norm(&err, &y, &y_new, cfg);
        if !norm.is_finite() {
            return failed(FailureKind::NonFinite, t, steps);
        }

        if norm <= 1.0 {
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            observer(t, &y);
            if last {
                return IntegrationOutcome {
                    result: Ok(y),
                    steps_taken: steps,
                };
            }
            let mut fac = if norm == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * norm.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            h *= (SAFETY * norm.powf(-0.2)).max(FAC_MIN);
            last_rejected = true;
        }
    }
}

/// Uniformly spaced samples of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// `k` samples at `t_i = i T / (k - 1)`; each segment restarts the
/// integrator from the previous sample.
pub fn sample_trajectory<S: OdeSystem + ?Sized>(
    sys: &S,
    y0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    k: usize,
) -> Result<Trajectory, IntegrationFailure> {
    assert!(k >= 2, "need at least two samples");
    let mut times = Vec::with_capacity(k);
    let mut states = Vec::with_capacity(k);
    times.push(0.0);
    states.push(y0.to_vec());
    for i in 1..k {
        let t_prev = times[i - 1];
        let t_next = if i + 1 == k {
            t_end
        } else {
            t_end * i as f64 / (k - 1) as f64
        };
        let out = integrate(sys, &states[i - 1], t_next - t_prev, cfg);
        match out.result {
            Ok(y) => {
                times.push(t_next);
                states.push(y);
            }
            Err(f) => {
                return Err(IntegrationFailure {
                    kind: f.kind,
                    time: t_prev + f.time,
                })
            }
        }
    }
    Ok(Trajectory { times, states })
}

/// Relative drift of angular momentum and energy over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationDrift {
    pub angular_momentum: f64,
    pub energy: f64,
}

/// Maximum of `|Q(t) - Q(0)| / max(1, |Q(0)|)` over every accepted step.
pub fn conservation_drift(
    sys: &ReducedSystem,
    s0: &ReducedState,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<ConservationDrift, IntegrationFailure> {
    let q0 = conserved(s0, sys.m2, sys.problem);
    let mut drift = ConservationDrift {
        angular_momentum: 0.0,
        energy: 0.0,
    };
    let out = integrate_observed(sys, &s0.to_array(), t_end, cfg, &mut |_, y| {
        let q = conserved(&ReducedState::from_slice(y), sys.m2, sys.problem);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        drift.angular_momentum = drift
            .angular_momentum
            .max(rel(q.angular_momentum, q0.angular_momentum));
        drift.energy = drift.energy.max(rel(q.energy, q0.energy));
    });
    out.result.map(|_| drift)
}
