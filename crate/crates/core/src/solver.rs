//! Adaptive stochastic black-box equation solver.
//!
//! Minimizes an error functional `Err: R^n -> [0, +inf]` (typically the sup
//! norm of a residual, `+inf` outside its domain) using only function
//! values. Each iteration draws `N` candidates uniformly from the
//! axis-aligned box `Z_best +- d`, keeps the best one if it strictly
//! improves, and updates the box radii componentwise:
//!
//! * improvement: `d <- max(d, c * delta_last, d_min)`
//! * no improvement: `d <- max(rho * d, c * delta_last, d_min)`
//!
//! where `delta_last = |Z_new - Z_old|` is the last accepted displacement.
//!
//! Randomness comes from a seeded ChaCha8 stream, drawn candidate-major
//! and coordinate-minor, so a fixed seed reproduces a run bit for bit.
//! Candidate evaluations run in parallel; the winner is the lowest index
//! attaining the minimum, which does not depend on scheduling.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Initial box radii.
    pub d0: Vec<f64>,
    /// Lower bound on the box radii.
    pub d_min: Vec<f64>,
    /// Shrink factor applied when an iteration brings no improvement.
    pub rho: f64,
    /// Weight of the last accepted displacement in the box update.
    pub c: f64,
    /// Target error; the solver stops once `e_best < e_g`.
    pub e_g: f64,
    /// Candidates per iteration.
    pub samples: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Record `(e_best, d)` after every iteration.
    pub trace: bool,
}

impl SolverParams {
    /// The orbit-search defaults: `N = 800`, `L_max = 300`, `c = rho = 0.9`,
    /// `e_g = 1e-7`, `d0_i = 0.05 max(|z0_i|, 1)`, `d_min_i = 1e-12`.
    pub fn orbit_defaults(z0: &[f64]) -> Self {
        SolverParams {
            d0: default_box(z0),
            d_min: vec![1e-12; z0.len()],
            rho: 0.9,
            c: 0.9,
            e_g: 1e-7,
            samples: 800,
            max_iterations: 300,
            seed: 0,
            trace: false,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), SolverError> {
        if self.d0.len() != dim || self.d_min.len() != dim {
            return Err(SolverError::Dimension(format!(
                "expected {dim} box radii, got d0: {}, d_min: {}",
                self.d0.len(),
                self.d_min.len()
            )));
        }
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        if !positive(&self.d0) {
            return Err(SolverError::Parameter("d0 must be positive".into()));
        }
        if !positive(&self.d_min) {
            return Err(SolverError::Parameter("d_min must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(SolverError::Parameter(format!("rho = {} not in (0, 1)", self.rho)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SolverError::Parameter(format!("c = {} must be positive", self.c)));
        }
        if !(self.e_g > 0.0) {
            return Err(SolverError::Parameter(format!("e_g = {} must be positive", self.e_g)));
        }
        if self.samples < 1 || self.max_iterations < 1 {
            return Err(SolverError::Parameter(
                "samples and max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `0.05 * max(|z_i|, 1)` per coordinate.
pub fn default_box(z0: &[f64]) -> Vec<f64> {
    z0.iter().map(|z| 0.05 * z.abs().max(1.0)).collect()
}

/// Box update after an accepted candidate.
pub fn box_update_improve(d: &[f64], delta_last: &[f64], c: f64, d_min: &[f64]) -> Vec<f64> {
    d.iter()
        .zip(delta_last)
        .zip(d_min)
        .map(|((d, dl), lo)| d.max(c * dl).max(*lo))
        .collect()
}

/// Box update after an iteration without improvement.
pub fn box_update_fail(
    d: &[f64],
    delta_last: &[f64],
    rho: f64,
    c: f64,
    d_min: &[f64],
) -> Vec<f64> {
    d.iter()
        .zip(delta_last)
        .zip(d_min)
        .map(|((d, dl), lo)| (rho * d).max(c * dl).max(*lo))
        .collect()
}

/// `n` candidates `z_best + xi`, `xi_i ~ U[-d_i, d_i]`, drawn
/// candidate-major, coordinate-minor.
pub fn sample_candidates(z_best: &[f64], d: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dists: Vec<Uniform<f64>> = d.iter().map(|&di| Uniform::new_inclusive(-di, di)).collect();
    (0..n)
        .map(|_| {
            z_best
                .iter()
                .zip(&dists)
                .map(|(z, u)| z + u.sample(rng))
                .collect()
        })
        .collect()
}

/// Mutable state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub z_best: Vec<f64>,
    pub e_best: f64,
    pub delta_last: Vec<f64>,
    pub d: Vec<f64>,
    pub iteration: usize,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub e_best: f64,
    pub d: Vec<f64>,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub z_best: Vec<f64>,
    pub e_best: f64,
    pub iterations_used: usize,
    pub evals_used: usize,
    pub converged: bool,
    pub trace: Option<Vec<TraceEntry>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Improved,
    NoImprovement,
    /// `e_best < e_g`.
    Converged,
    /// `max_iterations` reached.
    Exhausted,
}

/// Step-wise driver; [`solve`] runs it to completion.
pub struct Solver<F> {
    objective: F,
    params: SolverParams,
    state: SolverState,
    rng: ChaCha8Rng,
    trace: Vec<TraceEntry>,
}

fn sanitize(e: f64) -> f64 {
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

impl<F> Solver<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    /// Evaluates `Err(z0)` and clamps the initial box to `d_min`.
    pub fn new(objective: F, z0: &[f64], params: SolverParams) -> Result<Self, SolverError> {
        params.validate(z0.len())?;
        let e0 = sanitize(objective(z0));
        let d = params
            .d0
            .iter()
            .zip(&params.d_min)
            .map(|(a, b)| a.max(*b))
            .collect();
        let rng = ChaCha8Rng::seed_from_u64(params.seed);
        Ok(Solver {
            state: SolverState {
                z_best: z0.to_vec(),
                e_best: e0,
                delta_last: vec![0.0; z0.len()],
                d,
                iteration: 0,
                evals: 1,
            },
            objective,
            params,
            rng,
            trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn is_converged(&self) -> bool {
        self.state.e_best < self.params.e_g
    }

    /// One sampling round followed by the accept/reject box update.
    pub fn step(&mut self) -> Step {
        if self.is_converged() {
            return Step::Converged;
        }
        if self.state.iteration >= self.params.max_iterations {
            return Step::Exhausted;
        }
        let p = &self.params;
        let st = &mut self.state;
        let candidates = sample_candidates(&st.z_best, &st.d, p.samples, &mut self.rng);
        let objective = &self.objective;
        let errors: Vec<f64> = candidates
            .par_iter()
            .map(|z| sanitize(objective(z)))
            .collect();
        st.evals += candidates.len();
        st.iteration += 1;

        let (best_idx, e_s) = errors
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, be), (i, &e)| {
                if e < be {
                    (i, e)
                } else {
                    (bi, be)
                }
            });

        let improved = e_s < st.e_best;
        if improved {
            let z_star = &candidates[best_idx];
            st.delta_last = z_star
                .iter()
                .zip(&st.z_best)
                .map(|(a, b)| (a - b).abs())
                .collect();
            st.z_best = z_star.clone();
            st.e_best = e_s;
            st.d = box_update_improve(&st.d, &st.delta_last, p.c, &p.d_min);
        } else {
            st.d = box_update_fail(&st.d, &st.delta_last, p.rho, p.c, &p.d_min);
        }
        if p.trace {
            self.trace.push(TraceEntry {
                iteration: st.iteration,
                e_best: st.e_best,
                d: st.d.clone(),
                improved,
            });
        }

        if self.is_converged() {
            Step::Converged
        } else if improved {
            Step::Improved
        } else {
            Step::NoImprovement
        }
    }

    pub fn finish(self) -> SolverResult {
        let converged = self.is_converged();
        SolverResult {
            converged,
            z_best: self.state.z_best,
            e_best: self.state.e_best,
            iterations_used: self.state.iteration,
            evals_used: self.state.evals,
            trace: self.params.trace.then_some(self.trace),
        }
    }
}

/// Runs the solver until `e_best < e_g` or `max_iterations` rounds.
pub fn solve<F>(objective: F, z0: &[f64], params: SolverParams) -> Result<SolverResult, SolverError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut solver = Solver::new(objective, z0, params)?;
    while !matches!(solver.step(), Step::Converged | Step::Exhausted) {}
    Ok(solver.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(dim: usize) -> SolverParams {
        SolverParams {
            d0: vec![1.0; dim],
            d_min: vec![1e-12; dim],
            rho: 0.9,
            c: 0.9,
            e_g: 1e-9,
            samples: 64,
            max_iterations: 500,
            seed: 42,
            trace: false,
        }
    }

    #[test]
    fn improve_update_examples() {
        assert_eq!(box_update_improve(&[0.1], &[0.5], 0.9, &[0.01]), vec![0.45]);
        assert_eq!(box_update_improve(&[0.1], &[0.0], 0.9, &[0.01]), vec![0.1]);
        assert_eq!(box_update_improve(&[1e-13], &[0.0], 0.9, &[1e-12]), vec![1e-12]);
    }

    #[test]
    fn fail_update_examples() {
        assert_eq!(box_update_fail(&[0.1], &[0.0], 0.9, 0.9, &[1e-12]), vec![0.09000000000000001]);
        assert_eq!(box_update_fail(&[0.1], &[0.5], 0.9, 0.9, &[1e-12]), vec![0.45]);
    }

    #[test]
    fn repeated_failures_shrink_geometrically() {
        let d0 = 0.3;
        let mut d = vec![d0];
        for k in 1..=200 {
            d = box_update_fail(&d, &[0.0], 0.9, 0.9, &[1e-6]);
            let expect = (0.9f64.powi(k) * d0).max(1e-6);
            assert!((d[0] - expect).abs() <= 1e-12 * expect, "k = {k}");
        }
    }

    #[test]
    fn candidates_stay_in_box_and_repeat() {
        let z = [1.0, -2.0, 5.0];
        let d = [0.5, 1e-12, 3.0];
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let ca = sample_candidates(&z, &d, 500, &mut a);
        let cb = sample_candidates(&z, &d, 500, &mut b);
        assert_eq!(ca, cb);
        for c in &ca {
            for i in 0..3 {
                assert!((c[i] - z[i]).abs() <= d[i] * (1.0 + 1e-15) + 1e-15);
            }
        }
    }

    #[test]
    fn sample_statistics() {
        let z = [2.0, -1.0];
        let d = [0.5, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n = 100_000;
        let c = sample_candidates(&z, &d, n, &mut rng);
        for i in 0..2 {
            let mean = c.iter().map(|v| v[i]).sum::<f64>() / n as f64;
            let sigma = d[i] / 3f64.sqrt() / (n as f64).sqrt();
            assert!((mean - z[i]).abs() < 3.0 * sigma, "coord {i}: {mean}");
            assert!(c.iter().all(|v| (v[i] - z[i]).abs() <= d[i]));
        }
    }

    #[test]
    fn finds_root_of_sup_norm() {
        let obj = |z: &[f64]| (z[0] - 3.0).abs().max((z[1] + 1.0).abs());
        let mut successes = 0;
        for seed in [42, 43, 44] {
            let p = SolverParams { seed, ..params(2) };
            let r = solve(obj, &[0.0, 0.0], p).unwrap();
            let dist = (r.z_best[0] - 3.0).abs().max((r.z_best[1] + 1.0).abs());
            if r.converged && dist < 1e-9 {
                successes += 1;
            }
        }
        assert!(successes >= 2, "{successes} of 3 seeds converged");
    }

    #[test]
    fn already_solved_input() {
        let r = solve(|_: &[f64]| 0.0, &[1.0, 2.0], params(2)).unwrap();
        assert!(r.converged);
        assert_eq!(r.z_best, vec![1.0, 2.0]);
        assert_eq!(r.iterations_used, 0);
        assert_eq!(r.evals_used, 1);
    }

    #[test]
    fn nowhere_evaluable() {
        let p = SolverParams {
            max_iterations: 50,
            d_min: vec![1e-3; 2],
            ..params(2)
        };
        let mut solver = Solver::new(|_: &[f64]| f64::INFINITY, &[1.0, 2.0], p).unwrap();
        while !matches!(solver.step(), Step::Exhausted) {}
        assert_eq!(solver.state().d, vec![(0.9f64.powi(50)).max(1e-3); 2]);
        let r = solver.finish();
        assert!(!r.converged);
        assert_eq!(r.e_best, f64::INFINITY);
        assert_eq!(r.z_best, vec![1.0, 2.0]);
        assert_eq!(r.evals_used, 1 + 64 * 50);
    }

    #[test]
    fn nan_counts_as_infinite() {
        let obj = |z: &[f64]| if z[0] > 0.0 { f64::NAN } else { z[0].abs() };
        let r = solve(obj, &[-1.0], SolverParams { e_g: 1e-6, ..params(1) }).unwrap();
        assert!(r.e_best.is_finite());
        assert!(r.z_best[0] <= 0.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(Solver::new(|_: &[f64]| 0.0, &[0.0], SolverParams { rho: 1.0, ..params(1) }).is_err());
        assert!(Solver::new(|_: &[f64]| 0.0, &[0.0], SolverParams { samples: 0, ..params(1) }).is_err());
        assert!(Solver::new(|_: &[f64]| 0.0, &[0.0, 1.0], params(1)).is_err());
        assert!(Solver::new(|_: &[f64]| 0.0, &[0.0], SolverParams { d0: vec![0.0], ..params(1) }).is_err());
    }

    #[test]
    fn default_box_scales_with_magnitude() {
        assert_eq!(default_box(&[0.5, -4.0]), vec![0.05, 0.2]);
    }
}
