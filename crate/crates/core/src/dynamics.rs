//! Reduced equations of motion for the two symmetric families and the
//! full Newtonian right-hand side used to cross-check them.
//!
//! Both families share the same four scalar unknowns: the radii `r1`, `r2`
//! of the two equal-mass groups, the polar angle `theta` of body 1 and the
//! reference angle `beta` of the second group.
//!
//! * Four bodies: bodies 1, 2 (mass 1) sit at angles `theta` and
//!   `theta + pi` on radius `r1`; bodies 3, 4 (mass `m2`) sit at
//!   `beta + pi/2` and `beta + 3pi/2` on radius `r2`.
//! * Six bodies: bodies 1, 2, 3 (mass 1) form an equilateral triangle at
//!   angles `theta + 2k pi/3`; bodies 4, 5, 6 (mass `m2`) sit at
//!   `beta + pi/3 + 2k pi/3`.
//!
//! Units are chosen so that the gravitational constant is 1.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};
use thiserror::Error;

/// Smallest admissible radius or mutual distance.
pub const COLLISION_FLOOR: f64 = 1e-9;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Raised when a configuration is too close to a collision to be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("collision floor breached: {what} = {value:e}")]
    Collision { what: &'static str, value: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },
}

/// Which symmetric family is being integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Problem {
    /// Two opposite pairs, `n = 4`.
    #[serde(rename = "4")]
    FourBody,
    /// Two equilateral triangles, `n = 6`.
    #[serde(rename = "6")]
    SixBody,
}

impl Problem {
    pub fn from_body_count(n: usize) -> Option<Self> {
        match n {
            4 => Some(Problem::FourBody),
            6 => Some(Problem::SixBody),
            _ => None,
        }
    }

    pub fn body_count(self) -> usize {
        2 * self.group_size()
    }

    /// Bodies per equal-mass group.
    pub fn group_size(self) -> usize {
        match self {
            Problem::FourBody => 2,
            Problem::SixBody => 3,
        }
    }

    /// Angular spacing between consecutive bodies of a group.
    pub fn group_spacing(self) -> f64 {
        match self {
            Problem::FourBody => PI,
            Problem::SixBody => 2.0 * PI / 3.0,
        }
    }

    /// Polar offset of the first body of the second group relative to `beta`.
    pub fn second_group_phase(self) -> f64 {
        match self {
            Problem::FourBody => FRAC_PI_2,
            Problem::SixBody => FRAC_PI_3,
        }
    }

    /// Required value of `theta(T) - beta(T)` at the return time.
    pub fn return_offset(self) -> f64 {
        self.group_spacing()
    }
}

/// The eight reduced coordinates shared by both families.
///
/// Angles are never wrapped: `theta` and `beta` accumulate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    pub r1: f64,
    pub r2: f64,
    pub theta: f64,
    pub beta: f64,
    pub dr1: f64,
    pub dr2: f64,
    pub dtheta: f64,
    pub dbeta: f64,
}

impl ReducedState {
    pub const DIM: usize = 8;

    /// Layout `(r1, r2, theta, beta, dr1, dr2, dtheta, dbeta)`.
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.r1,
            self.r2,
            self.theta,
            self.beta,
            self.dr1,
            self.dr2,
            self.dtheta,
            self.dbeta,
        ]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        assert_eq!(y.len(), Self::DIM, "reduced state has 8 components");
        ReducedState {
            r1: y[0],
            r2: y[1],
            theta: y[2],
            beta: y[3],
            dr1: y[4],
            dr2: y[5],
            dtheta: y[6],
            dbeta: y[7],
        }
    }

    pub fn delta(&self) -> f64 {
        self.theta - self.beta
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Time derivative of a [`ReducedState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedRates {
    pub dr1: f64,
    pub dr2: f64,
    pub dtheta: f64,
    pub dbeta: f64,
    pub ddr1: f64,
    pub ddr2: f64,
    pub ddtheta: f64,
    pub ddbeta: f64,
}

impl ReducedRates {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.dr1,
            self.dr2,
            self.dtheta,
            self.dbeta,
            self.ddr1,
            self.ddr2,
            self.ddtheta,
            self.ddbeta,
        ]
    }
}

/// Mass of each body in the second group; the first group has unit masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassParam(f64);

impl MassParam {
    /// `m2 = 0` is allowed: it is the decoupled limit used by the
    /// equilibrium checks. Negative or non-finite masses are rejected.
    pub fn new(m2: f64) -> Option<Self> {
        (m2.is_finite() && m2 >= 0.0).then_some(MassParam(m2))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Planar positions and velocities of every body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub masses: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
}

impl CartesianState {
    pub fn body_count(&self) -> usize {
        self.masses.len()
    }

    /// Flat layout `[x1, y1, .., xn, yn, vx1, vy1, .., vxn, vyn]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(4 * self.body_count());
        out.extend(self.positions.iter().flatten());
        out.extend(self.velocities.iter().flatten());
        out
    }

    pub fn from_flat(masses: &[f64], y: &[f64]) -> Self {
        let n = masses.len();
        assert_eq!(y.len(), 4 * n);
        let pairs = |s: &[f64]| s.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        CartesianState {
            masses: masses.to_vec(),
            positions: pairs(&y[..2 * n]),
            velocities: pairs(&y[2 * n..]),
        }
    }

    /// Rotates every position and velocity by `angle` about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let rot = |p: &[f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
        CartesianState {
            masses: self.masses.clone(),
            positions: self.positions.iter().map(rot).collect(),
            velocities: self.velocities.iter().map(rot).collect(),
        }
    }
}

/// Total angular momentum, energy and kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedQuantities {
    pub angular_momentum: f64,
    pub energy: f64,
    pub kinetic: f64,
}

/// Distances from body 1 to bodies 3 and 4 in the four-body family.
pub fn distances4(r1: f64, r2: f64, delta: f64) -> (f64, f64) {
    let base = r1 * r1 + r2 * r2;
    let cross = 2.0 * r1 * r2 * delta.sin();
    ((base - cross).max(0.0).sqrt(), (base + cross).max(0.0).sqrt())
}

/// Distances from body 1 to bodies 4, 5 and 6 in the six-body family.
pub fn distances6(r1: f64, r2: f64, delta: f64) -> (f64, f64, f64) {
    let base = r1 * r1 + r2 * r2;
    let two = 2.0 * r1 * r2;
    let d1 = base - two * (FRAC_PI_6 + delta).sin();
    let d2 = base + two * delta.cos();
    let d3 = base - two * (FRAC_PI_6 - delta).sin();
    (d1.max(0.0).sqrt(), d2.max(0.0).sqrt(), d3.max(0.0).sqrt())
}

/// Inter-group force terms of the six-body family.
///
/// `(a1, b1)` is the radial/tangential pull of the second triangle on body
/// 1 per unit `m2`; `(a2, b2)` the pull of the first triangle on body 4,
/// expressed in body 4's own radial/tangential frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceTerms6 {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

pub fn force_terms6(
    r1: f64,
    r2: f64,
    delta: f64,
    d: (f64, f64, f64),
) -> Result<ForceTerms6, DomainError> {
    let (d1, d2, d3) = d;
    for (what, value) in [("d1", d1), ("d2", d2), ("d3", d3)] {
        if !(value > 0.0) {
            return Err(DomainError::Collision { what, value });
        }
    }
    let (sp, cp) = (FRAC_PI_6 + delta).sin_cos();
    let (sm, cm) = (FRAC_PI_6 - delta).sin_cos();
    let (sd, cd) = delta.sin_cos();
    let (i1, i2, i3) = (d1.powi(-3), d2.powi(-3), d3.powi(-3));

    Ok(ForceTerms6 {
        a1: (-r1 + r2 * sp) * i1 + (-r1 - r2 * cd) * i2 + (-r1 + r2 * sm) * i3,
        b1: r2 * cp * i1 + r2 * sd * i2 - r2 * cm * i3,
        a2: (r1 * sp - r2) * i1 + (r1 * sm - r2) * i3 + (-r1 * cd - r2) * i2,
        b2: -r1 * cp * i1 + r1 * cm * i3 - r1 * sd * i2,
    })
}

fn check_floor(what: &'static str, value: f64, floor: f64) -> Result<(), DomainError> {
    if value.is_nan() {
        return Err(DomainError::NonFinite { what });
    }
    if value < floor {
        return Err(DomainError::Collision { what, value });
    }
    Ok(())
}

/// Reduced four-body right-hand side with the default collision floor.
pub fn rhs4(s: &ReducedState, m2: f64) -> Result<ReducedRates, DomainError> {
    rhs4_with_floor(s, m2, COLLISION_FLOOR)
}

pub fn rhs4_with_floor(
    s: &ReducedState,
    m2: f64,
    floor: f64,
) -> Result<ReducedRates, DomainError> {
    let ReducedState {
        r1,
        r2,
        dr1,
        dr2,
        dtheta,
        dbeta,
        ..
    } = *s;
    check_floor("r1", r1, floor)?;
    check_floor("r2", r2, floor)?;
    let delta = s.delta();
    let (d1, d2) = distances4(r1, r2, delta);
    check_floor("d1", d1, floor)?;
    check_floor("d2", d2, floor)?;

    let (sd, cd) = delta.sin_cos();
    let (i1, i2) = (d1.powi(-3), d2.powi(-3));

    let ddr1 = r1 * dtheta * dtheta - 0.25 / (r1 * r1)
        + m2 * ((r2 * sd - r1) * i1 + (-r2 * sd - r1) * i2);
    let ddtheta = (m2 * r2 * cd * (i1 - i2) - 2.0 * dr1 * dtheta) / r1;
    let ddr2 = r2 * dbeta * dbeta - m2 / (4.0 * r2 * r2)
        + ((r1 * sd - r2) * i1 + (-r1 * sd - r2) * i2);
    let ddbeta = (r1 * cd * (i2 - i1) - 2.0 * dr2 * dbeta) / r2;

    Ok(ReducedRates {
        dr1,
        dr2,
        dtheta,
        dbeta,
        ddr1,
        ddr2,
        ddtheta,
        ddbeta,
    })
}

/// Reduced six-body right-hand side with the default collision floor.
pub fn rhs6(s: &ReducedState, m2: f64) -> Result<ReducedRates, DomainError> {
    rhs6_with_floor(s, m2, COLLISION_FLOOR)
}

pub fn rhs6_with_floor(
    s: &ReducedState,
    m2: f64,
    floor: f64,
) -> Result<ReducedRates, DomainError> {
    let ReducedState {
        r1,
        r2,
        dr1,
        dr2,
        dtheta,
        dbeta,
        ..
    } = *s;
    check_floor("r1", r1, floor)?;
    check_floor("r2", r2, floor)?;
    let delta = s.delta();
    let d = distances6(r1, r2, delta);
    check_floor("d1", d.0, floor)?;
    check_floor("d2", d.1, floor)?;
    check_floor("d3", d.2, floor)?;
    let f = force_terms6(r1, r2, delta, d)?;

    let ddtheta = (m2 * f.b1 - 2.0 * dr1 * dtheta) / r1;
    let ddr1 = r1 * dtheta * dtheta - 1.0 / (SQRT_3 * r1 * r1) + m2 * f.a1;
    let ddbeta = (f.b2 - 2.0 * dr2 * dbeta) / r2;
    let ddr2 = r2 * dbeta * dbeta + f.a2 - m2 / (SQRT_3 * r2 * r2);

    Ok(ReducedRates {
        dr1,
        dr2,
        dtheta,
        dbeta,
        ddr1,
        ddr2,
        ddtheta,
        ddbeta,
    })
}

pub fn reduced_rhs(
    problem: Problem,
    s: &ReducedState,
    m2: f64,
    floor: f64,
) -> Result<ReducedRates, DomainError> {
    match problem {
        Problem::FourBody => rhs4_with_floor(s, m2, floor),
        Problem::SixBody => rhs6_with_floor(s, m2, floor),
    }
}

/// Places every body according to the family's symmetric ansatz.
pub fn embed_cartesian(s: &ReducedState, m2: f64, problem: Problem) -> CartesianState {
    let k = problem.group_size();
    let spacing = problem.group_spacing();
    let phase2 = problem.second_group_phase();

    let mut masses = Vec::with_capacity(2 * k);
    let mut positions = Vec::with_capacity(2 * k);
    let mut velocities = Vec::with_capacity(2 * k);

    let groups = [
        (1.0, s.r1, s.dr1, s.theta, s.dtheta),
        (m2, s.r2, s.dr2, s.beta + phase2, s.dbeta),
    ];
    for (mass, r, dr, angle0, omega) in groups {
        for j in 0..k {
            let (sa, ca) = (angle0 + j as f64 * spacing).sin_cos();
            masses.push(mass);
            positions.push([r * ca, r * sa]);
            velocities.push([dr * ca - r * omega * sa, dr * sa + r * omega * ca]);
        }
    }
    CartesianState {
        masses,
        positions,
        velocities,
    }
}

/// Newtonian pairwise accelerations.
pub fn cartesian_accelerations(
    c: &CartesianState,
    floor: f64,
) -> Result<Vec<[f64; 2]>, DomainError> {
    let n = c.body_count();
    let mut acc = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = c.positions[j][0] - c.positions[i][0];
            let dy = c.positions[j][1] - c.positions[i][1];
            let dist = dx.hypot(dy);
            check_floor("pair distance", dist, floor)?;
            let inv3 = dist.powi(-3);
            acc[i][0] += c.masses[j] * dx * inv3;
            acc[i][1] += c.masses[j] * dy * inv3;
            acc[j][0] -= c.masses[i] * dx * inv3;
            acc[j][1] -= c.masses[i] * dy * inv3;
        }
    }
    Ok(acc)
}

/// Time derivative of a Cartesian state: velocities, then accelerations.
pub fn cartesian_rhs(c: &CartesianState, floor: f64) -> Result<CartesianState, DomainError> {
    Ok(CartesianState {
        masses: c.masses.clone(),
        positions: c.velocities.clone(),
        velocities: cartesian_accelerations(c, floor)?,
    })
}

/// Angular momentum and energy from the reduced coordinates.
pub fn conserved(s: &ReducedState, m2: f64, problem: Problem) -> ConservedQuantities {
    let k = problem.group_size() as f64;
    let speed1 = s.dr1 * s.dr1 + s.r1 * s.r1 * s.dtheta * s.dtheta;
    let speed2 = s.dr2 * s.dr2 + s.r2 * s.r2 * s.dbeta * s.dbeta;
    let kinetic = 0.5 * k * (speed1 + m2 * speed2);
    let angular_momentum = k * (s.r1 * s.r1 * s.dtheta + m2 * s.r2 * s.r2 * s.dbeta);

    let potential = match problem {
        Problem::FourBody => {
            let (d1, d2) = distances4(s.r1, s.r2, s.delta());
            0.5 / s.r1 + m2 * m2 / (2.0 * s.r2) + 2.0 * m2 * (1.0 / d1 + 1.0 / d2)
        }
        Problem::SixBody => {
            let (d1, d2, d3) = distances6(s.r1, s.r2, s.delta());
            SQRT_3 / s.r1 + SQRT_3 * m2 * m2 / s.r2 + 3.0 * m2 * (1.0 / d1 + 1.0 / d2 + 1.0 / d3)
        }
    };

    ConservedQuantities {
        angular_momentum,
        energy: kinetic - potential,
        kinetic,
    }
}

/// Angular momentum and energy from the textbook N-body definitions.
pub fn cartesian_conserved(c: &CartesianState) -> ConservedQuantities {
    let n = c.body_count();
    let mut kinetic = 0.0;
    let mut angular_momentum = 0.0;
    for i in 0..n {
        let [x, y] = c.positions[i];
        let [vx, vy] = c.velocities[i];
        kinetic += 0.5 * c.masses[i] * (vx * vx + vy * vy);
        angular_momentum += c.masses[i] * (x * vy - y * vx);
    }
    let mut potential = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = c.positions[j][0] - c.positions[i][0];
            let dy = c.positions[j][1] - c.positions[i][1];
            potential += c.masses[i] * c.masses[j] / dx.hypot(dy);
        }
    }
    ConservedQuantities {
        angular_momentum,
        energy: kinetic - potential,
        kinetic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    fn state(r1: f64, r2: f64, theta: f64, beta: f64) -> ReducedState {
        ReducedState {
            r1,
            r2,
            theta,
            beta,
            ..Default::default()
        }
    }

    #[test]
    fn distances4_examples() {
        let (a, b) = distances4(1.0, 1.0, 0.0);
        assert!(close(a, 2f64.sqrt(), 1e-15) && close(b, 2f64.sqrt(), 1e-15));
        let (a, b) = distances4(1.0, 1.0, FRAC_PI_2);
        assert!(close(a, 0.0, 1e-7) && close(b, 2.0, 1e-15));
        let (a, b) = distances4(2.0, 1.0, FRAC_PI_6);
        assert!(close(a, 3f64.sqrt(), 1e-14) && close(b, 7f64.sqrt(), 1e-14));

        let c = embed_cartesian(&state(2.0, 1.0, FRAC_PI_6, 0.0), 1.0, Problem::FourBody);
        assert!(close(dist(c.positions[0], c.positions[2]), 3f64.sqrt(), 1e-14));
        assert!(close(dist(c.positions[0], c.positions[3]), 7f64.sqrt(), 1e-14));
    }

    #[test]
    fn distances6_examples() {
        let (a, b, c) = distances6(1.0, 1.0, 0.0);
        assert!(close(a, 1.0, 1e-15) && close(b, 2.0, 1e-15) && close(c, 1.0, 1e-15));
        let (a, b, c) = distances6(1.0, 1.0, FRAC_PI_3);
        assert!(close(a, 0.0, 1e-7));
        assert!(close(b, 3f64.sqrt(), 1e-14) && close(c, 3f64.sqrt(), 1e-14));
    }

    #[test]
    fn force_terms6_at_zero_offset() {
        let f = force_terms6(1.0, 1.0, 0.0, distances6(1.0, 1.0, 0.0)).unwrap();
        assert!(close(f.b1, 0.0, 1e-15));
        assert!(close(f.b2, 0.0, 1e-15));
        assert!(close(f.a1, -1.25, 1e-15));
    }

    #[test]
    fn force_terms6_rejects_zero_distance() {
        let err = force_terms6(1.0, 1.0, FRAC_PI_3, (0.0, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, DomainError::Collision { what: "d1", .. }));
    }

    #[test]
    fn rhs4_decoupled_circular_pair() {
        let s = ReducedState {
            r1: 1.0,
            r2: 10.0,
            dtheta: 0.5,
            dbeta: 0.3,
            ..Default::default()
        };
        let rates = rhs4(&s, 0.0).unwrap();
        assert_eq!(rates.ddr1, 0.0);
        assert_eq!(rates.ddtheta, 0.0);
    }

    #[test]
    fn rhs4_zero_offset_has_no_tangential_force() {
        let s = ReducedState {
            r1: 1.3,
            r2: 0.7,
            theta: 0.4,
            beta: 0.4,
            dr1: 0.2,
            dr2: -0.1,
            dtheta: 0.9,
            dbeta: 0.6,
        };
        let rates = rhs4(&s, 1.7).unwrap();
        assert!(close(rates.ddtheta, -2.0 * s.dr1 * s.dtheta / s.r1, 1e-15));
        assert!(close(rates.ddbeta, -2.0 * s.dr2 * s.dbeta / s.r2, 1e-15));
    }

    #[test]
    fn rhs6_decoupled_circular_triangle() {
        let s = ReducedState {
            r1: 1.0,
            r2: 10.0,
            dtheta: 3f64.powf(-0.25),
            ..Default::default()
        };
        let rates = rhs6(&s, 0.0).unwrap();
        assert!(close(rates.ddr1, 0.0, 1e-15));
        assert_eq!(rates.ddtheta, 0.0);
    }

    #[test]
    fn rhs6_zero_offset_equal_radii() {
        let s = ReducedState {
            r1: 1.0,
            r2: 1.0,
            dr2: 0.3,
            dbeta: 0.8,
            dtheta: 0.5,
            ..Default::default()
        };
        let rates = rhs6(&s, 0.9).unwrap();
        assert!(close(rates.ddbeta, -2.0 * s.dr2 * s.dbeta / s.r2, 1e-15));
    }

    #[test]
    fn rhs_reports_collision() {
        let s = state(1.0, 1.0, FRAC_PI_2, 0.0);
        assert!(matches!(rhs4(&s, 1.0), Err(DomainError::Collision { .. })));
        let s = state(-1.0, 1.0, 0.0, 0.0);
        assert!(matches!(
            rhs6(&s, 1.0),
            Err(DomainError::Collision { what: "r1", .. })
        ));
    }

    #[test]
    fn embed_four_body_examples() {
        let c = embed_cartesian(&state(1.0, 2.0, 0.0, 0.0), 1.0, Problem::FourBody);
        let expect = [[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]];
        for (p, e) in c.positions.iter().zip(expect) {
            assert!(close(p[0], e[0], 1e-15) && close(p[1], e[1], 1e-15));
        }
        assert!(c.velocities.iter().all(|v| *v == [0.0, 0.0]));

        let s = ReducedState {
            r1: 1.0,
            r2: 1.0,
            dtheta: 1.0,
            dbeta: 2.0,
            ..Default::default()
        };
        let c = embed_cartesian(&s, 1.0, Problem::FourBody);
        assert!(close(c.velocities[0][0], 0.0, 1e-15) && close(c.velocities[0][1], 1.0, 1e-15));
        assert!(close(c.velocities[2][0], -2.0, 1e-15) && close(c.velocities[2][1], 0.0, 1e-15));
    }

    #[test]
    fn embed_six_body_fourth_body() {
        let c = embed_cartesian(&state(1.0, 1.0, 0.0, 0.0), 0.5, Problem::SixBody);
        assert!(close(c.positions[3][0], 0.5, 1e-15));
        assert!(close(c.positions[3][1], 3f64.sqrt() / 2.0, 1e-15));
        assert_eq!(c.masses, vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn cartesian_unit_separation() {
        let c = CartesianState {
            masses: vec![1.0, 1.0, 0.0, 0.0],
            positions: vec![[0.5, 0.0], [-0.5, 0.0], [1e6, 0.0], [-1e6, 5.0]],
            velocities: vec![[0.0; 2]; 4],
        };
        let a = cartesian_accelerations(&c, COLLISION_FLOOR).unwrap();
        assert!(close(a[0][0], -1.0, 1e-15) && close(a[0][1], 0.0, 1e-15));
    }

    #[test]
    fn cartesian_equilateral_triangle() {
        let pos: Vec<[f64; 2]> = (0..3)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 3.0;
                [a.cos(), a.sin()]
            })
            .collect();
        let c = CartesianState {
            masses: vec![1.0; 3],
            positions: pos.clone(),
            velocities: vec![[0.0; 2]; 3],
        };
        let acc = cartesian_accelerations(&c, COLLISION_FLOOR).unwrap();
        for (a, p) in acc.iter().zip(&pos) {
            let radial = a[0] * p[0] + a[1] * p[1];
            let tangential = -a[0] * p[1] + a[1] * p[0];
            assert!(close(radial, -1.0 / SQRT_3, 1e-15));
            assert!(close(tangential, 0.0, 1e-15));
        }
    }

    #[test]
    fn cartesian_collision_detected() {
        let c = CartesianState {
            masses: vec![1.0; 4],
            positions: vec![[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            velocities: vec![[0.0; 2]; 4],
        };
        assert!(cartesian_accelerations(&c, COLLISION_FLOOR).is_err());
    }

    #[test]
    fn six_body_angular_momentum_example() {
        let s = ReducedState {
            r1: 1.0,
            r2: 1.0,
            dtheta: 1.0,
            dbeta: 1.0,
            ..Default::default()
        };
        let q = conserved(&s, 1.0, Problem::SixBody);
        assert!(close(q.angular_momentum, 6.0, 1e-15));
        let rest = conserved(&state(1.0, 2.0, 0.3, 0.1), 1.0, Problem::FourBody);
        assert_eq!(rest.kinetic, 0.0);
    }

    #[test]
    fn reflection_swaps_distances() {
        let (a, b) = distances4(1.3, 0.8, 0.37);
        let (c, d) = distances4(1.3, 0.8, -0.37);
        assert!(close(a, d, 1e-15) && close(b, c, 1e-15));
        let (a, b, c) = distances6(1.3, 0.8, 0.37);
        let (d, e, f) = distances6(1.3, 0.8, -0.37);
        assert!(close(a, f, 1e-15) && close(b, e, 1e-15) && close(c, d, 1e-15));
    }

    #[test]
    fn flat_layout_round_trip() {
        let s = ReducedState {
            r1: 1.1,
            r2: 0.9,
            theta: 0.2,
            beta: -0.4,
            dr1: 0.1,
            dr2: 0.05,
            dtheta: 0.7,
            dbeta: 0.3,
        };
        let c = embed_cartesian(&s, 0.4, Problem::SixBody);
        let back = CartesianState::from_flat(&c.masses, &c.to_flat());
        assert_eq!(back, c);
        assert_eq!(ReducedState::from_slice(&s.to_array()), s);
    }
}
