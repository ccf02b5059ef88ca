//! The two candidate invariant surfaces through the saddle-centers,
//!
//! ```text
//! M1: θ2 = 0, p2 =  (p1 / 2) cos θ1
//! M2: θ2 = π, p2 = -(p1 / 2) cos θ1
//! ```
//!
//! and the pendulum-like reduced dynamics in `(θ1, p1)` on them.
//!
//! On either surface `θ̇2` vanishes identically and `(θ̇1, ṗ1)` reduces
//! exactly to `(p1 / 2mL², −2mgL sin θ1)`. The momentum constraint is not
//! preserved, however: `ṗ2` differs from `d/dt[±(p1/2) cos θ1]` by
//! [`constraint_defect`], which vanishes only on `sin θ1 = 0`. Full-flow
//! checks therefore measure departure from the surface rather than assume
//! confinement.

use std::f64::consts::{PI, TAU};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::integrate::{integrate_flow, HamiltonianFlow, IntegratorSpec, PhasePoint};
use crate::model::{Arm, ArmParams, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum ManifoldId {
    #[value(name = "M1")]
    M1,
    #[value(name = "M2")]
    M2,
}

impl std::fmt::Display for ManifoldId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ManifoldId::M1 => "M1",
            ManifoldId::M2 => "M2",
        })
    }
}

impl ManifoldId {
    /// `θ2` on the surface.
    pub fn theta2(self) -> f64 {
        match self {
            ManifoldId::M1 => 0.0,
            ManifoldId::M2 => PI,
        }
    }

    /// Sign of the momentum constraint, `p2 = sign · (p1/2) cos θ1`.
    pub fn sign(self) -> f64 {
        match self {
            ManifoldId::M1 => 1.0,
            ManifoldId::M2 => -1.0,
        }
    }

    /// Potential offset contributed by the outer link, `∓mgL`.
    pub fn energy_offset(self, params: &ArmParams) -> f64 {
        -self.sign() * params.mgl()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedState {
    pub theta1: f64,
    pub p1: f64,
}

impl ReducedState {
    pub const fn new(theta1: f64, p1: f64) -> Self {
        Self { theta1, p1 }
    }
}

impl PhasePoint<2> for ReducedState {
    fn to_svector(&self) -> SVector<f64, 2> {
        SVector::<f64, 2>::new(self.theta1, self.p1)
    }

    fn from_svector(v: &SVector<f64, 2>) -> Self {
        Self::new(v[0], v[1])
    }
}

/// Lifts `(θ1, p1)` onto the named surface.
pub fn embed(id: ManifoldId, r: &ReducedState) -> State {
    State::new(r.theta1, r.p1, id.theta2(), id.sign() * 0.5 * r.p1 * r.theta1.cos())
}

/// Drops the outer-link coordinates.
pub fn project(s: &State) -> ReducedState {
    ReducedState::new(s.theta1, s.p1)
}

/// Smallest angle between `a` and `b` modulo `2π`, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Distance of `s` from the surface: `(r_theta, r_p)`.
pub fn residual(id: ManifoldId, s: &State) -> (f64, f64) {
    let r_theta = angular_distance(s.theta2, id.theta2());
    let r_p = (s.p2 - id.sign() * 0.5 * s.p1 * s.theta1.cos()).abs();
    (r_theta, r_p)
}

/// `(θ̇1, ṗ1) = (p1 / 2mL², −2mgL sin θ1)`.
pub fn reduced_vector_field(params: &ArmParams, r: &ReducedState) -> ReducedState {
    ReducedState::new(r.p1 / (2.0 * params.ml2()), -2.0 * params.mgl() * r.theta1.sin())
}

/// Full Hamiltonian (without torques) at `embed(id, r)`, in closed form.
pub fn reduced_energy(params: &ArmParams, id: ManifoldId, r: &ReducedState) -> f64 {
    r.p1 * r.p1 / (4.0 * params.ml2()) - 2.0 * params.mgl() * r.theta1.cos() + id.energy_offset(params)
}

/// Energy of the reduced saddle `(θ1, p1) = (π, 0)`, separating libration
/// from rotation.
pub fn separatrix_energy(params: &ArmParams, id: ManifoldId) -> f64 {
    reduced_energy(params, id, &ReducedState::new(PI, 0.0))
}

/// Closed form of `ṗ2 − d/dt[sign · (p1/2) cos θ1]` on the surface under
/// the unforced flow: `sign · sin θ1 · (mgL cos θ1 + p1² / 4mL²)`.
pub fn constraint_defect(params: &ArmParams, id: ManifoldId, r: &ReducedState) -> f64 {
    id.sign() * r.theta1.sin() * (params.mgl() * r.theta1.cos() + r.p1 * r.p1 / (4.0 * params.ml2()))
}

/// Rate of change of the constraint `p2 − sign·(p1/2)cos θ1` along the full
/// flow of `arm`, evaluated at `s`.
pub fn constraint_rate(arm: &Arm, id: ManifoldId, s: &State) -> f64 {
    let f = arm.field(s);
    let (sin, cos) = s.theta1.sin_cos();
    f.p2 - id.sign() * 0.5 * (f.p1 * cos - s.p1 * sin * f.theta1)
}

/// Reduced one-degree-of-freedom system on a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedPendulum {
    pub params: ArmParams,
    pub id: ManifoldId,
}

impl HamiltonianFlow<2> for ReducedPendulum {
    type Point = ReducedState;

    fn rhs(&self, y: &SVector<f64, 2>) -> SVector<f64, 2> {
        reduced_vector_field(&self.params, &ReducedState::from_svector(y)).to_svector()
    }

    fn rhs_jacobian(&self, y: &SVector<f64, 2>) -> SMatrix<f64, 2, 2> {
        SMatrix::<f64, 2, 2>::new(
            0.0,
            1.0 / (2.0 * self.params.ml2()),
            -2.0 * self.params.mgl() * y[0].cos(),
            0.0,
        )
    }

    fn energy(&self, y: &SVector<f64, 2>) -> f64 {
        reduced_energy(&self.params, self.id, &ReducedState::from_svector(y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub manifold: ManifoldId,
    pub max_r_theta: f64,
    pub max_r_p: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Set when torques are applied; the surfaces are only candidates then.
    pub exploratory: bool,
    pub steps: usize,
    /// Largest `(θ1, p1)` gap between the full flow and the reduced flow
    /// started from the same point, compared at shared time stamps (fixed
    /// step) or at the horizon (adaptive).
    pub max_reduced_gap: f64,
    /// First recorded time at which either residual exceeds the tolerance.
    pub first_exceedance: Option<f64>,
}

/// Integrates the full flow from `embed(id, r0)`, samples the surface
/// residual at every accepted step and compares against the reduced flow.
pub fn invariance_check(
    arm: &Arm,
    id: ManifoldId,
    r0: &ReducedState,
    horizon: f64,
    tol: f64,
    spec: &IntegratorSpec,
) -> Result<InvarianceReport> {
    let traj = crate::integrate::integrate(arm, &embed(id, r0), horizon, spec)?;
    let mut max_r_theta = 0.0f64;
    let mut max_r_p = 0.0f64;
    let mut first_exceedance = None;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let (rt, rp) = residual(id, s);
        max_r_theta = max_r_theta.max(rt);
        max_r_p = max_r_p.max(rp);
        if first_exceedance.is_none() && (rt > tol || rp > tol) {
            first_exceedance = Some(*t);
        }
    }
    let reduced = integrate_reduced(&arm.params, id, r0, horizon, spec)?;
    let gap = |a: &State, b: &ReducedState| (a.theta1 - b.theta1).abs().max((a.p1 - b.p1).abs());
    let max_reduced_gap = if reduced.times == traj.times {
        traj.states.iter().zip(&reduced.states).map(|(a, b)| gap(a, b)).fold(0.0, f64::max)
    } else {
        gap(&traj.last(), &reduced.last())
    };
    Ok(InvarianceReport {
        manifold: id,
        max_reduced_gap,
        max_r_theta,
        max_r_p,
        tolerance: tol,
        pass: max_r_theta <= tol && max_r_p <= tol,
        exploratory: !arm.torques.is_zero(),
        steps: traj.len() - 1,
        first_exceedance,
    })
}

/// Integrates the reduced system on `id` from `r0`.
pub fn integrate_reduced(
    params: &ArmParams,
    id: ManifoldId,
    r0: &ReducedState,
    horizon: f64,
    spec: &IntegratorSpec,
) -> Result<crate::integrate::Trajectory<ReducedState>> {
    Ok(integrate_flow(&ReducedPendulum { params: *params, id }, r0, horizon, spec)??)
}
