//! Time integration of the Hamiltonian flow.
//!
//! The Hamiltonian is not separable (the kinetic term mixes momenta with the
//! relative angle), so explicit splitting schemes such as leapfrog are not
//! symplectic here. The symplectic choice is the implicit midpoint rule,
//! solved per step by fixed-point iteration with a Newton fallback. An
//! embedded Dormand–Prince 5(4) pair is available as an accurate
//! non-symplectic reference.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, State};

/// Fixed-point / Newton residual target for one implicit step, relative to
/// `max(1, ‖y‖∞)`.
pub const IMPLICIT_RESIDUAL: f64 = 1e-13;
const NON_CONTRACTING_LIMIT: usize = 10;
const FIXED_POINT_MAX_ITER: usize = 60;
const NEWTON_MAX_ITER: usize = 30;

/// A point in an `N`-dimensional phase space.
pub trait PhasePoint<const N: usize>: Copy {
    fn to_svector(&self) -> SVector<f64, N>;
    fn from_svector(v: &SVector<f64, N>) -> Self;
}

impl<const N: usize> PhasePoint<N> for SVector<f64, N> {
    fn to_svector(&self) -> SVector<f64, N> {
        *self
    }

    fn from_svector(v: &SVector<f64, N>) -> Self {
        *v
    }
}

impl PhasePoint<4> for State {
    fn to_svector(&self) -> SVector<f64, 4> {
        self.to_vector()
    }

    fn from_svector(v: &SVector<f64, 4>) -> Self {
        State::from_vector(v)
    }
}

/// Autonomous Hamiltonian vector field with its Jacobian and energy.
pub trait HamiltonianFlow<const N: usize> {
    type Point: PhasePoint<N>;

    fn rhs(&self, y: &SVector<f64, N>) -> SVector<f64, N>;
    fn rhs_jacobian(&self, y: &SVector<f64, N>) -> SMatrix<f64, N, N>;
    fn energy(&self, y: &SVector<f64, N>) -> f64;
}

impl HamiltonianFlow<4> for Arm {
    type Point = State;

    fn rhs(&self, y: &SVector<f64, 4>) -> SVector<f64, 4> {
        self.field(&State::from_vector(y)).to_vector()
    }

    fn rhs_jacobian(&self, y: &SVector<f64, 4>) -> SMatrix<f64, 4, 4> {
        self.jacobian(&State::from_vector(y)).0
    }

    fn energy(&self, y: &SVector<f64, 4>) -> f64 {
        Arm::energy(self, &State::from_vector(y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    /// Fixed step, symplectic.
    ImplicitMidpoint { step: f64 },
    /// Dormand–Prince 5(4) with per-step error control.
    ExplicitAdaptive { tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSpec {
    #[serde(flatten)]
    pub method: Method,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}

/// Step budget used when none is given.
pub const DEFAULT_MAX_STEPS: usize = 100_000_000;

impl IntegratorSpec {
    pub fn implicit_midpoint(step: f64) -> Self {
        Self { method: Method::ImplicitMidpoint { step }, max_steps: DEFAULT_MAX_STEPS }
    }

    pub fn explicit_adaptive(tolerance: f64) -> Self {
        Self { method: Method::ExplicitAdaptive { tolerance }, max_steps: DEFAULT_MAX_STEPS }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::ImplicitMidpoint { step } if !(step.is_finite() && step > 0.0) => {
                return Err(Error::Domain(format!("step must be positive, got {step}")));
            }
            Method::ExplicitAdaptive { tolerance } if !(tolerance > 0.0 && tolerance <= 1e-2) => {
                return Err(Error::Domain(format!("tolerance must lie in (0, 1e-2], got {tolerance}")));
            }
            _ => {}
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Accepted steps of one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<P> {
    pub times: Vec<f64>,
    pub states: Vec<P>,
    pub energies: Vec<f64>,
    /// `max |H(t) − H(0)|` over the recorded steps.
    pub energy_drift: f64,
    /// For fixed-step runs, `energy_drift / step²`.
    pub drift_constant: Option<f64>,
}

impl<P: Copy> Trajectory<P> {
    fn start(t0: f64, p: P, e: f64) -> Self {
        Self {
            times: vec![t0],
            states: vec![p],
            energies: vec![e],
            energy_drift: 0.0,
            drift_constant: None,
        }
    }

    fn push(&mut self, t: f64, p: P, e: f64) {
        self.energy_drift = self.energy_drift.max((e - self.energies[0]).abs());
        self.times.push(t);
        self.states.push(p);
        self.energies.push(e);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> P {
        *self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always holds the initial time")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationFailure {
    StepFailure { time: f64 },
    Truncated { steps: usize, time: f64 },
}

/// A failed integration, carrying everything accepted before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationError<P> {
    pub failure: IntegrationFailure,
    pub partial: Trajectory<P>,
}

impl<P> From<IntegrationError<P>> for Error {
    fn from(e: IntegrationError<P>) -> Self {
        match e.failure {
            IntegrationFailure::StepFailure { time } => Error::StepFailure { time },
            IntegrationFailure::Truncated { steps, time } => Error::Truncated { steps, time },
        }
    }
}

pub type IntegrationResult<P> = std::result::Result<Trajectory<P>, IntegrationError<P>>;

/// Integrates `flow` from `y0` over `[0, horizon]`, recording every accepted step.
pub fn integrate_flow<const N: usize, F: HamiltonianFlow<N>>(
    flow: &F,
    y0: &F::Point,
    horizon: f64,
    spec: &IntegratorSpec,
) -> Result<IntegrationResult<F::Point>> {
    spec.validate()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
    }
    let y = y0.to_svector();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    Ok(match spec.method {
        Method::ImplicitMidpoint { step } => implicit_midpoint(flow, y, horizon, step, spec.max_steps),
        Method::ExplicitAdaptive { tolerance } => dormand_prince(flow, y, horizon, tolerance, spec.max_steps),
    })
}

/// Integrates the full four-dimensional arm dynamics.
pub fn integrate(arm: &Arm, s0: &State, horizon: f64, spec: &IntegratorSpec) -> Result<Trajectory<State>> {
    Ok(integrate_flow(arm, s0, horizon, spec)??)
}

fn step_times(horizon: f64, step: f64) -> usize {
    let n = horizon / step;
    let rounded = n.round();
    if (n - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        (rounded as usize).max(1)
    } else {
        n.ceil() as usize
    }
}

/// Solves `z = h f(y + z/2)` for the midpoint increment.
fn midpoint_increment<const N: usize, F: HamiltonianFlow<N>>(
    flow: &F,
    y: &SVector<f64, N>,
    h: f64,
    guess: SVector<f64, N>,
) -> Option<SVector<f64, N>> {
    let tol = IMPLICIT_RESIDUAL * y.amax().max(1.0);
    let residual = |z: &SVector<f64, N>| z - flow.rhs(&(y + z * 0.5)) * h;

    let mut z = guess;
    let mut r = residual(&z).amax();
    let mut stalled = 0;
    for _ in 0..FIXED_POINT_MAX_ITER {
        if r <= tol {
            return Some(z);
        }
        let next = flow.rhs(&(y + z * 0.5)) * h;
        let rn = residual(&next).amax();
        if rn >= r {
            stalled += 1;
        } else {
            stalled = 0;
        }
        z = next;
        r = rn;
        if stalled >= NON_CONTRACTING_LIMIT || !r.is_finite() {
            break;
        }
    }
    if r <= tol {
        return Some(z);
    }

    // Newton on G(z) = z − h f(y + z/2), G'(z) = I − (h/2) J
    if !r.is_finite() {
        z = guess;
    }
    for _ in 0..NEWTON_MAX_ITER {
        let g = residual(&z);
        if g.amax() <= tol {
            return Some(z);
        }
        let jac = SMatrix::<f64, N, N>::identity() - flow.rhs_jacobian(&(y + z * 0.5)) * (0.5 * h);
        let jd = DMatrix::from_column_slice(N, N, jac.as_slice());
        let dz = jd.lu().solve(&DVector::from_column_slice(g.as_slice()))?;
        z -= SVector::<f64, N>::from_column_slice(dz.as_slice());
    }
    (residual(&z).amax() <= tol).then_some(z)
}

fn implicit_midpoint<const N: usize, F: HamiltonianFlow<N>>(
    flow: &F,
    y0: SVector<f64, N>,
    horizon: f64,
    step: f64,
    max_steps: usize,
) -> IntegrationResult<F::Point> {
    let n = step_times(horizon, step);
    let mut traj = Trajectory::start(0.0, F::Point::from_svector(&y0), flow.energy(&y0));
    let mut y = y0;
    let mut z = flow.rhs(&y) * step;
    for k in 1..=n {
        let t_prev = (k - 1) as f64 * step;
        if k > max_steps {
            return Err(IntegrationError {
                failure: IntegrationFailure::Truncated { steps: k - 1, time: t_prev },
                partial: traj,
            });
        }
        let t = if k == n { horizon } else { k as f64 * step };
        let h = t - t_prev;
        match midpoint_increment(flow, &y, h, z) {
            Some(inc) => {
                y += inc;
                z = inc * (step / h);
            }
            None => {
                return Err(IntegrationError {
                    failure: IntegrationFailure::StepFailure { time: t_prev },
                    partial: traj,
                });
            }
        }
        traj.push(t, F::Point::from_svector(&y), flow.energy(&y));
    }
    traj.drift_constant = Some(traj.energy_drift / (step * step));
    Ok(traj)
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dormand_prince<const N: usize, F: HamiltonianFlow<N>>(
    flow: &F,
    y0: SVector<f64, N>,
    horizon: f64,
    tol: f64,
    max_steps: usize,
) -> IntegrationResult<F::Point> {
    let mut traj = Trajectory::start(0.0, F::Point::from_svector(&y0), flow.energy(&y0));
    let err_norm = |y: &SVector<f64, N>, yn: &SVector<f64, N>, e: &SVector<f64, N>| {
        (0..N)
            .map(|i| e[i].abs() / (tol + tol * y[i].abs().max(yn[i].abs())))
            .fold(0.0, f64::max)
    };

    let mut y = y0;
    let mut t = 0.0;
    let mut k1 = flow.rhs(&y);

    // initial step from the local scale of the solution and its derivative
    let d0 = (0..N).map(|i| y[i].abs() / (tol + tol * y[i].abs())).fold(0.0, f64::max);
    let d1 = (0..N).map(|i| k1[i].abs() / (tol + tol * y[i].abs())).fold(0.0, f64::max);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(horizon);

    let mut accepted = 0;
    while t < horizon {
        if accepted >= max_steps {
            return Err(IntegrationError {
                failure: IntegrationFailure::Truncated { steps: accepted, time: t },
                partial: traj,
            });
        }
        let last = t + h >= horizon;
        if last {
            h = horizon - t;
        }
        let mut k = [SVector::<f64, N>::zeros(); 7];
        k[0] = k1;
        for s in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                yi += kj * (h * A[s][j]);
            }
            k[s] = flow.rhs(&yi);
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5 += k[s] * (h * B5[s]);
            y4 += k[s] * (h * B4[s]);
        }
        let err = err_norm(&y, &y5, &(y5 - y4));
        if !err.is_finite() || h < 1e-14 * horizon.max(1.0) && err > 1.0 {
            return Err(IntegrationError {
                failure: IntegrationFailure::StepFailure { time: t },
                partial: traj,
            });
        }
        if err <= 1.0 {
            t = if last { horizon } else { t + h };
            y = y5;
            k1 = k[6];
            accepted += 1;
            traj.push(t, F::Point::from_svector(&y), flow.energy(&y));
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err <= 1.0 { factor } else { factor.min(1.0) };
    }
    Ok(traj)
}
