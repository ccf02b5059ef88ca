//! Hamiltonian of the two-link arm and its phase-space vector field.
//!
//! Both links have mass `m` and length `L`. Angles are absolute (measured
//! from the downward vertical) and `p1`, `p2` are their conjugate momenta.
//! The inner link carries both masses, so the potential is
//! `-mgL (2 cos θ1 + cos θ2)`, and constant joint torques contribute
//! `-θ1 β1 - θ2 β2`.

use std::f64::consts::TAU;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of the arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmParams {
    m: f64,
    length: f64,
    g: f64,
}

impl ArmParams {
    pub fn new(m: f64, length: f64, g: f64) -> Result<Self> {
        for (name, v) in [("m", m), ("L", length), ("g", g)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Domain(format!("{name} must be finite and positive, got {v}")));
            }
        }
        Ok(Self { m, length, g })
    }

    /// `m = L = g = 1`.
    pub fn unit() -> Self {
        Self { m: 1.0, length: 1.0, g: 1.0 }
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    /// Small-amplitude frequency of a simple pendulum, `sqrt(g/L)`.
    pub fn omega0(&self) -> f64 {
        (self.g / self.length).sqrt()
    }

    /// Energy / torque scale `mgL`.
    pub fn mgl(&self) -> f64 {
        self.m * self.g * self.length
    }

    /// Inertia scale `mL²`.
    pub fn ml2(&self) -> f64 {
        self.m * self.length * self.length
    }
}

/// Constant external joint torques.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Torques {
    pub beta1: f64,
    pub beta2: f64,
}

impl Torques {
    pub const ZERO: Torques = Torques { beta1: 0.0, beta2: 0.0 };

    pub fn new(beta1: f64, beta2: f64) -> Result<Self> {
        if !beta1.is_finite() || !beta2.is_finite() {
            return Err(Error::NonFinite("torques"));
        }
        Ok(Self { beta1, beta2 })
    }

    pub fn is_zero(&self) -> bool {
        self.beta1 == 0.0 && self.beta2 == 0.0
    }
}

/// Phase-space point `(θ1, p1, θ2, p2)`. Angles are never reduced implicitly.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    pub theta1: f64,
    pub p1: f64,
    pub theta2: f64,
    pub p2: f64,
}

impl State {
    pub const ORIGIN: State = State { theta1: 0.0, p1: 0.0, theta2: 0.0, p2: 0.0 };

    pub const fn new(theta1: f64, p1: f64, theta2: f64, p2: f64) -> Self {
        Self { theta1, p1, theta2, p2 }
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.theta1, self.p1, self.theta2, self.p2)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.theta1, self.p1, self.theta2, self.p2]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("state"))
        }
    }
}

/// Result of [`canonicalize_angles`]: the reduced state and the number of
/// full turns removed from each angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Canonicalized {
    pub state: State,
    pub winding: [i64; 2],
}

impl Canonicalized {
    /// `H(state) - H(original)`. Non-zero only under torques, since the
    /// torque potential is not periodic in the angles.
    pub fn energy_shift(&self, torques: &Torques) -> f64 {
        TAU * (self.winding[0] as f64 * torques.beta1 + self.winding[1] as f64 * torques.beta2)
    }
}

fn wrap_angle(theta: f64) -> (f64, i64) {
    let turns = (theta / TAU).floor();
    let mut reduced = theta - turns * TAU;
    let mut turns = turns as i64;
    // rounding can land exactly on 2π or slightly below zero
    if reduced >= TAU {
        reduced -= TAU;
        turns += 1;
    } else if reduced < 0.0 {
        reduced += TAU;
        turns -= 1;
    }
    (reduced, turns)
}

/// Reduces both angles into `[0, 2π)`, recording the winding removed.
pub fn canonicalize_angles(s: &State) -> Canonicalized {
    let (theta1, w1) = wrap_angle(s.theta1);
    let (theta2, w2) = wrap_angle(s.theta2);
    Canonicalized {
        state: State::new(theta1, s.p1, theta2, s.p2),
        winding: [w1, w2],
    }
}

/// Trigonometry of the relative angle shared by the energy, the vector
/// field and the Jacobian.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Coupling {
    pub sin: f64,
    pub cos: f64,
    /// `mL² (1 + sin²(θ1 - θ2))`
    pub denom: f64,
}

impl Coupling {
    pub fn at(params: &ArmParams, s: &State) -> Self {
        let (sin, cos) = (s.theta1 - s.theta2).sin_cos();
        Self {
            sin,
            cos,
            denom: params.ml2() * (1.0 + sin * sin),
        }
    }
}

/// The arm under a fixed pair of constant torques.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub params: ArmParams,
    pub torques: Torques,
}

impl Arm {
    pub fn new(params: ArmParams, torques: Torques) -> Self {
        Self { params, torques }
    }

    pub fn unforced(params: ArmParams) -> Self {
        Self::new(params, Torques::ZERO)
    }

    pub fn hamiltonian(&self, s: &State) -> Result<f64> {
        s.check_finite()?;
        Ok(self.energy(s))
    }

    pub fn vector_field(&self, s: &State) -> Result<State> {
        s.check_finite()?;
        Ok(self.field(s))
    }

    pub fn kinetic_energy(&self, s: &State) -> f64 {
        self.kinetic(s, &Coupling::at(&self.params, s))
    }

    pub(crate) fn kinetic(&self, s: &State, k: &Coupling) -> f64 {
        (0.5 * s.p1 * s.p1 + s.p2 * s.p2 - k.cos * s.p1 * s.p2) / k.denom
    }

    pub(crate) fn potential(&self, s: &State) -> f64 {
        -self.params.mgl() * (2.0 * s.theta1.cos() + s.theta2.cos())
            - s.theta1 * self.torques.beta1
            - s.theta2 * self.torques.beta2
    }

    /// Unchecked energy evaluation.
    pub(crate) fn energy(&self, s: &State) -> f64 {
        let k = Coupling::at(&self.params, s);
        self.kinetic(s, &k) + self.potential(s)
    }

    /// Unchecked right-hand side of Hamilton's equations.
    pub(crate) fn field(&self, s: &State) -> State {
        let p = &self.params;
        let k = Coupling::at(p, s);
        let (p1, p2) = (s.p1, s.p2);

        let theta1_dot = (p1 - k.cos * p2) / k.denom;
        let theta2_dot = (2.0 * p2 - k.cos * p1) / k.denom;

        // -∂T/∂θ1 = +∂T/∂θ2
        let quad = p1 * p1 + 2.0 * p2 * p2 - 2.0 * k.cos * p1 * p2;
        let coupling = quad * p.ml2() * k.cos * k.sin / (k.denom * k.denom) - k.sin * p1 * p2 / k.denom;

        let mgl = p.mgl();
        State {
            theta1: theta1_dot,
            p1: coupling - 2.0 * mgl * s.theta1.sin() + self.torques.beta1,
            theta2: theta2_dot,
            p2: -coupling - mgl * s.theta2.sin() + self.torques.beta2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn unit(beta1: f64, beta2: f64) -> Arm {
        Arm::new(ArmParams::unit(), Torques::new(beta1, beta2).unwrap())
    }

    /// Central-difference symplectic gradient, step `eps^(1/3) * max(1, |x|)`.
    fn fd_field(arm: &Arm, s: &State) -> [f64; 4] {
        let x = s.to_array();
        let mut grad = [0.0; 4];
        for i in 0..4 {
            let h = f64::EPSILON.cbrt() * x[i].abs().max(1.0);
            let (mut up, mut dn) = (x, x);
            up[i] += h;
            dn[i] -= h;
            let e = |a: [f64; 4]| arm.energy(&State::new(a[0], a[1], a[2], a[3]));
            grad[i] = (e(up) - e(dn)) / (2.0 * h);
        }
        [grad[1], -grad[0], grad[3], -grad[2]]
    }

    #[test]
    fn energies_at_origin_and_inverted() {
        assert_eq!(unit(0.0, 0.0).hamiltonian(&State::ORIGIN).unwrap(), -3.0);
        assert_eq!(unit(0.0, 0.0).hamiltonian(&State::new(PI, 0.0, PI, 0.0)).unwrap(), 3.0);
        assert_eq!(unit(0.3, 0.2).hamiltonian(&State::ORIGIN).unwrap(), -3.0);
    }

    #[test]
    fn field_examples() {
        let f = unit(0.0, 0.0).vector_field(&State::ORIGIN).unwrap();
        assert_eq!(f.to_array(), [0.0; 4]);

        let f = unit(0.0, 0.0).vector_field(&State::new(FRAC_PI_2, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(f.theta1, 0.0);
        assert_eq!(f.theta2, 0.0);
        assert_relative_eq!(f.p1, -2.0, epsilon = 1e-15);
        assert_relative_eq!(f.p2, 0.0, epsilon = 1e-15);

        let f = unit(0.5, 0.25).vector_field(&State::ORIGIN).unwrap();
        assert_eq!(f.to_array(), [0.0, 0.5, 0.0, 0.25]);
    }

    #[test]
    fn rejects_non_finite() {
        let arm = unit(0.0, 0.0);
        let bad = State::new(f64::NAN, 0.0, 0.0, 0.0);
        assert_eq!(arm.hamiltonian(&bad), Err(Error::NonFinite("state")));
        assert!(arm.vector_field(&State::new(0.0, f64::INFINITY, 0.0, 0.0)).is_err());
        assert!(ArmParams::new(0.0, 1.0, 1.0).is_err());
        assert!(ArmParams::new(1.0, -1.0, 1.0).is_err());
        assert!(Torques::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn canonicalize_examples() {
        let c = canonicalize_angles(&State::new(TAU + 0.1, 1.0, -0.1, 2.0));
        assert_relative_eq!(c.state.theta1, 0.1, epsilon = 1e-15);
        assert_relative_eq!(c.state.theta2, TAU - 0.1, epsilon = 1e-15);
        assert_eq!((c.state.p1, c.state.p2), (1.0, 2.0));
        assert_eq!(c.winding, [1, -1]);

        let s = State::new(0.5, 0.0, 0.5, 0.0);
        let c = canonicalize_angles(&s);
        assert_eq!(c.state, s);
        assert_eq!(c.winding, [0, 0]);

        let c = canonicalize_angles(&State::new(-PI, 0.0, 3.0 * PI, 0.0));
        assert_relative_eq!(c.state.theta1, PI, epsilon = 1e-15);
        assert_relative_eq!(c.state.theta2, PI, epsilon = 1e-15);
        assert_eq!(c.winding, [-1, 1]);

        let c = canonicalize_angles(&State::new(-1e-300, 0.0, 0.0, 0.0));
        assert!(c.state.theta1 >= 0.0 && c.state.theta1 < TAU);
    }

    #[test]
    fn canonical_energy_shift_accounts_for_torque_potential() {
        let arm = unit(0.7, -0.4);
        let s = State::new(5.0 * PI + 0.3, 0.2, -3.0 * PI, -0.1);
        let c = canonicalize_angles(&s);
        let shifted = arm.energy(&c.state);
        assert_relative_eq!(shifted, arm.energy(&s) + c.energy_shift(&arm.torques), epsilon = 1e-12);
    }

    fn state_strategy() -> impl Strategy<Value = State> {
        (-10.0..10.0f64, -5.0..5.0f64, -10.0..10.0f64, -5.0..5.0f64)
            .prop_map(|(a, b, c, d)| State::new(a, b, c, d))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn field_is_symplectic_gradient(
            s in state_strategy(),
            b1 in -3.0..3.0f64,
            b2 in -3.0..3.0f64,
            m in 0.2..3.0f64,
            l in 0.2..3.0f64,
            g in 0.5..20.0f64,
        ) {
            let arm = Arm::new(ArmParams::new(m, l, g).unwrap(), Torques::new(b1, b2).unwrap());
            let f = arm.field(&s).to_array();
            let fd = fd_field(&arm, &s);
            let scale = f.iter().chain(fd.iter()).fold(1.0f64, |a, v| a.max(v.abs()));
            for i in 0..4 {
                prop_assert!((f[i] - fd[i]).abs() <= 1e-6 * scale, "component {i}: {} vs {}", f[i], fd[i]);
            }
        }

        #[test]
        fn unforced_energy_is_even(s in state_strategy()) {
            let arm = Arm::unforced(ArmParams::new(1.3, 0.7, 9.81).unwrap());
            let flipped = State::new(-s.theta1, -s.p1, -s.theta2, -s.p2);
            prop_assert_eq!(arm.energy(&s), arm.energy(&flipped));
        }

        #[test]
        fn unforced_energy_is_even_in_momentum(s in state_strategy()) {
            let arm = Arm::unforced(ArmParams::new(0.4, 2.0, 3.0).unwrap());
            let reversed = State::new(s.theta1, -s.p1, s.theta2, -s.p2);
            prop_assert_eq!(arm.energy(&s), arm.energy(&reversed));
        }
    }
}
