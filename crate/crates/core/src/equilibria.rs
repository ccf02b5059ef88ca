//! Equilibria of the torqued arm.
//!
//! At rest (`p1 = p2 = 0`) the field vanishes iff `sin θ1 = β1 / (2mgL)` and
//! `sin θ2 = β2 / (mgL)`. Each joint has two solutions distinguished by the
//! sign of its cosine, giving four candidate points per torque pair.

use std::fmt;

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, State, Torques};

/// Relative tolerance for treating a torque as sitting on its existence bound.
pub const BOUNDARY_TOL: f64 = 1e-12;

pub const NEWTON_MAX_ITER: usize = 100;
pub const NEWTON_MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CosSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl CosSign {
    pub fn value(self) -> f64 {
        match self {
            CosSign::Plus => 1.0,
            CosSign::Minus => -1.0,
        }
    }

    fn of(cos: f64) -> Self {
        if cos < 0.0 {
            CosSign::Minus
        } else {
            CosSign::Plus
        }
    }
}

/// Cosine-sign label of each joint angle at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub theta1: CosSign,
    pub theta2: CosSign,
}

impl Branch {
    /// `(+,+)`, `(+,−)`, `(−,+)`, `(−,−)`; at zero torque these are the
    /// hanging, outer-inverted, inner-inverted and fully inverted points.
    pub const ALL: [Branch; 4] = [
        Branch { theta1: CosSign::Plus, theta2: CosSign::Plus },
        Branch { theta1: CosSign::Plus, theta2: CosSign::Minus },
        Branch { theta1: CosSign::Minus, theta2: CosSign::Plus },
        Branch { theta1: CosSign::Minus, theta2: CosSign::Minus },
    ];

    pub fn index(self) -> usize {
        Branch::ALL.iter().position(|b| *b == self).unwrap_or(0)
    }

    pub fn of_state(s: &State) -> Self {
        Branch {
            theta1: CosSign::of(s.theta1.cos()),
            theta2: CosSign::of(s.theta2.cos()),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |s: CosSign| if s == CosSign::Plus { '+' } else { '-' };
        write!(f, "({},{})", c(self.theta1), c(self.theta2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    /// `None` when the torques exceed what gravity can balance.
    pub state: Option<State>,
    pub energy: Option<f64>,
    pub branch: Branch,
    pub on_boundary: bool,
}

impl FixedPoint {
    pub fn exists(&self) -> bool {
        self.state.is_some()
    }
}

/// Balance of one joint: `sin θ = ratio`.
#[derive(Debug, Clone, Copy)]
struct JointBalance {
    sin: f64,
    cos_abs: f64,
    exists: bool,
    on_boundary: bool,
}

impl JointBalance {
    fn new(torque: f64, scale: f64) -> Self {
        let ratio = torque / scale;
        let excess = ratio.abs() - 1.0;
        if excess > BOUNDARY_TOL {
            return Self { sin: ratio, cos_abs: 0.0, exists: false, on_boundary: false };
        }
        if excess.abs() <= BOUNDARY_TOL {
            return Self { sin: ratio.signum(), cos_abs: 0.0, exists: true, on_boundary: true };
        }
        // +0.0 maps a negative zero torque onto the θ = π branch, not -π
        let sin = ratio + 0.0;
        Self { sin, cos_abs: (1.0 - sin * sin).sqrt(), exists: true, on_boundary: false }
    }

    fn angle(&self, sign: CosSign) -> f64 {
        self.sin.atan2(sign.value() * self.cos_abs)
    }
}

impl Arm {
    /// The four candidate equilibria in [`Branch::ALL`] order. Energies come
    /// from direct evaluation of the Hamiltonian.
    pub fn analytic_fixed_points(&self) -> [FixedPoint; 4] {
        let mgl = self.params.mgl();
        let j1 = JointBalance::new(self.torques.beta1, 2.0 * mgl);
        let j2 = JointBalance::new(self.torques.beta2, mgl);
        let exists = j1.exists && j2.exists;
        let on_boundary = j1.on_boundary || j2.on_boundary;
        Branch::ALL.map(|branch| {
            let state = exists.then(|| State::new(j1.angle(branch.theta1), 0.0, j2.angle(branch.theta2), 0.0));
            FixedPoint {
                state,
                energy: state.map(|s| self.energy(&s)),
                branch,
                on_boundary,
            }
        })
    }

    /// Damped Newton iteration on `vector_field = 0` from `guess`.
    pub fn refine_fixed_point(&self, guess: &State) -> Result<Refined> {
        if !guess.is_finite() {
            return Err(Error::NonFinite("fixed point guess"));
        }
        let tol = 1e-12 * self.params.mgl();
        let residual = |x: &Vector4<f64>| self.field(&State::from_vector(x)).to_vector().amax();

        let mut x = guess.to_vector();
        let mut r = residual(&x);
        let mut iterations = 0;
        while r > tol {
            if iterations == NEWTON_MAX_ITER {
                return Err(Error::Convergence { iterations, residual: r });
            }
            let s = State::from_vector(&x);
            let j = self.jacobian(&s).0;
            let sv = j.singular_values();
            if !(sv.min() > 1e-14 * sv.max()) {
                return Err(Error::Singular { iteration: iterations });
            }
            let f = self.field(&s).to_vector();
            let step = j
                .lu()
                .solve(&f)
                .ok_or(Error::Singular { iteration: iterations })?;

            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..=NEWTON_MAX_HALVINGS {
                let trial = x - step * scale;
                let rt = residual(&trial);
                if rt < r {
                    accepted = Some((trial, rt));
                    break;
                }
                scale *= 0.5;
            }
            iterations += 1;
            match accepted {
                Some((trial, rt)) => {
                    x = trial;
                    r = rt;
                }
                None => return Err(Error::Convergence { iterations, residual: r }),
            }
        }

        let state = State::from_vector(&x);
        let on_boundary = self.analytic_fixed_points()[0].on_boundary;
        Ok(Refined {
            point: FixedPoint {
                state: Some(state),
                energy: Some(self.energy(&state)),
                branch: Branch::of_state(&state),
                on_boundary,
            },
            iterations,
            residual: r,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub point: FixedPoint,
    pub iterations: usize,
    pub residual: f64,
}

/// True when both torques are within the closed existence region
/// `|β1| ≤ 2mgL`, `|β2| ≤ mgL`.
pub fn torques_admissible(mgl: f64, torques: &Torques) -> bool {
    torques.beta1.abs() <= 2.0 * mgl && torques.beta2.abs() <= mgl
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ArmParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_6, PI};

    fn unit(beta1: f64, beta2: f64) -> Arm {
        Arm::new(ArmParams::unit(), Torques::new(beta1, beta2).unwrap())
    }

    #[test]
    fn null_torque_points_are_exact() {
        let pts = unit(0.0, 0.0).analytic_fixed_points();
        let states = [
            State::new(0.0, 0.0, 0.0, 0.0),
            State::new(0.0, 0.0, PI, 0.0),
            State::new(PI, 0.0, 0.0, 0.0),
            State::new(PI, 0.0, PI, 0.0),
        ];
        let energies = [-3.0, -1.0, 1.0, 3.0];
        for ((p, s), e) in pts.iter().zip(states).zip(energies) {
            assert_eq!(p.state, Some(s));
            assert_eq!(p.energy, Some(e));
            assert!(!p.on_boundary);
        }
        assert_eq!(pts.map(|p| p.branch), Branch::ALL);
    }

    #[test]
    fn negative_zero_torque_keeps_pi_branch() {
        let pts = unit(-0.0, -0.0).analytic_fixed_points();
        assert_eq!(pts[3].state, Some(State::new(PI, 0.0, PI, 0.0)));
    }

    #[test]
    fn unit_torque_gives_thirty_degrees() {
        let pts = unit(1.0, 0.0).analytic_fixed_points();
        let s = pts[0].state.unwrap();
        assert_relative_eq!(s.theta1, FRAC_PI_6, epsilon = 1e-15);
        assert_eq!(s.theta2, 0.0);
        assert_relative_eq!(pts[2].state.unwrap().theta1, PI - FRAC_PI_6, epsilon = 1e-15);
    }

    #[test]
    fn excessive_torque_has_no_points() {
        let pts = unit(3.0, 0.0).analytic_fixed_points();
        assert!(pts.iter().all(|p| !p.exists() && p.energy.is_none()));
        let pts = unit(0.0, -1.0 - 1e-9).analytic_fixed_points();
        assert!(pts.iter().all(|p| !p.exists()));
    }

    #[test]
    fn boundary_points_are_flagged() {
        let pts = unit(2.0, 0.3).analytic_fixed_points();
        assert!(pts.iter().all(|p| p.exists() && p.on_boundary));
        assert_eq!(pts[0].state.unwrap().theta1, pts[2].state.unwrap().theta1);
        let pts = unit(-2.0 * (1.0 + 5e-13), -1.0).analytic_fixed_points();
        assert!(pts.iter().all(|p| p.exists() && p.on_boundary));
        assert_relative_eq!(pts[0].state.unwrap().theta1, -PI / 2.0);
    }

    #[test]
    fn refine_from_perturbed_origin() {
        let arm = unit(0.0, 0.0);
        let r = arm.refine_fixed_point(&State::new(0.1, 0.05, -0.1, 0.02)).unwrap();
        let s = r.point.state.unwrap();
        let oracle = arm.analytic_fixed_points()[0].state.unwrap();
        assert!((s.to_vector() - oracle.to_vector()).amax() <= 1e-10);
        assert_eq!(r.point.branch, Branch::ALL[0]);
        assert!(r.residual <= 1e-12);
    }

    #[test]
    fn refine_at_solution_takes_at_most_one_iteration() {
        let arm = unit(0.0, 0.0);
        let p2 = arm.analytic_fixed_points()[1].state.unwrap();
        let r = arm.refine_fixed_point(&p2).unwrap();
        assert!(r.iterations <= 1);
        assert_relative_eq!(r.point.state.unwrap().theta2, PI, epsilon = 1e-15);
    }

    #[test]
    fn refine_under_torque() {
        let arm = unit(1.0, 0.5);
        let r = arm.refine_fixed_point(&State::new(PI / 7.0, 0.0, PI / 5.0, 0.0)).unwrap();
        let s = r.point.state.unwrap();
        assert_relative_eq!(s.theta1.sin(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.theta2.sin(), 0.5, epsilon = 1e-12);
        assert!(arm.field(&s).to_vector().amax() <= 1e-12);
    }

    #[test]
    fn refine_reports_singularity_and_bad_input() {
        // cos θ1 = 0 makes the resting Jacobian singular
        let arm = unit(2.0, 0.5);
        let guess = State::new(PI / 2.0, 0.0, 0.3, 0.0);
        assert!(matches!(arm.refine_fixed_point(&guess), Err(Error::Singular { .. })));
        assert!(matches!(
            arm.refine_fixed_point(&State::new(f64::NAN, 0.0, 0.0, 0.0)),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn refine_without_equilibrium_fails_to_converge() {
        // gravity cannot balance this torque; the iteration must give up
        let arm = unit(5.0, 0.0);
        let err = arm.refine_fixed_point(&State::new(1.0, 0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. } | Error::Singular { .. }), "{err:?}");
    }

    #[test]
    fn resting_is_necessary_for_equilibrium() {
        // θ̇ = 0 forces p = 0: the kinetic matrix is positive definite
        let arm = unit(0.4, -0.2);
        for i in -10..=10 {
            for j in -10..=10 {
                if i == 0 && j == 0 {
                    continue;
                }
                for &(t1, t2) in &[(0.0, 0.0), (1.0, -2.0), (2.5, 0.7)] {
                    let s = State::new(t1, 0.3 * i as f64, t2, 0.3 * j as f64);
                    let f = arm.field(&s);
                    assert!(f.theta1.abs() + f.theta2.abs() > 1e-6);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn admissible_points_are_equilibria(
            r1 in -0.999..0.999f64, r2 in -0.999..0.999f64,
            m in 0.3..3.0f64, l in 0.3..3.0f64, g in 1.0..20.0f64,
        ) {
            let params = ArmParams::new(m, l, g).unwrap();
            let mgl = params.mgl();
            let arm = Arm::new(params, Torques::new(2.0 * mgl * r1, mgl * r2).unwrap());
            for p in arm.analytic_fixed_points() {
                let s = p.state.unwrap();
                prop_assert!(arm.field(&s).to_vector().amax() <= 1e-10 * mgl);
                prop_assert!((s.theta1.sin() - r1).abs() <= 1e-12);
                prop_assert!((s.theta2.sin() - r2).abs() <= 1e-12);
                prop_assert_eq!(p.energy.unwrap(), arm.energy(&s));
                prop_assert_eq!(Branch::of_state(&s), p.branch);
            }
        }

        #[test]
        fn existence_shrinks_toward_origin(
            b1 in -4.0..4.0f64, b2 in -2.0..2.0f64, t in 0.0..1.0f64,
        ) {
            let outer = unit(b1, b2).analytic_fixed_points()[0].exists();
            let inner = unit(t * b1, t * b2).analytic_fixed_points()[0].exists();
            prop_assert!(!outer || inner);
        }

        #[test]
        fn newton_recovers_branch(
            r1 in -0.95..0.95f64, r2 in -0.95..0.95f64,
            d in proptest::array::uniform4(-0.1..0.1f64),
            branch in 0usize..4,
        ) {
            let arm = unit(2.0 * r1, r2);
            let exact = arm.analytic_fixed_points()[branch].state.unwrap();
            let guess = State::from_vector(&(exact.to_vector() + Vector4::from(d)));
            let refined = arm.refine_fixed_point(&guess).unwrap();
            let s = refined.point.state.unwrap();
            prop_assert!((s.to_vector() - exact.to_vector()).amax() <= 1e-10);
            prop_assert_eq!(refined.point.branch, Branch::ALL[branch]);
        }
    }
}
