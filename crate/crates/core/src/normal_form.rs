//! Quadratic normal form at a saddle-center.
//!
//! A linear symplectic change of variables `d = T w`, `w = (x, p_x, y, p_y)`,
//! takes the quadratic part of `H` about the fixed point to
//!
//! ```text
//! H ≈ ε + (ν/2)(p_x² − x²) + (ω/2)(y² + p_y²)
//! ```
//!
//! so that the hyperbolic and rotational motions decouple. `T` is built from
//! the Jacobian eigenvectors: the real pair `±ν` spans the `(x, p_x)` plane,
//! the imaginary pair `±iω` the `(y, p_y)` plane.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::equilibria::FixedPoint;
use crate::error::{Error, Result};
use crate::linear::{classify, eigen4, symplectic_form, FixedPointKind};
use crate::model::{Arm, State};

/// Relative tolerance, in units of `mgL`, below which a modal energy counts
/// as zero.
pub const DEFAULT_MOTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MotionClass {
    Stationary,
    PurePeriodic,
    PureHyperbolic,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySplit {
    pub e_hyp: f64,
    pub e_rot: f64,
    pub motion_class: MotionClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormFrame {
    pub base_point: State,
    /// Columns `e_x, e_px, e_y, e_py`: normal coordinates to displacements.
    pub transform: Matrix4<f64>,
    pub inverse_transform: Matrix4<f64>,
    pub nu: f64,
    pub omega: f64,
    /// `H(base_point)`.
    pub epsilon: f64,
    /// Hessian of `H` at the base point, in state coordinates.
    pub hessian: Matrix4<f64>,
    /// Absolute threshold for [`MotionClass`] decisions.
    pub motion_tol: f64,
}

fn omega_form(u: &Vector4<f64>, v: &Vector4<f64>) -> f64 {
    (u.transpose() * symplectic_form() * v)[(0, 0)]
}

/// Builds the frame at `fp`, which must classify as a saddle-center under
/// `tol_zero`.
pub fn build_normal_form(arm: &Arm, fp: &FixedPoint, tol_zero: f64) -> Result<NormalFormFrame> {
    let base = fp
        .state
        .ok_or_else(|| Error::Domain(format!("fixed point on branch {} does not exist", fp.branch)))?;
    frame_at(arm, &base, tol_zero)
}

/// As [`build_normal_form`], from a bare state.
pub fn frame_at(arm: &Arm, base: &State, tol_zero: f64) -> Result<NormalFormFrame> {
    let jac = arm.jacobian(base);
    let eig = eigen4(&jac)?;
    let class = classify(&eig, tol_zero)?;
    if class.kind != FixedPointKind::SaddleCenter {
        return Err(Error::Classification {
            expected: FixedPointKind::SaddleCenter.to_string(),
            found: class.kind.to_string(),
        });
    }

    let pick = |pred: &dyn Fn(&num_complex::Complex64) -> bool| {
        eig.values.iter().position(pred).expect("saddle-center spectrum has every sign")
    };
    let i_plus = pick(&|z| z.re.abs() > z.im.abs() && z.re > 0.0);
    let i_minus = pick(&|z| z.re.abs() > z.im.abs() && z.re < 0.0);
    let i_rot = pick(&|z| z.im.abs() > z.re.abs() && z.im > 0.0);
    let i_rot_conj = pick(&|z| z.im.abs() > z.re.abs() && z.im < 0.0);

    let nu = 0.5 * (eig.values[i_plus].re - eig.values[i_minus].re);
    let omega = 0.5 * (eig.values[i_rot].im - eig.values[i_rot_conj].im);

    let mut u_plus = eig.vectors[i_plus].map(|c| c.re);
    let mut u_minus = eig.vectors[i_minus].map(|c| c.re);
    let pairing = omega_form(&u_plus, &u_minus);
    if !(pairing.abs() > 1e-8 * u_plus.norm() * u_minus.norm()) {
        return Err(Error::Numerical(format!("hyperbolic eigenvectors are symplectically degenerate ({pairing:e})")));
    }
    // scale so that ω(u+, u−) = −2, giving ω(e_x, e_px) = 1
    let scale = (2.0 / pairing.abs()).sqrt();
    u_plus *= scale;
    u_minus *= -pairing.signum() * scale;
    let e_x = (u_plus + u_minus) * 0.5;
    let e_px = (u_plus - u_minus) * 0.5;

    let w = eig.vectors[i_rot];
    let a = w.map(|c| c.re);
    let b = w.map(|c| c.im);
    let area = omega_form(&a, &b);
    if !(area > 1e-8 * a.norm() * b.norm()) {
        return Err(Error::Numerical(format!(
            "rotational eigenplane has non-positive symplectic area ({area:e})"
        )));
    }
    let r = area.sqrt().recip();
    let (e_y, e_py) = (a * r, b * r);

    let transform = Matrix4::from_columns(&[e_x, e_px, e_y, e_py]);
    let inverse_transform = transform
        .try_inverse()
        .ok_or_else(|| Error::Numerical("normal-form transform is singular".into()))?;
    let cond = transform.norm() * inverse_transform.norm();
    if !(cond < crate::linear::EIGENBASIS_CONDITION_LIMIT) {
        return Err(Error::Numerical(format!("normal-form transform is ill-conditioned ({cond:e})")));
    }

    Ok(NormalFormFrame {
        base_point: *base,
        transform,
        inverse_transform,
        nu,
        omega,
        epsilon: arm.energy(base),
        hessian: jac.hessian(),
        motion_tol: DEFAULT_MOTION_TOL * arm.params.mgl(),
    })
}

/// Wraps an angle difference into `(−π, π]`.
fn wrap(d: f64) -> f64 {
    let r = (d + PI).rem_euclid(TAU) - PI;
    if r == -PI {
        PI
    } else {
        r
    }
}

impl NormalFormFrame {
    pub fn with_motion_tol(mut self, tol: f64) -> Self {
        self.motion_tol = tol;
        self
    }

    /// `s − base_point`, with angle differences wrapped into `(−π, π]`.
    pub fn displacement(&self, s: &State) -> Vector4<f64> {
        let b = &self.base_point;
        Vector4::new(wrap(s.theta1 - b.theta1), s.p1 - b.p1, wrap(s.theta2 - b.theta2), s.p2 - b.p2)
    }

    pub fn to_normal_coords(&self, s: &State) -> Vector4<f64> {
        self.inverse_transform * self.displacement(s)
    }

    pub fn from_normal_coords(&self, w: &Vector4<f64>) -> State {
        State::from_vector(&(self.base_point.to_vector() + self.transform * w))
    }

    /// `Tᵀ Hess T`, block-diagonal up to rounding.
    pub fn normal_hessian(&self) -> Matrix4<f64> {
        self.transform.transpose() * self.hessian * self.transform
    }

    /// `max |Tᵀ S T − S|`.
    pub fn symplecticity_defect(&self) -> f64 {
        let s = symplectic_form();
        (self.transform.transpose() * s * self.transform - s).amax()
    }

    /// Largest `(x, p_x)`–`(y, p_y)` coupling entry of the normal Hessian
    /// relative to its largest entry.
    pub fn coupling_defect(&self) -> f64 {
        let h = self.normal_hessian();
        let off = h.fixed_view::<2, 2>(0, 2).amax().max(h.fixed_view::<2, 2>(2, 0).amax());
        off / h.amax()
    }

    /// `ε + ½ dᵀ Hess d`.
    pub fn quadratic_energy(&self, s: &State) -> f64 {
        let d = self.displacement(s);
        self.epsilon + 0.5 * d.dot(&(self.hessian * d))
    }

    pub fn energy_split_normal(&self, w: &Vector4<f64>) -> EnergySplit {
        let h = self.normal_hessian();
        let block = |i: usize| -> f64 {
            let m: Matrix2<f64> = h.fixed_view::<2, 2>(i, i).into();
            let v = w.fixed_rows::<2>(i);
            0.5 * v.dot(&(m * v))
        };
        let (e_hyp, e_rot) = (block(0), block(2));
        // e_hyp vanishes on the stable and unstable rays themselves, so the
        // hyperbolic content is measured by (ν/2)(x² + p_x²) instead
        let hyp = 0.5 * self.nu * w.fixed_rows::<2>(0).norm_squared() > self.motion_tol;
        let rot = e_rot > self.motion_tol;
        let motion_class = match (hyp, rot) {
            (false, false) => MotionClass::Stationary,
            (false, true) => MotionClass::PurePeriodic,
            (true, false) => MotionClass::PureHyperbolic,
            (true, true) => MotionClass::Mixed,
        };
        EnergySplit { e_hyp, e_rot, motion_class }
    }

    pub fn energy_split(&self, s: &State) -> EnergySplit {
        self.energy_split_normal(&self.to_normal_coords(s))
    }

    /// Exact flow of the quadratic normal form for time `t`.
    pub fn linearized_orbit(&self, w0: &Vector4<f64>, t: f64) -> Vector4<f64> {
        let up = 0.5 * (w0[0] + w0[1]) * (self.nu * t).exp();
        let down = 0.5 * (w0[0] - w0[1]) * (-self.nu * t).exp();
        let (sin, cos) = (self.omega * t).sin_cos();
        Vector4::new(
            up + down,
            up - down,
            w0[2] * cos + w0[3] * sin,
            -w0[2] * sin + w0[3] * cos,
        )
    }

    /// Rotation period `2π/ω`.
    pub fn period(&self) -> f64 {
        TAU / self.omega
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{integrate, IntegratorSpec};
    use crate::linear::{default_tol_zero, linear_propagate};
    use crate::manifolds::{embed, ManifoldId, ReducedState};
    use crate::model::{ArmParams, Torques};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit() -> Arm {
        Arm::unforced(ArmParams::unit())
    }

    fn frame(arm: &Arm, idx: usize) -> NormalFormFrame {
        let fp = arm.analytic_fixed_points()[idx];
        build_normal_form(arm, &fp, default_tol_zero(arm.params.omega0())).unwrap()
    }

    #[test]
    fn saddle_centers_at_unit_parameters() {
        let arm = unit();
        let q = 2f64.powf(0.25);
        for (idx, eps) in [(1, -1.0), (2, 1.0)] {
            let f = frame(&arm, idx);
            assert!((f.nu - q).abs() <= 1e-10, "{}", f.nu);
            assert!((f.omega - q).abs() <= 1e-10, "{}", f.omega);
            assert_relative_eq!(f.epsilon, eps, epsilon = 1e-15);
            assert!(f.symplecticity_defect() <= 1e-10);
            assert!((f.transform * f.inverse_transform - Matrix4::identity()).amax() <= 1e-12);
            assert!(f.coupling_defect() <= 1e-10);
        }
    }

    #[test]
    fn normal_hessian_has_the_expected_diagonal() {
        let f = frame(&unit(), 1);
        let h = f.normal_hessian();
        let expected = Matrix4::from_diagonal(&Vector4::new(-f.nu, f.nu, f.omega, f.omega));
        assert!((h - expected).amax() <= 1e-10, "{h}");
    }

    #[test]
    fn frequencies_match_spectrum_elsewhere() {
        let params = ArmParams::new(1.3, 0.7, 9.81).unwrap();
        let arm = Arm::new(params, Torques::new(2.1, -3.0).unwrap());
        let fp = arm.analytic_fixed_points()[1];
        let f = build_normal_form(&arm, &fp, default_tol_zero(params.omega0())).unwrap();
        let eig = eigen4(&arm.jacobian(&fp.state.unwrap())).unwrap();
        let real = eig.values.iter().filter(|z| z.re.abs() > z.im.abs()).map(|z| z.norm()).fold(0.0, f64::max);
        let imag = eig.values.iter().filter(|z| z.im.abs() > z.re.abs()).map(|z| z.norm()).fold(0.0, f64::max);
        assert!((f.nu - real).abs() <= 1e-10);
        assert!((f.omega - imag).abs() <= 1e-10);
        assert_relative_eq!(f.epsilon, fp.energy.unwrap(), epsilon = 1e-14);
        assert!(f.symplecticity_defect() <= 1e-10);
        assert!(f.coupling_defect() <= 1e-10);
    }

    #[test]
    fn non_saddle_centers_are_rejected() {
        let arm = unit();
        let tol = default_tol_zero(1.0);
        for idx in [0, 3] {
            let err = build_normal_form(&arm, &arm.analytic_fixed_points()[idx], tol).unwrap_err();
            assert!(matches!(err, Error::Classification { .. }), "{err:?}");
        }
        let far = Arm::new(ArmParams::unit(), Torques::new(5.0, 0.0).unwrap());
        assert!(matches!(
            build_normal_form(&far, &far.analytic_fixed_points()[1], tol),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn base_point_is_origin_and_stationary() {
        let f = frame(&unit(), 2);
        assert_eq!(f.to_normal_coords(&f.base_point), Vector4::zeros());
        let split = f.energy_split(&f.base_point);
        assert_eq!((split.e_hyp, split.e_rot), (0.0, 0.0));
        assert_eq!(split.motion_class, MotionClass::Stationary);
    }

    #[test]
    fn angle_wrapping_in_displacement() {
        let f = frame(&unit(), 1);
        // θ2 = π at the base; −π + δ is a displacement of δ
        let s = State::new(0.0, 0.0, -PI + 1e-3, 0.0);
        assert_relative_eq!(f.displacement(&s)[2], 1e-3, epsilon = 1e-12);
    }

    #[test]
    fn unstable_direction_has_no_rotational_content() {
        let arm = unit();
        let f = frame(&arm, 1);
        let eig = eigen4(&arm.jacobian(&f.base_point)).unwrap();
        let i = eig.values.iter().position(|z| z.re > 0.5).unwrap();
        let u = eig.vectors[i].map(|c| c.re) * 1e-3;
        let w = f.to_normal_coords(&State::from_vector(&(f.base_point.to_vector() + u)));
        assert!(w[2].abs() + w[3].abs() <= 1e-10, "{w}");
        // on the unstable ray x = p_x
        assert_relative_eq!(w[0], w[1], max_relative = 1e-10);
        assert_eq!(f.energy_split_normal(&w).motion_class, MotionClass::PureHyperbolic);
    }

    #[test]
    fn rotational_plane_is_pure_periodic() {
        let arm = unit();
        let f = frame(&arm, 2);
        let eig = eigen4(&arm.jacobian(&f.base_point)).unwrap();
        let i = eig.values.iter().position(|z| z.im > 0.5).unwrap();
        let a = eig.vectors[i].map(|c| c.re) * 1e-3;
        let s = State::from_vector(&(f.base_point.to_vector() + a));
        let split = f.energy_split(&s);
        assert_eq!(split.motion_class, MotionClass::PurePeriodic);
        assert!(split.e_rot > 0.0);
    }

    #[test]
    fn surface_displacement_is_not_purely_hyperbolic() {
        // M1 through the inner-inverted point is not the unstable-stable
        // eigenplane, so a displacement along it carries rotational energy
        let f = frame(&unit(), 2);
        let s = embed(ManifoldId::M1, &ReducedState::new(PI + 1e-3, 0.0));
        let split = f.energy_split(&s);
        assert_eq!(split.motion_class, MotionClass::Mixed);
        assert!(split.e_rot > 1e-2 * split.e_hyp.abs());
    }

    #[test]
    fn split_adds_up_to_quadratic_energy() {
        let f = frame(&unit(), 1);
        for d in [[1e-3, 0.0, 0.0, 0.0], [0.0, 2e-3, -1e-3, 5e-4], [1e-2, -3e-2, 2e-2, 1e-2]] {
            let s = State::from_vector(&(f.base_point.to_vector() + Vector4::from(d)));
            let split = f.energy_split(&s);
            let q = f.quadratic_energy(&s);
            assert!((split.e_hyp + split.e_rot + f.epsilon - q).abs() <= 1e-10 * q.abs());
        }
    }

    #[test]
    fn linearized_orbit_matches_linear_propagator() {
        let arm = unit();
        let f = frame(&arm, 1);
        let jac = arm.jacobian(&f.base_point);
        let w0 = Vector4::new(0.3, -0.1, 0.2, 0.4);
        let d0 = f.transform * w0;
        for t in [0.0, 0.5, 1.7, 3.0] {
            let direct = linear_propagate(&jac, &d0, t);
            let via = f.transform * f.linearized_orbit(&w0, t);
            assert!((direct - via).amax() <= 1e-10 * direct.amax().max(1.0), "t={t}");
        }
    }

    #[test]
    fn modal_energies_are_separately_conserved() {
        let f = frame(&unit(), 2);
        let w0 = Vector4::new(0.02, -0.01, 0.03, -0.05);
        let s0 = f.energy_split_normal(&w0);
        for k in 1..=40 {
            let w = f.linearized_orbit(&w0, 0.1 * k as f64);
            let s = f.energy_split_normal(&w);
            assert!((s.e_hyp - s0.e_hyp).abs() <= 1e-10 * s0.e_hyp.abs());
            assert!((s.e_rot - s0.e_rot).abs() <= 1e-10 * s0.e_rot.abs());
        }
    }

    #[test]
    fn rotational_orbit_has_period_two_pi_over_omega() {
        let f = frame(&unit(), 1);
        let w0 = Vector4::new(0.0, 0.0, 0.4, -0.2);
        let w = f.linearized_orbit(&w0, f.period());
        assert!((w - w0).amax() <= 1e-12);
        let half = f.linearized_orbit(&w0, 0.5 * f.period());
        assert!((half + w0).amax() <= 1e-12);
        for k in 0..50 {
            let w = f.linearized_orbit(&w0, 0.37 * k as f64);
            assert_eq!((w[0], w[1]), (0.0, 0.0));
        }
    }

    #[test]
    fn mixed_orbit_is_a_product() {
        let f = frame(&unit(), 1);
        let hyp = Vector4::new(0.1, 0.05, 0.0, 0.0);
        let rot = Vector4::new(0.0, 0.0, -0.2, 0.3);
        for t in [0.3, 1.1, 2.9] {
            let mixed = f.linearized_orbit(&(hyp + rot), t);
            let parts = f.linearized_orbit(&hyp, t) + f.linearized_orbit(&rot, t);
            assert_eq!(mixed, parts);
        }
    }

    #[test]
    fn stable_cylinder_decays_like_exp_minus_nu() {
        let f = frame(&unit(), 2);
        // stable ray: x = −p_x
        let w0 = Vector4::new(1e-3, -1e-3, 0.02, 0.0);
        let d0 = w0.fixed_rows::<2>(0).norm();
        let steps = 50;
        for k in 0..=steps {
            let t = 5.0 / f.nu * k as f64 / steps as f64;
            let w = f.linearized_orbit(&w0, t);
            let ratio = w.fixed_rows::<2>(0).norm() / (d0 * (-f.nu * t).exp());
            assert!((0.5..=2.0).contains(&ratio), "t={t} ratio={ratio}");
            // the rotational part keeps its amplitude
            assert_relative_eq!(w.fixed_rows::<2>(2).norm(), 0.02, epsilon = 1e-14);
        }
    }

    #[test]
    fn nonlinear_flow_shadows_linearization() {
        let arm = unit();
        for idx in [1, 2] {
            let f = frame(&arm, idx);
            let w0 = Vector4::new(0.3, -0.5, 0.6, 0.5).normalize();
            let d0 = f.transform * w0;
            let w0 = w0 * (1e-4 / d0.norm());
            let s0 = f.from_normal_coords(&w0);
            let traj = integrate(&arm, &s0, f.period(), &IntegratorSpec::explicit_adaptive(1e-12)).unwrap();
            let mut worst = 0.0f64;
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let lin = f.from_normal_coords(&f.linearized_orbit(&w0, *t));
                let scale = f.displacement(&lin).norm();
                let err = (s.to_vector() - lin.to_vector()).norm() / scale;
                worst = worst.max(err);
            }
            assert!(worst <= 1e-2, "branch {idx}: {worst}");
        }
    }

    proptest! {
        #[test]
        fn normal_coords_round_trip(d in proptest::array::uniform4(-0.5..0.5f64)) {
            let f = frame(&unit(), 1);
            let s = State::from_vector(&(f.base_point.to_vector() + Vector4::from(d)));
            let back = f.from_normal_coords(&f.to_normal_coords(&s));
            prop_assert!((back.to_vector() - s.to_vector()).amax() <= 1e-12);
        }

        #[test]
        fn frames_are_symplectic_across_parameters(
            m in 0.2..5.0f64, l in 0.2..3.0f64, g in 0.5..20.0f64,
            r1 in -0.9..0.9f64, r2 in -0.9..0.9f64, idx in 1usize..3,
        ) {
            let params = ArmParams::new(m, l, g).unwrap();
            let arm = Arm::new(params, Torques::new(2.0 * r1 * params.mgl(), r2 * params.mgl()).unwrap());
            let fp = arm.analytic_fixed_points()[idx];
            let f = build_normal_form(&arm, &fp, default_tol_zero(params.omega0())).unwrap();
            let s = symplectic_form();
            let scale = f.transform.amax().powi(2).max(1.0);
            prop_assert!((f.transform.transpose() * s * f.transform - s).amax() <= 1e-10 * scale);
            prop_assert!(f.coupling_defect() <= 1e-10);
            prop_assert!(f.nu > 0.0 && f.omega > 0.0);
        }
    }
}
