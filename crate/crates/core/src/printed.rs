//! Closed-form values as they appear in the published derivation of this
//! model, kept only to be compared against what this crate computes.
//!
//! Nothing here feeds the analysis itself. Every entry is paired with the
//! computed counterpart in a [`Discrepancy`] so that reports show both
//! numbers side by side.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::equilibria::Branch;
use crate::error::{Error, Result};
use crate::linear::{eigen4, symplectic_form};
use crate::model::{Arm, ArmParams, State};

/// One printed energy expression, attached to the branch whose square-root
/// signs it encodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintedEnergy {
    /// Printed label, `E1`..`E4`.
    pub label: &'static str,
    pub branch: Branch,
    /// Angle terms read quadrant-aware, `arctan(β / ±√·)` → `atan2(β, ±√·)`.
    pub value: f64,
    /// Angle terms read with the principal-branch arctangent.
    pub value_principal_arctan: f64,
}

/// Printed labels in branch order. The printed `E2` carries the `θ1`-flipped
/// signs and `E3` the `θ2`-flipped signs.
const LABELS: [(&str, Branch); 4] = [
    ("E1", Branch::ALL[0]),
    ("E3", Branch::ALL[1]),
    ("E2", Branch::ALL[2]),
    ("E4", Branch::ALL[3]),
];

/// Evaluates the printed fixed-point energy expressions, returned in
/// [`Branch::ALL`] order. Requires the torques strictly inside the
/// existence region.
pub fn printed_fixed_point_energies(arm: &Arm) -> Result<[PrintedEnergy; 4]> {
    let mgl = arm.params.mgl();
    let (b1, b2) = (arm.torques.beta1, arm.torques.beta2);
    let arg1 = 4.0 * mgl * mgl - b1 * b1;
    let arg2 = mgl * mgl - b2 * b2;
    if !(arg1 > 0.0 && arg2 > 0.0) {
        return Err(Error::Domain(format!(
            "square-root arguments must be positive (got {arg1:e}, {arg2:e})"
        )));
    }
    let (r1, r2) = (arg1.sqrt(), arg2.sqrt());
    Ok(LABELS.map(|(label, branch)| {
        let s1 = branch.theta1.value();
        let s2 = branch.theta2.value();
        let static_part = -s2 * r2 - s1 * r1;
        let quadrant = -b1.atan2(s1 * r1) * b1 - b2.atan2(s2 * r2) * b2;
        let principal = -(b1 / (s1 * r1)).atan() * b1 - (b2 / (s2 * r2)).atan() * b2;
        PrintedEnergy {
            label,
            branch,
            value: static_part + quadrant,
            value_principal_arctan: static_part + principal,
        }
    }))
}

/// Printed rotation frequency at the outer-inverted saddle-center,
/// `w = √(2(√17 − 3)) / 2 · ω0`.
pub fn printed_saddle_center_frequency(params: &ArmParams) -> f64 {
    (2.0 * (17f64.sqrt() - 3.0)).sqrt() / 2.0 * params.omega0()
}

/// Printed pure-center frequencies `Ω1,2 = √(2(5 ± √17)) / 2 · ω0`.
pub fn printed_center_frequencies(params: &ArmParams) -> [f64; 2] {
    let r17 = 17f64.sqrt();
    let w0 = params.omega0();
    [(2.0 * (5.0 + r17)).sqrt() / 2.0 * w0, (2.0 * (5.0 - r17)).sqrt() / 2.0 * w0]
}

/// Printed linear change of variables at the outer-inverted saddle-center,
/// `(x, p_x, y, p_y) ↦ (θ1, p1, θ2 − π, p2)`. It carries no `m`, `L`, `g`.
pub fn printed_saddle_center_transform() -> Matrix4<f64> {
    let r = 17f64.sqrt();
    let a = 5.0 + r;
    let k = 2.0 * a / (17.0 + 5.0 * r);
    #[rustfmt::skip]
    let t = Matrix4::new(
        1.0,     0.0,            1.0,       0.0,
        0.0,     -k * 2.0 / a,   0.0,       k * a / 4.0,
        a / 4.0, 0.0,            2.0 / a,   0.0,
        0.0,     k,              0.0,       -k,
    );
    t
}

/// Potential energy with the joint coefficients as printed,
/// `-mgL (cos θ1 + 2 cos θ2)`.
pub fn printed_potential(params: &ArmParams, s: &State) -> f64 {
    -params.mgl() * (s.theta1.cos() + 2.0 * s.theta2.cos())
}

/// A printed value next to its computed counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub item: String,
    pub printed: f64,
    pub computed: f64,
    pub difference: f64,
    pub note: String,
}

impl Discrepancy {
    fn new(item: impl Into<String>, printed: f64, computed: f64, note: impl Into<String>) -> Self {
        Self {
            item: item.into(),
            printed,
            computed,
            difference: printed - computed,
            note: note.into(),
        }
    }
}

fn branch_name(b: Branch) -> String {
    b.to_string()
}

/// Collects every printed-vs-computed comparison for the given arm.
///
/// Energy comparisons are included only when the torques lie strictly
/// inside the existence region.
pub fn discrepancy_ledger(arm: &Arm) -> Result<Vec<Discrepancy>> {
    let mut out = Vec::new();
    let params = arm.params;
    let unforced = Arm::unforced(params);
    let null_points = unforced.analytic_fixed_points();

    for p in &null_points {
        let s = p.state.expect("null-torque points always exist");
        let with_printed_potential = unforced.kinetic_energy(&s) + printed_potential(&params, &s);
        out.push(Discrepancy::new(
            format!("potential coefficients, energy at null-torque branch {}", branch_name(p.branch)),
            with_printed_potential,
            p.energy.unwrap_or(f64::NAN),
            "printed potential -mgL(cos θ1 + 2cos θ2) vs -mgL(2cos θ1 + cos θ2) consistent with the equations of motion",
        ));
    }

    let points = arm.analytic_fixed_points();
    if let Ok(printed) = printed_fixed_point_energies(arm) {
        for (pe, fp) in printed.iter().zip(points.iter()) {
            let direct = fp.energy.unwrap_or(f64::NAN);
            out.push(Discrepancy::new(
                format!("fixed-point energy {} at branch {}", pe.label, branch_name(pe.branch)),
                pe.value,
                direct,
                "closed form with quadrant-aware arctangent vs direct Hamiltonian evaluation",
            ));
            out.push(Discrepancy::new(
                format!("fixed-point energy {} at branch {} (principal arctan)", pe.label, branch_name(pe.branch)),
                pe.value_principal_arctan,
                direct,
                "closed form with principal-branch arctangent vs direct Hamiltonian evaluation",
            ));
        }
    }

    let saddle = null_points[1].state.expect("exists");
    let eig = eigen4(&unforced.jacobian(&saddle))?;
    let rot = eig.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    out.push(Discrepancy::new(
        "saddle-center rotation frequency w",
        printed_saddle_center_frequency(&params),
        rot,
        "printed w vs modulus of the imaginary eigenvalue pair at branch (+,-)",
    ));

    let center = null_points[0].state.expect("exists");
    let eig = eigen4(&unforced.jacobian(&center))?;
    let mut freqs: Vec<f64> = eig.values.iter().filter(|v| v.im > 0.0).map(|v| v.im).collect();
    freqs.sort_by(|a, b| b.total_cmp(a));
    let printed = printed_center_frequencies(&params);
    for (i, (p, c)) in printed.iter().zip(freqs.iter()).enumerate() {
        out.push(Discrepancy::new(
            format!("pure-center frequency Omega{}", i + 1),
            *p,
            *c,
            "printed Omega vs imaginary eigenvalue at branch (+,+)",
        ));
    }

    let t = printed_saddle_center_transform();
    let s = symplectic_form();
    out.push(Discrepancy::new(
        "printed saddle-center transform, max |T^T S T - S|",
        (t.transpose() * s * t - s).amax(),
        0.0,
        "zero for a canonical (symplectic) change of variables",
    ));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Torques;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_6, PI};

    fn unit(beta1: f64, beta2: f64) -> Arm {
        Arm::new(ArmParams::unit(), Torques::new(beta1, beta2).unwrap())
    }

    #[test]
    fn zero_torque_forms_match_direct_evaluation() {
        let arm = unit(0.0, 0.0);
        let printed = printed_fixed_point_energies(&arm).unwrap();
        let values = printed.map(|p| p.value);
        assert_eq!(values, [-3.0, -1.0, 1.0, 3.0]);
        for (p, fp) in printed.iter().zip(arm.analytic_fixed_points()) {
            assert!((p.value - fp.energy.unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn inner_torque_first_form() {
        let arm = unit(1.0, 0.0);
        let printed = printed_fixed_point_energies(&arm).unwrap();
        let expected = -1.0 - 3f64.sqrt() - FRAC_PI_6;
        assert_relative_eq!(printed[0].value, expected, epsilon = 1e-14);
        assert_relative_eq!(arm.analytic_fixed_points()[0].energy.unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn principal_arctan_differs_on_flipped_branches() {
        let arm = unit(0.0, 0.5);
        let printed = printed_fixed_point_energies(&arm).unwrap();
        let points = arm.analytic_fixed_points();
        for (p, fp) in printed.iter().zip(points) {
            assert_relative_eq!(p.value, fp.energy.unwrap(), epsilon = 1e-13);
        }
        // θ2-flipped branches: principal arctan loses π·β2
        assert_relative_eq!(printed[1].value_principal_arctan - printed[1].value, PI * 0.5, epsilon = 1e-13);
        assert_relative_eq!(printed[0].value_principal_arctan, printed[0].value, epsilon = 1e-15);
    }

    #[test]
    fn printed_energies_need_strict_interior() {
        assert!(printed_fixed_point_energies(&unit(2.0, 0.0)).is_err());
        assert!(printed_fixed_point_energies(&unit(0.0, -1.5)).is_err());
    }

    #[test]
    fn printed_frequencies() {
        let p = ArmParams::unit();
        assert_relative_eq!(printed_saddle_center_frequency(&p), 0.749_368_3, epsilon = 1e-7);
        let [o1, o2] = printed_center_frequencies(&p);
        assert_relative_eq!(o1 * o1, (5.0 + 17f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(o2 * o2, (5.0 - 17f64.sqrt()) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn ledger_lists_every_comparison() {
        let ledger = discrepancy_ledger(&unit(0.4, 0.3)).unwrap();
        let count = |needle: &str| ledger.iter().filter(|d| d.item.contains(needle)).count();
        assert_eq!(count("potential coefficients"), 4);
        assert_eq!(count("fixed-point energy"), 8);
        assert_eq!(count("rotation frequency w"), 1);
        assert_eq!(count("Omega"), 2);
        assert_eq!(count("transform"), 1);
        let w = ledger.iter().find(|d| d.item.contains("frequency w")).unwrap();
        assert_relative_eq!(w.computed, 2f64.powf(0.25), epsilon = 1e-12);
        assert!(w.difference.abs() > 0.4);
        for d in ledger.iter().filter(|d| d.item.contains("fixed-point energy") && !d.item.contains("principal")) {
            assert!(d.difference.abs() <= 1e-12, "{d:?}");
        }
    }

    #[test]
    fn ledger_outside_region_skips_energy_forms() {
        let ledger = discrepancy_ledger(&unit(5.0, 0.0)).unwrap();
        assert!(ledger.iter().all(|d| !d.item.contains("fixed-point energy")));
    }
}
