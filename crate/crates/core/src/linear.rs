//! Linearization of the flow: Jacobian, spectrum, classification of fixed
//! points and the linear propagator `exp(J t)`.

use std::fmt;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Arm, Coupling, State};

/// Standard symplectic form for the ordering `(θ1, p1, θ2, p2)`.
pub fn symplectic_form() -> Matrix4<f64> {
    #[rustfmt::skip]
    let s = Matrix4::new(
         0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
         0.0, 0.0, 0.0, 1.0,
         0.0, 0.0, -1.0, 0.0,
    );
    s
}

/// Jacobian of the Hamiltonian vector field, `d(Δstate)/dt = J · Δstate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian4(pub Matrix4<f64>);

impl Jacobian4 {
    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Hessian of the Hamiltonian, `S⁻¹ J` with `S⁻¹ = -S`.
    pub fn hessian(&self) -> Matrix4<f64> {
        -symplectic_form() * self.0
    }
}

impl Arm {
    /// Analytic Jacobian of [`Arm::vector_field`]. Constant torques do not
    /// enter it.
    pub fn jacobian(&self, s: &State) -> Jacobian4 {
        let p = &self.params;
        let k = Coupling::at(p, s);
        let (p1, p2) = (s.p1, s.p2);
        let (sin, cos, d) = (k.sin, k.cos, k.denom);
        let ml2 = p.ml2();

        // derivatives of the relative-angle denominator
        let d_u = 2.0 * ml2 * sin * cos;
        let d_uu = 2.0 * ml2 * (cos * cos - sin * sin);

        let n1 = p1 - cos * p2;
        let n2 = 2.0 * p2 - cos * p1;
        // ∂θ̇1/∂u and ∂θ̇2/∂u with u = θ1 - θ2
        let a = sin * p2 / d - n1 * d_u / (d * d);
        let b = sin * p1 / d - n2 * d_u / (d * d);

        // ∂²T/∂u², T = K / (2D)
        let quad = p1 * p1 + 2.0 * p2 * p2 - 2.0 * cos * p1 * p2;
        let quad_u = 2.0 * sin * p1 * p2;
        let quad_uu = 2.0 * cos * p1 * p2;
        let t_uu = quad_uu / (2.0 * d) - quad_u * d_u / (d * d) - quad * d_uu / (2.0 * d * d)
            + quad * d_u * d_u / (d * d * d);

        let mgl = p.mgl();
        let g1 = 2.0 * mgl * s.theta1.cos();
        let g2 = mgl * s.theta2.cos();

        #[rustfmt::skip]
        let j = Matrix4::new(
            a,            1.0 / d,   -a,           -cos / d,
            -t_uu - g1,   -a,        t_uu,         -b,
            b,            -cos / d,  -b,           2.0 / d,
            t_uu,         a,         -t_uu - g2,   b,
        );
        Jacobian4(j)
    }
}

/// Eigenvalues and eigenvectors of a [`Jacobian4`], with per-pair residuals
/// `‖Jv − λv‖ / ‖v‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSet {
    pub values: [Complex64; 4],
    pub vectors: [Vector4<Complex64>; 4],
    pub residuals: [f64; 4],
    /// Frobenius norm of the source matrix.
    pub matrix_norm: f64,
}

impl EigenSet {
    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn complexify(m: &Matrix4<f64>) -> Matrix4<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Null vector of `J − λI` from the smallest singular value.
fn eigenvector(jc: &Matrix4<Complex64>, lambda: Complex64) -> Result<Vector4<Complex64>> {
    let shifted = jc - Matrix4::identity() * lambda;
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("svd did not produce right singular vectors".into()))?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let mut v: Vector4<Complex64> = v_t.row(idx).adjoint();
    // fix the phase so the largest component is real and positive
    let (k, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |acc, (i, c)| if c.norm() > acc.1 { (i, c.norm()) } else { acc });
    let phase = v[k].conj() / v[k].norm();
    v *= phase;
    Ok(v / Complex64::new(v.norm(), 0.0))
}

fn spectral_order(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    // real pairs first, then imaginary; within a class by modulus; + before −
    let class = |z: &Complex64| if z.re.abs() >= z.im.abs() { 0 } else { 1 };
    class(a)
        .cmp(&class(b))
        .then(a.norm().total_cmp(&b.norm()))
        .then(b.re.total_cmp(&a.re))
        .then(b.im.total_cmp(&a.im))
}

/// Eigenvalues from the real Schur form. The shifted QR iteration can
/// stall on the exactly structured matrices met on the existence boundary,
/// so on failure it is retried on fixed orthogonal similarity transforms.
fn schur_eigenvalues(m: &Matrix4<f64>) -> Option<Vec<Complex64>> {
    let attempt = |a: Matrix4<f64>| {
        nalgebra::Schur::try_new(a, f64::EPSILON, 10_000).map(|s| s.complex_eigenvalues().iter().copied().collect())
    };
    attempt(*m).or_else(|| {
        (1..=3).find_map(|k| {
            let seed = Matrix4::from_fn(|i, j| ((i * 4 + j + 1) as f64 * k as f64 * 0.7).sin());
            let q = seed.qr().q();
            attempt(q * m * q.transpose())
        })
    })
}

/// Full eigen-decomposition of a 4×4 Jacobian via real Schur form and
/// SVD null vectors.
pub fn eigen4(j: &Jacobian4) -> Result<EigenSet> {
    let m = j.0;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("jacobian"));
    }
    let mut values: Vec<Complex64> = schur_eigenvalues(&m)
        .ok_or_else(|| Error::Numerical(format!("schur iteration did not converge for matrix {m}")))?;
    // Schur returns exact conjugate pairs; clean signed zeros so ordering is stable
    for v in values.iter_mut() {
        v.re += 0.0;
        v.im += 0.0;
    }
    values.sort_by(spectral_order);

    let jc = complexify(&m);
    let norm = m.norm();
    let mut vectors = [Vector4::zeros(); 4];
    let mut residuals = [0.0; 4];
    for (i, &lambda) in values.iter().enumerate() {
        let v = eigenvector(&jc, lambda)?;
        residuals[i] = (jc * v - v * lambda).norm() / v.norm();
        vectors[i] = v;
    }
    Ok(EigenSet {
        values: [values[0], values[1], values[2], values[3]],
        vectors,
        residuals,
        matrix_norm: norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FixedPointKind {
    PureCenter,
    SaddleCenter,
    PureSaddle,
    Degenerate,
}

impl fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FixedPointKind::PureCenter => "PureCenter",
            FixedPointKind::SaddleCenter => "SaddleCenter",
            FixedPointKind::PureSaddle => "PureSaddle",
            FixedPointKind::Degenerate => "Degenerate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumCounts {
    pub real_pairs: usize,
    pub imaginary_pairs: usize,
    pub zero_values: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: FixedPointKind,
    pub detail: SpectrumCounts,
}

impl Classification {
    fn from_counts(detail: SpectrumCounts) -> Self {
        let kind = match detail {
            SpectrumCounts { zero_values: z, .. } if z > 0 => FixedPointKind::Degenerate,
            SpectrumCounts { real_pairs: 0, imaginary_pairs: 2, .. } => FixedPointKind::PureCenter,
            SpectrumCounts { real_pairs: 1, imaginary_pairs: 1, .. } => FixedPointKind::SaddleCenter,
            SpectrumCounts { real_pairs: 2, imaginary_pairs: 0, .. } => FixedPointKind::PureSaddle,
            // complex quadruplets are not produced at equilibria of this system
            _ => FixedPointKind::Degenerate,
        };
        Self { kind, detail }
    }
}

/// Default zero tolerance for eigenvalues, `1e-7 ω0`.
pub fn default_tol_zero(omega0: f64) -> f64 {
    1e-7 * omega0
}

/// Classifies a spectrum. `tol_zero` is absolute for the zero test and is
/// scaled by `‖J‖` for the real / imaginary test.
pub fn classify(e: &EigenSet, tol_zero: f64) -> Result<Classification> {
    let zero_values = e.values.iter().filter(|v| v.norm() < tol_zero).count();
    if zero_values > 0 {
        return Ok(Classification::from_counts(SpectrumCounts {
            real_pairs: 0,
            imaginary_pairs: 0,
            zero_values,
        }));
    }

    let pair_tol = (1e-9 * e.matrix_norm).max(tol_zero * e.matrix_norm);
    for v in &e.values {
        let partner = e.values.iter().map(|w| (w + v).norm()).fold(f64::INFINITY, f64::min);
        if partner > pair_tol {
            return Err(Error::Inconsistent(format!(
                "eigenvalue {v} has no negative partner (closest mismatch {partner:e})"
            )));
        }
    }

    let axis_tol = tol_zero * e.matrix_norm;
    let real = e.values.iter().filter(|v| v.im.abs() < axis_tol).count();
    let imaginary = e.values.iter().filter(|v| v.re.abs() < axis_tol).count();
    Ok(Classification::from_counts(SpectrumCounts {
        real_pairs: real / 2,
        imaginary_pairs: imaginary / 2,
        zero_values: 0,
    }))
}

/// Condition number of the eigenvector matrix above which the propagator
/// falls back to scaling and squaring.
pub const EIGENBASIS_CONDITION_LIMIT: f64 = 1e8;

/// `exp(J t) · x0`.
pub fn linear_propagate(j: &Jacobian4, x0: &Vector4<f64>, t: f64) -> Vector4<f64> {
    if x0.iter().all(|v| *v == 0.0) {
        return Vector4::zeros();
    }
    if let Ok(eig) = eigen4(j) {
        let basis = Matrix4::from_columns(&eig.vectors);
        let sv = basis.singular_values();
        let cond = sv.max() / sv.min();
        if cond.is_finite() && cond <= EIGENBASIS_CONDITION_LIMIT {
            if let Some(inv) = basis.try_inverse() {
                let coeffs = inv * complexify_vec(x0);
                let evolved = Vector4::from_fn(|i, _| coeffs[i] * (eig.values[i] * t).exp());
                return (basis * evolved).map(|c| c.re);
            }
        }
    }
    (j.0 * t).exp() * x0
}

fn complexify_vec(x: &Vector4<f64>) -> Vector4<Complex64> {
    x.map(|v| Complex64::new(v, 0.0))
}

/// One sample of a boundary probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    /// Distance from the existence boundary, `min(2mgL − |β1|, mgL − |β2|)`.
    pub distance: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Smallest eigenvalue modulus over the four fixed points.
    pub min_modulus: f64,
}

/// Approach to the existence boundary along the ray from zero torque to
/// `target`, a point on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProbe {
    pub target: [f64; 2],
    pub samples: Vec<ProbeSample>,
    /// Eigenvalue moduli at each branch exactly on the boundary.
    pub boundary_moduli: [[f64; 4]; 4],
    /// Number of eigenvalues below `tol_zero` at each branch on the boundary.
    pub boundary_zero_counts: [usize; 4],
}

impl BoundaryProbe {
    /// True when `min_modulus` strictly decreases over the last `n` samples.
    pub fn decreasing_tail(&self, n: usize) -> bool {
        let k = self.samples.len().saturating_sub(n);
        self.samples[k..].windows(2).all(|w| w[1].min_modulus < w[0].min_modulus)
    }
}

/// The four edge midpoints and four corners of the existence rectangle.
pub fn boundary_targets(mgl: f64) -> [[f64; 2]; 8] {
    let (a, b) = (2.0 * mgl, mgl);
    [[a, 0.0], [a, b], [0.0, b], [-a, b], [-a, 0.0], [-a, -b], [0.0, -b], [a, -b]]
}

fn spectrum_moduli(arm: &Arm) -> Result<[[f64; 4]; 4]> {
    let mut out = [[f64::NAN; 4]; 4];
    for (row, fp) in out.iter_mut().zip(arm.analytic_fixed_points()) {
        if let Some(s) = fp.state {
            let e = eigen4(&arm.jacobian(&s))?;
            *row = e.values.map(|v| v.norm());
        }
    }
    Ok(out)
}

/// Samples the smallest eigenvalue modulus at the given distances
/// (absolute, in torque units) from the boundary along the ray to `target`.
pub fn boundary_probe(
    params: &crate::model::ArmParams,
    target: [f64; 2],
    distances: &[f64],
    tol_zero: f64,
) -> Result<BoundaryProbe> {
    let mgl = params.mgl();
    let (a, b) = (2.0 * mgl, mgl);
    // distance shrinks linearly along the ray: d(τ) = τ·d_slope, β = (1 − τ)·target
    let slope = [(target[0].abs() / a, a), (target[1].abs() / b, b)]
        .iter()
        .filter(|(frac, _)| *frac >= 1.0 - 1e-12)
        .map(|(_, lim)| *lim)
        .fold(f64::INFINITY, f64::min);
    if !slope.is_finite() {
        return Err(Error::Domain(format!("probe target {target:?} is not on the existence boundary")));
    }
    let mut samples = Vec::with_capacity(distances.len());
    for &d in distances {
        let tau = d / slope;
        let torques = crate::model::Torques::new((1.0 - tau) * target[0], (1.0 - tau) * target[1])?;
        let arm = Arm::new(*params, torques);
        let min_modulus = spectrum_moduli(&arm)?.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        samples.push(ProbeSample { distance: d, beta1: torques.beta1, beta2: torques.beta2, min_modulus });
    }
    let on_edge = Arm::new(*params, crate::model::Torques::new(target[0], target[1])?);
    let boundary_moduli = spectrum_moduli(&on_edge)?;
    let boundary_zero_counts = boundary_moduli.map(|row| row.iter().filter(|m| **m < tol_zero).count());
    Ok(BoundaryProbe { target, samples, boundary_moduli, boundary_zero_counts })
}
