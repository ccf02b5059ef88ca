//! One function per subcommand. Each takes a resolved [`Scenario`] and
//! returns the document text plus any warnings; nothing here touches the
//! file system.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::output::{num, opt, Csv, Envelope, Format};
use super::scenario::{Plane, PointLabel, Scenario};
use crate::equilibria::{FixedPoint, BOUNDARY_TOL};
use crate::error::{Error, Result};
use crate::integrate::{IntegrationFailure, Trajectory};
use crate::linear::{
    boundary_probe, boundary_targets, classify, eigen4, BoundaryProbe, FixedPointKind, SpectrumCounts,
};
use crate::manifolds::{
    embed, integrate_reduced, invariance_check, reduced_energy, separatrix_energy, InvarianceReport, ManifoldId,
    ReducedState,
};
use crate::model::{Arm, State, Torques};
use crate::normal_form::{build_normal_form, EnergySplit};
use crate::printed::{
    discrepancy_ledger, printed_center_frequencies, printed_fixed_point_energies, printed_saddle_center_frequency,
    printed_saddle_center_transform, Discrepancy,
};

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub body: String,
    /// Non-fatal conditions; the process exits with code 2 when present.
    pub warnings: Vec<String>,
    /// Set when the document is partial because a computation failed.
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(body: String) -> Self {
        Self { body, warnings: Vec::new(), failure: None }
    }
}

// ---------------------------------------------------------------- fixed points

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointEntry {
    pub label: String,
    pub branch: String,
    pub exists: bool,
    pub on_boundary: bool,
    pub state: Option<[f64; 4]>,
    pub energy_direct: Option<f64>,
    /// Printed closed form for this branch and its printed label.
    pub energy_printed: Option<f64>,
    pub energy_printed_label: Option<String>,
    pub refine_iterations: Option<usize>,
    pub refine_residual: Option<f64>,
    /// `[re, im]` in spectral order.
    pub eigenvalues: Option<[[f64; 2]; 4]>,
    pub eigen_residual: Option<f64>,
    pub classification: Option<FixedPointKind>,
    pub spectrum: Option<SpectrumCounts>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointBody {
    pub fixed_points: Vec<FixedPointEntry>,
    pub discrepancies: Vec<Discrepancy>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boundary_probe: Option<Vec<BoundaryProbe>>,
}

/// Fixed-point analysis as a structured report.
pub type Report = Envelope<FixedPointBody>;

fn entry(arm: &Arm, label: PointLabel, fp: &FixedPoint, tol_zero: f64) -> FixedPointEntry {
    let mut e = FixedPointEntry {
        label: label.to_string(),
        branch: fp.branch.to_string(),
        exists: fp.exists(),
        on_boundary: fp.on_boundary,
        state: fp.state.map(|s| s.to_array()),
        energy_direct: fp.energy,
        energy_printed: None,
        energy_printed_label: None,
        refine_iterations: None,
        refine_residual: None,
        eigenvalues: None,
        eigen_residual: None,
        classification: None,
        spectrum: None,
        error: None,
    };
    let Some(s) = fp.state else { return e };
    if let Ok(printed) = printed_fixed_point_energies(arm) {
        let p = printed[label.index()];
        e.energy_printed = Some(p.value);
        e.energy_printed_label = Some(p.label.to_string());
    }
    let mut errors = Vec::new();
    match arm.refine_fixed_point(&s) {
        Ok(r) => {
            e.refine_iterations = Some(r.iterations);
            e.refine_residual = Some(r.residual);
        }
        Err(err) => errors.push(format!("refine: {err}")),
    }
    match eigen4(&arm.jacobian(&s)).and_then(|eig| classify(&eig, tol_zero).map(|c| (eig, c))) {
        Ok((eig, c)) => {
            e.eigenvalues = Some(eig.values.map(|v| [v.re, v.im]));
            e.eigen_residual = Some(eig.max_residual());
            e.classification = Some(c.kind);
            e.spectrum = Some(c.detail);
        }
        Err(err) => errors.push(format!("spectrum: {err}")),
    }
    if !errors.is_empty() {
        e.error = Some(errors.join("; "));
    }
    e
}

fn fixed_point_entries(scenario: &Scenario) -> Result<(Arm, Vec<FixedPointEntry>, Vec<String>)> {
    let arm = scenario.arm()?;
    let points = arm.analytic_fixed_points();
    let entries: Vec<FixedPointEntry> = PointLabel::ALL
        .iter()
        .zip(points.iter())
        .map(|(l, fp)| entry(&arm, *l, fp, scenario.tol_zero()))
        .collect();
    let mut warnings = Vec::new();
    for e in &entries {
        if !e.exists {
            warnings.push(format!("{} {} does not exist for these torques", e.label, e.branch));
        } else if e.on_boundary {
            warnings.push(format!("{} {} lies on the existence boundary", e.label, e.branch));
        }
    }
    Ok((arm, entries, warnings))
}

fn eigen_cells(e: &FixedPointEntry) -> Vec<String> {
    match e.eigenvalues {
        Some(v) => v.iter().flat_map(|z| [num(z[0]), num(z[1])]).collect(),
        None => vec![String::new(); 8],
    }
}

fn fixed_point_csv(command: &str, scenario: &Scenario, entries: &[FixedPointEntry]) -> Csv {
    let mut c = Csv::new(command, scenario);
    c.row(&[
        "label", "branch", "exists", "on_boundary", "theta1", "p1", "theta2", "p2", "energy_direct",
        "energy_printed", "printed_label", "classification", "re1", "im1", "re2", "im2", "re3", "im3", "re4",
        "im4", "eigen_residual", "refine_residual", "error",
    ]);
    for e in entries {
        let state: Vec<String> = match e.state {
            Some(s) => s.iter().map(|v| num(*v)).collect(),
            None => vec![String::new(); 4],
        };
        let mut row = vec![e.label.clone(), e.branch.clone(), e.exists.to_string(), e.on_boundary.to_string()];
        row.extend(state);
        row.push(opt(e.energy_direct));
        row.push(opt(e.energy_printed));
        row.push(e.energy_printed_label.clone().unwrap_or_default());
        row.push(e.classification.map(|k| k.to_string()).unwrap_or_default());
        row.extend(eigen_cells(e));
        row.push(opt(e.eigen_residual));
        row.push(opt(e.refine_residual));
        row.push(e.error.clone().unwrap_or_default());
        c.row(&row);
    }
    c
}

fn discrepancy_csv(c: &mut Csv, ledger: &[Discrepancy]) {
    c.meta("section", "discrepancies");
    c.row(&["item", "printed", "computed", "difference", "note"]);
    for d in ledger {
        c.row(&[
            d.item.clone(),
            num(d.printed),
            num(d.computed),
            num(d.difference),
            d.note.clone(),
        ]);
    }
}

pub fn fixed_points(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let (arm, entries, warnings) = fixed_point_entries(scenario)?;
    let ledger = discrepancy_ledger(&arm)?;
    let body = match format {
        Format::Json => Envelope::new(
            "fixed-points",
            scenario,
            FixedPointBody { fixed_points: entries, discrepancies: ledger, boundary_probe: None },
        )
        .to_json(),
        Format::Csv => {
            let mut c = fixed_point_csv("fixed-points", scenario, &entries);
            discrepancy_csv(&mut c, &ledger);
            c.finish()
        }
    };
    Ok(Outcome { body, warnings, failure: None })
}

/// Distances from the boundary sampled by the probe, in units of `mgL`.
pub const PROBE_DISTANCES: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

pub fn probes(scenario: &Scenario) -> Result<Vec<BoundaryProbe>> {
    let params = scenario.params()?;
    let mgl = params.mgl();
    let distances = PROBE_DISTANCES.map(|d| d * mgl);
    boundary_targets(mgl)
        .iter()
        .map(|t| boundary_probe(&params, *t, &distances, scenario.tol_zero()))
        .collect()
}

pub fn classify_points(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let (arm, entries, warnings) = fixed_point_entries(scenario)?;
    let probes = probes(scenario)?;
    let body = match format {
        Format::Json => Envelope::new(
            "classify",
            scenario,
            FixedPointBody {
                fixed_points: entries,
                discrepancies: discrepancy_ledger(&arm)?,
                boundary_probe: Some(probes),
            },
        )
        .to_json(),
        Format::Csv => {
            let mut c = fixed_point_csv("classify", scenario, &entries);
            c.meta("section", "boundary probe");
            c.row(&["target_beta1", "target_beta2", "distance", "beta1", "beta2", "min_modulus"]);
            for p in &probes {
                for s in &p.samples {
                    c.row(&[
                        num(p.target[0]),
                        num(p.target[1]),
                        num(s.distance),
                        num(s.beta1),
                        num(s.beta2),
                        num(s.min_modulus),
                    ]);
                }
            }
            c.meta("section", "boundary spectrum");
            c.row(&["target_beta1", "target_beta2", "label", "zero_count", "mod1", "mod2", "mod3", "mod4"]);
            for p in &probes {
                for (k, row) in p.boundary_moduli.iter().enumerate() {
                    let mut cells =
                        vec![num(p.target[0]), num(p.target[1]), PointLabel::ALL[k].to_string()];
                    cells.push(p.boundary_zero_counts[k].to_string());
                    cells.extend(row.iter().map(|v| num(*v)));
                    c.row(&cells);
                }
            }
            c.finish()
        }
    };
    Ok(Outcome { body, warnings, failure: None })
}

// ------------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBody {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 4]>,
    pub energies: Vec<f64>,
    pub energy_drift: f64,
    pub drift_constant: Option<f64>,
    pub failure: Option<String>,
}

fn trajectory_body(traj: &Trajectory<State>, failure: Option<String>) -> TrajectoryBody {
    TrajectoryBody {
        times: traj.times.clone(),
        states: traj.states.iter().map(|s| s.to_array()).collect(),
        energies: traj.energies.clone(),
        energy_drift: traj.energy_drift,
        drift_constant: traj.drift_constant,
        failure,
    }
}

pub fn simulate(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let arm = scenario.arm()?;
    let [t1, p1, t2, p2] = scenario.simulate.initial;
    let s0 = State::new(t1, p1, t2, p2);
    let (traj, failure) =
        match crate::integrate::integrate_flow(&arm, &s0, scenario.simulate.horizon, &scenario.integrator)? {
            Ok(t) => (t, None),
            Err(e) => {
                let msg = match e.failure {
                    IntegrationFailure::StepFailure { time } => Error::StepFailure { time },
                    IntegrationFailure::Truncated { steps, time } => Error::Truncated { steps, time },
                }
                .to_string();
                (e.partial, Some(msg))
            }
        };
    let body = match format {
        Format::Json => Envelope::new("simulate", scenario, trajectory_body(&traj, failure.clone())).to_json(),
        Format::Csv => {
            let mut c = Csv::new("simulate", scenario);
            c.row(&["t", "theta1", "p1", "theta2", "p2", "energy"]);
            for ((t, s), e) in traj.times.iter().zip(&traj.states).zip(&traj.energies) {
                c.row(&[num(*t), num(s.theta1), num(s.p1), num(s.theta2), num(s.p2), num(*e)]);
            }
            c.meta("steps", traj.len() - 1);
            c.meta("energy_drift", num(traj.energy_drift));
            c.meta("drift_constant", opt(traj.drift_constant));
            if let Some(f) = &failure {
                c.meta("failure", f);
            }
            c.finish()
        }
    };
    Ok(Outcome { body, warnings: Vec::new(), failure })
}

// ------------------------------------------------------------------- portrait

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitCell {
    pub index: usize,
    /// Starting point in plane coordinates.
    pub start: [f64; 2],
    /// Manifold planes: the orbit energy and whether it exceeds the
    /// separatrix.
    pub energy: Option<f64>,
    pub rotating: Option<bool>,
    pub times: Vec<f64>,
    /// Plane coordinates along the orbit.
    pub plane: Vec<[f64; 2]>,
    pub states: Vec<[f64; 4]>,
    pub energies: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitBody {
    pub plane: Plane,
    pub separatrix_energy: Option<f64>,
    pub cells: Vec<PortraitCell>,
}

fn manifold_of(plane: Plane) -> Option<ManifoldId> {
    match plane {
        Plane::ManifoldM1 => Some(ManifoldId::M1),
        Plane::ManifoldM2 => Some(ManifoldId::M2),
        _ => None,
    }
}

pub fn portrait_body(scenario: &Scenario) -> Result<PortraitBody> {
    let arm = scenario.arm()?;
    let params = arm.params;
    let ps = &scenario.portrait;
    let spec = scenario.integrator;
    if let Some(id) = manifold_of(ps.plane) {
        let bottom = reduced_energy(&params, id, &ReducedState::new(0.0, 0.0));
        let sep = separatrix_energy(&params, id);
        let cells = ps
            .energy_fractions
            .par_iter()
            .enumerate()
            .map(|(index, f)| {
                let energy = bottom + f * (sep - bottom);
                let p1 = (4.0 * params.ml2() * (energy - bottom)).sqrt();
                let r0 = ReducedState::new(0.0, p1);
                let mut cell = PortraitCell {
                    index,
                    start: [0.0, p1],
                    energy: Some(energy),
                    rotating: Some(energy > sep),
                    times: Vec::new(),
                    plane: Vec::new(),
                    states: Vec::new(),
                    energies: Vec::new(),
                    error: None,
                };
                match integrate_reduced(&params, id, &r0, ps.horizon, &spec) {
                    Ok(t) => {
                        cell.times = t.times;
                        cell.plane = t.states.iter().map(|r| [r.theta1, r.p1]).collect();
                        cell.states = t.states.iter().map(|r| embed(id, r).to_array()).collect();
                        cell.energies = t.energies;
                    }
                    Err(e) => cell.error = Some(e.to_string()),
                }
                cell
            })
            .collect();
        return Ok(PortraitBody { plane: ps.plane, separatrix_energy: Some(sep), cells });
    }

    let fp = arm.analytic_fixed_points()[ps.point.index()];
    let frame = build_normal_form(&arm, &fp, scenario.tol_zero())?;
    let offset = if ps.plane == Plane::NormalXPx { 0 } else { 2 };
    let n = ps.resolution;
    let starts: Vec<[f64; 2]> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let u = -ps.amplitude + 2.0 * ps.amplitude * i as f64 / (n - 1) as f64;
            let v = -ps.amplitude + 2.0 * ps.amplitude * j as f64 / (n - 1) as f64;
            [u, v]
        })
        .collect();
    let cells = starts
        .par_iter()
        .enumerate()
        .map(|(index, start)| {
            let mut w0 = nalgebra::Vector4::zeros();
            w0[offset] = start[0];
            w0[offset + 1] = start[1];
            let s0 = frame.from_normal_coords(&w0);
            let mut cell = PortraitCell {
                index,
                start: *start,
                energy: None,
                rotating: None,
                times: Vec::new(),
                plane: Vec::new(),
                states: Vec::new(),
                energies: Vec::new(),
                error: None,
            };
            let traj = match crate::integrate::integrate_flow(&arm, &s0, ps.horizon, &spec) {
                Ok(Ok(t)) => t,
                Ok(Err(e)) => {
                    cell.error = Some(Error::from(e.clone()).to_string());
                    e.partial
                }
                Err(e) => {
                    cell.error = Some(e.to_string());
                    return cell;
                }
            };
            cell.plane = traj
                .states
                .iter()
                .map(|s| {
                    let w = frame.to_normal_coords(s);
                    [w[offset], w[offset + 1]]
                })
                .collect();
            cell.times = traj.times;
            cell.states = traj.states.iter().map(|s| s.to_array()).collect();
            cell.energies = traj.energies;
            cell
        })
        .collect();
    Ok(PortraitBody { plane: ps.plane, separatrix_energy: None, cells })
}

pub fn portrait(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let body = portrait_body(scenario)?;
    let warnings: Vec<String> = body
        .cells
        .iter()
        .filter_map(|c| c.error.as_ref().map(|e| format!("cell {}: {e}", c.index)))
        .collect();
    let text = match format {
        Format::Json => Envelope::new("portrait", scenario, body).to_json(),
        Format::Csv => {
            let mut c = Csv::new("portrait", scenario);
            c.meta("plane", body.plane);
            if let Some(sep) = body.separatrix_energy {
                c.meta("separatrix_energy", num(sep));
            }
            for cell in &body.cells {
                if let Some(e) = &cell.error {
                    c.meta(&format!("cell {} error", cell.index), e);
                }
            }
            c.row(&["cell", "u0", "v0", "t", "u", "v", "theta1", "p1", "theta2", "p2", "energy"]);
            for cell in &body.cells {
                for k in 0..cell.times.len() {
                    let s = cell.states[k];
                    c.row(&[
                        cell.index.to_string(),
                        num(cell.start[0]),
                        num(cell.start[1]),
                        num(cell.times[k]),
                        num(cell.plane[k][0]),
                        num(cell.plane[k][1]),
                        num(s[0]),
                        num(s[1]),
                        num(s[2]),
                        num(s[3]),
                        num(cell.energies[k]),
                    ]);
                }
            }
            c.finish()
        }
    };
    Ok(Outcome { body: text, warnings, failure: None })
}

// -------------------------------------------------------------- manifold check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldRun {
    pub theta1: f64,
    pub report: Option<InvarianceReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldCheckBody {
    pub runs: Vec<ManifoldRun>,
    pub pass: bool,
}

pub fn manifold_check_body(scenario: &Scenario) -> Result<ManifoldCheckBody> {
    let arm = scenario.arm()?;
    let mc = &scenario.manifold_check;
    let horizon = mc.horizon / arm.params.omega0();
    let jobs: Vec<(ManifoldId, f64)> = mc
        .manifolds
        .iter()
        .flat_map(|id| mc.starting_angles().into_iter().map(move |a| (*id, a)))
        .collect();
    let runs: Vec<ManifoldRun> = jobs
        .par_iter()
        .map(|(id, theta1)| {
            match invariance_check(&arm, *id, &ReducedState::new(*theta1, 0.0), horizon, mc.tolerance, &scenario.integrator)
            {
                Ok(r) => ManifoldRun { theta1: *theta1, report: Some(r), error: None },
                Err(e) => ManifoldRun { theta1: *theta1, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let pass = runs
        .iter()
        .all(|r| r.report.map(|rep| rep.pass && rep.max_reduced_gap <= mc.tolerance).unwrap_or(false));
    Ok(ManifoldCheckBody { runs, pass })
}

pub fn manifold_check(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let body = manifold_check_body(scenario)?;
    let mut warnings = Vec::new();
    if !body.pass {
        warnings.push("invariance check failed: trajectories leave the surface".to_string());
    }
    if !scenario.arm()?.torques.is_zero() {
        warnings.push("torques are nonzero; the check is exploratory".to_string());
    }
    let text = match format {
        Format::Json => Envelope::new("manifold-check", scenario, body).to_json(),
        Format::Csv => {
            let mut c = Csv::new("manifold-check", scenario);
            c.row(&[
                "manifold", "theta1", "max_r_theta", "max_r_p", "max_reduced_gap", "first_exceedance", "steps",
                "pass", "error",
            ]);
            for run in &body.runs {
                match (&run.report, &run.error) {
                    (Some(r), _) => c.row(&[
                        r.manifold.to_string(),
                        num(run.theta1),
                        num(r.max_r_theta),
                        num(r.max_r_p),
                        num(r.max_reduced_gap),
                        opt(r.first_exceedance),
                        r.steps.to_string(),
                        (r.pass && r.max_reduced_gap <= r.tolerance).to_string(),
                        String::new(),
                    ]),
                    (None, e) => c.row(&[
                        String::new(),
                        num(run.theta1),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        "false".into(),
                        e.clone().unwrap_or_default(),
                    ]),
                };
            }
            c.meta("verdict", if body.pass { "pass" } else { "fail" });
            c.finish()
        }
    };
    Ok(Outcome { body: text, warnings, failure: None })
}

// ---------------------------------------------------------------- normal form

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDump {
    pub base_point: [f64; 4],
    pub nu: f64,
    pub omega: f64,
    pub epsilon: f64,
    pub period: f64,
    /// Row-major.
    pub transform: [[f64; 4]; 4],
    pub inverse_transform: [[f64; 4]; 4],
    pub normal_hessian: [[f64; 4]; 4],
    pub symplecticity_residual: f64,
    pub coupling_residual: f64,
    pub split: Option<EnergySplit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsPrinted {
    pub rotation_frequency: f64,
    pub center_frequencies: [f64; 2],
    pub transform: [[f64; 4]; 4],
    pub transform_symplecticity_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormBody {
    pub point: PointLabel,
    pub classification: FixedPointKind,
    /// Pure centers: the two rotation frequencies instead of a frame.
    pub center_frequencies: Option<[f64; 2]>,
    pub frame: Option<FrameDump>,
    pub as_printed: AsPrinted,
}

fn rows(m: &nalgebra::Matrix4<f64>) -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

pub fn normal_form_body(scenario: &Scenario) -> Result<NormalFormBody> {
    let arm = scenario.arm()?;
    let label = scenario.normal_form.point;
    let fp = arm.analytic_fixed_points()[label.index()];
    let state = fp
        .state
        .ok_or_else(|| Error::Domain(format!("{label} does not exist for these torques")))?;
    let eig = eigen4(&arm.jacobian(&state))?;
    let class = classify(&eig, scenario.tol_zero())?;
    let printed_t = printed_saddle_center_transform();
    let s = crate::linear::symplectic_form();
    let as_printed = AsPrinted {
        rotation_frequency: printed_saddle_center_frequency(&arm.params),
        center_frequencies: printed_center_frequencies(&arm.params),
        transform: rows(&printed_t),
        transform_symplecticity_residual: (printed_t.transpose() * s * printed_t - s).amax(),
    };
    let mut body = NormalFormBody {
        point: label,
        classification: class.kind,
        center_frequencies: None,
        frame: None,
        as_printed,
    };
    match class.kind {
        FixedPointKind::PureCenter => {
            let mut f: Vec<f64> = eig.values.iter().filter(|v| v.im > 0.0).map(|v| v.im).collect();
            f.sort_by(|a, b| b.total_cmp(a));
            body.center_frequencies = Some([f[0], f[1]]);
        }
        _ => {
            let frame = build_normal_form(&arm, &fp, scenario.tol_zero())?.with_motion_tol(scenario.motion_tol());
            let split = scenario
                .normal_form
                .state
                .map(|[a, b, c, d]| frame.energy_split(&State::new(a, b, c, d)));
            body.frame = Some(FrameDump {
                base_point: frame.base_point.to_array(),
                nu: frame.nu,
                omega: frame.omega,
                epsilon: frame.epsilon,
                period: frame.period(),
                transform: rows(&frame.transform),
                inverse_transform: rows(&frame.inverse_transform),
                normal_hessian: rows(&frame.normal_hessian()),
                symplecticity_residual: frame.symplecticity_defect(),
                coupling_residual: frame.coupling_defect(),
                split,
            });
        }
    }
    Ok(body)
}

pub fn normal_form(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let body = normal_form_body(scenario)?;
    let text = match format {
        Format::Json => Envelope::new("normal-form", scenario, body).to_json(),
        Format::Csv => {
            let mut c = Csv::new("normal-form", scenario);
            c.row(&["key", "value"]);
            c.row(&["point".to_string(), body.point.to_string()]);
            c.row(&["classification".to_string(), body.classification.to_string()]);
            if let Some([a, b]) = body.center_frequencies {
                c.row(&["center_frequency_1".to_string(), num(a)]);
                c.row(&["center_frequency_2".to_string(), num(b)]);
            }
            if let Some(f) = &body.frame {
                for (k, v) in [
                    ("nu", f.nu),
                    ("omega", f.omega),
                    ("epsilon", f.epsilon),
                    ("period", f.period),
                    ("symplecticity_residual", f.symplecticity_residual),
                    ("coupling_residual", f.coupling_residual),
                ] {
                    c.row(&[k.to_string(), num(v)]);
                }
                for (i, v) in f.base_point.iter().enumerate() {
                    c.row(&[format!("base_point[{i}]"), num(*v)]);
                }
                for (name, m) in [("transform", &f.transform), ("inverse_transform", &f.inverse_transform)] {
                    for (i, row) in m.iter().enumerate() {
                        for (j, v) in row.iter().enumerate() {
                            c.row(&[format!("{name}[{i}][{j}]"), num(*v)]);
                        }
                    }
                }
                if let Some(s) = f.split {
                    c.row(&["e_hyp".to_string(), num(s.e_hyp)]);
                    c.row(&["e_rot".to_string(), num(s.e_rot)]);
                    c.row(&["motion_class".to_string(), format!("{:?}", s.motion_class)]);
                }
            }
            let p = &body.as_printed;
            c.row(&["as_printed.rotation_frequency".to_string(), num(p.rotation_frequency)]);
            c.row(&["as_printed.center_frequency_1".to_string(), num(p.center_frequencies[0])]);
            c.row(&["as_printed.center_frequency_2".to_string(), num(p.center_frequencies[1])]);
            c.row(&[
                "as_printed.transform_symplecticity_residual".to_string(),
                num(p.transform_symplecticity_residual),
            ]);
            c.finish()
        }
    };
    Ok(Outcome::ok(text))
}

// ---------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub beta1: f64,
    pub beta2: f64,
    pub exists: [bool; 4],
    pub on_boundary: [bool; 4],
    pub min_modulus: Option<f64>,
    pub classifications: [Option<FixedPointKind>; 4],
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBody {
    pub cells: Vec<SweepCell>,
}

fn grid(range: [f64; 2], n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|i| scale * (range[0] + (range[1] - range[0]) * i as f64 / (n - 1) as f64)).collect()
}

fn sweep_cell(scenario: &Scenario, beta1: f64, beta2: f64) -> SweepCell {
    let mut cell = SweepCell {
        beta1,
        beta2,
        exists: [false; 4],
        on_boundary: [false; 4],
        min_modulus: None,
        classifications: [None; 4],
        error: None,
    };
    let params = match scenario.params() {
        Ok(p) => p,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    let arm = Arm::new(params, Torques { beta1, beta2 });
    let mut errors = Vec::new();
    for (k, fp) in arm.analytic_fixed_points().iter().enumerate() {
        cell.exists[k] = fp.exists();
        cell.on_boundary[k] = fp.on_boundary;
        let Some(s) = fp.state else { continue };
        match eigen4(&arm.jacobian(&s)) {
            Ok(eig) => {
                let m = eig.min_modulus();
                cell.min_modulus = Some(cell.min_modulus.map_or(m, |c: f64| c.min(m)));
                match classify(&eig, scenario.tol_zero()) {
                    Ok(c) => cell.classifications[k] = Some(c.kind),
                    Err(e) => errors.push(format!("{}: {e}", PointLabel::ALL[k])),
                }
            }
            Err(e) => errors.push(format!("{}: {e}", PointLabel::ALL[k])),
        }
    }
    if !errors.is_empty() {
        cell.error = Some(errors.join("; "));
    }
    cell
}

pub fn sweep_body(scenario: &Scenario) -> Result<SweepBody> {
    let mgl = scenario.params()?.mgl();
    let sw = &scenario.sweep;
    let b1 = grid(sw.beta1_range, sw.resolution[0], mgl);
    let b2 = grid(sw.beta2_range, sw.resolution[1], mgl);
    let pairs: Vec<(f64, f64)> = b1.iter().flat_map(|x| b2.iter().map(move |y| (*x, *y))).collect();
    // par_iter().collect() keeps input order
    let cells = pairs.par_iter().map(|(x, y)| sweep_cell(scenario, *x, *y)).collect();
    Ok(SweepBody { cells })
}

pub fn sweep(scenario: &Scenario, format: Format) -> Result<Outcome> {
    let body = sweep_body(scenario)?;
    let text = match format {
        Format::Json => Envelope::new("sweep", scenario, body).to_json(),
        Format::Csv => {
            let mut c = Csv::new("sweep", scenario);
            c.meta("boundary_tol", num(BOUNDARY_TOL));
            c.row(&[
                "beta1", "beta2", "exists1", "exists2", "exists3", "exists4", "boundary", "min_modulus", "class1",
                "class2", "class3", "class4", "error",
            ]);
            for cell in &body.cells {
                let mut row = vec![num(cell.beta1), num(cell.beta2)];
                row.extend(cell.exists.iter().map(|e| e.to_string()));
                row.push(cell.on_boundary.iter().any(|b| *b).to_string());
                row.push(opt(cell.min_modulus));
                row.extend(cell.classifications.iter().map(|k| k.map(|k| k.to_string()).unwrap_or_default()));
                row.push(cell.error.clone().unwrap_or_default());
                c.row(&row);
            }
            c.finish()
        }
    };
    Ok(Outcome::ok(text))
}
