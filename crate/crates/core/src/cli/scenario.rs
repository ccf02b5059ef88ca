//! Scenario files: TOML with one section per concern, SI units.
//!
//! ```toml
//! [arm]
//! m = 1.0
//! L = 1.0
//! g = 9.81
//!
//! [torques]
//! beta1 = 0.0
//! beta2 = 0.0
//!
//! [integrator]
//! method = "implicit-midpoint"
//! step = 1e-3
//! ```
//!
//! Every section and key is optional. Output files carry the resolved
//! scenario and are accepted back as input.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::IntegratorSpec;
use crate::linear::default_tol_zero;
use crate::manifolds::ManifoldId;
use crate::model::{Arm, ArmParams, Torques};
use crate::normal_form::DEFAULT_MOTION_TOL;

/// Prefix of scenario lines echoed into CSV output.
pub const CSV_ECHO_PREFIX: &str = "# scenario: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmSection {
    pub m: f64,
    #[serde(rename = "L")]
    pub length: f64,
    pub g: f64,
}

impl Default for ArmSection {
    fn default() -> Self {
        Self { m: 1.0, length: 1.0, g: 1.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TorqueSection {
    pub beta1: f64,
    pub beta2: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Eigenvalue zero threshold; `1e-7 ω0` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_zero: Option<f64>,
    /// Modal-energy threshold; `1e-10 mgL` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// `(θ1, p1, θ2, p2)`.
    pub initial: [f64; 4],
    pub horizon: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { initial: [0.01, 0.0, 0.01, 0.0], horizon: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Plane {
    #[serde(rename = "manifold-M1")]
    #[value(name = "manifold-M1")]
    ManifoldM1,
    #[serde(rename = "manifold-M2")]
    #[value(name = "manifold-M2")]
    ManifoldM2,
    #[serde(rename = "normal-xpx")]
    #[value(name = "normal-xpx")]
    NormalXPx,
    #[serde(rename = "normal-ypy")]
    #[value(name = "normal-ypy")]
    NormalYPy,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::ManifoldM1 => "manifold-M1",
            Plane::ManifoldM2 => "manifold-M2",
            Plane::NormalXPx => "normal-xpx",
            Plane::NormalYPy => "normal-ypy",
        })
    }
}

/// Fixed-point label, `P1`..`P4` in branch order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum PointLabel {
    #[value(name = "P1")]
    P1,
    #[value(name = "P2")]
    P2,
    #[value(name = "P3")]
    P3,
    #[value(name = "P4")]
    P4,
}

impl PointLabel {
    pub const ALL: [PointLabel; 4] = [PointLabel::P1, PointLabel::P2, PointLabel::P3, PointLabel::P4];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index() + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortraitSection {
    pub plane: Plane,
    /// Base point for the normal planes.
    pub point: PointLabel,
    /// Grid side for the normal planes.
    pub resolution: usize,
    /// Half-width of the normal-plane grid, in normal coordinates.
    pub amplitude: f64,
    /// Manifold planes: orbit energies as fractions of the way from the
    /// bottom of the reduced well (0) to the separatrix (1).
    pub energy_fractions: Vec<f64>,
    pub horizon: f64,
}

impl Default for PortraitSection {
    fn default() -> Self {
        Self {
            plane: Plane::ManifoldM1,
            point: PointLabel::P2,
            resolution: 5,
            amplitude: 1e-2,
            energy_fractions: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7],
            horizon: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ManifoldCheckSection {
    pub manifolds: Vec<ManifoldId>,
    /// Explicit starting angles `θ1` (with `p1 = 0`). When empty, `count`
    /// angles evenly spaced in `(0, max_fraction · π]` are used.
    pub amplitudes: Vec<f64>,
    pub count: usize,
    pub max_fraction: f64,
    /// Horizon in units of `1/ω0`.
    pub horizon: f64,
    pub tolerance: f64,
}

impl Default for ManifoldCheckSection {
    fn default() -> Self {
        Self {
            manifolds: vec![ManifoldId::M1, ManifoldId::M2],
            amplitudes: Vec::new(),
            count: 20,
            max_fraction: 0.95,
            horizon: 50.0,
            tolerance: 1e-6,
        }
    }
}

impl ManifoldCheckSection {
    pub fn starting_angles(&self) -> Vec<f64> {
        if !self.amplitudes.is_empty() {
            return self.amplitudes.clone();
        }
        (1..=self.count)
            .map(|k| self.max_fraction * std::f64::consts::PI * k as f64 / self.count as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalFormSection {
    pub point: PointLabel,
    /// Optional state whose energy split is reported.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<[f64; 4]>,
}

impl Default for NormalFormSection {
    fn default() -> Self {
        Self { point: PointLabel::P2, state: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// `β1` range in units of `mgL`.
    pub beta1_range: [f64; 2],
    /// `β2` range in units of `mgL`.
    pub beta2_range: [f64; 2],
    /// Grid points along `β1` and `β2`.
    pub resolution: [usize; 2],
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { beta1_range: [-3.0, 3.0], beta2_range: [-1.5, 1.5], resolution: [101, 101] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub arm: ArmSection,
    pub torques: TorqueSection,
    pub analysis: AnalysisSection,
    pub integrator: IntegratorSpec,
    pub simulate: SimulateSection,
    pub portrait: PortraitSection,
    pub manifold_check: ManifoldCheckSection,
    pub normal_form: NormalFormSection,
    pub sweep: SweepSection,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            arm: ArmSection::default(),
            torques: TorqueSection::default(),
            analysis: AnalysisSection::default(),
            integrator: IntegratorSpec::implicit_midpoint(1e-3),
            simulate: SimulateSection::default(),
            portrait: PortraitSection::default(),
            manifold_check: ManifoldCheckSection::default(),
            normal_form: NormalFormSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be finite, got {v}")))
    }
}

impl Scenario {
    /// Parses a scenario file, or the scenario echoed in an earlier output.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Config(format!("json: {e}")))?;
            let inner = v
                .get("scenario")
                .ok_or_else(|| Error::Config("json input has no `scenario` key".into()))?;
            return serde_json::from_value(inner.clone()).map_err(|e| Error::Config(format!("scenario: {e}")));
        }
        let echoed: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix(CSV_ECHO_PREFIX)).collect();
        let source = if echoed.is_empty() { text.to_string() } else { echoed.join("\n") };
        toml::from_str(&source).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Fills tolerances that default from the arm parameters.
    pub fn resolve(mut self) -> Result<Self> {
        let params = self.params()?;
        self.analysis.tol_zero.get_or_insert(default_tol_zero(params.omega0()));
        self.analysis.motion_tol.get_or_insert(DEFAULT_MOTION_TOL * params.mgl());
        self.validate()?;
        Ok(self)
    }

    pub fn params(&self) -> Result<ArmParams> {
        positive("arm.m", self.arm.m)?;
        positive("arm.L", self.arm.length)?;
        positive("arm.g", self.arm.g)?;
        ArmParams::new(self.arm.m, self.arm.length, self.arm.g)
    }

    pub fn arm(&self) -> Result<Arm> {
        finite("torques.beta1", self.torques.beta1)?;
        finite("torques.beta2", self.torques.beta2)?;
        Ok(Arm::new(self.params()?, Torques::new(self.torques.beta1, self.torques.beta2)?))
    }

    pub fn tol_zero(&self) -> f64 {
        self.analysis.tol_zero.expect("resolved scenario")
    }

    pub fn motion_tol(&self) -> f64 {
        self.analysis.motion_tol.expect("resolved scenario")
    }

    pub fn validate(&self) -> Result<()> {
        self.arm()?;
        if let Some(t) = self.analysis.tol_zero {
            positive("analysis.tol_zero", t)?;
        }
        if let Some(t) = self.analysis.motion_tol {
            positive("analysis.motion_tol", t)?;
        }
        self.integrator.validate().map_err(|e| Error::Config(format!("integrator: {e}")))?;
        for (i, v) in self.simulate.initial.iter().enumerate() {
            finite(&format!("simulate.initial[{i}]"), *v)?;
        }
        positive("simulate.horizon", self.simulate.horizon)?;
        positive("portrait.horizon", self.portrait.horizon)?;
        positive("portrait.amplitude", self.portrait.amplitude)?;
        if self.portrait.resolution < 2 {
            return Err(Error::Config("portrait.resolution must be at least 2".into()));
        }
        for f in &self.portrait.energy_fractions {
            if !(f.is_finite() && *f >= 0.0) {
                return Err(Error::Config(format!("portrait.energy_fractions must be non-negative, got {f}")));
            }
        }
        let mc = &self.manifold_check;
        positive("manifold_check.horizon", mc.horizon)?;
        positive("manifold_check.tolerance", mc.tolerance)?;
        positive("manifold_check.max_fraction", mc.max_fraction)?;
        if mc.amplitudes.is_empty() && mc.count == 0 {
            return Err(Error::Config("manifold_check.count must be positive".into()));
        }
        for a in &mc.amplitudes {
            finite("manifold_check.amplitudes", *a)?;
        }
        if let Some(s) = self.normal_form.state {
            for v in s {
                finite("normal_form.state", v)?;
            }
        }
        let sw = &self.sweep;
        for (key, r) in [("sweep.beta1_range", sw.beta1_range), ("sweep.beta2_range", sw.beta2_range)] {
            finite(key, r[0])?;
            finite(key, r[1])?;
            if r[0] > r[1] {
                return Err(Error::Config(format!("{key} must be increasing, got {r:?}")));
            }
        }
        if sw.resolution.iter().any(|n| *n < 2) {
            return Err(Error::Config("sweep.resolution entries must be at least 2".into()));
        }
        Ok(())
    }
}
