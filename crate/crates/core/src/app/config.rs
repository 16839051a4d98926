//! Scenario configuration files.
//!
//! A config is TOML with section headers. The top-level `scenario` key names
//! a builtin whose full configuration is the base; every table given in the
//! file is merged over it. A table that carries a `kind` key replaces the
//! base table instead of merging, so switching a manifold or map kind never
//! inherits stale keys. `scenario = "custom"` starts from an empty base.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::builtin;
use crate::barrier::BarrierFunction;
use crate::classify::ClassifyTolerances;
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::geometry::manifold::{flat_torus, product_s1_s2, round_sphere, space_form, sphere3_hopf};
use crate::geometry::{ChartManifold, SamplingParams, Warp, WarpedSurface};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    FlatTorus {
        dim: usize,
        #[serde(default = "one")]
        scale: f64,
    },
    RoundSphere {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    #[serde(rename = "product_s1_s2")]
    ProductS1S2 {
        #[serde(default = "one")]
        circle_radius: f64,
        #[serde(default = "one")]
        sphere_radius: f64,
    },
    WarpedCylinder {
        warp: Warp,
        z_lo: f64,
        z_hi: f64,
    },
    #[serde(rename = "sphere3_hopf")]
    Sphere3Hopf,
    /// Constant curvature `curvature` on the cube `[-half_width, half_width]^dim`.
    SpaceForm {
        dim: usize,
        curvature: f64,
        half_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ManifoldSpec {
    pub fn build(&self, key: &str) -> Result<ChartManifold> {
        let bad = |reason: String| Error::Validation { key: key.to_string(), reason };
        let positive = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Self::FlatTorus { dim, scale } => {
                if *dim < 1 {
                    return Err(bad("dim must be at least 1".into()));
                }
                positive("scale", *scale)?;
                Ok(flat_torus(*dim, *scale))
            }
            Self::RoundSphere { dim, radius } => {
                if *dim < 2 {
                    return Err(bad("dim must be at least 2".into()));
                }
                positive("radius", *radius)?;
                Ok(round_sphere(*dim, *radius))
            }
            Self::ProductS1S2 { circle_radius, sphere_radius } => {
                positive("circle_radius", *circle_radius)?;
                positive("sphere_radius", *sphere_radius)?;
                Ok(product_s1_s2(*circle_radius, *sphere_radius))
            }
            Self::WarpedCylinder { .. } => Ok(self.warped_surface(key)?.expect("warped").to_manifold()),
            Self::Sphere3Hopf => Ok(sphere3_hopf()),
            Self::SpaceForm { dim, curvature, half_width } => {
                if *dim < 2 {
                    return Err(bad("dim must be at least 2".into()));
                }
                positive("half_width", *half_width)?;
                if *curvature < 0.0 && half_width * half_width * (*dim as f64) * curvature.abs() >= 1.0 {
                    return Err(bad("cube leaves the ball of definition".into()));
                }
                Ok(space_form(*dim, *curvature, *half_width))
            }
        }
    }

    pub fn warped_surface(&self, key: &str) -> Result<Option<WarpedSurface>> {
        match self {
            Self::WarpedCylinder { warp, z_lo, z_hi } => WarpedSurface::new(warp.clone(), *z_lo, *z_hi)
                .map(Some)
                .map_err(|e| Error::Validation { key: key.to_string(), reason: e.to_string() }),
            _ => Ok(None),
        }
    }
}

/// Initial maps `f₀: M → N` in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMap {
    /// `y = offset + Σ_i x_i · matrix[i]`.
    Affine {
        matrix: Vec<[f64; 2]>,
        #[serde(default)]
        offset: [f64; 2],
    },
    Constant { value: [f64; 2] },
    /// `(s, …) ↦ (s, height)` from `S¹ × S²` into a warped cylinder.
    Circle { height: f64 },
    /// `(θ, φ) ↦ (amplitude · sin θ, φ)` between 2-spheres.
    EquivariantSin { amplitude: f64 },
    /// `(η, ξ₁, ξ₂) ↦ (2η, ξ₁ − ξ₂)`.
    Hopf,
}

impl InitialMap {
    pub fn eval(&self, x: &[f64]) -> [f64; 2] {
        match self {
            Self::Affine { matrix, offset } => {
                let mut y = *offset;
                for (xi, row) in x.iter().zip(matrix) {
                    y[0] += xi * row[0];
                    y[1] += xi * row[1];
                }
                y
            }
            Self::Constant { value } => *value,
            Self::Circle { height } => [x[0], *height],
            Self::EquivariantSin { amplitude } => [amplitude * x[0].sin(), x[1]],
            Self::Hopf => [2.0 * x[0], x[1] - x[2]],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Explicit finite differences on the full chart grid.
    Grid,
    /// Rotationally equivariant `S² → S²` profile.
    Equivariant,
    /// Height ODE of circles in a warped cylinder.
    CircleDrift,
    /// No flow; pointwise singular values of the initial map.
    Pointwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Nodes per chart axis; for the equivariant solver `[J, n_phi]`.
    pub dims: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Record three-snapshot windows for the evolution residual of `p`.
    pub residuals: bool,
    /// Take a window at every this many records.
    pub window_every: u64,
    /// Pass threshold on the largest `L∞` residual; informational when absent.
    pub residual_tol: Option<f64>,
    pub inequalities: bool,
    /// Inequalities are only checked where `|H| > delta`.
    pub delta: f64,
    /// Nodes skipped next to chart poles in the inequality checks.
    pub pole_margin: usize,
    pub budget_rel_tol: f64,
    pub diameter_slope_tol: f64,
    /// Compare the circle ODE with the grid solver up to this time.
    pub compare_grid_until: Option<f64>,
    pub compare_tol: f64,
    /// Time step of the snapshot windows of the circle ODE.
    pub window_dt: f64,
    /// Sample points for the pointwise solver.
    pub samples: usize,
    /// Random sublevel points per graph point in the convexity audit.
    pub convexity_random_factor: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            residuals: true,
            window_every: 1,
            residual_tol: None,
            inequalities: true,
            delta: 1e-8,
            pole_margin: 2,
            budget_rel_tol: 0.02,
            diameter_slope_tol: 0.05,
            compare_grid_until: None,
            compare_tol: 1e-3,
            window_dt: 1e-4,
            samples: 1000,
            convexity_random_factor: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub solver: SolverKind,
    pub domain: ManifoldSpec,
    pub target: ManifoldSpec,
    pub initial: InitialMap,
    pub grid: GridSpec,
    #[serde(default)]
    pub flow: FlowParams,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierFunction>,
    #[serde(default)]
    pub classify: ClassifyTolerances,
    #[serde(default)]
    pub curvature: SamplingParams,
}

fn default_seed() -> u64 {
    7
}

/// 1-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !o.contains_key("kind") => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let user: toml::Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        Error::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    let name = match user.get("scenario") {
        Some(toml::Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::Validation { key: "scenario".into(), reason: "must be a string".into() }),
        None => return Err(Error::Validation { key: "scenario".into(), reason: "missing required key".into() }),
    };
    let mut base = if name == "custom" {
        toml::Table::new()
    } else {
        let cfg = builtin(&name).ok_or_else(|| Error::Validation {
            key: "scenario".into(),
            reason: format!("unknown scenario `{name}` (builtins: {})", super::scenario::BUILTINS.join(", ")),
        })?;
        toml::Table::try_from(&cfg).map_err(|e| Error::Configuration(e.to_string()))?
    };
    merge(&mut base, user);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(toml::Value::Table(base)).map_err(|e| {
        let mut key = e.path().to_string();
        let reason = e.inner().message().trim().to_string();
        if let Some(field) = reason.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
        }
        Error::Validation { key, reason }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

impl ScenarioConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::Validation { key: key.into(), reason: reason.into() });
        self.flow.validate()?;
        if self.seed > i64::MAX as u64 {
            return bad("seed", "must fit in a signed 64-bit integer");
        }
        let m = self.domain.build("domain")?;
        let n = self.target.build("target")?;
        if n.dim() != 2 {
            return bad("target", "target must be a surface");
        }
        match self.solver {
            SolverKind::Equivariant => {
                if !matches!(self.domain, ManifoldSpec::RoundSphere { dim: 2, radius } if radius == 1.0) {
                    return bad("domain", "equivariant solver needs the unit 2-sphere");
                }
                if !matches!(self.target, ManifoldSpec::RoundSphere { dim: 2, .. }) {
                    return bad("target", "equivariant solver needs a round 2-sphere");
                }
                if !matches!(self.initial, InitialMap::EquivariantSin { .. }) {
                    return bad("initial", "equivariant solver needs kind = \"equivariant_sin\"");
                }
                if self.grid.dims.len() != 2 || self.grid.dims[0] < 4 || self.grid.dims[1] < 4 {
                    return bad("grid.dims", "equivariant solver needs [J, n_phi] with J, n_phi >= 4");
                }
            }
            SolverKind::CircleDrift => {
                if !matches!(self.domain, ManifoldSpec::ProductS1S2 { sphere_radius, .. } if sphere_radius == 1.0) {
                    return bad("domain", "circle drift needs product_s1_s2 with sphere_radius = 1");
                }
                if !matches!(self.target, ManifoldSpec::WarpedCylinder { .. }) {
                    return bad("target", "circle drift needs a warped cylinder");
                }
                if !matches!(self.initial, InitialMap::Circle { .. }) {
                    return bad("initial", "circle drift needs kind = \"circle\"");
                }
                if !(self.verify.window_dt > 0.0) {
                    return bad("verify.window_dt", "must be positive");
                }
            }
            SolverKind::Pointwise => {
                if !matches!(self.initial, InitialMap::Hopf) || !matches!(self.domain, ManifoldSpec::Sphere3Hopf) {
                    return bad("initial", "pointwise solver supports the Hopf map on sphere3_hopf");
                }
                if self.verify.samples == 0 {
                    return bad("verify.samples", "must be positive");
                }
            }
            SolverKind::Grid => {}
        }
        if self.solver != SolverKind::Equivariant && self.grid.dims.len() != m.dim() {
            return bad("grid.dims", &format!("expected {} entries, one per axis of the domain", m.dim()));
        }
        if self.grid.dims.iter().any(|&d| d < 3) {
            return bad("grid.dims", "each axis needs at least 3 nodes");
        }
        if let InitialMap::Affine { matrix, .. } = &self.initial {
            if matrix.len() != m.dim() {
                return bad("initial.matrix", &format!("expected {} rows, one per domain axis", m.dim()));
            }
        }
        if let Some(b) = &self.barrier {
            if !b.level.is_finite() {
                return bad("barrier.level", "must be finite");
            }
        }
        if self.verify.window_every == 0 {
            return bad("verify.window_every", "must be positive");
        }
        if self.solver != SolverKind::Pointwise {
            let min_p = super::scenario::initial_min_p(self)?;
            if !(min_p > crate::flow::grid_solver::P_FLOOR) {
                return Err(Error::Validation {
                    key: "initial".into(),
                    reason: format!(
                        "initial map is not strictly area decreasing: min p = {min_p:e} (p = 0 is the boundary λμ = 1)"
                    ),
                });
            }
        }
        Ok(())
    }

    /// Output directory: the configured one, else `runs/<scenario>`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.scenario))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_round_trips_through_toml() {
        for name in super::super::scenario::BUILTINS.iter().filter(|n| **n != "torus_identity_edge") {
            let cfg = parse_config(&format!("scenario = \"{name}\"\n")).unwrap();
            let again = parse_config(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, again, "{name}");
        }
    }

    #[test]
    fn overrides_merge_and_unknown_keys_are_rejected() {
        let cfg = parse_config("scenario = \"tsui_wang_s2\"\n[flow]\nt_end = 2.0\n").unwrap();
        assert_eq!(cfg.flow.t_end, 2.0);
        assert_eq!(cfg.grid.dims[0], 64);
        match parse_config("scenario = \"tsui_wang_s2\"\n[flow]\nt_edn = 2.0\n") {
            Err(Error::Validation { key, reason }) => {
                assert!(key.starts_with("flow"), "{key}");
                assert!(reason.contains("t_edn"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_positions() {
        match parse_config("scenario = \"tsui_wang_s2\"\n[flow\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_keys_are_named() {
        match parse_config("scenario = \"custom\"\nsolver = \"grid\"\n") {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "domain"),
            other => panic!("{other:?}"),
        }
        match parse_config("seed = 3\n") {
            Err(Error::Validation { key, .. }) => assert_eq!(key, "scenario"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_edge_is_rejected_with_p_diagnostic() {
        match parse_config("scenario = \"torus_identity_edge\"\n") {
            Err(Error::Validation { key, reason }) => {
                assert_eq!(key, "initial");
                assert!(reason.contains("min p"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }
}
