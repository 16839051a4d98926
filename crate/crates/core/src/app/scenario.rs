//! Builtin scenarios and the manifolds, grid and initial field of a config.

use std::sync::Arc;

use super::config::{GridSpec, InitialMap, ManifoldSpec, ScenarioConfig, SolverKind, VerifyOptions};
use crate::barrier::{BarrierFunction, BarrierKind};
use crate::classify::ClassifyTolerances;
use crate::error::{Error, Result};
use crate::flow::{EquivariantS2, FlowParams};
use crate::geometry::{ChartManifold, SamplingParams, Warp};
use crate::grid::{GraphMapField, Grid};
use crate::immersion::p_at;

pub const BUILTINS: [&str; 6] =
    ["tsui_wang_s2", "cylinder_drift", "cylinder_waist", "torus_projection", "hopf_pointwise", "torus_identity_edge"];

fn base(name: &str, solver: SolverKind, domain: ManifoldSpec, target: ManifoldSpec, initial: InitialMap, dims: Vec<usize>) -> ScenarioConfig {
    ScenarioConfig {
        scenario: name.to_string(),
        seed: 7,
        output_dir: None,
        solver,
        domain,
        target,
        initial,
        grid: GridSpec { dims },
        flow: FlowParams::default(),
        verify: VerifyOptions::default(),
        barrier: None,
        classify: ClassifyTolerances::default(),
        curvature: SamplingParams::default(),
    }
}

fn circle_scenario(name: &str, warp: Warp, z_lo: f64, z_hi: f64, height: f64) -> ScenarioConfig {
    let mut c = base(
        name,
        SolverKind::CircleDrift,
        ManifoldSpec::ProductS1S2 { circle_radius: 1.0, sphere_radius: 1.0 },
        ManifoldSpec::WarpedCylinder { warp, z_lo, z_hi },
        InitialMap::Circle { height },
        vec![8, 4, 4],
    );
    c.flow.dt = Some(0.01);
    c.flow.record_every = 20;
    c.verify.compare_grid_until = Some(5.0);
    c.verify.residual_tol = Some(1e-8);
    // The map ignores the S² factor, so nodes next to its poles are usable.
    c.verify.pole_margin = 0;
    c
}

/// Full configuration of a builtin scenario.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        // S² → S²((m−1)⁻¹ g) with m = 2, so the target is the unit sphere.
        "tsui_wang_s2" => {
            let mut c = base(
                name,
                SolverKind::Equivariant,
                ManifoldSpec::RoundSphere { dim: 2, radius: 1.0 },
                ManifoldSpec::RoundSphere { dim: 2, radius: 1.0 },
                InitialMap::EquivariantSin { amplitude: 0.8 },
                vec![64, 4],
            );
            c.flow.t_end = 20.0;
            c.flow.record_every = 1000;
            c.verify.window_every = 4;
            c
        }
        "cylinder_drift" => {
            let mut c = circle_scenario(name, Warp::ExpNeg, -2.0, 12.0, 0.0);
            c.flow.t_end = 10.0;
            c.barrier = Some(BarrierFunction::new(BarrierKind::SquaredDistanceToWaistGeodesic { axis: 1, value: 0.0 }, 1.0));
            c
        }
        "cylinder_waist" => {
            let mut c = circle_scenario(name, Warp::Cosh, -3.0, 3.0, 0.5);
            c.flow.t_end = 30.0;
            c.barrier = Some(BarrierFunction::new(BarrierKind::SquaredDistanceToWaistGeodesic { axis: 1, value: 0.0 }, 0.5));
            c
        }
        "torus_projection" => {
            let mut c = base(
                name,
                SolverKind::Grid,
                ManifoldSpec::FlatTorus { dim: 3, scale: 1.0 },
                ManifoldSpec::FlatTorus { dim: 2, scale: 0.5 },
                InitialMap::Affine { matrix: vec![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], offset: [0.0, 0.0] },
                vec![6, 6, 6],
            );
            c.flow.t_end = 2.5;
            c.flow.record_every = 10;
            c.flow.converge_window = 20;
            c.verify.residual_tol = Some(1e-10);
            c
        }
        "hopf_pointwise" => base(
            name,
            SolverKind::Pointwise,
            ManifoldSpec::Sphere3Hopf,
            ManifoldSpec::RoundSphere { dim: 2, radius: 1.0 },
            InitialMap::Hopf,
            vec![4, 4, 4],
        ),
        "torus_identity_edge" => base(
            name,
            SolverKind::Grid,
            ManifoldSpec::FlatTorus { dim: 2, scale: 1.0 },
            ManifoldSpec::FlatTorus { dim: 2, scale: 1.0 },
            InitialMap::Affine { matrix: vec![[1.0, 0.0], [0.0, 1.0]], offset: [0.0, 0.0] },
            vec![8, 8],
        ),
        _ => return None,
    })
}

/// Manifolds, grid and initial field of a config.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub m: Arc<ChartManifold>,
    pub n: Arc<ChartManifold>,
    pub grid: Arc<Grid>,
    pub initial: GraphMapField,
}

impl Prepared {
    pub fn field(&self, values: Vec<[f64; 2]>) -> Result<GraphMapField> {
        if values.len() != self.initial.node_count() {
            return Err(Error::State(format!(
                "snapshot has {} nodes, grid has {}",
                values.len(),
                self.initial.node_count()
            )));
        }
        Ok(self.initial.with_values(values))
    }
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    if cfg.solver == SolverKind::Pointwise {
        return Err(Error::Configuration("pointwise scenarios have no grid".into()));
    }
    let m = Arc::new(cfg.domain.build("domain")?);
    let n = Arc::new(cfg.target.build("target")?);
    if cfg.solver == SolverKind::Equivariant {
        let (nodes, n_phi) = (cfg.grid.dims[0], cfg.grid.dims[1]);
        let eq = equivariant_state(cfg)?;
        let initial = EquivariantS2::materialize_profile(&eq.h, eq.rho, n_phi)?;
        debug_assert_eq!(initial.grid.dims()[0], nodes);
        let grid = initial.grid.clone();
        return Ok(Prepared { m: initial.m.clone(), n: initial.n.clone(), grid, initial });
    }
    let grid = Arc::new(Grid::new(&m, &cfg.grid.dims)?);
    let initial = GraphMapField::from_fn(grid.clone(), m.clone(), n.clone(), |x| cfg.initial.eval(x))?;
    Ok(Prepared { m, n, grid, initial })
}

pub(crate) fn target_radius(cfg: &ScenarioConfig) -> f64 {
    match cfg.target {
        ManifoldSpec::RoundSphere { radius, .. } => radius,
        _ => 1.0,
    }
}

pub(crate) fn equivariant_state(cfg: &ScenarioConfig) -> Result<EquivariantS2> {
    let InitialMap::EquivariantSin { amplitude } = cfg.initial else {
        return Err(Error::Configuration("equivariant solver needs an equivariant_sin initial map".into()));
    };
    EquivariantS2::new(cfg.grid.dims[0], target_radius(cfg), |t| amplitude * t.sin())
}

/// Smallest `p` of the initial map over the grid nodes.
pub fn initial_min_p(cfg: &ScenarioConfig) -> Result<f64> {
    if cfg.solver == SolverKind::Equivariant {
        return match equivariant_state(cfg) {
            Ok(eq) => Ok(eq.min_p()),
            Err(Error::NotAreaDecreasing { min_p }) => Ok(min_p),
            Err(e) => Err(e),
        };
    }
    let m = Arc::new(cfg.domain.build("domain")?);
    let n = Arc::new(cfg.target.build("target")?);
    let grid = Arc::new(Grid::new(&m, &cfg.grid.dims)?);
    let field = GraphMapField::from_fn(grid, m, n, |x| cfg.initial.eval(x))?;
    let mut min_p = f64::INFINITY;
    for node in 0..field.node_count() {
        min_p = min_p.min(p_at(&field, node, &[])?);
    }
    Ok(min_p)
}
