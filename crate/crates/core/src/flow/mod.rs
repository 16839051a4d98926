//! Graphical mean curvature flow in nonparametric form: `f` evolves by the
//! `N` component `V` of a velocity whose normal part is `H`.

pub mod drift;
pub mod equivariant;
pub mod grid_solver;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{p_from_invariants, singular_invariants};
use crate::grid::GraphMapField;
use crate::linalg::inverse_spd;

pub use drift::{reduce_circle_drift, CircleDrift, DriftTrajectory};
pub use equivariant::EquivariantS2;
pub use grid_solver::FlowState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Rk2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Running,
    Converged,
    Drifting,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    pub cfl: f64,
    pub t_end: f64,
    /// Record a time-series row every this many steps.
    pub record_every: u64,
    pub h_tol: f64,
    pub diam_tol: f64,
    pub integrator: Integrator,
    /// Fixed time step; replaces the CFL rule (refinement studies).
    pub dt: Option<f64>,
    /// Consecutive quiet steps needed to declare convergence.
    pub converge_window: u64,
    /// Stop the run as soon as convergence is declared.
    pub stop_when_converged: bool,
}

/// Shortens the step that would pass `t_end`.
pub(crate) fn clip_to_end(dt: f64, t: f64, t_end: f64) -> f64 {
    if t < t_end {
        dt.min(t_end - t)
    } else {
        dt
    }
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 1.0,
            record_every: 100,
            h_tol: 1e-6,
            diam_tol: 1e-3,
            integrator: Integrator::Rk2,
            dt: None,
            converge_window: 100,
            stop_when_converged: false,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: &str| Err(Error::Validation { key: key.into(), reason: reason.into() });
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("flow.cfl", "must lie in (0, 1]");
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("flow.t_end", "must be finite and non-negative");
        }
        if self.record_every == 0 {
            return bad("flow.record_every", "must be positive");
        }
        if !(self.h_tol > 0.0) {
            return bad("flow.h_tol", "must be positive");
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad("flow.dt", "must be positive");
            }
        }
        Ok(())
    }
}

/// Pointwise by-products of a right-hand-side evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeDiagnostics {
    pub p: f64,
    /// `|H|²` as the normal part of `(0, V)`.
    pub h2: f64,
    /// Largest eigenvalue of `g⁻¹`.
    pub g_inv_max: f64,
}

/// Second derivatives of `f` with the compact stencil: three points on the
/// diagonal, four corners off it.
fn compact_second_derivatives(field: &GraphMapField, node: usize) -> Vec<Vec<[f64; 2]>> {
    let m = field.dim();
    let h = field.grid.spacing();
    let c = field.values[node];
    let mut out = vec![vec![[0.0; 2]; m]; m];
    for a in 0..m {
        let p = field.lifted(node, &[(a, 1)]);
        let q = field.lifted(node, &[(a, -1)]);
        for al in 0..2 {
            out[a][a][al] = (p[al] - 2.0 * c[al] + q[al]) / (h[a] * h[a]);
        }
        for b in (a + 1)..m {
            let pp = field.lifted(node, &[(a, 1), (b, 1)]);
            let pm = field.lifted(node, &[(a, 1), (b, -1)]);
            let mp = field.lifted(node, &[(a, -1), (b, 1)]);
            let mm = field.lifted(node, &[(a, -1), (b, -1)]);
            for al in 0..2 {
                let v = (pp[al] - pm[al] - mp[al] + mm[al]) / (4.0 * h[a] * h[b]);
                out[a][b][al] = v;
                out[b][a][al] = v;
            }
        }
    }
    out
}

/// `V^α = g^{ij}(∂²_{ij} f^α − Γ_M^k_{ij} ∂_k f^α + Γ_N^α_{βγ} ∂_i f^β ∂_j f^γ)`.
pub fn nonparametric_rhs(field: &GraphMapField, node: usize) -> Result<[f64; 2]> {
    nonparametric_rhs_diag(field, node).map(|(v, _)| v)
}

pub fn nonparametric_rhs_diag(field: &GraphMapField, node: usize) -> Result<([f64; 2], NodeDiagnostics)> {
    let m = field.dim();
    let x = field.grid.coord(node);
    let y = field.values[node];
    let jac = field.jacobian_at(node, &[]);
    let gm = field.m.metric_at(&x);
    let gn = field.n.metric_at(&y);
    let g = &gm + &jac * &gn * jac.transpose();
    let g_inv = inverse_spd(&g, &x)
        .map_err(|_| Error::State(format!("induced metric not positive definite at node {node}")))?;
    let gamma_m = field.m.christoffel_at(&x)?;
    let gamma_n = field.n.christoffel_at(&y)?;
    let d2 = compact_second_derivatives(field, node);
    let mut v = [0.0; 2];
    for (al, v_al) in v.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let gij = g_inv[(i, j)];
                if gij == 0.0 {
                    continue;
                }
                let mut t = d2[i][j][al];
                for k in 0..m {
                    t -= gamma_m.get(k, i, j) * jac[(k, al)];
                }
                for be in 0..2 {
                    for ga in 0..2 {
                        t += gamma_n.get(al, be, ga) * jac[(i, be)] * jac[(j, ga)];
                    }
                }
                acc += gij * t;
            }
        }
        *v_al = acc;
    }
    let gm_inv = inverse_spd(&gm, &x)?;
    let (tr, det) = singular_invariants(&jac, &gm_inv, &gn);
    let diag = NodeDiagnostics {
        p: p_from_invariants(tr, det),
        h2: normal_norm2(&jac, &gn, &g_inv, v),
        g_inv_max: max_eigenvalue(&g_inv),
    };
    Ok((v, diag))
}

/// `|(0, V)^⊥|² = |V|²_N − aᵀ g⁻¹ a` with `a_j = ⟨V, ∂_j f⟩_N`.
pub fn normal_norm2(jac: &DMatrix<f64>, gn: &DMatrix<f64>, g_inv: &DMatrix<f64>, v: [f64; 2]) -> f64 {
    let vv = nalgebra::DVector::from_vec(v.to_vec());
    let gv = gn * &vv;
    let a = jac * &gv;
    let tangential = (a.transpose() * g_inv * &a)[(0, 0)];
    (vv.dot(&gv) - tangential).max(0.0)
}

fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Evaluates `f` over all nodes, in parallel when enabled; results come back
/// in node order so reductions are independent of the worker count.
pub(crate) fn map_nodes<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::{flat_torus, round_sphere};
    use crate::grid::Grid;
    use std::sync::Arc;

    #[test]
    fn constant_and_identity_maps_are_stationary() {
        let t = Arc::new(flat_torus(2, 1.0));
        let grid = Arc::new(Grid::new(&t, &[8, 8]).unwrap());
        let id = GraphMapField::from_fn(grid.clone(), t.clone(), t.clone(), |x| [x[0], x[1]]).unwrap();
        let c = GraphMapField::from_fn(grid, t.clone(), Arc::new(round_sphere(2, 1.0)), |_| [1.0, 0.5]).unwrap();
        for node in 0..64 {
            let v = nonparametric_rhs(&id, node).unwrap();
            assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
            assert_eq!(nonparametric_rhs(&c, node).unwrap(), [0.0, 0.0]);
        }
    }
}
