use serde::{Deserialize, Serialize};

use super::{clip_to_end, map_nodes, nonparametric_rhs_diag, FlowParams, FlowStatus, Integrator, NodeDiagnostics};
use crate::error::{Error, Result};
use crate::grid::GraphMapField;

/// Velocities above this magnitude are treated as a blow-up.
const BLOWUP: f64 = 1e6;
/// Initial data with `min p` at or below this are not strictly area decreasing
/// at the resolution of the arithmetic.
pub const P_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct FlowState {
    pub field: GraphMapField,
    pub t: f64,
    pub steps: u64,
    pub status: FlowStatus,
    quiet_steps: u64,
    pub abort_reason: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub dt: f64,
    /// Quantities of the state before the step.
    pub min_p: f64,
    pub max_h2: f64,
}

/// Velocity field and diagnostics of a whole field.
pub fn rhs_field(field: &GraphMapField) -> Result<(Vec<[f64; 2]>, Vec<NodeDiagnostics>)> {
    let out = map_nodes(field.node_count(), |i| nonparametric_rhs_diag(field, i));
    let mut v = Vec::with_capacity(out.len());
    let mut d = Vec::with_capacity(out.len());
    for r in out {
        let (vi, di) = r?;
        v.push(vi);
        d.push(di);
    }
    Ok((v, d))
}

fn advance(field: &GraphMapField, base: &[[f64; 2]], dirs: &[&[[f64; 2]]], weights: &[f64]) -> GraphMapField {
    let values = base
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let mut z = *y;
            for (d, w) in dirs.iter().zip(weights) {
                z[0] += w * d[i][0];
                z[1] += w * d[i][1];
            }
            field.n.normalize(&mut z);
            z
        })
        .collect();
    field.with_values(values)
}

impl FlowState {
    pub fn new(field: GraphMapField) -> Result<Self> {
        let (_, diag) = rhs_field(&field)?;
        let (min_p, node) = diag
            .iter()
            .enumerate()
            .map(|(i, d)| (d.p, i))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        if !(min_p > P_FLOOR) {
            return Err(Error::NotAreaDecreasing { min_p: if node < diag.len() { min_p } else { f64::NAN } });
        }
        Ok(Self { field, t: 0.0, steps: 0, status: FlowStatus::Running, quiet_steps: 0, abort_reason: None })
    }

    /// `cfl · h_min² / (2m Λ)` with `Λ` the largest eigenvalue of `g⁻¹`.
    pub fn cfl_dt(&self, params: &FlowParams, diag: &[NodeDiagnostics]) -> f64 {
        let lambda = diag.iter().map(|d| d.g_inv_max).fold(0.0, f64::max);
        let h = self.field.grid.h_min();
        params.cfl * h * h / (2.0 * self.field.dim() as f64 * lambda)
    }

    fn abort(&mut self, reason: String) {
        self.status = FlowStatus::Aborted;
        self.abort_reason = Some(reason);
    }

    pub fn step(&mut self, params: &FlowParams) -> Result<StepReport> {
        if self.status != FlowStatus::Running && self.status != FlowStatus::Converged {
            return Err(Error::State(format!("cannot step a flow with status {:?}", self.status)));
        }
        let (k1, diag) = rhs_field(&self.field)?;
        let (mut min_p, mut min_node) = (f64::INFINITY, 0);
        let mut max_h2: f64 = 0.0;
        for (i, d) in diag.iter().enumerate() {
            if !(d.p >= min_p) {
                min_p = d.p;
                min_node = i;
            }
            max_h2 = max_h2.max(d.h2);
        }
        if !(min_p > 0.0) {
            self.abort(format!("p = {min_p} at node {min_node}"));
            return Err(Error::NonPositiveP { p: min_p, node: min_node });
        }
        let dt = params.dt.unwrap_or_else(|| self.cfl_dt(params, &diag));
        let dt = clip_to_end(dt, self.t, params.t_end);
        let base = &self.field.values;
        let next = match params.integrator {
            Integrator::Euler => advance(&self.field, base, &[&k1], &[dt]),
            Integrator::Rk2 => {
                let stage = advance(&self.field, base, &[&k1], &[dt]);
                let (k2, _) = rhs_field(&stage)?;
                advance(&self.field, base, &[&k1, &k2], &[0.5 * dt, 0.5 * dt])
            }
        };
        let vmax = k1.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        if !vmax.is_finite() || vmax > BLOWUP || next.values.iter().any(|y| !y[0].is_finite() || !y[1].is_finite()) {
            self.abort(format!("velocity blow-up (max |V| = {vmax:e}); time step too large?"));
            return Err(Error::State(self.abort_reason.clone().unwrap()));
        }
        self.field = next;
        self.t += dt;
        self.steps += 1;
        if max_h2.sqrt() < params.h_tol {
            self.quiet_steps += 1;
            if self.quiet_steps >= params.converge_window {
                self.status = FlowStatus::Converged;
            }
        } else {
            self.quiet_steps = 0;
            self.status = FlowStatus::Running;
        }
        Ok(StepReport { dt, min_p, max_h2 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::flat_torus;
    use crate::grid::Grid;
    use std::sync::Arc;

    #[test]
    fn scaled_projection_is_stationary() {
        let m = Arc::new(flat_torus(3, 1.0));
        let n = Arc::new(flat_torus(2, 0.5));
        let grid = Arc::new(Grid::new(&m, &[6, 6, 6]).unwrap());
        let f = GraphMapField::from_fn(grid, m, n, |x| [x[0], x[1]]).unwrap();
        let before = f.values.clone();
        let mut s = FlowState::new(f).unwrap();
        let params = FlowParams::default();
        for _ in 0..5 {
            s.step(&params).unwrap();
        }
        for (a, b) in before.iter().zip(&s.field.values) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_of_torus_is_rejected() {
        let t = Arc::new(flat_torus(2, 1.0));
        let grid = Arc::new(Grid::new(&t, &[6, 6]).unwrap());
        let f = GraphMapField::from_fn(grid, t.clone(), t, |x| [x[0], x[1]]).unwrap();
        assert!(matches!(FlowState::new(f), Err(Error::NotAreaDecreasing { .. })));
    }
}
