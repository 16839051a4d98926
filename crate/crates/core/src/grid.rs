//! Product grids over a chart of `M` and map fields sampled on them.
//!
//! Periodic axes carry nodes at `lo + i·h`; polar axes are cell-centred,
//! `lo + (i + ½)h`, so no node sits on a pole. Stencils reaching past a
//! polar end use the reflected node with its partner axis turned by half a
//! period, and neighbour values are lifted step by step in the chart of `N`
//! so differences never jump across a seam.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{AxisKind, ChartManifold};

#[derive(Clone, Debug)]
pub struct Grid {
    axes: Vec<crate::geometry::Axis>,
    dims: Vec<usize>,
    spacing: Vec<f64>,
    offset: Vec<f64>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(manifold: &ChartManifold, dims: &[usize]) -> Result<Self> {
        let axes = manifold.axes().to_vec();
        if dims.len() != axes.len() {
            return Err(Error::Configuration(format!(
                "grid for `{}` needs {} sizes, got {}",
                manifold.name(),
                axes.len(),
                dims.len()
            )));
        }
        let mut spacing = Vec::new();
        let mut offset = Vec::new();
        for (a, (axis, &n)) in axes.iter().zip(dims).enumerate() {
            match axis.kind {
                AxisKind::Periodic => {
                    if n < 3 {
                        return Err(Error::Configuration(format!("periodic axis {a} needs at least 3 nodes")));
                    }
                    offset.push(0.0);
                }
                AxisKind::Polar { partner } => {
                    if n < 2 {
                        return Err(Error::Configuration(format!("polar axis {a} needs at least 2 nodes")));
                    }
                    if axes.get(partner).map(|p| p.kind) != Some(AxisKind::Periodic) || dims[partner] % 2 != 0 {
                        return Err(Error::Configuration(format!(
                            "polar axis {a} needs a periodic partner with an even node count"
                        )));
                    }
                    offset.push(0.5);
                }
                AxisKind::Open => {
                    return Err(Error::Configuration(format!(
                        "axis {a} of `{}` is neither periodic nor polar; grids need closed charts",
                        manifold.name()
                    )))
                }
            }
            spacing.push(axis.length() / n as f64);
        }
        let mut strides = vec![1; dims.len()];
        for a in (0..dims.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(Self { axes, dims: dims.to_vec(), spacing, offset, strides })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn h_min(&self) -> f64 {
        self.spacing
            .iter()
            .zip(&self.dims)
            .filter(|(_, &n)| n > 1)
            .map(|(h, _)| *h)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, node: usize) -> Vec<isize> {
        self.dims
            .iter()
            .zip(&self.strides)
            .map(|(&n, &s)| ((node / s) % n) as isize)
            .collect()
    }

    /// Chart coordinate of a (possibly virtual) multi-index, extended
    /// linearly past the chart ends.
    pub fn coord_of(&self, idx: &[isize]) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.axes[a].lo + (idx[a] as f64 + self.offset[a]) * self.spacing[a])
            .collect()
    }

    pub fn coord(&self, node: usize) -> Vec<f64> {
        self.coord_of(&self.multi_index(node))
    }

    /// Stored node holding the point of a virtual multi-index.
    pub fn resolve(&self, idx: &[isize]) -> usize {
        let mut v = idx.to_vec();
        for a in 0..self.dim() {
            if let AxisKind::Polar { partner } = self.axes[a].kind {
                let n = self.dims[a] as isize;
                let half = self.dims[partner] as isize / 2;
                if v[a] < 0 {
                    v[a] = -1 - v[a];
                    v[partner] += half;
                } else if v[a] >= n {
                    v[a] = 2 * n - 1 - v[a];
                    v[partner] += half;
                }
            }
        }
        let mut node = 0;
        for a in 0..self.dim() {
            let n = self.dims[a] as isize;
            node += (v[a].rem_euclid(n)) as usize * self.strides[a];
        }
        node
    }

    /// Distance in nodes from the nearest polar end (`usize::MAX` if none).
    pub fn polar_margin(&self, node: usize) -> usize {
        let idx = self.multi_index(node);
        let mut best = usize::MAX;
        for a in 0..self.dim() {
            if matches!(self.axes[a].kind, AxisKind::Polar { .. }) {
                let i = idx[a] as usize;
                best = best.min(i.min(self.dims[a] - 1 - i));
            }
        }
        best
    }
}

/// Values of `f: M → N` at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct GraphMapField {
    pub grid: Arc<Grid>,
    pub m: Arc<ChartManifold>,
    pub n: Arc<ChartManifold>,
    pub values: Vec<[f64; 2]>,
}

impl GraphMapField {
    pub fn from_fn(
        grid: Arc<Grid>,
        m: Arc<ChartManifold>,
        n: Arc<ChartManifold>,
        f: impl Fn(&[f64]) -> [f64; 2],
    ) -> Result<Self> {
        if n.dim() != 2 {
            return Err(Error::Configuration("target must be a surface".into()));
        }
        let values = (0..grid.node_count())
            .map(|i| {
                let mut y = f(&grid.coord(i));
                n.normalize(&mut y);
                y
            })
            .collect();
        let field = Self { grid, m, n, values };
        field.validate()?;
        Ok(field)
    }

    pub fn with_values(&self, values: Vec<[f64; 2]>) -> Self {
        Self { grid: self.grid.clone(), m: self.m.clone(), n: self.n.clone(), values }
    }

    /// Finite values inside `N`'s chart after wrapping.
    pub fn validate(&self) -> Result<()> {
        for (i, y) in self.values.iter().enumerate() {
            if !y[0].is_finite() || !y[1].is_finite() {
                return Err(Error::State(format!("non-finite value at node {i}")));
            }
            self.n
                .check_domain(y)
                .map_err(|e| Error::State(format!("node {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Value reached by walking unit steps from `node` along `path`, each
    /// step lifted to the chart representative nearest the previous one.
    pub fn lifted(&self, node: usize, path: &[(usize, isize)]) -> [f64; 2] {
        let mut idx = self.grid.multi_index(node);
        let mut cur = self.values[node];
        for &(axis, steps) in path {
            let dir = steps.signum();
            for _ in 0..steps.abs() {
                idx[axis] += dir;
                let stored = self.values[self.grid.resolve(&idx)];
                let y = self.n.unwrap_near(&stored, &cur);
                cur = [y[0], y[1]];
            }
        }
        cur
    }

    /// Virtual chart coordinate of `node` shifted along `path`.
    pub fn coord_at(&self, node: usize, path: &[(usize, isize)]) -> Vec<f64> {
        let mut idx = self.grid.multi_index(node);
        for &(axis, steps) in path {
            idx[axis] += steps;
        }
        self.grid.coord_of(&idx)
    }

    /// Central-difference `df` (m×2) at `node` shifted along `base`.
    pub fn jacobian_at(&self, node: usize, base: &[(usize, isize)]) -> DMatrix<f64> {
        let m = self.dim();
        let h = self.grid.spacing();
        let mut jac = DMatrix::zeros(m, 2);
        let mut path = base.to_vec();
        for b in 0..m {
            path.push((b, 1));
            let plus = self.lifted(node, &path);
            path.pop();
            path.push((b, -1));
            let minus = self.lifted(node, &path);
            path.pop();
            for alpha in 0..2 {
                jac[(b, alpha)] = (plus[alpha] - minus[alpha]) / (2.0 * h[b]);
            }
        }
        jac
    }

    /// `(Σ √det g · ΔV)` of the graph, i.e. its total volume.
    pub fn total_volume(&self) -> Result<f64> {
        let mut acc = 0.0;
        for node in 0..self.node_count() {
            acc += self.volume_density(node)?;
        }
        Ok(acc * self.grid.cell_volume())
    }

    /// `√det g` of the induced metric at a node.
    pub fn volume_density(&self, node: usize) -> Result<f64> {
        let x = self.grid.coord(node);
        let jac = self.jacobian_at(node, &[]);
        let g = self.m.metric_at(&x) + &jac * self.n.metric_at(&self.values[node]) * jac.transpose();
        let det = g.determinant();
        if !(det > 0.0) {
            return Err(Error::State(format!("induced metric not positive definite at node {node}")));
        }
        Ok(det.sqrt())
    }

    /// `√det g_M · ΔV` at a node, the quadrature weight on `M`.
    pub fn domain_weight(&self, node: usize) -> f64 {
        let g = self.m.metric_at(&self.grid.coord(node));
        g.determinant().max(0.0).sqrt() * self.grid.cell_volume()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::{flat_torus, round_sphere};
    use std::f64::consts::PI;

    #[test]
    fn polar_ghost_resolves_to_opposite_meridian() {
        let s2 = round_sphere(2, 1.0);
        let g = Grid::new(&s2, &[8, 4]).unwrap();
        assert_eq!(g.resolve(&[-1, 0]), g.resolve(&[0, 2]));
        assert_eq!(g.resolve(&[8, 1]), g.resolve(&[7, 3]));
        assert!((g.coord_of(&[-1, 0])[0] + PI / 16.0).abs() < 1e-15);
    }

    #[test]
    fn lifted_values_continue_across_pole() {
        let s2 = Arc::new(round_sphere(2, 1.0));
        let grid = Arc::new(Grid::new(&s2, &[16, 4]).unwrap());
        // Equivariant map h(θ) = 0.8 sin θ.
        let f = GraphMapField::from_fn(grid.clone(), s2.clone(), s2.clone(), |x| [0.8 * x[0].sin(), x[1]]).unwrap();
        let ghost = f.lifted(0, &[(0, -1)]);
        let theta0 = grid.coord(0)[0];
        assert!((ghost[0] + 0.8 * theta0.sin()).abs() < 1e-14);
        assert!(ghost[1].abs() < 1e-12);
        // Walking twice around φ accumulates the lift.
        let far = f.lifted(0, &[(1, 2)]);
        assert!((far[1] - PI).abs() < 1e-12);
        let back = f.lifted(0, &[(1, -2)]);
        assert!((back[1] + PI).abs() < 1e-12);
    }

    #[test]
    fn open_axes_rejected() {
        let s3 = crate::geometry::manifold::sphere3_hopf();
        assert!(Grid::new(&s3, &[4, 4, 4]).is_err());
    }

    #[test]
    fn identity_torus_volume() {
        let t = Arc::new(flat_torus(2, 1.0));
        let grid = Arc::new(Grid::new(&t, &[8, 8]).unwrap());
        let f = GraphMapField::from_fn(grid, t.clone(), t, |x| [x[0], x[1]]).unwrap();
        // √det(2·I) = 2 over area 4π².
        assert!((f.total_volume().unwrap() - 8.0 * PI * PI).abs() < 1e-10);
    }
}
