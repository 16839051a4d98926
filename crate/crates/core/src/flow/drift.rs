//! Circles `f(s, p) = (s, z)` from `S¹ × S²` into a warped cylinder stay
//! circles under the flow; only the height `z(t)` moves.

use std::sync::Arc;

use super::nonparametric_rhs;
use crate::error::{Error, Result};
use crate::geometry::manifold::product_s1_s2;
use crate::geometry::{ChartManifold, WarpedSurface};
use crate::grid::{GraphMapField, Grid};

#[derive(Clone, Debug)]
pub struct CircleDrift {
    pub warped: WarpedSurface,
    pub m: Arc<ChartManifold>,
    pub n: Arc<ChartManifold>,
    template: GraphMapField,
}

/// Sampled solution `z(t)` with rates, for Hermite interpolation.
#[derive(Clone, Debug, Default)]
pub struct DriftTrajectory {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub rate: Vec<f64>,
}

impl DriftTrajectory {
    pub fn final_z(&self) -> f64 {
        *self.z.last().expect("non-empty trajectory")
    }

    /// Cubic Hermite interpolation of `z` at time `t`.
    pub fn z_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if t <= self.t[0] {
            return self.z[0];
        }
        if t >= self.t[n - 1] {
            return self.z[n - 1];
        }
        let k = self.t.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let dt = t1 - t0;
        let u = (t - t0) / dt;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u).powi(2),
            u * (1.0 - u).powi(2),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        h00 * self.z[k] + h10 * dt * self.rate[k] + h01 * self.z[k + 1] + h11 * dt * self.rate[k + 1]
    }
}

/// Builds the reduced ODE `ż = Φ(z)` for circles in `N` parametrized by the
/// `S¹` factor of `M = S¹(r) × S²(1)`.
pub fn reduce_circle_drift(circle_radius: f64, warped: WarpedSurface) -> Result<CircleDrift> {
    let m = Arc::new(product_s1_s2(circle_radius, 1.0));
    let n = Arc::new(warped.to_manifold());
    let grid = Arc::new(Grid::new(&m, &[8, 4, 4])?);
    let z0 = 0.5 * (warped.z_lo + warped.z_hi);
    let template = GraphMapField::from_fn(grid, m.clone(), n.clone(), |x| [x[0], z0])?;
    Ok(CircleDrift { warped, m, n, template })
}

impl CircleDrift {
    /// The symmetric field `(s, z)` on the template grid.
    pub fn field(&self, z: f64) -> GraphMapField {
        let values = self.template.values.iter().map(|y| [y[0], z]).collect();
        self.template.with_values(values)
    }

    /// `Φ(z)`: the `z` component of the nonparametric velocity of the circle.
    pub fn rate(&self, z: f64) -> Result<f64> {
        if z < self.warped.z_lo || z > self.warped.z_hi {
            return Err(Error::Domain { at: vec![z], reason: "circle left the warped chart".into() });
        }
        Ok(nonparametric_rhs(&self.field(z), 0)?[1])
    }

    /// Closed form `−w w' / (r² + w²)`, used as an oracle.
    pub fn rate_closed_form(&self, z: f64) -> f64 {
        let r2 = self.m.metric_at(&[0.0, 1.0, 0.0])[(0, 0)];
        let (w, w1, _) = self.warped.warp.eval(z);
        -w * w1 / (r2 + w * w)
    }

    /// `|H|² = ż²` for these circles (the velocity is normal).
    pub fn h2(&self, z: f64) -> Result<f64> {
        Ok(self.rate(z)?.powi(2))
    }

    /// Graph volume `vol(S²) · 2π √(r² + w²)`.
    pub fn volume(&self, z: f64) -> f64 {
        let r2 = self.m.metric_at(&[0.0, 1.0, 0.0])[(0, 0)];
        let w = self.warped.warp.eval(z).0;
        4.0 * std::f64::consts::PI * self.warped.period * (r2 + w * w).sqrt()
    }

    /// Classical RK4 from `z0` to `t_end` with step `dt`.
    pub fn integrate(&self, z0: f64, t_end: f64, dt: f64) -> Result<DriftTrajectory> {
        if !(dt > 0.0) {
            return Err(Error::Configuration("drift step must be positive".into()));
        }
        let mut tr = DriftTrajectory::default();
        let (mut t, mut z) = (0.0, z0);
        let mut r = self.rate(z)?;
        tr.t.push(t);
        tr.z.push(z);
        tr.rate.push(r);
        while t < t_end - 1e-12 {
            let h = dt.min(t_end - t);
            let k1 = r;
            let k2 = self.rate(z + 0.5 * h * k1)?;
            let k3 = self.rate(z + 0.5 * h * k2)?;
            let k4 = self.rate(z + h * k3)?;
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
            r = self.rate(z)?;
            tr.t.push(t);
            tr.z.push(z);
            tr.rate.push(r);
        }
        Ok(tr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Warp;

    #[test]
    fn flat_cylinder_circles_do_not_move() {
        let d = reduce_circle_drift(1.0, WarpedSurface::new(Warp::Const { value: 1.0 }, -5.0, 5.0).unwrap()).unwrap();
        assert_eq!(d.rate(0.7).unwrap(), 0.0);
    }

    #[test]
    fn rate_matches_closed_form() {
        for warp in [Warp::Cosh, Warp::ExpNeg] {
            let d = reduce_circle_drift(1.0, WarpedSurface::new(warp, -4.0, 8.0).unwrap()).unwrap();
            for z in [-1.0, 0.0, 0.5, 2.0] {
                assert!((d.rate(z).unwrap() - d.rate_closed_form(z)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn waist_is_a_fixed_point_and_attracts() {
        let d = reduce_circle_drift(1.0, WarpedSurface::new(Warp::Cosh, -4.0, 4.0).unwrap()).unwrap();
        assert_eq!(d.rate(0.0).unwrap(), 0.0);
        let tr = d.integrate(0.5, 10.0, 1e-2).unwrap();
        assert!(tr.z.windows(2).all(|w| w[1] <= w[0] && w[1] > 0.0));
        assert!(tr.final_z() < 0.5 * (-4.0f64).exp());
    }
}
