//! Surfaces of revolution `dz² + w(z)² ds²`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::manifold::{Axis, ChartManifold, CurvatureModel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warp {
    Const { value: f64 },
    Sin,
    Cosh,
    /// `w(z) = e^{-z}`: a funnel, narrowing as `z` grows.
    ExpNeg,
    /// `w(z) = Σ c_k z^k`.
    Polynomial { coefficients: Vec<f64> },
}

impl Warp {
    /// `(w, w', w'')` at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        match self {
            Self::Const { value } => (*value, 0.0, 0.0),
            Self::Sin => (z.sin(), z.cos(), -z.sin()),
            Self::Cosh => (z.cosh(), z.sinh(), z.cosh()),
            Self::ExpNeg => {
                let e = (-z).exp();
                (e, -e, e)
            }
            Self::Polynomial { coefficients } => {
                let (mut w, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for c in coefficients.iter().rev() {
                    d2 = d2 * z + 2.0 * d1;
                    d1 = d1 * z + w;
                    w = w * z + c;
                }
                (w, d1, d2)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Const { .. } => "const",
            Self::Sin => "sin",
            Self::Cosh => "cosh",
            Self::ExpNeg => "exp_neg",
            Self::Polynomial { .. } => "polynomial",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedSurface {
    pub warp: Warp,
    /// Period of the circle coordinate `s`.
    pub period: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl WarpedSurface {
    pub fn new(warp: Warp, z_lo: f64, z_hi: f64) -> Result<Self> {
        let s = Self { warp, period: 2.0 * PI, z_lo, z_hi };
        s.validate()?;
        Ok(s)
    }

    /// Checks `w > 0` and finite curvature on a fine sample of the range.
    pub fn validate(&self) -> Result<()> {
        if !(self.z_hi > self.z_lo) || !(self.period > 0.0) {
            return Err(Error::Configuration(format!(
                "warped surface needs z_lo < z_hi and positive period (got [{}, {}], {})",
                self.z_lo, self.z_hi, self.period
            )));
        }
        for i in 0..=256 {
            let z = self.z_lo + (self.z_hi - self.z_lo) * i as f64 / 256.0;
            let (w, _, w2) = self.warp.eval(z);
            if !(w > 0.0) || !(w2 / w).is_finite() {
                return Err(Error::Configuration(format!(
                    "warp `{}` not positive at z = {z}",
                    self.warp.name()
                )));
            }
        }
        Ok(())
    }

    fn check(&self, z: f64) -> Result<()> {
        if z < self.z_lo || z > self.z_hi || !z.is_finite() {
            return Err(Error::Domain {
                at: vec![z],
                reason: format!("z outside [{}, {}]", self.z_lo, self.z_hi),
            });
        }
        Ok(())
    }

    /// Gauss curvature `-w''/w`.
    pub fn warped_curvature(&self, z: f64) -> Result<f64> {
        self.check(z)?;
        let (w, _, w2) = self.warp.eval(z);
        Ok(-w2 / w)
    }

    /// Chart manifold with coordinates `(s, z)` and metric `diag(w², 1)`.
    pub fn to_manifold(&self) -> ChartManifold {
        let warp_m = self.warp.clone();
        let warp_g = self.warp.clone();
        let warp_k = self.warp.clone();
        let this = self.clone();
        ChartManifold::diagonal(
            format!("warped_cylinder_{}", self.warp.name()),
            vec![Axis::periodic(0.0, self.period), Axis::open(self.z_lo, self.z_hi)],
            Arc::new(move |x: &[f64]| {
                let w = warp_m.eval(x[1]).0;
                vec![w * w, 1.0]
            }),
            Arc::new(move |x: &[f64]| {
                let (w, w1, _) = warp_g.eval(x[1]);
                vec![vec![0.0, 2.0 * w * w1], vec![0.0, 0.0]]
            }),
        )
        .with_curvature_model(CurvatureModel::Gauss(Arc::new(move |x: &[f64]| {
            let (w, _, w2) = warp_k.eval(x[1]);
            -w2 / w
        })))
        .with_distance(Arc::new(move |a: &[f64], b: &[f64]| this.distance(a, b)))
    }

    /// Geodesic distance by shortening a discrete path between the two
    /// points (the `s` endpoint is taken on the nearer side of the seam).
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut ds = b[0] - a[0];
        ds -= self.period * (ds / self.period).round();
        let (za, zb) = (a[1], b[1]);
        if ds.abs() < 1e-15 {
            return (zb - za).abs();
        }
        const SEG: usize = 24;
        let mut s: Vec<f64> = (0..=SEG).map(|i| a[0] + ds * i as f64 / SEG as f64).collect();
        let mut z: Vec<f64> = (0..=SEG).map(|i| za + (zb - za) * i as f64 / SEG as f64).collect();
        let length = |s: &[f64], z: &[f64]| -> f64 {
            (0..SEG)
                .map(|i| {
                    let w = self.warp.eval(0.5 * (z[i] + z[i + 1])).0;
                    (w * w * (s[i + 1] - s[i]).powi(2) + (z[i + 1] - z[i]).powi(2)).sqrt()
                })
                .sum()
        };
        // Gauss–Seidel sweeps on the discrete energy Σ w(z̄)² Δs² + Δz²; its
        // critical points are constant-speed geodesic polygons.
        let mut prev = f64::INFINITY;
        for sweep in 0..4000 {
            for i in 1..SEG {
                let a = self.warp.eval(0.5 * (z[i - 1] + z[i])).0.powi(2);
                let b = self.warp.eval(0.5 * (z[i] + z[i + 1])).0.powi(2);
                s[i] = (a * s[i - 1] + b * s[i + 1]) / (a + b);
                let (wl, w1l, _) = self.warp.eval(0.5 * (z[i - 1] + z[i]));
                let (wr, w1r, _) = self.warp.eval(0.5 * (z[i] + z[i + 1]));
                let pull = wl * w1l * (s[i] - s[i - 1]).powi(2) + wr * w1r * (s[i + 1] - s[i]).powi(2);
                z[i] = (0.5 * (z[i - 1] + z[i + 1]) - 0.25 * pull).clamp(self.z_lo, self.z_hi);
            }
            if sweep % 20 == 19 {
                let l = length(&s, &z);
                if (prev - l).abs() < 1e-14 * l.max(1.0) {
                    break;
                }
                prev = l;
            }
        }
        length(&s, &z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_curvatures() {
        let flat = WarpedSurface::new(Warp::Const { value: 1.0 }, -5.0, 5.0).unwrap();
        assert_eq!(flat.warped_curvature(0.3).unwrap(), 0.0);
        let round = WarpedSurface::new(Warp::Sin, 0.1, 3.0).unwrap();
        assert!((round.warped_curvature(1.2).unwrap() - 1.0).abs() < 1e-15);
        let waist = WarpedSurface::new(Warp::Cosh, -3.0, 3.0).unwrap();
        assert!((waist.warped_curvature(0.7).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn polynomial_derivatives() {
        let p = Warp::Polynomial { coefficients: vec![2.0, 0.0, 1.0, 0.5] };
        let (w, d1, d2) = p.eval(1.5);
        assert!((w - (2.0 + 2.25 + 0.5 * 3.375)).abs() < 1e-12);
        assert!((d1 - (3.0 + 1.5 * 2.25)).abs() < 1e-12);
        assert!((d2 - (2.0 + 3.0 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_warp() {
        assert!(WarpedSurface::new(Warp::Sin, -1.0, 1.0).is_err());
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let w = WarpedSurface::new(Warp::Cosh, -1.0, 1.0).unwrap();
        assert!(matches!(w.warped_curvature(2.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn flat_cylinder_distance_is_euclidean() {
        let c = WarpedSurface::new(Warp::Const { value: 1.0 }, -5.0, 5.0).unwrap();
        let d = c.distance(&[0.0, 0.0], &[0.3, 0.4]);
        assert!((d - 0.5).abs() < 1e-6);
        let across = c.distance(&[0.1, 0.0], &[2.0 * PI - 0.1, 0.0]);
        assert!((across - 0.2).abs() < 1e-9);
    }

    #[test]
    fn waist_distance_along_geodesic_circle() {
        let c = WarpedSurface::new(Warp::Cosh, -3.0, 3.0).unwrap();
        // The waist z = 0 is a geodesic, so the straight chart path is optimal.
        let d = c.distance(&[0.0, 0.0], &[1.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-6);
        // Off the waist the shortest path dips towards it.
        let off = c.distance(&[0.0, 1.0], &[2.0, 1.0]);
        assert!(off < 2.0 * 1.0f64.cosh());
    }
}
