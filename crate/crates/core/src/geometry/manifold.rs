use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inverse_spd;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    /// Coordinates wrap with period `hi - lo`.
    Periodic,
    /// Colatitude-like axis: crossing either end reflects the coordinate and
    /// shifts the periodic `partner` axis by half its period.
    Polar { partner: usize },
    /// Plain interval; evaluation outside it is a domain error.
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub kind: AxisKind,
}

impl Axis {
    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self { lo, hi, kind: AxisKind::Periodic }
    }

    pub fn polar(lo: f64, hi: f64, partner: usize) -> Self {
        Self { lo, hi, kind: AxisKind::Polar { partner } }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, kind: AxisKind::Open }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Christoffel symbols `Γ^k_ij`, stored with `k` outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Levi-Civita symbols from the metric, its inverse and its first
    /// derivatives (`dg[a]` is `∂_a g`).
    pub fn from_metric_derivatives(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = g_inv.nrows();
        let mut out = Self::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    out.set(k, i, j, 0.5 * acc);
                    out.set(k, j, i, 0.5 * acc);
                }
            }
        }
        out
    }
}

pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DiagFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// `grad[k][i] = ∂_i d_k` for a diagonal metric `diag(d_0, ..)`.
pub type DiagGradFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;
pub type DistanceFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum MetricSource {
    General(MetricFn),
    Diagonal { diag: DiagFn, grad: DiagGradFn },
}

/// A block of axes `start..start+len` carrying constant sectional curvature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBlock {
    pub start: usize,
    pub len: usize,
    pub curvature: f64,
}

#[derive(Clone)]
pub enum CurvatureModel {
    /// Riemann tensor from 4th-order differences of the metric.
    FiniteDifference,
    /// Global constant sectional curvature (exact).
    Constant(f64),
    /// Two-dimensional manifold with known Gauss curvature.
    Gauss(ScalarFn),
    /// Riemannian product of constant-curvature factors (exact).
    Product(Vec<CurvatureBlock>),
}

impl fmt::Debug for CurvatureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FiniteDifference => write!(f, "FiniteDifference"),
            Self::Constant(k) => write!(f, "Constant({k})"),
            Self::Gauss(_) => write!(f, "Gauss(..)"),
            Self::Product(b) => write!(f, "Product({b:?})"),
        }
    }
}

/// Riemannian manifold covered by one product-of-intervals chart.
#[derive(Clone)]
pub struct ChartManifold {
    name: String,
    axes: Vec<Axis>,
    metric: MetricSource,
    curvature: CurvatureModel,
    fd_step: f64,
    stencil_order: usize,
    distance: Option<DistanceFn>,
}

impl fmt::Debug for ChartManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChartManifold")
            .field("name", &self.name)
            .field("axes", &self.axes)
            .field("curvature", &self.curvature)
            .field("fd_step", &self.fd_step)
            .field("stencil_order", &self.stencil_order)
            .finish()
    }
}

impl ChartManifold {
    pub fn new(name: impl Into<String>, axes: Vec<Axis>, metric: MetricFn) -> Self {
        Self {
            name: name.into(),
            axes,
            metric: MetricSource::General(metric),
            curvature: CurvatureModel::FiniteDifference,
            fd_step: 5e-3,
            stencil_order: 4,
            distance: None,
        }
    }

    /// Diagonal metric with analytic first derivatives; Christoffel symbols
    /// are then evaluated in closed form.
    pub fn diagonal(name: impl Into<String>, axes: Vec<Axis>, diag: DiagFn, grad: DiagGradFn) -> Self {
        Self {
            name: name.into(),
            axes,
            metric: MetricSource::Diagonal { diag, grad },
            curvature: CurvatureModel::FiniteDifference,
            fd_step: 5e-3,
            stencil_order: 4,
            distance: None,
        }
    }

    pub fn with_curvature_model(mut self, model: CurvatureModel) -> Self {
        self.curvature = model;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Central-difference order used for metric derivatives (2 or 4).
    pub fn with_stencil_order(mut self, order: usize) -> Self {
        self.stencil_order = if order <= 2 { 2 } else { 4 };
        self
    }

    pub fn with_distance(mut self, d: DistanceFn) -> Self {
        self.distance = Some(d);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn curvature_model(&self) -> &CurvatureModel {
        &self.curvature
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn stencil_order(&self) -> usize {
        self.stencil_order
    }

    pub fn constant_curvature(&self) -> Option<f64> {
        match self.curvature {
            CurvatureModel::Constant(k) => Some(k),
            _ => None,
        }
    }

    pub fn has_analytic_christoffels(&self) -> bool {
        matches!(self.metric, MetricSource::Diagonal { .. })
    }

    /// Metric components at `x` without any range check. Builtin metrics are
    /// analytic expressions, so ghost coordinates just past a polar axis end
    /// evaluate to the smooth continuation.
    pub fn metric_at(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.metric {
            MetricSource::General(g) => g(x),
            MetricSource::Diagonal { diag, .. } => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag(x))),
        }
    }

    /// Wraps periodic axes into `[lo, hi)` and rejects points outside open
    /// or polar ranges.
    pub fn check_domain(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Domain {
                at: x.to_vec(),
                reason: format!("expected {} coordinates", self.dim()),
            });
        }
        let mut out = x.to_vec();
        for (a, axis) in self.axes.iter().enumerate() {
            if !out[a].is_finite() {
                return Err(Error::Domain { at: x.to_vec(), reason: "non-finite coordinate".into() });
            }
            match axis.kind {
                AxisKind::Periodic => out[a] = wrap(out[a], axis.lo, axis.hi),
                _ => {
                    if out[a] < axis.lo || out[a] > axis.hi {
                        return Err(Error::Domain {
                            at: x.to_vec(),
                            reason: format!("axis {a} outside [{}, {}]", axis.lo, axis.hi),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Canonical representative: polar coordinates reflected back into
    /// range, periodic coordinates wrapped into `[lo, hi)`.
    pub fn normalize(&self, y: &mut [f64]) {
        for (a, axis) in self.axes.iter().enumerate() {
            if let AxisKind::Polar { partner } = axis.kind {
                let half = 0.5 * self.axes[partner].length();
                // At most a couple of reflections for any sane value.
                for _ in 0..4 {
                    if y[a] < axis.lo {
                        y[a] = 2.0 * axis.lo - y[a];
                        y[partner] += half;
                    } else if y[a] > axis.hi {
                        y[a] = 2.0 * axis.hi - y[a];
                        y[partner] += half;
                    } else {
                        break;
                    }
                }
            }
        }
        for (a, axis) in self.axes.iter().enumerate() {
            if axis.kind == AxisKind::Periodic {
                y[a] = wrap(y[a], axis.lo, axis.hi);
            }
        }
    }

    /// Chart representative of the point `y` closest to `reference`, used to
    /// difference values across periodic seams and polar reflections.
    pub fn unwrap_near(&self, y: &[f64], reference: &[f64]) -> Vec<f64> {
        let mut best = self.unwrap_periodic(y.to_vec(), reference);
        let mut best_d = chart_dist2(&best, reference);
        for (a, axis) in self.axes.iter().enumerate() {
            if let AxisKind::Polar { partner } = axis.kind {
                let half = 0.5 * self.axes[partner].length();
                for end in [axis.lo, axis.hi] {
                    let mut c = y.to_vec();
                    c[a] = 2.0 * end - c[a];
                    c[partner] += half;
                    let c = self.unwrap_periodic(c, reference);
                    let d = chart_dist2(&c, reference);
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
            }
        }
        best
    }

    fn unwrap_periodic(&self, mut y: Vec<f64>, reference: &[f64]) -> Vec<f64> {
        for (a, axis) in self.axes.iter().enumerate() {
            if axis.kind == AxisKind::Periodic {
                let p = axis.length();
                y[a] -= p * ((y[a] - reference[a]) / p).round();
            }
        }
        y
    }

    /// First derivatives `∂_a g` by central differences.
    pub fn metric_derivatives(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        let h = self.fd_step;
        let mut out = Vec::with_capacity(n);
        let mut xp = x.to_vec();
        for a in 0..n {
            let mut eval = |off: f64| {
                xp[a] = x[a] + off;
                let g = self.metric_at(&xp);
                xp[a] = x[a];
                g
            };
            let d = if self.stencil_order == 2 {
                (eval(h) - eval(-h)) / (2.0 * h)
            } else {
                (eval(-2.0 * h) - eval(2.0 * h) + (eval(h) - eval(-h)) * 8.0) / (12.0 * h)
            };
            out.push(d);
        }
        out
    }

    /// Second derivatives `∂_a ∂_b g`, symmetric in `(a, b)` by construction.
    pub fn metric_second_derivatives(&self, x: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        let n = self.dim();
        let h = self.fd_step;
        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        let mut xp = x.to_vec();
        let g0 = self.metric_at(x);
        let mut eval = |offs: &[(usize, f64)]| {
            for &(a, o) in offs {
                xp[a] += o;
            }
            let g = self.metric_at(&xp);
            xp.copy_from_slice(x);
            g
        };
        let four = self.stencil_order != 2;
        for a in 0..n {
            let d_aa = if four {
                (-eval(&[(a, 2.0 * h)]) + eval(&[(a, h)]) * 16.0 - &g0 * 30.0 + eval(&[(a, -h)]) * 16.0
                    - eval(&[(a, -2.0 * h)]))
                    / (12.0 * h * h)
            } else {
                (eval(&[(a, h)]) - &g0 * 2.0 + eval(&[(a, -h)])) / (h * h)
            };
            out[a][a] = d_aa;
            for b in (a + 1)..n {
                let d_ab = if four {
                    // Tensor product of the 4th-order first-derivative stencil.
                    let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
                    let mut acc = DMatrix::zeros(n, n);
                    for &(oa, wa) in &w {
                        for &(ob, wb) in &w {
                            acc += eval(&[(a, oa * h), (b, ob * h)]) * (wa * wb);
                        }
                    }
                    acc / (144.0 * h * h)
                } else {
                    (eval(&[(a, h), (b, h)]) - eval(&[(a, h), (b, -h)]) - eval(&[(a, -h), (b, h)])
                        + eval(&[(a, -h), (b, -h)]))
                        / (4.0 * h * h)
                };
                out[a][b] = d_ab.clone();
                out[b][a] = d_ab;
            }
        }
        out
    }

    /// Levi-Civita Christoffel symbols at `x` (analytic when the metric is
    /// diagonal with supplied derivatives, finite-differenced otherwise).
    pub fn christoffel_at(&self, x: &[f64]) -> Result<Christoffel> {
        let n = self.dim();
        match &self.metric {
            MetricSource::Diagonal { diag, grad } => {
                let d = diag(x);
                if d.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::DegenerateMetric { at: x.to_vec() });
                }
                let gr = grad(x);
                let mut out = Christoffel::zeros(n);
                for k in 0..n {
                    let inv = 0.5 / d[k];
                    for i in 0..n {
                        if i == k {
                            out.set(k, k, k, gr[k][k] * inv);
                        } else {
                            out.set(k, k, i, gr[k][i] * inv);
                            out.set(k, i, k, gr[k][i] * inv);
                            out.set(k, i, i, -gr[i][k] * inv);
                        }
                    }
                }
                Ok(out)
            }
            MetricSource::General(_) => {
                let g = self.metric_at(x);
                let g_inv = inverse_spd(&g, x)?;
                let dg = self.metric_derivatives(x);
                Ok(Christoffel::from_metric_derivatives(&g_inv, &dg))
            }
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Option<f64> {
        self.distance.as_ref().map(|d| d(a, b))
    }

    pub fn has_distance(&self) -> bool {
        self.distance.is_some()
    }
}

pub fn wrap(v: f64, lo: f64, hi: f64) -> f64 {
    let p = hi - lo;
    let mut r = (v - lo).rem_euclid(p) + lo;
    if r >= hi {
        r -= p;
    }
    r
}

fn chart_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn periodic_delta(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Flat torus `T^m = (R / 2πZ)^m` with metric `scale² δ`.
pub fn flat_torus(m: usize, scale: f64) -> ChartManifold {
    let s2 = scale * scale;
    let axes = vec![Axis::periodic(0.0, 2.0 * PI); m];
    ChartManifold::diagonal(
        format!("flat_torus{m}"),
        axes,
        Arc::new(move |x: &[f64]| vec![s2; x.len()]),
        Arc::new(move |x: &[f64]| vec![vec![0.0; x.len()]; x.len()]),
    )
    .with_curvature_model(CurvatureModel::Constant(0.0))
    .with_distance(Arc::new(move |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| periodic_delta(*x, *y, 2.0 * PI).powi(2)).sum();
        scale * d2.sqrt()
    }))
}

/// Round sphere `S^m` of the given radius in hyperspherical coordinates
/// `(θ_1, .., θ_{m-1}, φ)`, metric `ρ²(dθ_1² + sin²θ_1 dθ_2² + ..)`.
///
/// Only the last colatitude is declared polar (its reflection is a half turn
/// in `φ`); earlier ones are open intervals.
pub fn round_sphere(m: usize, radius: f64) -> ChartManifold {
    assert!(m >= 1);
    let r2 = radius * radius;
    let mut axes = Vec::with_capacity(m);
    for k in 0..m.saturating_sub(1) {
        if k + 2 == m {
            axes.push(Axis::polar(0.0, PI, m - 1));
        } else {
            axes.push(Axis::open(0.0, PI));
        }
    }
    axes.push(Axis::periodic(0.0, 2.0 * PI));
    let diag = move |x: &[f64]| {
        let mut d = Vec::with_capacity(x.len());
        let mut prod = r2;
        for (k, xk) in x.iter().enumerate() {
            d.push(prod);
            if k + 1 < x.len() {
                prod *= xk.sin().powi(2);
            }
        }
        d
    };
    let grad = move |x: &[f64]| {
        let n = x.len();
        let mut g = vec![vec![0.0; n]; n];
        // d_k = r² Π_{j<k} sin²θ_j, so ∂_i d_k = 2 cot θ_i d_k for i < k.
        for (k, row) in g.iter_mut().enumerate() {
            for (i, gi) in row.iter_mut().enumerate().take(k) {
                let (s, c) = x[i].sin_cos();
                let mut others = r2;
                for (j, xj) in x.iter().enumerate().take(k) {
                    if j != i {
                        others *= xj.sin().powi(2);
                    }
                }
                *gi = 2.0 * s * c * others;
            }
        }
        g
    };
    let radius_c = radius;
    ChartManifold::diagonal(format!("round_sphere{m}"), axes, Arc::new(diag), Arc::new(grad))
        .with_curvature_model(CurvatureModel::Constant(1.0 / r2))
        .with_distance(Arc::new(move |a: &[f64], b: &[f64]| {
            let pa = sphere_embed(a);
            let pb = sphere_embed(b);
            let dot: f64 = pa.iter().zip(&pb).map(|(x, y)| x * y).sum();
            radius_c * dot.clamp(-1.0, 1.0).acos()
        }))
}

/// Unit-sphere embedding of hyperspherical coordinates.
pub fn sphere_embed(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut out = Vec::with_capacity(m + 1);
    let mut prod = 1.0;
    for xk in x.iter().take(m - 1) {
        out.push(prod * xk.cos());
        prod *= xk.sin();
    }
    let (s, c) = x[m - 1].sin_cos();
    out.push(prod * c);
    out.push(prod * s);
    out
}

/// `S³ ⊂ C²` in Hopf coordinates `(η, ξ_1, ξ_2)` with
/// `z_1 = e^{iξ_1} cos η`, `z_2 = e^{iξ_2} sin η`; metric
/// `dη² + cos²η dξ_1² + sin²η dξ_2²`.
pub fn sphere3_hopf() -> ChartManifold {
    let axes = vec![Axis::open(0.0, 0.5 * PI), Axis::periodic(0.0, 2.0 * PI), Axis::periodic(0.0, 2.0 * PI)];
    ChartManifold::diagonal(
        "sphere3_hopf",
        axes,
        Arc::new(|x: &[f64]| vec![1.0, x[0].cos().powi(2), x[0].sin().powi(2)]),
        Arc::new(|x: &[f64]| {
            let s2 = (2.0 * x[0]).sin();
            vec![vec![0.0; 3], vec![-s2, 0.0, 0.0], vec![s2, 0.0, 0.0]]
        }),
    )
    .with_curvature_model(CurvatureModel::Constant(1.0))
}

/// `S¹(r) × S²(ρ)` with coordinates `(s, θ, φ)`.
pub fn product_s1_s2(circle_radius: f64, sphere_radius: f64) -> ChartManifold {
    let a2 = circle_radius * circle_radius;
    let r2 = sphere_radius * sphere_radius;
    let axes = vec![Axis::periodic(0.0, 2.0 * PI), Axis::polar(0.0, PI, 2), Axis::periodic(0.0, 2.0 * PI)];
    ChartManifold::diagonal(
        "product_s1_s2",
        axes,
        Arc::new(move |x: &[f64]| vec![a2, r2, r2 * x[1].sin().powi(2)]),
        Arc::new(move |x: &[f64]| {
            let d = r2 * (2.0 * x[1]).sin();
            vec![vec![0.0; 3], vec![0.0; 3], vec![0.0, d, 0.0]]
        }),
    )
    .with_curvature_model(CurvatureModel::Product(vec![
        CurvatureBlock { start: 0, len: 1, curvature: 0.0 },
        CurvatureBlock { start: 1, len: 2, curvature: 1.0 / r2 },
    ]))
}

/// Space form of constant curvature `k` in conformal coordinates,
/// `g = 4 δ / (1 + k|x|²)²`, on the cube `[-a, a]^m` (with `a` inside the
/// ball of definition when `k < 0`). The metric is general, so curvature is
/// finite-differenced unless the constant model is requested.
pub fn space_form(m: usize, k: f64, half_width: f64) -> ChartManifold {
    let axes = vec![Axis::open(-half_width, half_width); m];
    ChartManifold::new(
        format!("space_form{m}"),
        axes,
        Arc::new(move |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let c = 2.0 / (1.0 + k * r2);
            DMatrix::identity(x.len(), x.len()) * (c * c)
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_range() {
        assert_eq!(wrap(2.0 * PI, 0.0, 2.0 * PI), 0.0);
        assert!((wrap(-0.5, 0.0, 2.0 * PI) - (2.0 * PI - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn unwrap_near_prefers_polar_continuation() {
        let s2 = round_sphere(2, 1.0);
        let y = [0.05, 1.0 + PI];
        let r = s2.unwrap_near(&y, &[0.05, 1.0]);
        assert!((r[0] + 0.05).abs() < 1e-15);
        assert!((r[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_reflects_through_pole() {
        let s2 = round_sphere(2, 1.0);
        let mut y = [-0.1, 0.5];
        s2.normalize(&mut y);
        assert!((y[0] - 0.1).abs() < 1e-15);
        assert!((y[1] - (0.5 + PI)).abs() < 1e-12);
    }

    #[test]
    fn analytic_christoffels_match_finite_differences() {
        let s = round_sphere(3, 1.3);
        let x = [0.7, 1.1, 2.0];
        let analytic = s.christoffel_at(&x).unwrap();
        let g = s.metric_at(&x);
        let g_inv = inverse_spd(&g, &x).unwrap();
        let fd = Christoffel::from_metric_derivatives(&g_inv, &s.metric_derivatives(&x));
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((analytic.get(k, i, j) - fd.get(k, i, j)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn hopf_metric_is_periodic_in_fibre_angles() {
        let s3 = sphere3_hopf();
        let a = s3.metric_at(&[0.4, 0.3, 0.2]);
        let b = s3.metric_at(&[0.4, 0.3 + 2.0 * PI, 0.2 - 2.0 * PI]);
        assert_eq!(a, b);
    }

    #[test]
    fn sphere_distance_is_great_circle() {
        let s2 = round_sphere(2, 2.0);
        let d = s2.distance(&[0.5 * PI, 0.0], &[0.5 * PI, 0.5 * PI]).unwrap();
        assert!((d - PI).abs() < 1e-12);
    }
}
