//! m-convex barrier functions on `M × N`, sublevel containment along a run,
//! and image diameters.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AxisKind, ChartManifold};
use crate::linalg::{extend_orthonormal, generalized_eigen};

/// Barrier functions of the `N` factor, `φ = ψ ∘ π_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierKind {
    /// `dist_N(y, point)²`.
    SquaredDistanceToPoint { point: [f64; 2] },
    /// `(y_axis − value)²`, the squared distance to the closed geodesic
    /// `{y_axis = value}` of a warped cylinder when `axis` is the height.
    SquaredDistanceToWaistGeodesic {
        #[serde(default = "default_height_axis")]
        axis: usize,
        #[serde(default)]
        value: f64,
    },
    /// `sign · y_axis`.
    CoordinateHeight { axis: usize, sign: f64 },
    /// `Σ c · y₀^i · y₁^j` over `[c, i, j]` terms.
    CustomPolynomialInChart { terms: Vec<[f64; 3]> },
}

fn default_height_axis() -> usize {
    1
}

/// Chart step for finite-difference derivatives of non-polynomial barriers.
const FD_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierFunction {
    #[serde(rename = "function")]
    pub kind: BarrierKind,
    pub level: f64,
}

impl BarrierFunction {
    pub fn new(kind: BarrierKind, level: f64) -> Self {
        Self { kind, level }
    }

    pub fn value(&self, n: &ChartManifold, y: &[f64]) -> Result<f64> {
        Ok(match &self.kind {
            BarrierKind::SquaredDistanceToPoint { point } => {
                let d = n
                    .distance(y, point)
                    .ok_or_else(|| Error::Configuration(format!("{} has no distance function", n.name())))?;
                d * d
            }
            BarrierKind::SquaredDistanceToWaistGeodesic { axis, value } => (y[*axis] - value).powi(2),
            BarrierKind::CoordinateHeight { axis, sign } => sign * y[*axis],
            BarrierKind::CustomPolynomialInChart { terms } => {
                terms.iter().map(|t| t[0] * y[0].powi(t[1] as i32) * y[1].powi(t[2] as i32)).sum()
            }
        })
    }

    /// Chart gradient and Hessian of `ψ` on `N`.
    pub fn chart_derivatives(&self, n: &ChartManifold, y: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut g = DVector::zeros(2);
        let mut h = DMatrix::zeros(2, 2);
        match &self.kind {
            BarrierKind::SquaredDistanceToWaistGeodesic { axis, value } => {
                g[*axis] = 2.0 * (y[*axis] - value);
                h[(*axis, *axis)] = 2.0;
            }
            BarrierKind::CoordinateHeight { axis, sign } => g[*axis] = *sign,
            BarrierKind::CustomPolynomialInChart { terms } => {
                for t in terms {
                    let (c, i, j) = (t[0], t[1] as i32, t[2] as i32);
                    let pw = |v: f64, k: i32| if k < 0 { 0.0 } else { v.powi(k) };
                    let fi = i as f64;
                    let fj = j as f64;
                    g[0] += c * fi * pw(y[0], i - 1) * pw(y[1], j);
                    g[1] += c * fj * pw(y[0], i) * pw(y[1], j - 1);
                    h[(0, 0)] += c * fi * (fi - 1.0) * pw(y[0], i - 2) * pw(y[1], j);
                    h[(1, 1)] += c * fj * (fj - 1.0) * pw(y[0], i) * pw(y[1], j - 2);
                    let mixed = c * fi * fj * pw(y[0], i - 1) * pw(y[1], j - 1);
                    h[(0, 1)] += mixed;
                    h[(1, 0)] += mixed;
                }
            }
            BarrierKind::SquaredDistanceToPoint { .. } => {
                let e = FD_STEP;
                let at = |dy0: f64, dy1: f64| self.value(n, &[y[0] + dy0, y[1] + dy1]);
                let c = at(0.0, 0.0)?;
                for a in 0..2 {
                    let s = |k: f64| if a == 0 { (k * e, 0.0) } else { (0.0, k * e) };
                    let (p0, p1) = s(1.0);
                    let (q0, q1) = s(-1.0);
                    let (fp, fm) = (at(p0, p1)?, at(q0, q1)?);
                    g[a] = (fp - fm) / (2.0 * e);
                    h[(a, a)] = (fp - 2.0 * c + fm) / (e * e);
                }
                let mixed = (at(e, e)? - at(e, -e)? - at(-e, e)? + at(-e, -e)?) / (4.0 * e * e);
                h[(0, 1)] = mixed;
                h[(1, 0)] = mixed;
            }
        }
        Ok((g, h))
    }

    /// `D²φ = ∂²φ − Γ^k ∂_kφ` for the Levi-Civita connection of `g_{M×N}`,
    /// together with the product metric, at `(x, y)`.
    pub fn product_hessian(&self, m: &ChartManifold, n: &ChartManifold, x: &[f64], y: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let dm = m.dim();
        let (g, h) = self.chart_derivatives(n, y)?;
        let gamma = n.christoffel_at(y)?;
        let mut hess = DMatrix::zeros(dm + 2, dm + 2);
        for a in 0..2 {
            for b in 0..2 {
                let mut v = h[(a, b)];
                for k in 0..2 {
                    v -= gamma.get(k, a, b) * g[k];
                }
                hess[(dm + a, dm + b)] = v;
            }
        }
        let mut gp = DMatrix::zeros(dm + 2, dm + 2);
        gp.view_mut((0, 0), (dm, dm)).copy_from(&m.metric_at(x));
        gp.view_mut((dm, dm), (2, 2)).copy_from(&n.metric_at(y));
        Ok((hess, gp))
    }
}

/// Sum of the `m` smallest eigenvalues of `hess` relative to `metric`: the
/// minimum of `Σ_k D²φ(e_k, e_k)` over orthonormal `m`-frames.
pub fn m_convexity_value(hess: &DMatrix<f64>, metric: &DMatrix<f64>, m: usize) -> Result<f64> {
    let (vals, _) = generalized_eigen(hess, metric, &[])?;
    if m == 0 || m > vals.len() {
        return Err(Error::Precondition(format!("m = {m} outside 1..={}", vals.len())));
    }
    Ok(vals[..m].iter().sum())
}

pub fn m_convexity_at(
    phi: &BarrierFunction,
    m_man: &ChartManifold,
    n_man: &ChartManifold,
    x: &[f64],
    y: &[f64],
    m: usize,
) -> Result<f64> {
    let (h, g) = phi.product_hessian(m_man, n_man, x, y)?;
    m_convexity_value(&h, &g, m)
}

/// Smallest trace of `hess` over `frames` random `metric`-orthonormal `m`-frames.
pub fn brute_force_m_convexity(
    hess: &DMatrix<f64>,
    metric: &DMatrix<f64>,
    m: usize,
    frames: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let n = hess.nrows();
    let mut best = f64::INFINITY;
    for _ in 0..frames {
        let mut basis = Vec::with_capacity(m);
        while basis.len() < m {
            let cands: Vec<DVector<f64>> =
                (0..m).map(|_| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))).collect();
            extend_orthonormal(metric, &mut basis, cands, m);
        }
        let trace: f64 = basis.iter().map(|e| (e.transpose() * hess * e)[(0, 0)]).sum();
        best = best.min(trace);
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub verdict: bool,
    pub worst_point: Vec<f64>,
    pub worst_value: f64,
    pub samples: usize,
    pub note: String,
}

/// Audits m-convexity of `φ` on the sublevel `{φ < c}` at the given graph
/// points plus random points of `M × N` inside the sublevel.
pub fn certify_m_convexity(
    phi: &BarrierFunction,
    m_man: &ChartManifold,
    n_man: &ChartManifold,
    points: &[(Vec<f64>, [f64; 2])],
    random_points: usize,
    seed: u64,
) -> Result<ConvexityCertificate> {
    let m = m_man.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<(Vec<f64>, [f64; 2])> = points.iter().filter(|(_, y)| phi.value(n_man, y).map_or(false, |v| v < phi.level)).cloned().collect();
    let mut tries = 0;
    let mut added = 0;
    while added < random_points && tries < 100 * random_points.max(1) {
        tries += 1;
        let x = random_chart_point(m_man, &mut rng);
        let yv = random_chart_point(n_man, &mut rng);
        let y = [yv[0], yv[1]];
        if phi.value(n_man, &y)? < phi.level {
            all.push((x, y));
            added += 1;
        }
    }
    if all.is_empty() {
        return Err(Error::Precondition("no sample points inside the sublevel set".into()));
    }
    let mut worst_value = f64::INFINITY;
    let mut worst_point = Vec::new();
    for (x, y) in &all {
        let v = m_convexity_at(phi, m_man, n_man, x, y, m)?;
        if v < worst_value {
            worst_value = v;
            worst_point = x.iter().copied().chain(y.iter().copied()).collect();
        }
    }
    Ok(ConvexityCertificate {
        verdict: worst_value >= -1e-10,
        worst_point,
        worst_value,
        samples: all.len(),
        note: "sampled audit of the sublevel set, not a proof".into(),
    })
}

fn random_chart_point(man: &ChartManifold, rng: &mut ChaCha8Rng) -> Vec<f64> {
    man.axes()
        .iter()
        .map(|a| {
            let u: f64 = rng.random();
            match a.kind {
                AxisKind::Periodic => a.lo + u * (a.hi - a.lo),
                _ => {
                    let pad = 1e-3 * (a.hi - a.lo);
                    a.lo + pad + u * (a.hi - a.lo - 2.0 * pad)
                }
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub level: f64,
    /// `(t, c − max φ)` per checkpoint.
    pub margins: Vec<(f64, f64)>,
    pub worst_margin: f64,
    /// First checkpoint with `max φ ≥ c`.
    pub escaped_at: Option<f64>,
    pub contained: bool,
    /// The sublevel is open; containment is tested with margins, not strictly.
    pub note: String,
}

/// `series` holds `(t, max_x φ(F_t(x)))` per checkpoint.
pub fn containment_monitor(series: &[(f64, f64)], level: f64) -> Result<ContainmentReport> {
    let Some(&(_, first)) = series.first() else {
        return Err(Error::Precondition("empty run".into()));
    };
    if !(first < level) {
        return Err(Error::Precondition(format!("initial datum outside the sublevel: max phi = {first} >= {level}")));
    }
    let margins: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, level - v)).collect();
    let worst_margin = margins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let escaped_at = margins.iter().find(|m| !(m.1 > 0.0)).map(|m| m.0);
    Ok(ContainmentReport {
        level,
        margins,
        worst_margin,
        escaped_at,
        contained: escaped_at.is_none(),
        note: "strict sublevel {phi < c}; margins reported per checkpoint".into(),
    })
}

/// Largest pairwise `N` distance between image points.
pub fn image_diameter(n: &ChartManifold, points: &[[f64; 2]]) -> Result<f64> {
    if !n.has_distance() {
        return Err(Error::Configuration(format!("{} has no distance function", n.name())));
    }
    let mut d: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            d = d.max(n.distance(&points[i], &points[j]).unwrap_or(0.0));
        }
    }
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiameterReport {
    pub t: Vec<f64>,
    pub diameter: Vec<f64>,
    /// Least-squares slope of `ln diam` over the final half of the run.
    pub log_slope: Option<f64>,
    /// `−ε₀/2 + tol`, present when `ε₀ > 0`.
    pub required_slope: Option<f64>,
    pub pass: Option<bool>,
}

pub fn diameter_series(t: &[f64], diameter: &[f64], eps0: f64, tol: f64) -> DiameterReport {
    let t_end = t.last().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(diameter)
        .filter(|(ti, d)| **ti >= 0.5 * t_end && **d > 0.0)
        .map(|(ti, d)| (*ti, d.ln()))
        .collect();
    let log_slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        sxy / sxx
    });
    let required_slope = (eps0 > 0.0).then(|| -0.5 * eps0 + tol);
    let pass = match (log_slope, required_slope) {
        (Some(s), Some(r)) => Some(s <= r),
        _ => None,
    };
    DiameterReport { t: t.to_vec(), diameter: diameter.to_vec(), log_slope, required_slope, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::flat_torus;
    use crate::geometry::{Warp, WarpedSurface};

    #[test]
    fn sum_of_smallest_eigenvalues() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        let g = DMatrix::identity(3, 3);
        assert_eq!(m_convexity_value(&h, &g, 2).unwrap(), 0.0);
        assert_eq!(m_convexity_value(&h, &g, 1).unwrap(), -1.0);
        assert_eq!(m_convexity_value(&h, &g, 3).unwrap(), 1.0);
    }

    #[test]
    fn half_squared_norm_is_m_convex() {
        let phi = BarrierFunction::new(
            BarrierKind::CustomPolynomialInChart { terms: vec![[0.5, 2.0, 0.0], [0.5, 0.0, 2.0]] },
            10.0,
        );
        let t = flat_torus(2, 1.0);
        let (h, g) = phi.product_hessian(&t, &t, &[0.1, 0.2], &[1.0, 2.0]).unwrap();
        // Only the N block is non-zero for a function of y.
        assert_eq!(m_convexity_value(&h, &g, 2).unwrap(), 0.0);
        assert_eq!(m_convexity_value(&h, &g, 4).unwrap(), 2.0);
    }

    #[test]
    fn waist_tube_is_three_convex_and_brute_force_agrees() {
        let n = WarpedSurface::new(Warp::Cosh, -3.0, 3.0).unwrap().to_manifold();
        let m = crate::geometry::manifold::product_s1_s2(1.0, 1.0);
        let phi = BarrierFunction::new(BarrierKind::SquaredDistanceToWaistGeodesic { axis: 1, value: 0.0 }, 1.0);
        let (h, g) = phi.product_hessian(&m, &n, &[0.3, 1.0, 2.0], &[0.5, 0.7]).unwrap();
        let exact = m_convexity_value(&h, &g, 3).unwrap();
        assert!(exact.abs() < 1e-12);
        let (vals, _) = generalized_eigen(&h, &g, &[]).unwrap();
        assert!((vals[3] - 2.0 * 0.7 * 0.7f64.tanh()).abs() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(brute_force_m_convexity(&h, &g, 3, 1000, &mut rng) >= exact - 1e-10);
    }

    #[test]
    fn containment_and_escape() {
        let r = containment_monitor(&[(0.0, 0.25), (1.0, 0.1)], 1.0).unwrap();
        assert!(r.contained);
        let r = containment_monitor(&[(0.0, 0.25), (1.0, 2.0)], 1.0).unwrap();
        assert_eq!(r.escaped_at, Some(1.0));
        assert!(containment_monitor(&[(0.0, 2.0)], 1.0).is_err());
    }

    #[test]
    fn diameter_slope_fit() {
        let t: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let d: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let r = diameter_series(&t, &d, 0.25, 0.05);
        assert!((r.log_slope.unwrap() + 2.0).abs() < 1e-10);
        assert_eq!(r.pass, Some(true));
    }
}
