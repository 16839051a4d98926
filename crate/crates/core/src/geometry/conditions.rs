//! Bi-Ricci / Ricci conditions relating the curvature of `M` to `sup σ_N`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::curvature::{curvature_package_unchecked, CurvatureTensors};
use super::manifold::{AxisKind, ChartManifold, CurvatureModel};
use crate::error::{Error, Result};
use crate::linalg::extend_orthonormal;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub points: usize,
    pub frames_per_point: usize,
    pub descent_steps: usize,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self { points: 64, frames_per_point: 64, descent_steps: 20, seed: 7 }
    }
}

/// Conditions rewritten for constant sectional curvatures `σ_M`, `σ_N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantCurvatureCheck {
    pub sigma_m: f64,
    pub sigma_n: f64,
    /// `(2m-3) σ_M ≥ σ_N`
    pub bric: bool,
    /// `σ_M ≥ 0`
    pub ric_nonnegative: bool,
    /// `(m-1) σ_M ≥ σ_N`
    pub ric: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceInequalityCheck {
    /// Smallest `(m-3)Ric(v,v) + Scal - (m-1) sup σ_N` over samples.
    pub worst_ricci_scalar_margin: f64,
    /// Smallest `Scal - m(m-1)/(2m-3) sup σ_N` over samples.
    pub worst_scalar_margin: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub m_name: String,
    pub n_name: String,
    pub dim_m: usize,
    pub min_ric: f64,
    pub min_bric: f64,
    pub sup_sigma_n: f64,
    pub cond_a: bool,
    pub cond_b: bool,
    pub cond_c: bool,
    pub min_ric_exact: bool,
    pub min_bric_exact: bool,
    pub sup_sigma_n_exact: bool,
    pub constant_curvature: Option<ConstantCurvatureCheck>,
    /// Present when condition (A) holds; checked at every sampled point.
    pub trace_inequalities: Option<TraceInequalityCheck>,
    pub sampling: SamplingParams,
}

/// Uniform samples of the chart, kept a little away from the ends of
/// non-periodic axes.
pub fn sample_points(manifold: &ChartManifold, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            manifold
                .axes()
                .iter()
                .map(|a| {
                    let u: f64 = rng.random();
                    match a.kind {
                        AxisKind::Periodic => a.lo + u * a.length(),
                        _ => a.lo + a.length() * (0.02 + 0.96 * u),
                    }
                })
                .collect()
        })
        .collect()
}

fn random_frame(c: &CurvatureTensors, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let n = c.dim;
    loop {
        let cands: Vec<DVector<f64>> = (0..2)
            .map(|_| DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let mut basis = Vec::new();
        extend_orthonormal(&c.metric, &mut basis, cands, 2);
        if basis.len() == 2 {
            let w = basis.pop().unwrap();
            let v = basis.pop().unwrap();
            return (v, w);
        }
    }
}

fn bric_value(c: &CurvatureTensors, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    c.ricci_form(v, v) + c.ricci_form(w, w) - c.riemann_form(v, w, w, v)
}

/// Monte-Carlo plus random local descent estimate of `min BRic` at one point.
/// A lower-bound estimate, not a certificate.
pub fn sampled_min_bric(c: &CurvatureTensors, frames: usize, descent_steps: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut best = f64::INFINITY;
    let mut best_frame = None;
    for _ in 0..frames.max(1) {
        let (v, w) = random_frame(c, rng);
        let b = bric_value(c, &v, &w);
        if b < best {
            best = b;
            best_frame = Some((v, w));
        }
    }
    let (mut v, mut w) = best_frame.expect("at least one frame");
    let mut step = 0.3;
    for _ in 0..descent_steps {
        let n = c.dim;
        let dv = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * step);
        let dw = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * step);
        let mut basis = Vec::new();
        extend_orthonormal(&c.metric, &mut basis, [&v + dv, &w + dw], 2);
        if basis.len() == 2 {
            let b = bric_value(c, &basis[0], &basis[1]);
            if b < best {
                best = b;
                w = basis.pop().unwrap();
                v = basis.pop().unwrap();
                continue;
            }
        }
        step *= 0.5;
    }
    best
}

/// Exact `(min Ric, min BRic)` when the curvature model allows it.
fn exact_minima(m: &ChartManifold) -> Option<(f64, Option<f64>)> {
    let dim = m.dim();
    match m.curvature_model() {
        CurvatureModel::Constant(k) => {
            let ric = (dim as f64 - 1.0) * k;
            let bric = (dim >= 2).then(|| (2.0 * dim as f64 - 3.0) * k);
            Some((ric, bric))
        }
        CurvatureModel::Product(blocks) => {
            let r: Vec<f64> = blocks.iter().map(|b| (b.len as f64 - 1.0) * b.curvature).collect();
            let ric = r.iter().copied().fold(f64::INFINITY, f64::min);
            let mut bric = f64::INFINITY;
            for (i, b) in blocks.iter().enumerate() {
                if b.len >= 2 {
                    bric = bric.min(2.0 * r[i] - b.curvature);
                }
                for j in (i + 1)..blocks.len() {
                    bric = bric.min(r[i] + r[j]);
                }
            }
            Some((ric, bric.is_finite().then_some(bric)))
        }
        _ => None,
    }
}

/// Gauss curvature of a surface at a point.
pub fn surface_curvature(n: &ChartManifold, y: &[f64]) -> Result<f64> {
    let c = curvature_package_unchecked(n, y)?;
    c.sectional(&crate::linalg::unit(2, 0), &crate::linalg::unit(2, 1))
}

/// `sup σ_N` and whether it is exact.
pub fn sup_sigma(n: &ChartManifold, points: usize, rng: &mut ChaCha8Rng) -> Result<(f64, bool)> {
    if n.dim() != 2 {
        return Err(Error::Configuration(format!("target `{}` must be a surface", n.name())));
    }
    if let Some(k) = n.constant_curvature() {
        return Ok((k, true));
    }
    let mut sup = f64::NEG_INFINITY;
    let mut pts = sample_points(n, points, rng);
    // Include the ends of open ranges, where warped curvature tends to peak.
    for (a, axis) in n.axes().iter().enumerate() {
        if axis.kind == AxisKind::Open {
            for end in [axis.lo, axis.hi] {
                let mut p: Vec<f64> = n.axes().iter().map(|ax| 0.5 * (ax.lo + ax.hi)).collect();
                p[a] = end;
                pts.push(p);
            }
        }
    }
    for y in &pts {
        sup = sup.max(surface_curvature(n, y)?);
    }
    Ok((sup, false))
}

pub fn curvature_conditions_report(m: &ChartManifold, n: &ChartManifold, params: &SamplingParams) -> Result<CurvatureReport> {
    if params.points == 0 || params.frames_per_point == 0 {
        return Err(Error::Configuration("curvature sampling needs at least one point and one frame".into()));
    }
    let dim = m.dim();
    if dim < 2 {
        return Err(Error::Configuration("domain dimension must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (sup_sigma_n, sup_exact) = sup_sigma(n, params.points, &mut rng)?;

    let points = sample_points(m, params.points, &mut rng);
    let tensors: Vec<CurvatureTensors> =
        points.iter().map(|x| curvature_package_unchecked(m, x)).collect::<Result<_>>()?;

    let exact = exact_minima(m);
    let (min_ric, min_ric_exact) = match exact {
        Some((r, _)) => (r, true),
        None => {
            let r = tensors
                .iter()
                .map(|c| c.ricci_eigenvalues()[0])
                .fold(f64::INFINITY, f64::min);
            (r, false)
        }
    };
    let (min_bric, min_bric_exact) = match exact.and_then(|(_, b)| b) {
        Some(b) => (b, true),
        None => {
            let b = tensors
                .iter()
                .map(|c| sampled_min_bric(c, params.frames_per_point, params.descent_steps, &mut rng))
                .fold(f64::INFINITY, f64::min);
            (b, false)
        }
    };

    let cond_a = min_bric >= sup_sigma_n;
    let cond_b = min_ric >= 0.0;
    let cond_c = min_ric >= sup_sigma_n;

    let constant_curvature = match (m.constant_curvature(), n.constant_curvature()) {
        (Some(sm), Some(sn)) => Some(constant_curvature_check(dim, sm, sn)),
        _ => None,
    };

    let trace_inequalities = cond_a.then(|| {
        let mf = dim as f64;
        let mut worst_rs = f64::INFINITY;
        let mut worst_s = f64::INFINITY;
        for c in &tensors {
            let eig = c.ricci_eigenvalues();
            let ric_extreme = if dim >= 3 { eig[0] } else { eig[eig.len() - 1] };
            worst_rs = worst_rs.min((mf - 3.0) * ric_extreme + c.scalar - (mf - 1.0) * sup_sigma_n);
            worst_s = worst_s.min(c.scalar - mf * (mf - 1.0) / (2.0 * mf - 3.0) * sup_sigma_n);
        }
        let tol = 1e-8;
        TraceInequalityCheck {
            worst_ricci_scalar_margin: worst_rs,
            worst_scalar_margin: worst_s,
            holds: worst_rs >= -tol && worst_s >= -tol,
        }
    });

    Ok(CurvatureReport {
        m_name: m.name().to_string(),
        n_name: n.name().to_string(),
        dim_m: dim,
        min_ric,
        min_bric,
        sup_sigma_n,
        cond_a,
        cond_b,
        cond_c,
        min_ric_exact,
        min_bric_exact,
        sup_sigma_n_exact: sup_exact,
        constant_curvature,
        trace_inequalities,
        sampling: *params,
    })
}

pub fn constant_curvature_check(m: usize, sigma_m: f64, sigma_n: f64) -> ConstantCurvatureCheck {
    let mf = m as f64;
    ConstantCurvatureCheck {
        sigma_m,
        sigma_n,
        bric: (2.0 * mf - 3.0) * sigma_m >= sigma_n,
        ric_nonnegative: sigma_m >= 0.0,
        ric: (mf - 1.0) * sigma_m >= sigma_n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::{flat_torus, product_s1_s2, round_sphere};
    use crate::geometry::warped::{Warp, WarpedSurface};

    #[test]
    fn sphere_over_sphere() {
        let r = curvature_conditions_report(&round_sphere(3, 1.0), &round_sphere(2, 1.0), &SamplingParams::default())
            .unwrap();
        assert_eq!(r.min_bric, 3.0);
        assert_eq!(r.min_ric, 2.0);
        assert!(r.cond_a && r.cond_b && r.cond_c);
        assert!(r.trace_inequalities.unwrap().holds);
    }

    #[test]
    fn product_over_hyperbolic_cylinder() {
        let n = WarpedSurface::new(Warp::Cosh, -2.0, 2.0).unwrap().to_manifold();
        let r = curvature_conditions_report(&product_s1_s2(1.0, 1.0), &n, &SamplingParams::default()).unwrap();
        assert_eq!(r.min_bric, 1.0);
        assert_eq!(r.min_ric, 0.0);
        assert!((r.sup_sigma_n + 1.0).abs() < 1e-12);
        assert!(r.cond_a && r.cond_b && r.cond_c);
    }

    #[test]
    fn flat_equality_case() {
        let r = curvature_conditions_report(&flat_torus(3, 1.0), &flat_torus(2, 0.5), &SamplingParams::default())
            .unwrap();
        assert_eq!((r.min_bric, r.min_ric, r.sup_sigma_n), (0.0, 0.0, 0.0));
        assert!(r.cond_a && r.cond_b && r.cond_c);
    }

    #[test]
    fn empty_sampling_rejected() {
        let p = SamplingParams { points: 0, ..Default::default() };
        assert!(curvature_conditions_report(&flat_torus(2, 1.0), &flat_torus(2, 1.0), &p).is_err());
    }
}
