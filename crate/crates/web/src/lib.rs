//! Browser bindings. Each export returns a JSON string; the plain functions
//! underneath are what the native tests call.

use areaflow::flow::{reduce_circle_drift, EquivariantS2, FlowParams};
use areaflow::frames::{area_decreasing_status, singular_values, DifferentialSample};
use areaflow::geometry::{Warp, WarpedSurface};
use areaflow::verify::compute_bound_constants;
use nalgebra::DMatrix;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest number of samples sent back per series.
const MAX_POINTS: usize = 400;

fn thin<T: Clone>(v: &[T], keep: usize) -> Vec<T> {
    if v.len() <= keep {
        return v.to_vec();
    }
    let stride = v.len().div_ceil(keep);
    let mut out: Vec<T> = v.iter().step_by(stride).cloned().collect();
    if (v.len() - 1) % stride != 0 {
        out.push(v[v.len() - 1].clone());
    }
    out
}

/// Singular values and `p` of an `m × 2` Jacobian (row-major, `m = len / 2`)
/// between Euclidean metrics.
pub fn jacobian_report(entries: &[f64]) -> Result<Value, String> {
    if entries.is_empty() || entries.len() % 2 != 0 {
        return Err("expected 2 entries per row".into());
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err("entries must be finite".into());
    }
    let m = entries.len() / 2;
    let jac = DMatrix::from_row_slice(m, 2, entries);
    let sample = DifferentialSample::new(jac, DMatrix::identity(m, m), DMatrix::identity(2, 2));
    let (lambda, mu) = singular_values(&sample).map_err(|e| e.to_string())?;
    let status = area_decreasing_status(lambda, mu);
    Ok(json!({
        "rows": m,
        "lambda": lambda,
        "mu": mu,
        "p": status.p,
        "dil2": status.dil2,
        "area_decreasing": status.strictly_decreasing,
    }))
}

/// Runs the rotationally equivariant flow `S² → S²(ρ)` from `h = a sin θ`.
pub fn sphere_flow_report(amplitude: f64, rho: f64, nodes: usize, t_end: f64, profiles: usize) -> Result<Value, String> {
    if !(t_end > 0.0 && t_end <= 200.0) {
        return Err("t_end must lie in (0, 200]".into());
    }
    if !(8..=256).contains(&nodes) {
        return Err("nodes must lie in [8, 256]".into());
    }
    let mut eq = EquivariantS2::new(nodes, rho, |t| amplitude * t.sin()).map_err(|e| e.to_string())?;
    let rho0 = eq.min_p();
    // Unit sphere domain: min Ric = 1; target curvature 1/ρ². Θ only enters
    // the |H|² bound, which is not plotted.
    let bounds = compute_bound_constants(rho0, 0.0, 1.0, 1.0 / (rho * rho)).map_err(|e| e.to_string())?;
    let params = FlowParams { t_end, ..FlowParams::default() };
    let theta: Vec<f64> = (0..nodes).map(|j| eq.theta(j)).collect();

    let (mut t, mut min_p, mut bound_p, mut diameter) = (vec![0.0], vec![rho0], vec![bounds.bound_p(0.0)], vec![eq.image_diameter()]);
    let snap_every = t_end / profiles.max(1) as f64;
    let mut snaps = vec![json!({ "t": 0.0, "h": eq.h.clone() })];
    let mut error = None;
    while eq.t < t_end {
        if let Err(e) = eq.step(&params) {
            error = Some(e.to_string());
            break;
        }
        t.push(eq.t);
        min_p.push(eq.min_p());
        bound_p.push(bounds.bound_p(eq.t));
        diameter.push(eq.image_diameter());
        if eq.t >= snaps.len() as f64 * snap_every - 1e-12 || eq.t >= t_end {
            snaps.push(json!({ "t": eq.t, "h": eq.h.clone() }));
        }
    }
    let bound_ok = min_p.iter().zip(&bound_p).all(|(p, b)| *p >= b - 1e-6);
    Ok(json!({
        "steps": eq.steps,
        "status": format!("{:?}", eq.status),
        "error": error,
        "rho0": rho0,
        "bound_holds": bound_ok,
        "theta": theta,
        "profiles": snaps,
        "t": thin(&t, MAX_POINTS),
        "min_p": thin(&min_p, MAX_POINTS),
        "bound_p": thin(&bound_p, MAX_POINTS),
        "diameter": thin(&diameter, MAX_POINTS),
    }))
}

/// Height `z(t)` of a circle `s ↦ (s, z)` moving in a warped cylinder.
pub fn circle_drift_report(warp: &str, z0: f64, t_end: f64) -> Result<Value, String> {
    let (w, lo, hi) = match warp {
        "cosh" => (Warp::Cosh, -3.0, 3.0),
        "exp_neg" => (Warp::ExpNeg, -2.0, 12.0),
        _ => return Err(format!("unknown warp {warp:?}")),
    };
    if !(z0 > lo && z0 < hi) {
        return Err(format!("z0 must lie in ({lo}, {hi})"));
    }
    if !(t_end > 0.0 && t_end <= 200.0) {
        return Err("t_end must lie in (0, 200]".into());
    }
    let surface = WarpedSurface::new(w, lo, hi).map_err(|e| e.to_string())?;
    let drift = reduce_circle_drift(1.0, surface).map_err(|e| e.to_string())?;
    let tr = drift.integrate(z0, t_end, 0.01).map_err(|e| e.to_string())?;
    let volume: Vec<f64> = tr.z.iter().map(|&z| drift.volume(z)).collect();
    Ok(json!({
        "t": thin(&tr.t, MAX_POINTS),
        "z": thin(&tr.z, MAX_POINTS),
        "rate": thin(&tr.rate, MAX_POINTS),
        "volume": thin(&volume, MAX_POINTS),
        "final_z": tr.final_z(),
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn jacobian(entries: &[f64]) -> Result<String, JsValue> {
    to_js(jacobian_report(entries))
}

#[wasm_bindgen]
pub fn sphere_flow(amplitude: f64, rho: f64, nodes: usize, t_end: f64, profiles: usize) -> Result<String, JsValue> {
    to_js(sphere_flow_report(amplitude, rho, nodes, t_end, profiles))
}

#[wasm_bindgen]
pub fn circle_drift(warp: &str, z0: f64, t_end: f64) -> Result<String, JsValue> {
    to_js(circle_drift_report(warp, z0, t_end))
}
