//! Observable classification of flow limits: constant maps, maps onto a
//! closed geodesic, and rank-two maps onto a flat surface.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::map_nodes;
use crate::geometry::conditions::surface_curvature;
use crate::grid::GraphMapField;
use crate::immersion::point_geometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    Constant,
    Rank1Geodesic,
    Rank2Flat,
    NotMinimal,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyTolerances {
    pub h_tol: f64,
    pub sv_tol: f64,
    pub sv_var_tol: f64,
    pub a_tol: f64,
    /// Bound on `|σ_N|` along the image for the flat case.
    pub flat_tol: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        Self { h_tol: 1e-6, sv_tol: 1e-4, sv_var_tol: 1e-3, a_tol: 1e-4, flat_tol: 1e-6 }
    }
}

/// Pointwise data of a final state, reduced over nodes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitEvidence {
    pub max_h: f64,
    pub max_a: f64,
    /// Largest number of singular values above `sv_tol` at any node.
    pub rank: usize,
    pub lambda_mean: f64,
    pub mu_mean: f64,
    pub lambda_std: f64,
    pub mu_std: f64,
    /// `max |σ_N|` over the image.
    pub max_abs_sigma_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub class: LimitClass,
    pub evidence: LimitEvidence,
    pub converged: bool,
    /// Rank one or two limit although `Ric_M > 0`; such limits cannot be
    /// strictly area decreasing minimal maps.
    pub contradiction: bool,
    pub tolerances: ClassifyTolerances,
    /// Topological claims (torus / Klein bottle, submersion structure) are
    /// not observable on a chart grid.
    pub untested: Vec<String>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn limit_evidence(field: &GraphMapField, sv_tol: f64) -> Result<LimitEvidence> {
    let rows = map_nodes(field.node_count(), |node| -> Result<(f64, f64, f64, f64, f64)> {
        let pg = point_geometry(field, node)?;
        let sigma = surface_curvature(&field.n, &pg.y)?;
        Ok((pg.lambda(), pg.mu(), pg.h2.sqrt(), pg.a2.sqrt(), sigma))
    });
    let mut lam = Vec::with_capacity(rows.len());
    let mut mu = Vec::with_capacity(rows.len());
    let mut ev = LimitEvidence::default();
    for r in rows {
        let (l, m, h, a, s) = r?;
        lam.push(l);
        mu.push(m);
        ev.max_h = ev.max_h.max(h);
        ev.max_a = ev.max_a.max(a);
        ev.max_abs_sigma_n = ev.max_abs_sigma_n.max(s.abs());
        ev.rank = ev.rank.max((l > sv_tol) as usize + (m > sv_tol) as usize);
    }
    (ev.lambda_mean, ev.lambda_std) = mean_std(&lam);
    (ev.mu_mean, ev.mu_std) = mean_std(&mu);
    Ok(ev)
}

/// Assigns one class per the trichotomy for minimal strictly area
/// decreasing maps; `ric_positive` flags scenarios where only constant
/// limits are possible.
pub fn classify_evidence(ev: LimitEvidence, converged: bool, ric_positive: bool, tol: ClassifyTolerances) -> LimitReport {
    let geodesic = ev.max_a < tol.a_tol;
    let constant_sv = ev.lambda_std < tol.sv_var_tol && ev.mu_std < tol.sv_var_tol;
    let class = if !converged || !(ev.max_h < tol.h_tol) {
        LimitClass::NotMinimal
    } else {
        match ev.rank {
            0 if geodesic => LimitClass::Constant,
            1 if geodesic && constant_sv => LimitClass::Rank1Geodesic,
            2 if geodesic && constant_sv && ev.max_abs_sigma_n < tol.flat_tol => LimitClass::Rank2Flat,
            _ => LimitClass::Inconclusive,
        }
    };
    LimitReport {
        class,
        contradiction: ric_positive && matches!(class, LimitClass::Rank1Geodesic | LimitClass::Rank2Flat),
        evidence: ev,
        converged,
        tolerances: tol,
        untested: vec![
            "closedness of the image curve (rank one)".into(),
            "torus or Klein bottle topology of N (rank two)".into(),
            "Riemannian submersion structure beyond constant singular values".into(),
        ],
    }
}

pub fn classify_limit(field: &GraphMapField, converged: bool, ric_positive: bool, tol: ClassifyTolerances) -> Result<LimitReport> {
    Ok(classify_evidence(limit_evidence(field, tol.sv_tol)?, converged, ric_positive, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::{flat_torus, round_sphere};
    use crate::grid::Grid;
    use std::sync::Arc;

    #[test]
    fn scaled_projection_is_rank_two_flat() {
        let m = Arc::new(flat_torus(3, 1.0));
        let n = Arc::new(flat_torus(2, 0.5));
        let grid = Arc::new(Grid::new(&m, &[4, 4, 4]).unwrap());
        let f = GraphMapField::from_fn(grid, m, n, |x| [x[0], x[1]]).unwrap();
        let r = classify_limit(&f, true, false, ClassifyTolerances::default()).unwrap();
        assert_eq!(r.class, LimitClass::Rank2Flat);
        assert!((r.evidence.lambda_mean - 0.5).abs() < 1e-12 && (r.evidence.mu_mean - 0.5).abs() < 1e-12);
        assert!(!r.contradiction);
        let r = classify_limit(&f, true, true, ClassifyTolerances::default()).unwrap();
        assert!(r.contradiction);
    }

    #[test]
    fn constant_map_and_unconverged_state() {
        let m = Arc::new(round_sphere(2, 1.0));
        let grid = Arc::new(Grid::new(&m, &[8, 4]).unwrap());
        let f = GraphMapField::from_fn(grid, m.clone(), m, |_| [1.0, 0.3]).unwrap();
        assert_eq!(classify_limit(&f, true, true, ClassifyTolerances::default()).unwrap().class, LimitClass::Constant);
        assert_eq!(
            classify_limit(&f, false, true, ClassifyTolerances::default()).unwrap().class,
            LimitClass::NotMinimal
        );
    }
}
