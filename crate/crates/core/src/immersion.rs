//! Second fundamental form and mean curvature of the graph `F = Id × f`.
//!
//! Second derivatives of `f` are taken by differencing the discrete tangent
//! field `df` (central differences of central differences), which gives the
//! wide three-point stencil on the diagonal and the usual four-corner stencil
//! off it. The flow right-hand side uses the compact diagonal stencil, so the
//! two routes to `H` agree to `O(h²)` without sharing truncation error.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frames::{build_svd_frame, DifferentialSample, SvdFrame};
use crate::geometry::curvature::curvature_package_unchecked;
use crate::geometry::Christoffel;
use crate::grid::GraphMapField;
use crate::linalg::{inner, inverse_spd};

#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub x: Vec<f64>,
    pub y: [f64; 2],
    pub jacobian: DMatrix<f64>,
    pub metric_m: DMatrix<f64>,
    pub metric_n: DMatrix<f64>,
    pub induced: DMatrix<f64>,
    pub induced_inv: DMatrix<f64>,
    /// Christoffel symbols of the induced metric.
    pub christoffel_g: Christoffel,
    pub frame: SvdFrame,
    /// `A^ξ(e_k, e_l)` and `A^η(e_k, e_l)`.
    pub a_xi: DMatrix<f64>,
    pub a_eta: DMatrix<f64>,
    pub h_xi: f64,
    pub h_eta: f64,
    pub h2: f64,
    pub a2: f64,
    /// Mean curvature vector in `T(M×N)`, `(M part, N part)`.
    pub h_vec: DVector<f64>,
    /// `max |⟨A_ij, dF(e_k)⟩|` from the full discrete `A`.
    pub tangency_residual: f64,
    /// `max |A_ij - A_ji|` before symmetrization.
    pub symmetry_residual: f64,
}

impl PointGeometry {
    pub fn lambda(&self) -> f64 {
        self.frame.lambda
    }

    pub fn mu(&self) -> f64 {
        self.frame.mu
    }

    pub fn p(&self) -> f64 {
        self.frame.p
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `M` component of `H` in chart coordinates.
    pub fn h_tangent_m(&self) -> DVector<f64> {
        self.h_vec.rows(0, self.dim()).into_owned()
    }

    /// Product metric at the graph point.
    pub fn product_metric(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut gp = DMatrix::zeros(m + 2, m + 2);
        gp.view_mut((0, 0), (m, m)).copy_from(&self.metric_m);
        gp.view_mut((m, m), (2, 2)).copy_from(&self.metric_n);
        gp
    }

    /// `|A^H|² = Σ_kl ⟨A_kl, H⟩²`.
    pub fn a_h_norm2(&self) -> f64 {
        let a_h = &self.a_xi * self.h_xi + &self.a_eta * self.h_eta;
        a_h.iter().map(|v| v * v).sum()
    }

    /// `∇_{e_k} p = 2A^ξ_{1k}T_11 + 2A^η_{2k}T_22`.
    pub fn grad_p_formula(&self) -> DVector<f64> {
        let m = self.dim();
        DVector::from_fn(m, |k, _| {
            2.0 * self.a_xi[(0, k)] * self.frame.t11 + 2.0 * self.a_eta[(1, k)] * self.frame.t22
        })
    }

    /// Θ = |H|²/p.
    pub fn theta(&self) -> Result<f64> {
        if !(self.p() > 0.0) {
            return Err(Error::NonPositiveP { p: self.p(), node: usize::MAX });
        }
        Ok(self.h2 / self.p())
    }
}

/// Induced metric `g_M + J g_N Jᵀ` at a shifted node.
fn induced_at(field: &GraphMapField, node: usize, path: &[(usize, isize)]) -> DMatrix<f64> {
    let x = field.coord_at(node, path);
    let y = field.lifted(node, path);
    let jac = field.jacobian_at(node, path);
    field.m.metric_at(&x) + &jac * field.n.metric_at(&y) * jac.transpose()
}

/// Christoffel symbols of the induced metric by central differences of the
/// induced metric field.
pub fn induced_christoffel(field: &GraphMapField, node: usize, induced_inv: &DMatrix<f64>) -> Christoffel {
    let m = field.dim();
    let h = field.grid.spacing();
    let dg: Vec<DMatrix<f64>> = (0..m)
        .map(|c| (induced_at(field, node, &[(c, 1)]) - induced_at(field, node, &[(c, -1)])) / (2.0 * h[c]))
        .collect();
    Christoffel::from_metric_derivatives(induced_inv, &dg)
}

pub fn point_geometry(field: &GraphMapField, node: usize) -> Result<PointGeometry> {
    let m = field.dim();
    let h = field.grid.spacing().to_vec();
    let x = field.grid.coord(node);
    let y = field.values[node];
    let jac = field.jacobian_at(node, &[]);
    let metric_m = field.m.metric_at(&x);
    let metric_n = field.n.metric_at(&y);
    let induced = &metric_m + &jac * &metric_n * jac.transpose();
    let induced_inv = inverse_spd(&induced, &x)
        .map_err(|_| Error::State(format!("induced metric not positive definite at node {node}")))?;
    let gamma_g = induced_christoffel(field, node, &induced_inv);
    let gamma_m = field.m.christoffel_at(&x)?;
    let gamma_n = field.n.christoffel_at(&y)?;

    // D_a D_b f from the tangent field at the neighbours.
    let jac_plus: Vec<DMatrix<f64>> = (0..m).map(|a| field.jacobian_at(node, &[(a, 1)])).collect();
    let jac_minus: Vec<DMatrix<f64>> = (0..m).map(|a| field.jacobian_at(node, &[(a, -1)])).collect();
    let mut ddf = vec![vec![[0.0; 2]; m]; m];
    let mut symmetry_residual: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            for al in 0..2 {
                ddf[a][b][al] = (jac_plus[a][(b, al)] - jac_minus[a][(b, al)]) / (2.0 * h[a]);
            }
        }
    }
    for a in 0..m {
        for b in (a + 1)..m {
            for al in 0..2 {
                let s = 0.5 * (ddf[a][b][al] + ddf[b][a][al]);
                symmetry_residual = symmetry_residual.max((ddf[a][b][al] - ddf[b][a][al]).abs());
                ddf[a][b][al] = s;
                ddf[b][a][al] = s;
            }
        }
    }

    // Full A_ij in T(M×N).
    let mut a_full = vec![vec![DVector::zeros(m + 2); m]; m];
    for i in 0..m {
        for j in i..m {
            let mut v = DVector::zeros(m + 2);
            for k in 0..m {
                v[k] = gamma_m.get(k, i, j) - gamma_g.get(k, i, j);
            }
            for al in 0..2 {
                let mut acc = ddf[i][j][al];
                for be in 0..2 {
                    for ga in 0..2 {
                        acc += gamma_n.get(al, be, ga) * jac[(i, be)] * jac[(j, ga)];
                    }
                }
                for k in 0..m {
                    acc -= gamma_g.get(k, i, j) * jac[(k, al)];
                }
                v[m + al] = acc;
            }
            a_full[i][j] = v.clone();
            a_full[j][i] = v;
        }
    }

    let frame = build_svd_frame(&DifferentialSample::new(jac.clone(), metric_m.clone(), metric_n.clone()))?;
    let mut gp = DMatrix::zeros(m + 2, m + 2);
    gp.view_mut((0, 0), (m, m)).copy_from(&metric_m);
    gp.view_mut((m, m), (2, 2)).copy_from(&metric_n);

    let mut a_xi_c = DMatrix::zeros(m, m);
    let mut a_eta_c = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a_xi_c[(i, j)] = inner(&gp, &a_full[i][j], &frame.xi);
            a_eta_c[(i, j)] = inner(&gp, &a_full[i][j], &frame.eta);
        }
    }
    let e_mat = DMatrix::from_columns(&frame.e);
    let a_xi = e_mat.transpose() * &a_xi_c * &e_mat;
    let a_eta = e_mat.transpose() * &a_eta_c * &e_mat;
    let h_xi = a_xi.trace();
    let h_eta = a_eta.trace();
    let h_vec = &frame.xi * h_xi + &frame.eta * h_eta;
    let a2 = a_xi.iter().chain(a_eta.iter()).map(|v| v * v).sum();

    let mut tangency_residual: f64 = 0.0;
    for e in &frame.e {
        let mut df_e = DVector::zeros(m + 2);
        df_e.rows_mut(0, m).copy_from(e);
        df_e.rows_mut(m, 2).copy_from(&(jac.transpose() * e));
        for row in &a_full {
            for a_ij in row {
                tangency_residual = tangency_residual.max(inner(&gp, a_ij, &df_e).abs());
            }
        }
    }

    Ok(PointGeometry {
        x,
        y,
        jacobian: jac,
        metric_m,
        metric_n,
        induced,
        induced_inv,
        christoffel_g: gamma_g,
        frame,
        a_xi,
        a_eta,
        h_xi,
        h_eta,
        h2: h_xi * h_xi + h_eta * h_eta,
        a2,
        h_vec,
        tangency_residual,
        symmetry_residual,
    })
}

/// Curvature data entering the first-order terms at a graph point.
#[derive(Clone, Debug)]
pub struct CurvatureInputs {
    /// Ricci tensor of `M` in chart components.
    pub ric: DMatrix<f64>,
    /// `σ_M(α_1 ∧ α_2)`.
    pub sigma_alpha12: f64,
    /// `σ_N` at `f(x)`.
    pub sigma_n: f64,
}

impl CurvatureInputs {
    pub fn at(field: &GraphMapField, pg: &PointGeometry) -> Result<Self> {
        let cm = curvature_package_unchecked(&field.m, &pg.x)?;
        let sigma_alpha12 = if pg.dim() >= 2 { cm.sectional(&pg.frame.alpha[0], &pg.frame.alpha[1])? } else { 0.0 };
        let cn = curvature_package_unchecked(&field.n, &pg.y)?;
        let sigma_n = cn.sectional(&crate::linalg::unit(2, 0), &crate::linalg::unit(2, 1))?;
        Ok(Self { ric: cm.ricci, sigma_alpha12, sigma_n })
    }

    pub fn bric12(&self, frame: &SvdFrame) -> f64 {
        inner(&self.ric, &frame.alpha[0], &frame.alpha[0]) + inner(&self.ric, &frame.alpha[1], &frame.alpha[1])
            - self.sigma_alpha12
    }
}

/// The first-order term `Q` of the evolution of `p`.
pub fn quantity_q_frame(frame: &SvdFrame, c: &CurvatureInputs) -> Result<f64> {
    let p = frame.p;
    if !(p > 0.0) {
        return Err(Error::Domain { at: vec![frame.lambda, frame.mu], reason: format!("p = {p} is not positive") });
    }
    let (l2, m2) = (frame.lambda.powi(2), frame.mu.powi(2));
    let den = (1.0 + l2) * (1.0 + m2);
    let r11 = inner(&c.ric, &frame.alpha[0], &frame.alpha[0]);
    let r22 = inner(&c.ric, &frame.alpha[1], &frame.alpha[1]);
    Ok(2.0 * l2 * m2 * (2.0 + p) / den * (c.bric12(frame) - c.sigma_n) + 2.0 * l2 * p / den * r11
        + 2.0 * m2 * p / den * r22)
}

pub fn quantity_q(pg: &PointGeometry, c: &CurvatureInputs) -> Result<f64> {
    quantity_q_frame(&pg.frame, c)
}

#[derive(Clone, Debug)]
pub struct CurvatureTerms {
    pub r: f64,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

pub fn quantity_r_vw_frame(frame: &SvdFrame, h_xi: f64, h_eta: f64, c: &CurvatureInputs) -> CurvatureTerms {
    let (l, mu) = (frame.lambda, frame.mu);
    let (sl, sm) = ((1.0 + l * l).sqrt(), (1.0 + mu * mu).sqrt());
    let a1 = &frame.alpha[0];
    let a2 = &frame.alpha[1];
    let v = a1 * (l * h_xi / sl) + a2 * (mu * h_eta / sm);
    let w = a1 * (-l * h_eta / sl) + a2 * (mu * h_xi / sm);
    let h2 = h_xi * h_xi + h_eta * h_eta;
    let den = (1.0 + l * l) * (1.0 + mu * mu);
    let k = 2.0 * l * l * mu * mu * h2 / den;
    let r11 = inner(&c.ric, a1, a1);
    let r22 = inner(&c.ric, a2, a2);
    let w2 = w_norm2_closed(l, mu, h_xi, h_eta);
    let r = k * (c.bric12(frame) - c.sigma_n) + 2.0 * inner(&c.ric, &v, &v) - k * (r11 + r22) + 2.0 * c.sigma_n * w2;
    CurvatureTerms { r, v, w }
}

pub fn quantity_r_vw(pg: &PointGeometry, c: &CurvatureInputs) -> CurvatureTerms {
    quantity_r_vw_frame(&pg.frame, pg.h_xi, pg.h_eta, c)
}

/// `(λ²|H^η|² + μ²|H^ξ|² + λ²μ²|H|²) / ((1+λ²)(1+μ²))`.
pub fn w_norm2_closed(lambda: f64, mu: f64, h_xi: f64, h_eta: f64) -> f64 {
    let (l2, m2) = (lambda * lambda, mu * mu);
    (l2 * h_eta * h_eta + m2 * h_xi * h_xi + l2 * m2 * (h_xi * h_xi + h_eta * h_eta)) / ((1.0 + l2) * (1.0 + m2))
}

/// `p` at a node shifted along `path`, from the trace invariants of `df`.
pub fn p_at(field: &GraphMapField, node: usize, path: &[(usize, isize)]) -> Result<f64> {
    let x = field.coord_at(node, path);
    let y = field.lifted(node, path);
    let jac = field.jacobian_at(node, path);
    let gm_inv = inverse_spd(&field.m.metric_at(&x), &x)?;
    let (tr, det) = crate::frames::singular_invariants(&jac, &gm_inv, &field.n.metric_at(&y));
    Ok(crate::frames::p_from_invariants(tr, det))
}

/// `|dp(e_k) - (2A^ξ_{1k}T_11 + 2A^η_{2k}T_22)|` for each `k`.
pub fn p_gradient_check(field: &GraphMapField, node: usize) -> Result<Vec<f64>> {
    let pg = point_geometry(field, node)?;
    let m = field.dim();
    let h = field.grid.spacing();
    let mut dp = DVector::zeros(m);
    for i in 0..m {
        dp[i] = (p_at(field, node, &[(i, 1)])? - p_at(field, node, &[(i, -1)])?) / (2.0 * h[i]);
    }
    let formula = pg.grad_p_formula();
    Ok((0..m).map(|k| (pg.frame.e[k].dot(&dp) - formula[k]).abs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::{flat_torus, round_sphere};
    use crate::grid::Grid;
    use std::sync::Arc;

    #[test]
    fn constant_map_is_totally_geodesic() {
        let t = Arc::new(flat_torus(3, 1.0));
        let n = Arc::new(round_sphere(2, 1.0));
        let grid = Arc::new(Grid::new(&t, &[6, 6, 6]).unwrap());
        let f = GraphMapField::from_fn(grid, t, n, |_| [1.0, 2.0]).unwrap();
        let pg = point_geometry(&f, 17).unwrap();
        assert_eq!(pg.a2, 0.0);
        assert_eq!(pg.h2, 0.0);
        assert_eq!(p_gradient_check(&f, 17).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn diagonal_torus_is_flat() {
        let t = Arc::new(flat_torus(2, 1.0));
        let grid = Arc::new(Grid::new(&t, &[8, 8]).unwrap());
        let f = GraphMapField::from_fn(grid, t.clone(), t, |x| [x[0], x[1]]).unwrap();
        for node in [0, 9, 63] {
            let pg = point_geometry(&f, node).unwrap();
            assert!(pg.a2 < 1e-24 && pg.h2 < 1e-24);
        }
    }

    #[test]
    fn q_vanishes_without_stretch() {
        let frame = crate::frames::build_svd_frame(&DifferentialSample::new(
            DMatrix::zeros(3, 2),
            DMatrix::identity(3, 3),
            DMatrix::identity(2, 2),
        ))
        .unwrap();
        let c = CurvatureInputs { ric: DMatrix::identity(3, 3) * 2.0, sigma_alpha12: 1.0, sigma_n: 1.0 };
        assert_eq!(quantity_q_frame(&frame, &c).unwrap(), 0.0);
        let t = quantity_r_vw_frame(&frame, 0.0, 0.0, &c);
        assert_eq!(t.r, 0.0);
    }
}
