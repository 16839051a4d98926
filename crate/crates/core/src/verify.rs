//! Monitors along a flow: the analytic bound curves for `p`, `|df|²` and
//! `|H|²`, the evolution residual of `p`, the `|H|²` and `Θ` inequalities, and
//! the volume budget `∂_t dμ = −|H|² dμ`.
//!
//! Time derivatives are taken at fixed points of `M` in the nonparametric
//! flow. The graph flow moves points of `M` with the tangential velocity
//! `H_M`, so a scalar `u` satisfies `∇_∂t u = ∂_t u + du(H_M)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::map_nodes;
use crate::geometry::Christoffel;
use crate::grid::{GraphMapField, Grid};
use crate::immersion::{p_at, point_geometry, quantity_q, quantity_r_vw, w_norm2_closed, CurvatureInputs, PointGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub rho0: f64,
    /// Infinite when `ϱ₀ = 2`, i.e. for constant initial maps.
    pub c0: f64,
    pub c1: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub a0: f64,
    /// `max Θ` at `t = 0`.
    pub theta0: f64,
}

/// `ε₀ = ¼ min Ric` for `min Ric ≥ 0`, `½ min Ric` otherwise.
pub fn eps0_from_min_ric(min_ric: f64) -> f64 {
    if min_ric >= 0.0 {
        0.25 * min_ric
    } else {
        0.5 * min_ric
    }
}

/// Solves `2c₀/√(1+c₀²) = ϱ₀`.
pub fn c0_from_rho0(rho0: f64) -> f64 {
    if rho0 >= 2.0 {
        f64::INFINITY
    } else {
        rho0 / (4.0 - rho0 * rho0).sqrt()
    }
}

pub fn compute_bound_constants(rho0: f64, max_theta0: f64, min_ric: f64, sup_sigma_n: f64) -> Result<BoundConstants> {
    if !(rho0 > 0.0) {
        return Err(Error::NotAreaDecreasing { min_p: rho0 });
    }
    let c0 = c0_from_rho0(rho0);
    Ok(BoundConstants {
        rho0,
        c0,
        c1: 2.0 / c0,
        eps0: eps0_from_min_ric(min_ric),
        eps1: sup_sigma_n - min_ric,
        a0: 2.0 * max_theta0,
        theta0: max_theta0,
    })
}

impl BoundConstants {
    /// `2c₀e^{ε₀t}/√(1+c₀²e^{2ε₀t})`.
    pub fn bound_p(&self, t: f64) -> f64 {
        let q = self.c0 * (self.eps0 * t).exp();
        2.0 / (1.0 + 1.0 / (q * q)).sqrt()
    }

    /// `c₁e^{−ε₀t}`.
    pub fn bound_df2(&self, t: f64) -> f64 {
        self.c1 * (-self.eps0 * t).exp()
    }

    /// `a₀e^{2 max(0, ε₁) t}`.
    pub fn bound_h2(&self, t: f64) -> f64 {
        self.a0 * (2.0 * self.eps1.max(0.0) * t).exp()
    }

    pub fn bound_theta(&self, t: f64) -> f64 {
        self.theta0 * (2.0 * self.eps1.max(0.0) * t).exp()
    }
}

pub const CSV_COLUMNS: [&str; 14] = [
    "t",
    "min_p",
    "max_lambda",
    "max_mu",
    "max_H2",
    "max_A2",
    "max_theta",
    "total_volume",
    "image_diameter",
    "bound_p",
    "bound_df2",
    "bound_H2",
    "residual_p_L2",
    "residual_p_Linf",
];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub min_p: f64,
    pub max_lambda: f64,
    pub max_mu: f64,
    /// `max (λ² + μ²)`; not a CSV column.
    pub max_df2: f64,
    pub max_h2: f64,
    pub max_a2: f64,
    pub max_theta: f64,
    pub total_volume: f64,
    pub image_diameter: f64,
    pub bound_p: f64,
    pub bound_df2: f64,
    pub bound_h2: f64,
    pub residual_p_l2: Option<f64>,
    pub residual_p_linf: Option<f64>,
}

impl TimeSeriesRecord {
    pub fn with_bounds(mut self, c: &BoundConstants) -> Self {
        self.bound_p = c.bound_p(self.t);
        self.bound_df2 = c.bound_df2(self.t);
        self.bound_h2 = c.bound_h2(self.t);
        self
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let vals = [
            self.t,
            self.min_p,
            self.max_lambda,
            self.max_mu,
            self.max_h2,
            self.max_a2,
            self.max_theta,
            self.total_volume,
            self.image_diameter,
            self.bound_p,
            self.bound_df2,
            self.bound_h2,
        ];
        let mut out: Vec<String> = vals.iter().map(|v| format!("{v:.12e}")).collect();
        out.push(opt(self.residual_p_l2));
        out.push(opt(self.residual_p_linf));
        out.join(",")
    }
}

/// `1e-6 + 10 h²`.
pub fn default_tolerance(h: f64) -> f64 {
    1e-6 + 10.0 * h * h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// False when condition (A) was not certified; no verdict is given then.
    pub applicable: bool,
    pub pass: Option<bool>,
    pub tol: f64,
    pub rows: usize,
    /// Smallest `observed - bound` for `p` and `bound - observed` otherwise.
    pub worst_p_margin: f64,
    pub worst_df2_margin: f64,
    pub worst_h2_margin: f64,
    pub worst_theta_margin: f64,
    pub worst_time: f64,
    /// `a₀ = 2 max Θ(0)` uses `p ≤ 2`; the constant itself is a reconstruction.
    pub note: String,
}

pub fn check_decay_bounds(series: &[TimeSeriesRecord], c: &BoundConstants, cond_a: bool, tol: f64) -> DecayReport {
    let note = "a0 = 2 max theta(0), from |H|^2 = theta p <= 2 theta".to_string();
    let mut r = DecayReport {
        applicable: cond_a,
        pass: None,
        tol,
        rows: series.len(),
        worst_p_margin: f64::INFINITY,
        worst_df2_margin: f64::INFINITY,
        worst_h2_margin: f64::INFINITY,
        worst_theta_margin: f64::INFINITY,
        worst_time: 0.0,
        note,
    };
    if !cond_a {
        return r;
    }
    let mut worst = f64::INFINITY;
    for row in series {
        let margins = [
            row.min_p - c.bound_p(row.t),
            c.bound_df2(row.t) - row.max_df2,
            c.bound_h2(row.t) - row.max_h2,
            c.bound_theta(row.t) - row.max_theta,
        ];
        r.worst_p_margin = r.worst_p_margin.min(margins[0]);
        r.worst_df2_margin = r.worst_df2_margin.min(margins[1]);
        r.worst_h2_margin = r.worst_h2_margin.min(margins[2]);
        r.worst_theta_margin = r.worst_theta_margin.min(margins[3]);
        let m = margins.iter().copied().fold(f64::INFINITY, f64::min);
        if !(m >= worst) {
            worst = m;
            r.worst_time = row.t;
        }
    }
    r.pass = Some(series.iter().all(|row| row.min_p.is_finite()) && worst >= -tol);
    r
}

/// Node index of `node` shifted by `s` along `axis`, through ghosts.
fn shifted(grid: &Grid, node: usize, axis: usize, s: isize) -> usize {
    let mut idx = grid.multi_index(node);
    idx[axis] += s;
    grid.resolve(&idx)
}

fn shifted2(grid: &Grid, node: usize, a: (usize, isize), b: (usize, isize)) -> usize {
    let mut idx = grid.multi_index(node);
    idx[a.0] += a.1;
    idx[b.0] += b.1;
    grid.resolve(&idx)
}

/// Central gradient and compact Hessian (chart components) of a node scalar.
pub fn scalar_derivatives(grid: &Grid, u: &[f64], node: usize) -> (DVector<f64>, DMatrix<f64>) {
    let m = grid.dim();
    let h = grid.spacing();
    let c = u[node];
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    for a in 0..m {
        let (p, q) = (u[shifted(grid, node, a, 1)], u[shifted(grid, node, a, -1)]);
        grad[a] = (p - q) / (2.0 * h[a]);
        hess[(a, a)] = (p - 2.0 * c + q) / (h[a] * h[a]);
        for b in (a + 1)..m {
            let pp = u[shifted2(grid, node, (a, 1), (b, 1))];
            let pm = u[shifted2(grid, node, (a, 1), (b, -1))];
            let mp = u[shifted2(grid, node, (a, -1), (b, 1))];
            let mm = u[shifted2(grid, node, (a, -1), (b, -1))];
            let v = (pp - pm - mp + mm) / (4.0 * h[a] * h[b]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    (grad, hess)
}

/// `g^{ij}(∂²_{ij}u − Γ^k_{ij}∂_k u)`.
pub fn laplace_beltrami(g_inv: &DMatrix<f64>, gamma: &Christoffel, grad: &DVector<f64>, hess: &DMatrix<f64>) -> f64 {
    let m = grad.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mut t = hess[(i, j)];
            for k in 0..m {
                t -= gamma.get(k, i, j) * grad[k];
            }
            acc += g_inv[(i, j)] * t;
        }
    }
    acc
}

fn grad_inner(g_inv: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a.transpose() * g_inv * b)[(0, 0)]
}

/// Right-hand side of the evolution equation of `p`, with `|∇p|²` supplied.
pub fn p_evolution_rhs(pg: &PointGeometry, grad_p_norm2: f64, q: f64) -> f64 {
    let m = pg.dim();
    let f = &pg.frame;
    let p = f.p;
    let (s11, s22) = (f.s_diag[0], f.s_diag[1]);
    let mut tail_xi = 0.0;
    let mut tail_eta = 0.0;
    for k in 0..m {
        for i in 2..m {
            tail_xi += pg.a_xi[(k, i)].powi(2);
            tail_eta += pg.a_eta[(k, i)].powi(2);
        }
    }
    let mixed: f64 = (0..m).map(|k| (pg.a_xi[(0, k)] * f.t22 + pg.a_eta[(1, k)] * f.t11).powi(2)).sum();
    2.0 * p * pg.a2
        + 2.0 * tail_xi * (1.0 - s11)
        + 2.0 * tail_eta * (1.0 - s22)
        + (4.0 * mixed - grad_p_norm2) / (2.0 * p)
        + q
}

/// Three consecutive snapshots `dt` apart, for central time differences.
#[derive(Clone, Copy, Debug)]
pub struct EvolutionWindow<'a> {
    pub prev: &'a GraphMapField,
    pub cur: &'a GraphMapField,
    pub next: &'a GraphMapField,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    /// `(Σ r² dV_M)^{1/2}` over the nodes used.
    pub l2: f64,
    pub linf: f64,
    pub worst_node: usize,
    pub nodes: usize,
}

fn all_geometry(field: &GraphMapField) -> Result<Vec<PointGeometry>> {
    map_nodes(field.node_count(), |i| point_geometry(field, i)).into_iter().collect()
}

fn node_p(field: &GraphMapField) -> Result<Vec<f64>> {
    map_nodes(field.node_count(), |i| p_at(field, i, &[])).into_iter().collect()
}

fn check_positive(p: &[f64]) -> Result<()> {
    for (i, &v) in p.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::Domain { at: vec![i as f64], reason: format!("p = {v} at node {i}") });
        }
    }
    Ok(())
}

/// `LHS − RHS` of the evolution equation of `p` at every node whose distance
/// to a chart pole is at least `margin` nodes.
pub fn residual_p_evolution(w: &EvolutionWindow, margin: usize) -> Result<ResidualNorms> {
    let cur = all_geometry(w.cur)?;
    let p: Vec<f64> = cur.iter().map(|pg| pg.p()).collect();
    let (p_prev, p_next) = (node_p(w.prev)?, node_p(w.next)?);
    check_positive(&p)?;
    check_positive(&p_prev)?;
    check_positive(&p_next)?;
    let grid = &w.cur.grid;
    let rows = map_nodes(w.cur.node_count(), |node| -> Result<Option<(f64, f64)>> {
        if grid.polar_margin(node) < margin {
            return Ok(None);
        }
        let pg = &cur[node];
        let (grad, hess) = scalar_derivatives(grid, &p, node);
        let lap = laplace_beltrami(&pg.induced_inv, &pg.christoffel_g, &grad, &hess);
        let dpdt = (p_next[node] - p_prev[node]) / (2.0 * w.dt);
        let lhs = dpdt + grad.dot(&pg.h_tangent_m()) - lap;
        let q = quantity_q(pg, &CurvatureInputs::at(w.cur, pg)?)?;
        let rhs = p_evolution_rhs(pg, grad_inner(&pg.induced_inv, &grad, &grad), q);
        Ok(Some((lhs - rhs, w.cur.domain_weight(node))))
    });
    let mut out = ResidualNorms { l2: 0.0, linf: 0.0, worst_node: 0, nodes: 0 };
    for (node, r) in rows.into_iter().enumerate() {
        if let Some((res, weight)) = r? {
            out.nodes += 1;
            out.l2 += res * res * weight;
            if !(res.abs() <= out.linf) {
                out.linf = res.abs();
                out.worst_node = node;
            }
        }
    }
    out.l2 = out.l2.sqrt();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub nodes_checked: usize,
    /// Nodes skipped because `|H| ≤ δ`.
    pub nodes_skipped: usize,
    /// Smallest `RHS − LHS` of the `|H|²` inequality.
    pub worst_h_slack: f64,
    /// Smallest `RHS − LHS` of the `Θ` inequality.
    pub worst_theta_slack: f64,
    /// Largest `|w|² − |H|²`.
    pub worst_w_excess: f64,
    pub tol: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn merge(&mut self, other: &InequalityReport) {
        self.nodes_checked += other.nodes_checked;
        self.nodes_skipped += other.nodes_skipped;
        self.worst_h_slack = self.worst_h_slack.min(other.worst_h_slack);
        self.worst_theta_slack = self.worst_theta_slack.min(other.worst_theta_slack);
        self.worst_w_excess = self.worst_w_excess.max(other.worst_w_excess);
        self.tol = self.tol.max(other.tol);
        self.pass &= other.pass;
    }
}

/// Slack of the `|H|²` and `Θ` differential inequalities at nodes with
/// `|H| > delta`, skipping nodes within `margin` of a chart pole.
pub fn check_h_and_theta_inequalities(w: &EvolutionWindow, eps1: f64, delta: f64, margin: usize) -> Result<InequalityReport> {
    let cur = all_geometry(w.cur)?;
    let prev = all_geometry(w.prev)?;
    let next = all_geometry(w.next)?;
    let grid = &w.cur.grid;
    let h = grid.h_min();
    let tol = 1e-6 + 10.0 * (h * h + w.dt);
    let h2: Vec<f64> = cur.iter().map(|g| g.h2).collect();
    let hn: Vec<f64> = h2.iter().map(|v| v.sqrt()).collect();
    let p: Vec<f64> = cur.iter().map(|g| g.p()).collect();
    check_positive(&p)?;
    let theta: Vec<f64> = h2.iter().zip(&p).map(|(a, b)| a / b).collect();
    let theta_of = |g: &PointGeometry| g.h2 / g.p();
    let mut r = InequalityReport {
        nodes_checked: 0,
        nodes_skipped: 0,
        worst_h_slack: f64::INFINITY,
        worst_theta_slack: f64::INFINITY,
        worst_w_excess: f64::NEG_INFINITY,
        tol,
        pass: true,
    };
    let rows = map_nodes(w.cur.node_count(), |node| -> Result<Option<(f64, f64, f64)>> {
        let pg = &cur[node];
        if grid.polar_margin(node) < margin || hn[node] <= delta {
            return Ok(None);
        }
        let hm = pg.h_tangent_m();
        let gi = &pg.induced_inv;
        let gamma = &pg.christoffel_g;

        let (gh2, hh2) = scalar_derivatives(grid, &h2, node);
        let (ghn, _) = scalar_derivatives(grid, &hn, node);
        let lhs_h = (next[node].h2 - prev[node].h2) / (2.0 * w.dt) + gh2.dot(&hm)
            - laplace_beltrami(gi, gamma, &gh2, &hh2);
        let c = CurvatureInputs::at(w.cur, pg)?;
        let terms = quantity_r_vw(pg, &c);
        let rhs_h = -2.0 * grad_inner(gi, &ghn, &ghn) + 2.0 * pg.a2 * pg.h2 + terms.r;

        let (gt, ht) = scalar_derivatives(grid, &theta, node);
        let (gp, _) = scalar_derivatives(grid, &p, node);
        let lhs_t = (theta_of(&next[node]) - theta_of(&prev[node])) / (2.0 * w.dt) + gt.dot(&hm)
            - laplace_beltrami(gi, gamma, &gt, &ht);
        let rhs_t = grad_inner(gi, &gt, &gp) / p[node] + 2.0 * eps1.max(0.0) * theta[node];

        let w2 = w_norm2_closed(pg.lambda(), pg.mu(), pg.h_xi, pg.h_eta);
        Ok(Some((rhs_h - lhs_h, rhs_t - lhs_t, w2 - pg.h2)))
    });
    for row in rows {
        match row? {
            Some((sh, st, we)) => {
                r.nodes_checked += 1;
                r.worst_h_slack = r.worst_h_slack.min(sh);
                r.worst_theta_slack = r.worst_theta_slack.min(st);
                r.worst_w_excess = r.worst_w_excess.max(we);
            }
            None => r.nodes_skipped += 1,
        }
    }
    r.pass = r.worst_h_slack >= -tol && r.worst_theta_slack >= -tol && r.worst_w_excess <= 1e-12;
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeBudget {
    pub volume_start: f64,
    pub volume_end: f64,
    /// `∫∫|H|² dμ dt` by the trapezoidal rule.
    pub dissipated: f64,
    pub relative_error: f64,
    pub pass: bool,
}

/// Compares the volume drop with the time integral of `∫|H|²dμ`; `rel_tol`
/// applies relative to the larger of the two (absolute below `1e-12`).
pub fn volume_budget(times: &[f64], volumes: &[f64], dissipation: &[f64], rel_tol: f64) -> Result<VolumeBudget> {
    if times.len() < 2 || times.len() != volumes.len() || times.len() != dissipation.len() {
        return Err(Error::Precondition("volume budget needs matching series of length >= 2".into()));
    }
    let dissipated: f64 =
        (1..times.len()).map(|i| 0.5 * (times[i] - times[i - 1]) * (dissipation[i] + dissipation[i - 1])).sum();
    let drop = volumes[0] - volumes[volumes.len() - 1];
    let scale = drop.abs().max(dissipated.abs());
    let err = (drop - dissipated).abs();
    let relative_error = if scale > 1e-12 { err / scale } else { 0.0 };
    Ok(VolumeBudget {
        volume_start: volumes[0],
        volume_end: volumes[volumes.len() - 1],
        dissipated,
        relative_error,
        pass: relative_error <= rel_tol || err <= 1e-12,
    })
}

/// Grid summary of a field: `(min p, max λ, max μ, max |df|², max |H|², max |A|², max Θ, volume, ∫|H|²dμ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub min_p: f64,
    pub max_lambda: f64,
    pub max_mu: f64,
    pub max_df2: f64,
    pub max_h2: f64,
    pub max_a2: f64,
    pub max_theta: f64,
    pub total_volume: f64,
    pub h2_integral: f64,
}

pub fn summarize_field(field: &GraphMapField) -> Result<FieldSummary> {
    let pgs = all_geometry(field)?;
    let mut s = FieldSummary { min_p: f64::INFINITY, ..Default::default() };
    for pg in &pgs {
        let (l, m) = (pg.lambda(), pg.mu());
        s.min_p = s.min_p.min(pg.p());
        s.max_lambda = s.max_lambda.max(l);
        s.max_mu = s.max_mu.max(m);
        s.max_df2 = s.max_df2.max(l * l + m * m);
        s.max_h2 = s.max_h2.max(pg.h2);
        s.max_a2 = s.max_a2.max(pg.a2);
        s.max_theta = s.max_theta.max(pg.theta()?);
        let dmu = pg.induced.determinant().sqrt() * field.grid.cell_volume();
        s.total_volume += dmu;
        s.h2_integral += pg.h2 * dmu;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c0_examples() {
        assert!((c0_from_rho0(2f64.sqrt()) - 1.0).abs() < 1e-15);
        let c = compute_bound_constants(2f64.sqrt(), 0.0, 2.0, 1.0).unwrap();
        assert!((c.c1 - 2.0).abs() < 1e-14 && c.eps0 == 0.5 && c.eps1 == -1.0);
        assert_eq!(eps0_from_min_ric(-2.0), -1.0);
        assert!((c.bound_p(0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!(compute_bound_constants(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn constant_map_bounds() {
        let c = compute_bound_constants(2.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(c.bound_p(3.0), 2.0);
        assert_eq!(c.bound_df2(3.0), 0.0);
        let row = TimeSeriesRecord { t: 3.0, min_p: 2.0, ..Default::default() };
        let r = check_decay_bounds(&[row], &c, true, 1e-6);
        assert_eq!(r.pass, Some(true));
        assert_eq!(check_decay_bounds(&[], &c, false, 1e-6).pass, None);
    }

    #[test]
    fn budget_of_exponential_decay() {
        // V(t) = e^{-t}: dissipation rate e^{-t}.
        let t: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let b = volume_budget(&t, &v, &v, 0.02).unwrap();
        assert!(b.relative_error < 1e-4 && b.pass);
    }

    #[test]
    fn csv_row_has_all_columns() {
        let r = TimeSeriesRecord::default();
        assert_eq!(r.csv_row().split(',').count(), CSV_COLUMNS.len());
    }
}
