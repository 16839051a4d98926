//! Singular values of `df` and the adapted frames of the graph.
//!
//! With `g_M = L Lᵀ` and `g_N = R Rᵀ` the whitened differential is
//! `B = Rᵀ Jᵀ L⁻ᵀ` (a 2×m matrix); its SVD gives the singular values and,
//! mapped back through `L⁻ᵀ` and `R⁻ᵀ`, the bases `{α_i}` and `{β_a}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{cholesky_lower, extend_orthonormal, fix_sign, unit};

/// Relative gap below which `λ` and `μ` are treated as equal.
pub const TIE_TOL: f64 = 1e-12;

/// `df` at a point with the two metrics it is measured against.
#[derive(Clone, Debug)]
pub struct DifferentialSample {
    /// m×2, row `i` holds `∂_i f` in chart components of `N`.
    pub jacobian: DMatrix<f64>,
    pub metric_m: DMatrix<f64>,
    pub metric_n: DMatrix<f64>,
}

impl DifferentialSample {
    pub fn new(jacobian: DMatrix<f64>, metric_m: DMatrix<f64>, metric_n: DMatrix<f64>) -> Self {
        assert_eq!(jacobian.ncols(), 2, "target must be a surface");
        assert_eq!(jacobian.nrows(), metric_m.nrows());
        Self { jacobian, metric_m, metric_n }
    }

    pub fn dim(&self) -> usize {
        self.jacobian.nrows()
    }

    /// `df(v)` as a vector in `T_{f(x)}N`.
    pub fn push_forward(&self, v: &DVector<f64>) -> DVector<f64> {
        self.jacobian.transpose() * v
    }
}

/// The SVD-adapted data at one point.
#[derive(Clone, Debug)]
pub struct SvdFrame {
    pub lambda: f64,
    pub mu: f64,
    /// `g_M`-orthonormal, `f*g_N`-diagonal basis of `T_xM`.
    pub alpha: Vec<DVector<f64>>,
    /// `g_N`-orthonormal basis with `df(α_1) = λβ_1`, `df(α_2) = μβ_2`.
    pub beta: [DVector<f64>; 2],
    /// `g`-orthonormal basis of `T_xM` for the induced metric.
    pub e: Vec<DVector<f64>>,
    /// Unit normals in `T(M×N)`, stored as `(M part, N part)` of length `m+2`.
    pub xi: DVector<f64>,
    pub eta: DVector<f64>,
    pub s_diag: Vec<f64>,
    pub sperp_diag: [f64; 2],
    pub t11: f64,
    pub t22: f64,
    pub p: f64,
}

impl SvdFrame {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Singular value attached to `α_i`.
    pub fn sigma(&self, i: usize) -> f64 {
        match i {
            0 => self.lambda,
            1 => self.mu,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaStatus {
    pub p: f64,
    pub strictly_decreasing: bool,
    pub dil2: f64,
}

/// `(1 - s²)/(1 + s²)`
pub fn s_value(s: f64) -> f64 {
    (1.0 - s * s) / (1.0 + s * s)
}

/// `-2s/(1 + s²)`
pub fn t_value(s: f64) -> f64 {
    -2.0 * s / (1.0 + s * s)
}

pub fn p_value(lambda: f64, mu: f64) -> f64 {
    let (l2, m2) = (lambda * lambda, mu * mu);
    2.0 * (1.0 - l2 * m2) / ((1.0 + l2) * (1.0 + m2))
}

pub fn area_decreasing_status(lambda: f64, mu: f64) -> AreaStatus {
    AreaStatus { p: p_value(lambda, mu), strictly_decreasing: lambda * mu < 1.0, dil2: lambda * mu }
}

/// `(λ² + μ², λ²μ²)` from traces, without an SVD: the nonzero eigenvalues of
/// `f*g_N` against `g_M` are those of the 2×2 matrix `(Jᵀ g_M⁻¹ J) g_N`.
pub fn singular_invariants(jacobian: &DMatrix<f64>, metric_m_inv: &DMatrix<f64>, metric_n: &DMatrix<f64>) -> (f64, f64) {
    let c = jacobian.transpose() * metric_m_inv * jacobian * metric_n;
    (c.trace(), c.determinant().max(0.0))
}

/// `p` from the trace invariants.
pub fn p_from_invariants(trace: f64, det: f64) -> f64 {
    2.0 * (1.0 - det) / (1.0 + trace + det)
}

struct Whitened {
    l_inv_t: DMatrix<f64>,
    r_inv_t: DMatrix<f64>,
    b: DMatrix<f64>,
}

fn whiten(sample: &DifferentialSample) -> Result<Whitened> {
    let l = cholesky_lower(&sample.metric_m, &[])?;
    let r = cholesky_lower(&sample.metric_n, &[])?;
    let l_inv_t = l.try_inverse().expect("cholesky factor is invertible").transpose();
    let r_inv_t = r.clone().try_inverse().expect("cholesky factor is invertible").transpose();
    let b = r.transpose() * sample.jacobian.transpose() * &l_inv_t;
    Ok(Whitened { l_inv_t, r_inv_t, b })
}

/// Right singular pairs of the whitened 2×m map, largest first.
///
/// Thin QR of `Bᵀ` followed by an exact Jacobi rotation of the 2×2 factor.
/// nalgebra's SVD with `compute_u` returned a singular value off by about
/// 1% on some rank-one inputs, so it is not used here.
fn svd_sorted(b: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let bt = b.transpose();
    if bt.nrows() < 2 {
        let n = bt.column(0).norm().hypot(bt.column(1).norm());
        let v = if bt.nrows() == 1 { DVector::from_element(1, 1.0) } else { DVector::zeros(0) };
        return (vec![n], vec![v]);
    }
    let qr = bt.qr();
    let (q, r) = (qr.q(), qr.r());
    // Left singular vectors of R are the eigenvectors of R Rᵀ.
    let rrt = &r * r.transpose();
    let theta = 0.5 * (2.0 * rrt[(0, 1)]).atan2(rrt[(0, 0)] - rrt[(1, 1)]);
    let (c, s) = (theta.cos(), theta.sin());
    let mut pairs: Vec<(f64, DVector<f64>)> = [[c, s], [-s, c]]
        .iter()
        .map(|u| {
            let u = nalgebra::Vector2::new(u[0], u[1]);
            let sigma = (r.transpose() * u).norm();
            (sigma, &q * u)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let vals = pairs.iter().map(|p| p.0).collect();
    let vecs = pairs.into_iter().map(|p| p.1).collect();
    (vals, vecs)
}

pub fn singular_values(sample: &DifferentialSample) -> Result<(f64, f64)> {
    let w = whiten(sample)?;
    let (vals, _) = svd_sorted(&w.b);
    let lambda = vals.first().copied().unwrap_or(0.0);
    let mu = vals.get(1).copied().unwrap_or(0.0);
    Ok((lambda, mu.min(lambda)))
}

pub fn build_svd_frame(sample: &DifferentialSample) -> Result<SvdFrame> {
    let m = sample.dim();
    let w = whiten(sample)?;
    let (vals, vecs) = svd_sorted(&w.b);
    let lambda = vals.first().copied().unwrap_or(0.0);
    let mu = vals.get(1).copied().unwrap_or(0.0).min(lambda);
    let scale = lambda.max(1.0);
    let id_m = DMatrix::identity(m, m);

    // Whitened α's: orthonormal in the Euclidean sense.
    let mut a_hat: Vec<DVector<f64>> = Vec::with_capacity(m);
    let zero_tol = 1e-14 * scale;
    if lambda <= zero_tol {
        // df = 0: chart axes, orthonormalized.
    } else if m >= 2 && (lambda - mu) <= TIE_TOL * scale && mu > zero_tol {
        // λ = μ: the singular plane is 2-dimensional. Take as α̂_1 the unit
        // vector of the plane with the largest first component (projection
        // of the first chart axis that survives), then complete.
        let plane = [vecs[0].clone(), vecs[1].clone()];
        let mut first = None;
        for i in 0..m {
            let e = unit(m, i);
            let proj = &plane[0] * plane[0].dot(&e) + &plane[1] * plane[1].dot(&e);
            if proj.norm() > 1e-8 {
                first = Some(proj.normalize());
                break;
            }
        }
        let a1 = first.expect("plane has a nonzero projection of some axis");
        let mut basis = vec![a1];
        extend_orthonormal(&id_m, &mut basis, [plane[0].clone(), plane[1].clone()], 2);
        let mut a2 = basis.pop().unwrap();
        fix_sign(&mut a2, 1e-12);
        a_hat.push(basis.pop().unwrap());
        a_hat.push(a2);
    } else {
        let mut a1 = vecs[0].clone();
        fix_sign(&mut a1, 1e-12);
        a_hat.push(a1);
        if mu > zero_tol {
            let mut a2 = vecs[1].clone();
            fix_sign(&mut a2, 1e-12);
            a_hat.push(a2);
        }
    }
    let fixed = a_hat.len();
    extend_orthonormal(&id_m, &mut a_hat, (0..m).map(|i| unit(m, i)), m);
    for a in a_hat.iter_mut().skip(fixed) {
        fix_sign(a, 1e-12);
    }

    // Whitened β's.
    let id_2 = DMatrix::identity(2, 2);
    let mut b_hat: Vec<DVector<f64>> = Vec::with_capacity(2);
    if lambda > zero_tol {
        b_hat.push(&w.b * &a_hat[0] / lambda);
        if mu > zero_tol {
            b_hat.push(&w.b * &a_hat[1] / mu);
        } else {
            let mut b2 = DVector::from_vec(vec![-b_hat[0][1], b_hat[0][0]]);
            fix_sign(&mut b2, 1e-12);
            b_hat.push(b2);
        }
        // Re-orthonormalize against rounding.
        let first = b_hat[0].normalize();
        let mut basis = vec![first];
        extend_orthonormal(&id_2, &mut basis, [b_hat[1].clone(), unit(2, 0), unit(2, 1)], 2);
        b_hat = basis;
    } else {
        extend_orthonormal(&id_2, &mut b_hat, [unit(2, 0), unit(2, 1)], 2);
    }

    let alpha: Vec<DVector<f64>> = a_hat.iter().map(|a| &w.l_inv_t * a).collect();
    let beta = [&w.r_inv_t * &b_hat[0], &w.r_inv_t * &b_hat[1]];

    let sig = |i: usize| match i {
        0 => lambda,
        1 => mu,
        _ => 0.0,
    };
    let e: Vec<DVector<f64>> = alpha.iter().enumerate().map(|(i, a)| a / (1.0 + sig(i).powi(2)).sqrt()).collect();
    let normal = |k: usize| {
        let s = sig(k);
        let mut v = DVector::zeros(m + 2);
        if k < m {
            v.rows_mut(0, m).copy_from(&(&alpha[k] * (-s)));
        }
        v.rows_mut(m, 2).copy_from(&beta[k]);
        v / (1.0 + s * s).sqrt()
    };
    let xi = normal(0);
    let eta = normal(1);

    let mut s_diag = vec![1.0; m];
    s_diag[0] = s_value(lambda);
    if m >= 2 {
        s_diag[1] = s_value(mu);
    }
    Ok(SvdFrame {
        lambda,
        mu,
        alpha,
        beta,
        e,
        xi,
        eta,
        sperp_diag: [-s_value(lambda), -s_value(mu)],
        t11: t_value(lambda),
        t22: t_value(mu),
        p: p_value(lambda, mu),
        s_diag,
    })
}

/// Residuals of the frame identities against direct inner products: the
/// largest of orthonormality of `α`, `β`, `e` (w.r.t. `g`), normality of
/// `ξ, η`, `df(α_i) = σ_i β_i`, and the `S`, `S^⊥`, `T` values.
pub fn frame_residual(sample: &DifferentialSample, frame: &SvdFrame) -> f64 {
    let m = sample.dim();
    let gm = &sample.metric_m;
    let gn = &sample.metric_n;
    let jac = &sample.jacobian;
    let induced = gm + jac * gn * jac.transpose();
    let mut gp = DMatrix::zeros(m + 2, m + 2);
    gp.view_mut((0, 0), (m, m)).copy_from(gm);
    gp.view_mut((m, m), (2, 2)).copy_from(gn);
    let mut sp = gp.clone();
    sp.view_mut((m, m), (2, 2)).copy_from(&(-gn));

    let mut worst: f64 = 0.0;
    let mut check = |v: f64| worst = worst.max(v.abs());
    let ip = |g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    let df_e: Vec<DVector<f64>> = frame
        .e
        .iter()
        .map(|e| {
            let mut v = DVector::zeros(m + 2);
            v.rows_mut(0, m).copy_from(e);
            v.rows_mut(m, 2).copy_from(&sample.push_forward(e));
            v
        })
        .collect();
    for i in 0..m {
        for j in 0..m {
            let d = if i == j { 1.0 } else { 0.0 };
            check(ip(gm, &frame.alpha[i], &frame.alpha[j]) - d);
            check(ip(&induced, &frame.e[i], &frame.e[j]) - d);
            let s_exp = if i == j { frame.s_diag[i] } else { 0.0 };
            check(ip(&sp, &df_e[i], &df_e[j]) - s_exp);
        }
        check(ip(&gp, &df_e[i], &frame.xi));
        check(ip(&gp, &df_e[i], &frame.eta));
        let pushed = sample.push_forward(&frame.alpha[i]);
        let target = if i < 2 { &frame.beta[i] * frame.sigma(i) } else { DVector::zeros(2) };
        check((pushed - target).amax());
    }
    for a in 0..2 {
        for b in 0..2 {
            let d = if a == b { 1.0 } else { 0.0 };
            check(ip(gn, &frame.beta[a], &frame.beta[b]) - d);
        }
    }
    check(ip(&gp, &frame.xi, &frame.xi) - 1.0);
    check(ip(&gp, &frame.eta, &frame.eta) - 1.0);
    check(ip(&gp, &frame.xi, &frame.eta));
    check(ip(&sp, &frame.xi, &frame.xi) - frame.sperp_diag[0]);
    check(ip(&sp, &frame.eta, &frame.eta) - frame.sperp_diag[1]);
    check(ip(&sp, &frame.xi, &frame.eta));
    check(ip(&sp, &df_e[0], &frame.xi) - frame.t11);
    if m >= 2 {
        check(ip(&sp, &df_e[1], &frame.eta) - frame.t22);
    }
    check(frame.s_diag[0] + if m >= 2 { frame.s_diag[1] } else { 1.0 } - frame.p);
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(j: &[f64], m: usize) -> DifferentialSample {
        DifferentialSample::new(DMatrix::from_row_slice(m, 2, j), DMatrix::identity(m, m), DMatrix::identity(2, 2))
    }

    #[test]
    fn zero_differential() {
        let s = sample(&[0.0; 6], 3);
        let f = build_svd_frame(&s).unwrap();
        assert_eq!((f.lambda, f.mu), (0.0, 0.0));
        assert_eq!(f.p, 2.0);
        assert_eq!((f.t11, f.t22), (0.0, 0.0));
        assert!(f.s_diag.iter().all(|v| *v == 1.0));
        assert!((f.xi[3] - 1.0).abs() < 1e-15 && (f.eta[4] - 1.0).abs() < 1e-15);
        assert!(frame_residual(&s, &f) < 1e-14);
    }

    #[test]
    fn identity_torus() {
        let s = sample(&[1.0, 0.0, 0.0, 1.0], 2);
        assert_eq!(singular_values(&s).unwrap(), (1.0, 1.0));
        let f = build_svd_frame(&s).unwrap();
        assert!(frame_residual(&s, &f) < 1e-14);
        assert!(f.p.abs() < 1e-15);
    }

    #[test]
    fn rank_one_values() {
        let s = sample(&[1.0, 0.0, 0.0, 0.0], 2);
        let f = build_svd_frame(&s).unwrap();
        assert_eq!((f.lambda, f.mu), (1.0, 0.0));
        assert!(f.s_diag[0].abs() < 1e-15);
        assert!((f.t11 + 1.0).abs() < 1e-15);
        assert!((f.p - 1.0).abs() < 1e-15);
        assert!(frame_residual(&s, &f) < 1e-14);
    }

    #[test]
    fn tie_break_is_deterministic() {
        // A rotation by 30°: λ = μ = 1, any orthonormal pair is singular.
        let (c, sn) = (3f64.sqrt() / 2.0, 0.5);
        let s = sample(&[c, sn, -sn, c], 2);
        let f = build_svd_frame(&s).unwrap();
        assert!((f.alpha[0][0] - 1.0).abs() < 1e-12);
        assert!(frame_residual(&s, &f) < 1e-12);
    }

    #[test]
    fn status_table() {
        assert_eq!(area_decreasing_status(0.0, 0.0), AreaStatus { p: 2.0, strictly_decreasing: true, dil2: 0.0 });
        let one = area_decreasing_status(1.0, 1.0);
        assert_eq!((one.p, one.strictly_decreasing), (0.0, false));
        let hopf = area_decreasing_status(2.0, 2.0);
        assert!((hopf.p + 1.2).abs() < 1e-15);
        assert_eq!(hopf.dil2, 4.0);
    }

    #[test]
    fn invariants_match_svd() {
        let s = DifferentialSample::new(
            DMatrix::from_row_slice(3, 2, &[0.3, -0.2, 0.5, 0.1, -0.4, 0.7]),
            DMatrix::from_row_slice(3, 3, &[1.2, 0.1, 0.0, 0.1, 0.9, 0.2, 0.0, 0.2, 1.5]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.8]),
        );
        let (l, m) = singular_values(&s).unwrap();
        let inv = s.metric_m.clone().try_inverse().unwrap();
        let (tr, det) = singular_invariants(&s.jacobian, &inv, &s.metric_n);
        assert!((tr - l * l - m * m).abs() < 1e-12);
        assert!((det - l * l * m * m).abs() < 1e-12);
        assert!((p_from_invariants(tr, det) - p_value(l, m)).abs() < 1e-12);
    }
}
