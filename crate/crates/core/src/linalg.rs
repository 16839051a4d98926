//! Small dense helpers shared by the geometry and frame code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `u^T g v`.
pub fn inner(g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += g[(i, j)] * v[j];
        }
        acc += u[i] * row;
    }
    acc
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
}

/// Lower Cholesky factor `L` with `g = L L^T`.
pub fn cholesky_lower(g: &DMatrix<f64>, at: &[f64]) -> Result<DMatrix<f64>> {
    g.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::DegenerateMetric { at: at.to_vec() })
}

pub fn inverse_spd(g: &DMatrix<f64>, at: &[f64]) -> Result<DMatrix<f64>> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateMetric { at: at.to_vec() })?;
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Solves `a x = lambda g x` for symmetric `a` and SPD `g`.
///
/// Eigenvalues come back ascending; eigenvector columns are `g`-orthonormal.
pub fn generalized_eigen(
    a: &DMatrix<f64>,
    g: &DMatrix<f64>,
    at: &[f64],
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let l = cholesky_lower(g, at)?;
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateMetric { at: at.to_vec() })?;
    let mut c = &l_inv * a * l_inv.transpose();
    symmetrize(&mut c);
    let eig = c.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let back = l_inv.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = &back * eig.eigenvectors.column(i);
        vectors.set_column(col, &v);
    }
    Ok((values, vectors))
}

/// Gram–Schmidt against `g`, appending to `basis` every candidate that is not
/// (numerically) in the span of what is already there.
pub fn extend_orthonormal(
    g: &DMatrix<f64>,
    basis: &mut Vec<DVector<f64>>,
    candidates: impl IntoIterator<Item = DVector<f64>>,
    target: usize,
) {
    for mut c in candidates {
        if basis.len() >= target {
            break;
        }
        // Two passes keep the result orthogonal to rounding level.
        for _ in 0..2 {
            for b in basis.iter() {
                let proj = inner(g, b, &c);
                c -= b * proj;
            }
        }
        let n2 = inner(g, &c, &c);
        if n2 > 1e-20 {
            c /= n2.sqrt();
            basis.push(c);
        }
    }
}

/// Flips `v` so its first component with magnitude above `tol` is positive.
pub fn fix_sign(v: &mut DVector<f64>, tol: f64) {
    if let Some(first) = v.iter().copied().find(|c| c.abs() > tol) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_eigen_is_g_orthonormal() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 4.0]);
        let g = DMatrix::from_row_slice(3, 3, &[1.5, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 2.0]);
        let (vals, vecs) = generalized_eigen(&a, &g, &[]).unwrap();
        assert!(vals[0] <= vals[1] && vals[1] <= vals[2]);
        let gram = vecs.transpose() * &g * &vecs;
        let diag = vecs.transpose() * &a * &vecs;
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - id).abs() < 1e-12);
                let d = if i == j { vals[i] } else { 0.0 };
                assert!((diag[(i, j)] - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extend_skips_dependent_candidates() {
        let g = DMatrix::identity(3, 3);
        let mut basis = vec![unit(3, 0)];
        let cands = vec![DVector::from_vec(vec![2.0, 0.0, 0.0]), unit(3, 2), unit(3, 1)];
        extend_orthonormal(&g, &mut basis, cands, 3);
        assert_eq!(basis.len(), 3);
        assert!((basis[1][2] - 1.0).abs() < 1e-15);
    }
}
