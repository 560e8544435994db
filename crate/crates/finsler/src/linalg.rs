//! Small dense helpers: a jet-valued linear solve for coefficient formulas
//! and rank/orthonormalization utilities on plain matrices.

use crate::autodiff::Jet;
use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for numerical rank everywhere.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Solve A·x = b by Gaussian elimination with partial pivoting on the real
/// parts. Jet entries stay exact through the elimination; a vanishing pivot
/// produces non-finite coefficients which callers detect at the boundary.
pub fn solve_jets(a: &[Vec<Jet>], b: &[Jet]) -> Vec<Jet> {
    let n = b.len();
    let mut m: Vec<Vec<Jet>> = a.to_vec();
    let mut rhs: Vec<Jet> = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[i][col]
                    .re()
                    .abs()
                    .partial_cmp(&m[j][col].re().abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        let inv = m[col][col].recip();
        for row in (col + 1)..n {
            let factor = &m[row][col] * &inv;
            for k in col..n {
                m[row][k] = &m[row][k] - &(&factor * &m[col][k]);
            }
            rhs[row] = &rhs[row] - &(&factor * &rhs[col]);
        }
    }
    let mut x = vec![Jet::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row].clone();
        for k in (row + 1)..n {
            acc = &acc - &(&m[row][k] * &x[k]);
        }
        x[row] = &acc / &m[row][row];
    }
    x
}

/// Numerical rank with the crate-wide relative cutoff.
pub fn svd_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().cloned().fold(0.0f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Sorted singular values (descending).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Orthonormal basis of the column space, columns with relative singular
/// value above `rel_tol`.
pub fn column_space_basis(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv = svd.singular_values;
    let largest = sv.iter().cloned().fold(0.0f64, f64::max);
    let mut basis = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if largest > 0.0 && s > rel_tol * largest {
            basis.push(u.column(i).into_owned());
        }
    }
    basis
}

/// Norm of the component of `v` orthogonal to an orthonormal basis.
pub fn residual_norm(basis: &[DVector<f64>], v: &DVector<f64>) -> f64 {
    let mut rest = v.clone();
    for q in basis {
        let c = q.dot(v);
        rest -= q * c;
    }
    rest.norm()
}

/// g-orthonormal basis of the g-orthocomplement of `y`, built by
/// Gram–Schmidt from the coordinate vectors, skipping the coordinate most
/// parallel to y.
pub fn g_orthocomplement_basis(g: &DMatrix<f64>, y: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = y.len();
    let g_inner = |a: &DVector<f64>, b: &DVector<f64>| (g * b).dot(a);
    let y_unit = {
        let norm = g_inner(y, y).sqrt();
        y / norm
    };
    // Skip the coordinate direction with the largest normalized g-overlap
    // with y.
    let skip = (0..n)
        .max_by(|&i, &j| {
            let e = |k: usize| DVector::from_fn(n, |r, _| if r == k { 1.0 } else { 0.0 });
            let oi = g_inner(&e(i), &y_unit).abs() / g[(i, i)].sqrt();
            let oj = g_inner(&e(j), &y_unit).abs() / g[(j, j)].sqrt();
            oi.partial_cmp(&oj).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - 1);
    for i in 0..n {
        if i == skip {
            continue;
        }
        let mut v = DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 });
        let c = g_inner(&v, &y_unit);
        v -= &y_unit * c;
        for q in &basis {
            let c = g_inner(&v, q);
            v -= q * c;
        }
        let norm = g_inner(&v, &v).sqrt();
        basis.push(v / norm);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jet_solve_matches_plain_solve() {
        let a = vec![
            vec![Jet::real(2.0), Jet::real(1.0)],
            vec![Jet::real(1.0), Jet::real(3.0)],
        ];
        let b = vec![Jet::real(5.0), Jet::real(10.0)];
        let x = solve_jets(&a, &b);
        assert_relative_eq!(x[0].re(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[1].re(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn jet_solve_propagates_derivatives() {
        // A(t)·x = b with A = [[t, 0], [0, 1]], b = (1, 1): x₀ = 1/t, so
        // dx₀/dt = −1/t² = −0.25 at t = 2.
        let mut t = Jet::real(2.0);
        t.seed(0, 1.0);
        let a = vec![
            vec![t.clone(), Jet::real(0.0)],
            vec![Jet::real(0.0), Jet::real(1.0)],
        ];
        let b = vec![Jet::real(1.0), Jet::real(1.0)];
        let x = solve_jets(&a, &b);
        assert_relative_eq!(x[0].coeff(1), -0.25, epsilon = 1e-14);
    }

    #[test]
    fn rank_and_residual() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(svd_rank(&m, RANK_REL_TOL), 2);
        let basis = column_space_basis(&m, RANK_REL_TOL);
        let v = DVector::from_vec(vec![0.0, 0.0, 2.0]);
        assert_relative_eq!(residual_norm(&basis, &v), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn g_orthocomplement_is_g_orthogonal_to_y() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5]);
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let basis = g_orthocomplement_basis(&g, &y);
        assert_eq!(basis.len(), 2);
        for (i, b) in basis.iter().enumerate() {
            assert!(((&g * b).dot(&y)).abs() < 1e-12);
            for (j, b2) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!((&g * b2).dot(b), want, epsilon = 1e-12);
            }
        }
    }
}
