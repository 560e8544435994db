//! Central finite differences with one Richardson extrapolation level.
//!
//! This is the independent cross-check oracle for the jet engine; it is not
//! used on any production path. Mixed partials use a tensor product of the
//! per-coordinate central stencils (each O(h²)), evaluated at two scales and
//! combined as (4·D(h/2) − D(h))/3.
//!
//! The base step grows with the total order: dividing by h^m amplifies
//! rounding noise by h^{-m}, so a fixed 1e-5 step that is fine at first
//! order would drown third-order differences in cancellation error.

use super::{MultiIndex, ScalarField, VectorFieldTM};
use crate::chart::ChartPoint;
use crate::error::{GeomError, Result};
use nalgebra::DMatrix;

/// Base step per total derivative order (scaled per coordinate by 1 + |c|).
fn base_step(total: usize) -> f64 {
    match total {
        0 | 1 => 1e-5,
        2 => 1e-4,
        3 => 1e-3,
        _ => 3e-3,
    }
}

/// Central stencil for the k-th derivative, as (offset, weight/h^k) pairs.
fn stencil(k: u8) -> &'static [(i32, f64)] {
    match k {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => unreachable!("stencil order above 4"),
    }
}

fn tensor_stencil<F>(f: &F, coords: &[f64], idx: &MultiIndex, steps: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    // Accumulate the tensor product one coordinate at a time.
    let mut nodes: Vec<(Vec<f64>, f64)> = vec![(coords.to_vec(), 1.0)];
    for (coord, &k) in idx.orders().iter().enumerate() {
        if k == 0 {
            continue;
        }
        let h = steps[coord];
        let mut next = Vec::with_capacity(nodes.len() * stencil(k).len());
        for (point, w) in &nodes {
            for &(offset, weight) in stencil(k) {
                let mut shifted = point.clone();
                shifted[coord] += offset as f64 * h;
                next.push((shifted, w * weight / h.powi(k as i32)));
            }
        }
        nodes = next;
    }
    nodes.iter().map(|(point, w)| w * f(point)).sum()
}

fn richardson<F>(f: &F, coords: &[f64], idx: &MultiIndex) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let h0 = base_step(idx.total());
    let steps: Vec<f64> = coords.iter().map(|c| h0 * (1.0 + c.abs())).collect();
    let half: Vec<f64> = steps.iter().map(|h| h / 2.0).collect();
    let coarse = tensor_stencil(f, coords, idx, &steps);
    let fine = tensor_stencil(f, coords, idx, &half);
    (4.0 * fine - coarse) / 3.0
}

/// Finite-difference estimate of the same mixed partial served by
/// [`super::partial`].
pub fn fd_partial(f: &ScalarField, p: &ChartPoint, idx: &MultiIndex) -> Result<f64> {
    if idx.orders().len() != 2 * f.dim() {
        return Err(GeomError::InvalidInput(format!(
            "multi-index has {} slots, chart has {}",
            idx.orders().len(),
            2 * f.dim()
        )));
    }
    let field = f.clone();
    let eval = move |c: &[f64]| {
        let jets: Vec<_> = c.iter().map(|&v| super::Jet::real(v)).collect();
        field.eval_jets(&jets).re()
    };
    let out = richardson(&eval, &p.coords(), idx);
    if !out.is_finite() {
        return Err(GeomError::DomainViolation(
            "finite-difference stencil left the field domain".into(),
        ));
    }
    Ok(out)
}

/// Finite-difference jacobian of a vector field, entry (a, b) = ∂X^a/∂z^b.
pub fn fd_jacobian(field: &VectorFieldTM, p: &ChartPoint) -> Result<DMatrix<f64>> {
    let m = 2 * field.dim();
    let coords = p.coords();
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        let f = field.clone();
        let eval = move |c: &[f64]| {
            let jets: Vec<_> = c.iter().map(|&v| super::Jet::real(v)).collect();
            f.eval_jets(&jets)[a].re()
        };
        for b in 0..m {
            let mut idx = MultiIndex::zeros(field.dim());
            idx = MultiIndex::from_orders({
                let mut o = idx.orders().to_vec();
                o[b] = 1;
                o
            });
            out[(a, b)] = richardson(&eval, &coords, &idx);
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::DomainViolation(
            "finite-difference stencil left the field domain".into(),
        ));
    }
    Ok(out)
}
