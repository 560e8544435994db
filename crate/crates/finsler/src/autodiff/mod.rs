//! Exact mixed partial derivatives of fields on chart domains.
//!
//! Fields are closures over [`Jet`] coordinates, so anything built from a
//! field — spray coefficients, horizontal frames, iterated Lie brackets —
//! remains differentiable to any remaining order. Public entry points accept
//! plain chart points and multi-indices of total order at most four; a
//! finite-difference oracle for cross-checking lives in [`fd`].

mod jet;

pub mod fd;

pub use jet::Jet;

use crate::chart::ChartPoint;
use crate::error::{GeomError, Result};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Highest total derivative order served by [`partial`].
pub const MAX_ORDER: usize = 4;

/// A real-valued field of the 2n chart coordinates (x then y), evaluatable
/// on jets of any depth.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>,
}

impl ScalarField {
    /// `dim` is the manifold dimension n; the closure receives 2n jets.
    pub fn new(dim: usize, eval: impl Fn(&[Jet]) -> Jet + Send + Sync + 'static) -> Self {
        assert!(dim >= 2, "chart fields need manifold dimension >= 2");
        ScalarField {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_jets(&self, coords: &[Jet]) -> Jet {
        (self.eval)(coords)
    }

    pub fn eval(&self, p: &ChartPoint) -> f64 {
        self.eval_jets(&p.jets()).re()
    }

    /// Evaluate on raw coordinates without chart-point validation; the
    /// integrators use this on interpolated states.
    pub fn eval_raw(&self, coords: &[f64]) -> f64 {
        let jets: Vec<Jet> = coords.iter().map(|&v| Jet::real(v)).collect();
        self.eval_jets(&jets).re()
    }

    /// The pointwise square, used for energy-type quantities.
    pub fn squared(&self) -> ScalarField {
        let inner = self.clone();
        ScalarField::new(self.dim, move |c| {
            let v = inner.eval_jets(c);
            &v * &v
        })
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        let inner = self.clone();
        ScalarField::new(self.dim, move |c| inner.eval_jets(c).scale(s))
    }

    /// Pointwise sum of two fields on the same chart.
    pub fn sum(a: &ScalarField, b: &ScalarField) -> ScalarField {
        assert_eq!(a.dim, b.dim);
        let (a, b) = (a.clone(), b.clone());
        ScalarField::new(a.dim(), move |c| a.eval_jets(c) + b.eval_jets(c))
    }
}

/// A vector field on the slashed tangent bundle: 2n components, the first n
/// along ∂/∂x and the last n along ∂/∂y.
#[derive(Clone)]
pub struct VectorFieldTM {
    dim: usize,
    eval: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl VectorFieldTM {
    pub fn new(dim: usize, eval: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static) -> Self {
        assert!(dim >= 2, "chart fields need manifold dimension >= 2");
        VectorFieldTM {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_jets(&self, coords: &[Jet]) -> Vec<Jet> {
        (self.eval)(coords)
    }

    pub fn eval(&self, p: &ChartPoint) -> Vec<f64> {
        self.eval_jets(&p.jets()).iter().map(Jet::re).collect()
    }

    /// Generator of fiber dilations: components (0, y).
    pub fn liouville(dim: usize) -> VectorFieldTM {
        VectorFieldTM::new(dim, move |c| {
            let mut out = vec![Jet::zero(); 2 * dim];
            out[dim..(2 * dim)].clone_from_slice(&c[dim..(2 * dim)]);
            out
        })
    }

    /// Apply the tangent structure to a component vector: (ξx, ξy) ↦ (0, ξx).
    pub fn apply_tangent_structure(dim: usize, components: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * dim];
        out[dim..(2 * dim)].copy_from_slice(&components[..dim]);
        out
    }
}

/// Orders of differentiation per chart coordinate; total order ≤ 4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndex {
    orders: Vec<u8>,
}

impl MultiIndex {
    /// All-zero multi-index on a chart of manifold dimension n (2n slots).
    pub fn zeros(n: usize) -> Self {
        MultiIndex {
            orders: vec![0; 2 * n],
        }
    }

    pub fn from_orders(orders: Vec<u8>) -> Self {
        MultiIndex { orders }
    }

    /// Bump the order in x^i.
    pub fn x(mut self, i: usize) -> Self {
        self.orders[i] += 1;
        self
    }

    /// Bump the order in y^i.
    pub fn y(mut self, i: usize) -> Self {
        let n = self.orders.len() / 2;
        self.orders[n + i] += 1;
        self
    }

    pub fn orders(&self) -> &[u8] {
        &self.orders
    }

    pub fn total(&self) -> usize {
        self.orders.iter().map(|&k| k as usize).sum()
    }

    /// Expanded list of coordinate directions, one entry per derivative.
    pub fn directions(&self) -> Vec<usize> {
        let mut dirs = Vec::with_capacity(self.total());
        for (coord, &k) in self.orders.iter().enumerate() {
            for _ in 0..k {
                dirs.push(coord);
            }
        }
        dirs
    }
}

/// Directional-derivative coefficient of `f` with one fresh generator per
/// entry of `dirs`, all seeded in a single evaluation. The result keeps the
/// depth of the incoming coordinates, so calls nest freely.
pub fn derive_scalar_multi<F>(f: F, coords: &[Jet], dirs: &[usize]) -> Jet
where
    F: Fn(&[Jet]) -> Jet,
{
    let base = coords.iter().map(|j| j.depth()).max().unwrap_or(0);
    let mut seeded = coords.to_vec();
    for (slot, &dir) in dirs.iter().enumerate() {
        seeded[dir].seed(base + slot as u32, 1.0);
    }
    let mut out = f(&seeded);
    for slot in (0..dirs.len()).rev() {
        out = out.extract(base + slot as u32);
    }
    out
}

/// Single directional derivative along coordinate `dir`.
pub fn derive_scalar<F>(f: F, coords: &[Jet], dir: usize) -> Jet
where
    F: Fn(&[Jet]) -> Jet,
{
    derive_scalar_multi(f, coords, &[dir])
}

/// Componentwise directional derivative of a vector-valued map.
pub fn derive_vector<F>(f: F, coords: &[Jet], dir: usize) -> Vec<Jet>
where
    F: Fn(&[Jet]) -> Vec<Jet>,
{
    derive_vector_multi(f, coords, &[dir])
}

/// Mixed directional derivative of a vector-valued map, one fresh generator
/// per entry of `dirs`, all in a single evaluation.
pub fn derive_vector_multi<F>(f: F, coords: &[Jet], dirs: &[usize]) -> Vec<Jet>
where
    F: Fn(&[Jet]) -> Vec<Jet>,
{
    let base = coords.iter().map(|j| j.depth()).max().unwrap_or(0);
    let mut seeded = coords.to_vec();
    for (slot, &dir) in dirs.iter().enumerate() {
        seeded[dir].seed(base + slot as u32, 1.0);
    }
    f(&seeded)
        .into_iter()
        .map(|mut j| {
            for slot in (0..dirs.len()).rev() {
                j = j.extract(base + slot as u32);
            }
            j
        })
        .collect()
}

fn validate(dim: usize, p: &ChartPoint, idx: &MultiIndex) -> Result<()> {
    if p.n() != dim {
        return Err(GeomError::InvalidInput(format!(
            "point dimension {} does not match field dimension {}",
            p.n(),
            dim
        )));
    }
    if idx.orders().len() != 2 * dim {
        return Err(GeomError::InvalidInput(format!(
            "multi-index has {} slots, chart has {}",
            idx.orders().len(),
            2 * dim
        )));
    }
    if idx.total() > MAX_ORDER {
        return Err(GeomError::InvalidInput(format!(
            "total derivative order {} exceeds the supported maximum {}",
            idx.total(),
            MAX_ORDER
        )));
    }
    Ok(())
}

/// Exact mixed partial of `f` at `p`: one evaluation on jets with a fresh
/// generator per derivative slot.
pub fn partial(f: &ScalarField, p: &ChartPoint, idx: &MultiIndex) -> Result<f64> {
    validate(f.dim(), p, idx)?;
    let v = derive_scalar_multi(|c| f.eval_jets(c), &p.jets(), &idx.directions());
    let out = v.re();
    if !out.is_finite() {
        return Err(GeomError::DomainViolation(format!(
            "non-finite partial derivative at x = {:?}, y = {:?}",
            p.x(),
            p.y()
        )));
    }
    Ok(out)
}

/// Full first-derivative matrix of a vector field: entry (a, b) is
/// ∂X^a/∂(coordinate b).
pub fn jacobian(field: &VectorFieldTM, p: &ChartPoint) -> Result<DMatrix<f64>> {
    if p.n() != field.dim() {
        return Err(GeomError::InvalidInput(format!(
            "point dimension {} does not match field dimension {}",
            p.n(),
            field.dim()
        )));
    }
    let coords = p.jets();
    let m = 2 * field.dim();
    let mut out = DMatrix::zeros(m, m);
    for b in 0..m {
        let col = derive_vector(|c| field.eval_jets(c), &coords, b);
        for a in 0..m {
            let v = col[a].re();
            if !v.is_finite() {
                return Err(GeomError::DomainViolation(format!(
                    "non-finite jacobian entry ({a}, {b}) at x = {:?}, y = {:?}",
                    p.x(),
                    p.y()
                )));
            }
            out[(a, b)] = v;
        }
    }
    Ok(out)
}
