//! Finsler function catalog and the tensors derived directly from F.
//!
//! Built-in models: the Euclidean norm (flat), the hyperbolic half-space
//! F = |y| / x_last (Riemannian, constant curvature −1), and a Randers-type
//! perturbation F = |y| + b·y¹ (locally Minkowski, genuinely non-Riemannian
//! metric tensor for b ≠ 0).

use crate::autodiff::{derive_scalar_multi, Jet, MultiIndex, ScalarField};
use crate::chart::{sample_points, ChartPoint};
use crate::error::{GeomError, Result};
use crate::linalg::{singular_values, RANK_REL_TOL};
use nalgebra::{DMatrix, DVector};

/// Eigenvalue floor for the positive-definiteness check of the metric.
pub const METRIC_EIG_FLOOR: f64 = 1e-10;

/// Default annulus for random sampling, clear of the y → 0 singularity.
pub const SAMPLE_ANNULUS: (f64, f64) = (0.5, 2.0);

/// An evaluatable 1-homogeneous Finsler function with domain metadata.
#[derive(Clone)]
pub struct FinslerModel {
    name: String,
    dim: usize,
    f: ScalarField,
    chart_box: Vec<(f64, f64)>,
    known_flag_curvature: Option<f64>,
}

impl FinslerModel {
    /// F = |y| on ℝⁿ; flat, flag curvature 0.
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let f = ScalarField::new(dim, move |c| y_norm(c, dim));
        Ok(FinslerModel {
            name: "euclidean".into(),
            dim,
            f,
            chart_box: vec![(-2.0, 2.0); dim],
            known_flag_curvature: Some(0.0),
        })
    }

    /// Upper half-space model F = |y| / x_last; constant flag curvature −1.
    /// The chart box keeps the last coordinate in [0.5, 3].
    pub fn hyperbolic(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        let f = ScalarField::new(dim, move |c| &y_norm(c, dim) / &c[dim - 1]);
        let mut chart_box = vec![(-2.0, 2.0); dim];
        chart_box[dim - 1] = (0.5, 3.0);
        Ok(FinslerModel {
            name: "hyperbolic".into(),
            dim,
            f,
            chart_box,
            known_flag_curvature: Some(-1.0),
        })
    }

    /// Randers-type perturbation F = |y| + b·y¹. Regular precisely for
    /// |b| < 1; larger b is accepted here so the degeneracy surfaces as a
    /// regularity failure when the metric is requested.
    pub fn randers(dim: usize, b: f64) -> Result<Self> {
        check_dim(dim)?;
        if !b.is_finite() {
            return Err(GeomError::InvalidInput("randers parameter must be finite".into()));
        }
        let f = ScalarField::new(dim, move |c| y_norm(c, dim) + c[dim].scale(b));
        Ok(FinslerModel {
            name: format!("randers(b={b})"),
            dim,
            f,
            chart_box: vec![(-2.0, 2.0); dim],
            known_flag_curvature: Some(0.0),
        })
    }

    /// Wrap an arbitrary scalar field as a model. No validation beyond the
    /// dimension; intended for tests and custom experiments.
    pub fn custom(
        name: impl Into<String>,
        f: ScalarField,
        chart_box: Vec<(f64, f64)>,
        known_flag_curvature: Option<f64>,
    ) -> Result<Self> {
        let dim = f.dim();
        check_dim(dim)?;
        if chart_box.len() != dim {
            return Err(GeomError::InvalidInput(
                "chart box must have one interval per x coordinate".into(),
            ));
        }
        Ok(FinslerModel {
            name: name.into(),
            dim,
            f,
            chart_box,
            known_flag_curvature,
        })
    }

    /// Catalog lookup used by the CLI: "euclidean", "hyperbolic", "randers".
    pub fn by_name(name: &str, dim: usize, randers_b: Option<f64>) -> Result<Self> {
        match name {
            "euclidean" => Self::euclidean(dim),
            "hyperbolic" => Self::hyperbolic(dim),
            "randers" => Self::randers(dim, randers_b.unwrap_or(0.3)),
            other => Err(GeomError::InvalidInput(format!(
                "unknown model '{other}' (expected euclidean | hyperbolic | randers)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn f(&self) -> &ScalarField {
        &self.f
    }

    pub fn f_squared(&self) -> ScalarField {
        self.f.squared()
    }

    pub fn chart_box(&self) -> &[(f64, f64)] {
        &self.chart_box
    }

    pub fn known_flag_curvature(&self) -> Option<f64> {
        self.known_flag_curvature
    }

    /// Reject points outside the declared chart box (y ≠ 0 is already
    /// enforced by [`ChartPoint`]).
    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if p.n() != self.dim {
            return Err(GeomError::InvalidInput(format!(
                "point dimension {} does not match model dimension {}",
                p.n(),
                self.dim
            )));
        }
        for (i, (&(lo, hi), &xi)) in self.chart_box.iter().zip(p.x()).enumerate() {
            if xi < lo || xi > hi {
                return Err(GeomError::DomainViolation(format!(
                    "x^{} = {} outside chart box [{}, {}] of model {}",
                    i + 1,
                    xi,
                    lo,
                    hi,
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Deterministic sample of chart points inside the model's safe box.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<ChartPoint> {
        sample_points(&self.chart_box, SAMPLE_ANNULUS, count, seed)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(GeomError::InvalidInput(
            "models need manifold dimension at least 2".into(),
        ));
    }
    Ok(())
}

fn y_norm(c: &[Jet], dim: usize) -> Jet {
    let mut s = Jet::zero();
    for i in 0..dim {
        let yi = &c[dim + i];
        s = &s + &(yi * yi);
    }
    s.sqrt()
}

/// Metric tensor g_ij = ½ ∂²F²/∂y^i∂y^j at a point.
#[derive(Clone, Debug)]
pub struct MetricTensor {
    pub g: DMatrix<f64>,
}

impl MetricTensor {
    pub fn inverse(&self) -> DMatrix<f64> {
        self.g
            .clone()
            .try_inverse()
            .expect("metric passed the regularity check")
    }
}

/// Angular metric h_ij, its (1,1) form h^i_j, and the lowered momenta y_i.
#[derive(Clone, Debug)]
pub struct AngularData {
    pub h_lower: DMatrix<f64>,
    pub h_mixed: DMatrix<f64>,
    pub y_lower: DVector<f64>,
}

/// Homogeneity diagnostics for a model at a point.
#[derive(Clone, Copy, Debug)]
pub struct HomogeneityReport {
    /// max over λ ∈ {0.5, 2, 3} of |F(x, λy) − λF(x, y)|
    pub scaling_residual: f64,
    /// |y^i ∂F/∂y^i − F|
    pub euler_residual: f64,
}

/// Metric tensor at a point, with symmetry, finiteness, and
/// positive-definiteness enforced.
pub fn metric_tensor(m: &FinslerModel, p: &ChartPoint) -> Result<MetricTensor> {
    m.check_point(p)?;
    let g = metric_matrix(&m.f_squared(), p)?;
    let eig = g.clone().symmetric_eigen().eigenvalues;
    let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig <= METRIC_EIG_FLOOR {
        let sv = singular_values(&g);
        return Err(GeomError::RegularityFailure {
            smallest_singular_value: *sv.last().unwrap(),
            floor: METRIC_EIG_FLOOR,
        });
    }
    Ok(MetricTensor { g })
}

fn metric_matrix(f2: &ScalarField, p: &ChartPoint) -> Result<DMatrix<f64>> {
    let n = f2.dim();
    let coords = p.jets();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = derive_scalar_multi(|c| f2.eval_jets(c), &coords, &[n + i, n + j]).re() / 2.0;
            if !v.is_finite() {
                return Err(GeomError::DomainViolation(format!(
                    "non-finite metric entry ({i}, {j}) at x = {:?}, y = {:?}",
                    p.x(),
                    p.y()
                )));
            }
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Angular metric package at a point. Requires the metric to be regular.
pub fn angular_data(m: &FinslerModel, p: &ChartPoint) -> Result<AngularData> {
    let metric = metric_tensor(m, p)?;
    let n = m.dim();
    let coords = p.jets();
    let f_val = m.f().eval(p);

    let mut h_lower = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d2 = derive_scalar_multi(|c| m.f().eval_jets(c), &coords, &[n + i, n + j]).re();
            h_lower[(i, j)] = f_val * d2;
            h_lower[(j, i)] = h_lower[(i, j)];
        }
    }

    // y_i = ½ ∂F²/∂y^i
    let f2 = m.f_squared();
    let mut y_lower = DVector::zeros(n);
    for i in 0..n {
        y_lower[i] = derive_scalar_multi(|c| f2.eval_jets(c), &coords, &[n + i]).re() / 2.0;
    }

    // h^i_j = δ^i_j − y^i y_j / F²
    let mut h_mixed = DMatrix::identity(n, n);
    for i in 0..n {
        for j in 0..n {
            h_mixed[(i, j)] -= p.y()[i] * y_lower[j] / (f_val * f_val);
        }
    }

    // Keep `metric` alive for the regularity guarantee; rank facts about
    // h_lower are asserted by callers and tests against RANK_REL_TOL.
    let _ = metric;
    Ok(AngularData {
        h_lower,
        h_mixed,
        y_lower,
    })
}

/// Numerical rank of the angular metric (expected n − 1).
pub fn angular_rank(h_lower: &DMatrix<f64>) -> usize {
    crate::linalg::svd_rank(h_lower, RANK_REL_TOL)
}

/// Scaling and Euler residuals of positive 1-homogeneity at a point.
pub fn check_homogeneity(m: &FinslerModel, p: &ChartPoint) -> Result<HomogeneityReport> {
    m.check_point(p)?;
    let f = m.f();
    let base = f.eval(p);
    let mut scaling_residual = 0.0f64;
    for lambda in [0.5, 2.0, 3.0] {
        let scaled = ChartPoint::new(
            p.x().to_vec(),
            p.y().iter().map(|v| v * lambda).collect(),
        )?;
        scaling_residual = scaling_residual.max((f.eval(&scaled) - lambda * base).abs());
    }
    let coords = p.jets();
    let n = m.dim();
    let mut euler = 0.0;
    for i in 0..n {
        let df = derive_scalar_multi(|c| f.eval_jets(c), &coords, &[n + i]).re();
        euler += p.y()[i] * df;
    }
    Ok(HomogeneityReport {
        scaling_residual,
        euler_residual: (euler - base).abs(),
    })
}

/// Convenience: the multi-index helpers live in autodiff but tests mostly
/// want y-derivatives of model fields.
pub fn y_index(n: usize, i: usize) -> MultiIndex {
    MultiIndex::zeros(n).y(i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::fd::fd_partial;
    use approx::assert_relative_eq;

    fn pt(x: Vec<f64>, y: Vec<f64>) -> ChartPoint {
        ChartPoint::new(x, y).unwrap()
    }

    #[test]
    fn euclidean_metric_is_identity() {
        let m = FinslerModel::euclidean(2).unwrap();
        let g = metric_tensor(&m, &pt(vec![0.3, -0.4], vec![3.0, 4.0])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(g.g[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hyperbolic_metric_matches_hand_formula() {
        // g_ij = δ_ij / (x_last)²
        let m = FinslerModel::hyperbolic(2).unwrap();
        let g1 = metric_tensor(&m, &pt(vec![0.0, 1.0], vec![3.0, 4.0])).unwrap();
        let g2 = metric_tensor(&m, &pt(vec![0.0, 2.0], vec![3.0, 4.0])).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(g1.g[(i, j)], id, epsilon = 1e-10);
                assert_relative_eq!(g2.g[(i, j)], id / 4.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn hyperbolic_metric_cross_checked_by_fd() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let p = pt(vec![0.7, 1.3], vec![0.9, -1.1]);
        let f2 = m.f_squared();
        let g = metric_tensor(&m, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let idx = MultiIndex::zeros(2).y(i).y(j);
                let fd = fd_partial(&f2, &p, &idx).unwrap() / 2.0;
                assert_relative_eq!(g.g[(i, j)], fd, max_relative = 1e-6, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_randers_reports_regularity_failure() {
        // b = 1.25 with y on the F = 0 cone: the metric collapses to rank 1.
        let m = FinslerModel::randers(2, 1.25).unwrap();
        let p = pt(vec![0.0, 0.0], vec![-0.8, 0.6]);
        match metric_tensor(&m, &p) {
            Err(GeomError::RegularityFailure {
                smallest_singular_value,
                ..
            }) => assert!(smallest_singular_value.abs() < 1e-8),
            other => panic!("expected regularity failure, got {other:?}"),
        }
    }

    #[test]
    fn regular_randers_metric_is_positive_definite() {
        let m = FinslerModel::randers(2, 0.3).unwrap();
        for p in m.sample(50, 11) {
            metric_tensor(&m, &p).unwrap();
        }
    }

    #[test]
    fn euclidean_angular_mixed_matches_hand_values() {
        let m = FinslerModel::euclidean(2).unwrap();
        let a = angular_data(&m, &pt(vec![0.0, 0.0], vec![3.0, 4.0])).unwrap();
        let want = [[16.0 / 25.0, -12.0 / 25.0], [-12.0 / 25.0, 9.0 / 25.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(a.h_mixed[(i, j)], want[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angular_mixed_annihilates_y_for_all_models() {
        for m in [
            FinslerModel::euclidean(2).unwrap(),
            FinslerModel::hyperbolic(2).unwrap(),
            FinslerModel::randers(2, 0.3).unwrap(),
        ] {
            for p in m.sample(25, 3) {
                let a = angular_data(&m, &p).unwrap();
                let y = DVector::from_column_slice(p.y());
                let contracted = &a.h_mixed * &y;
                assert!(contracted.amax() < 1e-10, "model {}", m.name());
            }
        }
    }

    #[test]
    fn hyperbolic_angular_lower_matches_fd() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let p = pt(vec![0.0, 1.0], vec![3.0, 4.0]);
        let a = angular_data(&m, &p).unwrap();
        let f_val = m.f().eval(&p);
        for i in 0..2 {
            for j in 0..2 {
                let idx = MultiIndex::zeros(2).y(i).y(j);
                let fd = f_val * fd_partial(m.f(), &p, &idx).unwrap();
                assert_relative_eq!(a.h_lower[(i, j)], fd, max_relative = 1e-6, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn metric_decomposes_into_angular_plus_momenta() {
        // g = h + y ⊗ y / F² entrywise
        for m in [
            FinslerModel::euclidean(3).unwrap(),
            FinslerModel::hyperbolic(3).unwrap(),
            FinslerModel::randers(3, 0.3).unwrap(),
        ] {
            for p in m.sample(25, 5) {
                let g = metric_tensor(&m, &p).unwrap();
                let a = angular_data(&m, &p).unwrap();
                let f2 = m.f().eval(&p).powi(2);
                for i in 0..3 {
                    for j in 0..3 {
                        let rebuilt = a.h_lower[(i, j)] + a.y_lower[i] * a.y_lower[j] / f2;
                        assert!(
                            (g.g[(i, j)] - rebuilt).abs() < 1e-9,
                            "model {} entry ({i},{j})",
                            m.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lowered_momenta_agree_with_metric_contraction() {
        for m in [
            FinslerModel::hyperbolic(2).unwrap(),
            FinslerModel::randers(2, 0.3).unwrap(),
        ] {
            for p in m.sample(25, 9) {
                let g = metric_tensor(&m, &p).unwrap();
                let a = angular_data(&m, &p).unwrap();
                let y = DVector::from_column_slice(p.y());
                let gy = &g.g * &y;
                assert!((gy - &a.y_lower).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn angular_rank_is_n_minus_one() {
        for m in [
            FinslerModel::euclidean(3).unwrap(),
            FinslerModel::hyperbolic(3).unwrap(),
            FinslerModel::randers(3, 0.3).unwrap(),
        ] {
            for p in m.sample(20, 13) {
                let a = angular_data(&m, &p).unwrap();
                assert_eq!(angular_rank(&a.h_lower), 2, "model {}", m.name());
            }
        }
    }

    #[test]
    fn homogeneity_report_flags_broken_model() {
        let m = FinslerModel::euclidean(2).unwrap();
        let p = pt(vec![0.1, 0.1], vec![1.0, 2.0]);
        let r = check_homogeneity(&m, &p).unwrap();
        assert!(r.scaling_residual < 1e-14);
        assert!(r.euler_residual < 1e-14);

        let h = FinslerModel::hyperbolic(2).unwrap();
        let rh = check_homogeneity(&h, &pt(vec![0.0, 1.3], vec![0.7, -0.4])).unwrap();
        assert!(rh.scaling_residual < 1e-10);
        assert!(rh.euler_residual < 1e-10);

        // F + 1 is not 1-homogeneous: residuals must be visibly non-zero.
        let broken_f = {
            let f = h.f().clone();
            ScalarField::new(2, move |c| f.eval_jets(c) + 1.0)
        };
        let broken = FinslerModel::custom(
            "broken",
            broken_f,
            h.chart_box().to_vec(),
            None,
        )
        .unwrap();
        let rb = check_homogeneity(&broken, &pt(vec![0.0, 1.3], vec![0.7, -0.4])).unwrap();
        assert!(rb.scaling_residual > 0.4);
        assert!(rb.euler_residual > 0.4);
    }

    #[test]
    fn chart_box_is_enforced() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let outside = pt(vec![0.0, -1.0], vec![1.0, 0.0]);
        assert!(matches!(
            metric_tensor(&m, &outside),
            Err(GeomError::DomainViolation(_))
        ));
    }
}
