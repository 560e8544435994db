//! Sprays and the geometric objects they induce.
//!
//! A spray is stored through its coefficients G^i(x, y), 2-homogeneous in y,
//! as a jet-evaluatable closure. Everything else is derived on demand:
//! nonlinear connection N^i_j = ∂G^i/∂y^j, Berwald coefficients
//! ∂²G^i/∂y^j∂y^k, Jacobi endomorphism, curvature tensor (two independent
//! routes), the dynamical covariant derivative on semi-basic one-forms, and
//! the horizontal covariant derivative of the lowered momenta.

use crate::autodiff::{
    derive_scalar_multi, derive_vector, derive_vector_multi, Jet, ScalarField,
};
use crate::chart::ChartPoint;
use crate::error::{GeomError, Result};
use crate::linalg::solve_jets;
use crate::models::{metric_tensor, FinslerModel};
use nalgebra::DMatrix;
use std::sync::Arc;

/// Euler-residual tolerance of the homogeneity certificate for custom sprays.
pub const HOMOGENEITY_CERT_TOL: f64 = 1e-6;

/// Where a spray came from; deformations keep a handle on their base so
/// chained deformations can be flattened.
#[derive(Clone)]
pub enum SpraySource {
    Finsler { model: FinslerModel },
    Custom,
    Deformed {
        base: Arc<SprayData>,
        factor: crate::projective::ProjectiveFactor,
    },
}

/// Spray coefficients with derivative access.
#[derive(Clone)]
pub struct SprayData {
    dim: usize,
    coeffs: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
    source: SpraySource,
    chart_box: Option<Vec<(f64, f64)>>,
}

impl SprayData {
    /// The geodesic spray of a Finsler model:
    /// G^i = ¼ g^{il} (y^k ∂²F²/∂y^l∂x^k − ∂F²/∂x^l),
    /// evaluated with a jet-valued linear solve so the coefficients stay
    /// differentiable to any remaining order.
    pub fn geodesic(model: &FinslerModel) -> SprayData {
        let dim = model.dim();
        let f2 = model.f_squared();
        let coeffs = move |c: &[Jet]| -> Vec<Jet> {
            let n = dim;
            let mut g = vec![vec![Jet::zero(); n]; n];
            for l in 0..n {
                for m in l..n {
                    let v = derive_scalar_multi(|cc| f2.eval_jets(cc), c, &[n + l, n + m])
                        .scale(0.5);
                    g[l][m] = v.clone();
                    g[m][l] = v;
                }
            }
            let mut rhs = Vec::with_capacity(n);
            for l in 0..n {
                let mut a = Jet::zero();
                for k in 0..n {
                    let d2 = derive_scalar_multi(|cc| f2.eval_jets(cc), c, &[n + l, k]);
                    a = &a + &(&c[n + k] * &d2);
                }
                let dx = derive_scalar_multi(|cc| f2.eval_jets(cc), c, &[l]);
                rhs.push((&a - &dx).scale(0.25));
            }
            solve_jets(&g, &rhs)
        };
        SprayData {
            dim,
            coeffs: Arc::new(coeffs),
            source: SpraySource::Finsler {
                model: model.clone(),
            },
            chart_box: Some(model.chart_box().to_vec()),
        }
    }

    /// A custom spray, accepted only with a passing homogeneity certificate:
    /// the Euler residual |y^j ∂G^i/∂y^j − 2G^i| must stay below
    /// [`HOMOGENEITY_CERT_TOL`] (relative to 1 + |G^i|) at every certificate
    /// point.
    pub fn custom(
        dim: usize,
        chart_box: Option<Vec<(f64, f64)>>,
        coeffs: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
        certificate_points: &[ChartPoint],
    ) -> Result<SprayData> {
        if certificate_points.is_empty() {
            return Err(GeomError::InvalidInput(
                "custom sprays need at least one homogeneity certificate point".into(),
            ));
        }
        let sp = SprayData {
            dim,
            coeffs: Arc::new(coeffs),
            source: SpraySource::Custom,
            chart_box,
        };
        let mut worst = 0.0f64;
        for p in certificate_points {
            worst = worst.max(euler_residual(&sp, p)?);
        }
        if worst > HOMOGENEITY_CERT_TOL {
            return Err(GeomError::HomogeneityCertificate {
                residual: worst,
                tolerance: HOMOGENEITY_CERT_TOL,
            });
        }
        Ok(sp)
    }

    pub(crate) fn from_parts(
        dim: usize,
        coeffs: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
        source: SpraySource,
        chart_box: Option<Vec<(f64, f64)>>,
    ) -> SprayData {
        SprayData {
            dim,
            coeffs,
            source,
            chart_box,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &SpraySource {
        &self.source
    }

    pub fn chart_box(&self) -> Option<&[(f64, f64)]> {
        self.chart_box.as_deref()
    }

    /// Short identifier for reports and trajectory files.
    pub fn id(&self) -> String {
        match &self.source {
            SpraySource::Finsler { model } => format!("geodesic:{}", model.name()),
            SpraySource::Custom => "custom".into(),
            SpraySource::Deformed { base, factor } => {
                format!("deformed({}, P={})", base.id(), factor.describe())
            }
        }
    }

    /// The underlying Finsler model when this spray is geodesic.
    pub fn finsler_model(&self) -> Option<&FinslerModel> {
        match &self.source {
            SpraySource::Finsler { model } => Some(model),
            _ => None,
        }
    }

    pub fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if p.n() != self.dim {
            return Err(GeomError::InvalidInput(format!(
                "point dimension {} does not match spray dimension {}",
                p.n(),
                self.dim
            )));
        }
        if let Some(bounds) = &self.chart_box {
            for (i, (&(lo, hi), &xi)) in bounds.iter().zip(p.x()).enumerate() {
                if xi < lo || xi > hi {
                    return Err(GeomError::DomainViolation(format!(
                        "x^{} = {} outside chart box [{}, {}]",
                        i + 1,
                        xi,
                        lo,
                        hi
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn coeffs_jets(&self, coords: &[Jet]) -> Vec<Jet> {
        (self.coeffs)(coords)
    }

    /// Coefficient values at a validated chart point.
    pub fn coefficients(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        self.check_point(p)?;
        let out: Vec<f64> = self.coeffs_jets(&p.jets()).iter().map(Jet::re).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::DomainViolation(format!(
                "non-finite spray coefficients at x = {:?}, y = {:?}",
                p.x(),
                p.y()
            )));
        }
        Ok(out)
    }

    /// Raw coefficient values without domain validation; used by the
    /// geodesic integrator which handles domain exits itself.
    pub fn coefficients_unchecked(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let coords: Vec<Jet> = x.iter().chain(y.iter()).map(|&v| Jet::real(v)).collect();
        self.coeffs_jets(&coords).iter().map(Jet::re).collect()
    }
}

/// Nonlinear connection N^i_j and Berwald coefficients G^i_{jk} at a point.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    /// N^i_j = ∂G^i/∂y^j, row i, column j.
    pub n_ij: DMatrix<f64>,
    /// berwald[i][(j, k)] = ∂²G^i/∂y^j∂y^k.
    pub berwald: Vec<DMatrix<f64>>,
}

/// Jacobi endomorphism R^i_j at a point.
#[derive(Clone, Debug)]
pub struct JacobiEndomorphism {
    pub r_ij: DMatrix<f64>,
}

/// Curvature tensor R^i_{jk} at a point; r_ijk[i][(j, k)].
#[derive(Clone, Debug)]
pub struct CurvatureTensor {
    pub r_ijk: Vec<DMatrix<f64>>,
}

/// Max Euler residual |y^j ∂G^i/∂y^j − 2 G^i| / (1 + |G^i|) at a point.
pub fn euler_residual(sp: &SprayData, p: &ChartPoint) -> Result<f64> {
    sp.check_point(p)?;
    let coords = p.jets();
    let n = sp.dim();
    let g = sp.coeffs_jets(&coords);
    let mut contracted = vec![0.0; n];
    for j in 0..n {
        let d = derive_vector(|c| sp.coeffs_jets(c), &coords, n + j);
        for i in 0..n {
            contracted[i] += p.y()[j] * d[i].re();
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let gi = g[i].re();
        if !gi.is_finite() || !contracted[i].is_finite() {
            return Err(GeomError::DomainViolation(
                "non-finite spray coefficients in homogeneity check".into(),
            ));
        }
        worst = worst.max((contracted[i] - 2.0 * gi).abs() / (1.0 + gi.abs()));
    }
    Ok(worst)
}

/// Connection and Berwald table at a point.
pub fn connection(sp: &SprayData, p: &ChartPoint) -> Result<ConnectionData> {
    sp.check_point(p)?;
    let coords = p.jets();
    let n = sp.dim();
    let mut n_ij = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = derive_vector(|c| sp.coeffs_jets(c), &coords, n + j);
        for i in 0..n {
            n_ij[(i, j)] = col[i].re();
        }
    }
    let mut berwald = vec![DMatrix::zeros(n, n); n];
    for j in 0..n {
        for k in j..n {
            let col = derive_vector_multi(|c| sp.coeffs_jets(c), &coords, &[n + j, n + k]);
            for i in 0..n {
                berwald[i][(j, k)] = col[i].re();
                berwald[i][(k, j)] = col[i].re();
            }
        }
    }
    if n_ij.iter().any(|v| !v.is_finite())
        || berwald.iter().any(|m| m.iter().any(|v| !v.is_finite()))
    {
        return Err(GeomError::DomainViolation(format!(
            "non-finite connection data at x = {:?}, y = {:?}",
            p.x(),
            p.y()
        )));
    }
    Ok(ConnectionData { n_ij, berwald })
}

/// Jacobi endomorphism entries as jets, flattened row-major (i·n + j). This
/// is the quoted local formula
/// R^i_j = 2 δG^i/δx^j − S(N^i_j) + N^i_k N^k_j
/// expanded in plain partials of G so it can be evaluated at any jet depth.
pub fn jacobi_jets(sp: &SprayData, coords: &[Jet]) -> Vec<Jet> {
    let n = sp.dim();
    let g = sp.coeffs_jets(coords);
    let mut dgdx: Vec<Vec<Jet>> = Vec::with_capacity(n); // [j][i] = ∂G^i/∂x^j
    for j in 0..n {
        dgdx.push(derive_vector(|c| sp.coeffs_jets(c), coords, j));
    }
    let mut n_cols: Vec<Vec<Jet>> = Vec::with_capacity(n); // [j][i] = N^i_j
    for j in 0..n {
        n_cols.push(derive_vector(|c| sp.coeffs_jets(c), coords, n + j));
    }
    // S(N^i_j) = y^k ∂²G^i/∂y^j∂x^k − 2 G^k ∂²G^i/∂y^j∂y^k
    let mut s_n: Vec<Vec<Jet>> = vec![vec![Jet::zero(); n]; n]; // [j][i]
    for j in 0..n {
        for k in 0..n {
            let d_yx = derive_vector_multi(|c| sp.coeffs_jets(c), coords, &[n + j, k]);
            let d_yy = derive_vector_multi(|c| sp.coeffs_jets(c), coords, &[n + j, n + k]);
            for i in 0..n {
                let term = &(&coords[n + k] * &d_yx[i]) - &(&g[k] * &d_yy[i]).scale(2.0);
                s_n[j][i] = &s_n[j][i] + &term;
            }
        }
    }
    let mut out = vec![Jet::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut nn = Jet::zero(); // N^i_k N^k_j
            for k in 0..n {
                nn = &nn + &(&n_cols[k][i] * &n_cols[j][k]);
            }
            out[i * n + j] = &(&dgdx[j][i].scale(2.0) - &s_n[j][i]) - &nn;
        }
    }
    out
}

/// Jacobi endomorphism at a point.
pub fn jacobi(sp: &SprayData, p: &ChartPoint) -> Result<JacobiEndomorphism> {
    sp.check_point(p)?;
    let n = sp.dim();
    let flat = jacobi_jets(sp, &p.jets());
    let mut r_ij = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = flat[i * n + j].re();
            if !v.is_finite() {
                return Err(GeomError::DomainViolation(format!(
                    "non-finite Jacobi endomorphism at x = {:?}, y = {:?}",
                    p.x(),
                    p.y()
                )));
            }
            r_ij[(i, j)] = v;
        }
    }
    Ok(JacobiEndomorphism { r_ij })
}

/// Curvature from the Jacobi endomorphism:
/// R^i_{jk} = ⅓ (∂R^i_k/∂y^j − ∂R^i_j/∂y^k).
pub fn curvature(sp: &SprayData, p: &ChartPoint) -> Result<CurvatureTensor> {
    sp.check_point(p)?;
    let n = sp.dim();
    let coords = p.jets();
    let mut dr: Vec<Vec<f64>> = Vec::with_capacity(n); // [l] -> flat ∂R/∂y^l
    for l in 0..n {
        let d = derive_vector(|c| jacobi_jets(sp, c), &coords, n + l);
        dr.push(d.iter().map(Jet::re).collect());
    }
    let mut r_ijk = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = (dr[j][i * n + k] - dr[k][i * n + j]) / 3.0;
                if !v.is_finite() {
                    return Err(GeomError::DomainViolation(
                        "non-finite curvature tensor".into(),
                    ));
                }
                r_ijk[i][(j, k)] = v;
            }
        }
    }
    Ok(CurvatureTensor { r_ijk })
}

/// Independent curvature route from the connection:
/// R^i_{jk} = δN^i_j/δx^k − δN^i_k/δx^j.
pub fn curvature_from_connection(sp: &SprayData, p: &ChartPoint) -> Result<CurvatureTensor> {
    sp.check_point(p)?;
    let n = sp.dim();
    let coords = p.jets();
    let conn = connection(sp, p)?;
    // ∂N^i_j/∂x^k = ∂²G^i/∂y^j∂x^k
    let mut dn_dx = vec![DMatrix::zeros(n, n); n]; // [i][(j, k)]
    for j in 0..n {
        for k in 0..n {
            let d = derive_vector_multi(|c| sp.coeffs_jets(c), &coords, &[n + j, k]);
            for i in 0..n {
                dn_dx[i][(j, k)] = d[i].re();
            }
        }
    }
    let delta = |i: usize, j: usize, k: usize| -> f64 {
        // δN^i_j/δx^k
        let mut v = dn_dx[i][(j, k)];
        for l in 0..n {
            v -= conn.n_ij[(l, k)] * conn.berwald[i][(j, l)];
        }
        v
    };
    let mut r_ijk = vec![DMatrix::zeros(n, n); n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                r_ijk[i][(j, k)] = delta(i, j, k) - delta(i, k, j);
            }
        }
    }
    Ok(CurvatureTensor { r_ijk })
}

/// The spray derivative S(f) = y^k ∂f/∂x^k − 2 G^k ∂f/∂y^k at a point.
pub fn spray_derivative(sp: &SprayData, f: &ScalarField, p: &ChartPoint) -> Result<f64> {
    sp.check_point(p)?;
    let n = sp.dim();
    let coords = p.jets();
    let g = sp.coefficients(p)?;
    let mut out = 0.0;
    for k in 0..n {
        let dx = derive_scalar_multi(|c| f.eval_jets(c), &coords, &[k]).re();
        let dy = derive_scalar_multi(|c| f.eval_jets(c), &coords, &[n + k]).re();
        out += p.y()[k] * dx - 2.0 * g[k] * dy;
    }
    if !out.is_finite() {
        return Err(GeomError::DomainViolation(
            "non-finite spray derivative".into(),
        ));
    }
    Ok(out)
}

/// Dynamical covariant derivative of the semi-basic one-form d_Jf:
/// component i is S(∂f/∂y^i) − N^j_i ∂f/∂y^j. Vanishes identically when f
/// is the Finsler function of the spray's model.
pub fn nabla_semibasic_dj(sp: &SprayData, f: &ScalarField, p: &ChartPoint) -> Result<Vec<f64>> {
    sp.check_point(p)?;
    let n = sp.dim();
    let coords = p.jets();
    let g = sp.coefficients(p)?;
    let conn = connection(sp, p)?;
    let df_dy: Vec<f64> = (0..n)
        .map(|i| derive_scalar_multi(|c| f.eval_jets(c), &coords, &[n + i]).re())
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // S(∂f/∂y^i) with second partials of f
        let mut s = 0.0;
        for k in 0..n {
            let d_yx = derive_scalar_multi(|c| f.eval_jets(c), &coords, &[n + i, k]).re();
            let d_yy = derive_scalar_multi(|c| f.eval_jets(c), &coords, &[n + i, n + k]).re();
            s += p.y()[k] * d_yx - 2.0 * g[k] * d_yy;
        }
        for j in 0..n {
            s -= conn.n_ij[(j, i)] * df_dy[j];
        }
        out.push(s);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(GeomError::DomainViolation(
            "non-finite covariant derivative".into(),
        ));
    }
    Ok(out)
}

/// ∇(d_J F) for the geodesic spray of a model.
pub fn nabla_djf_geodesic(m: &FinslerModel, p: &ChartPoint) -> Result<Vec<f64>> {
    let sp = SprayData::geodesic(m);
    nabla_semibasic_dj(&sp, m.f(), p)
}

/// Horizontal covariant derivative of the lowered momenta with respect to
/// the Berwald connection of the geodesic spray:
/// y_{i|j} = δy_i/δx^j − (∂N^k_i/∂y^j) y_k. Must vanish.
pub fn horizontal_covariant_y(m: &FinslerModel, p: &ChartPoint) -> Result<DMatrix<f64>> {
    m.check_point(p)?;
    let sp = SprayData::geodesic(m);
    let n = m.dim();
    let coords = p.jets();
    let f2 = m.f_squared();
    let conn = connection(&sp, p)?;
    let metric = metric_tensor(m, p)?;
    let ang = crate::models::angular_data(m, p)?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            // ∂y_i/∂x^j = ½ ∂²F²/∂y^i∂x^j
            let dyx = derive_scalar_multi(|c| f2.eval_jets(c), &coords, &[n + i, j]).re() / 2.0;
            // ∂y_i/∂y^l = g_il
            let mut v = dyx;
            for l in 0..n {
                v -= conn.n_ij[(l, j)] * metric.g[(i, l)];
            }
            for k in 0..n {
                v -= conn.berwald[k][(i, j)] * ang.y_lower[k];
            }
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Contraction residual of the defining equation of the geodesic spray:
/// max over l of |y^k ∂²F²/∂y^l∂x^k − ∂F²/∂x^l − 4 g_{lk} G^k|.
pub fn geodesic_equation_residual(m: &FinslerModel, sp: &SprayData, p: &ChartPoint) -> Result<f64> {
    m.check_point(p)?;
    let n = m.dim();
    let coords = p.jets();
    let f2 = m.f_squared();
    let g_coeffs = sp.coefficients(p)?;
    let metric = metric_tensor(m, p)?;
    let mut worst = 0.0f64;
    for l in 0..n {
        let mut a = 0.0;
        for k in 0..n {
            a += p.y()[k] * derive_scalar_multi(|c| f2.eval_jets(c), &coords, &[n + l, k]).re();
        }
        a -= derive_scalar_multi(|c| f2.eval_jets(c), &coords, &[l]).re();
        for k in 0..n {
            a -= 4.0 * metric.g[(l, k)] * g_coeffs[k];
        }
        worst = worst.max(a.abs());
    }
    Ok(worst)
}

/// Defect of the g-symmetry of the Jacobi endomorphism (the variational
/// symmetry condition): max entry of |g·R − (g·R)ᵀ|.
pub fn helmholtz_defect(g: &DMatrix<f64>, r_ij: &DMatrix<f64>) -> f64 {
    let gr = g * r_ij;
    let defect = &gr - gr.transpose();
    defect.amax()
}
