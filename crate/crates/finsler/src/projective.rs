//! Projective deformations S̃ = S − 2P𝔠 and their effect on the derived
//! geometry.
//!
//! In coefficients the deformation reads G̃^i = G^i + P·y^i for a
//! 1-homogeneous factor P. The module computes the deformed connection and
//! Jacobi endomorphism along two independent routes — directly from the
//! deformed coefficients, and from the closed transformation formulas in
//! terms of the base objects — plus the eigen analysis on the
//! g-orthocomplement of the flow direction and the admissibility condition
//! λ²F² + κ_α ≠ 0 that controls the scaling factors λ.

use crate::autodiff::{derive_scalar_multi, Jet, ScalarField};
use crate::chart::ChartPoint;
use crate::error::{GeomError, Result};
use crate::linalg::g_orthocomplement_basis;
use crate::models::{angular_data, metric_tensor, FinslerModel};
use crate::spray::{
    connection, jacobi, nabla_semibasic_dj, spray_derivative, ConnectionData, CurvatureTensor,
    SprayData, SpraySource,
};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Euler-residual tolerance certified for custom projective factors.
pub const FACTOR_CERT_TOL: f64 = 1e-8;

/// |S(F)| threshold used to detect a non-geodesic base where the scaled
/// formulas require the geodesic spray.
pub const GEODESIC_DETECT_TOL: f64 = 1e-6;

#[derive(Clone)]
pub enum FactorKind {
    /// P = λF for a catalog model.
    LambdaF { lambda: f64, model: FinslerModel },
    Custom,
}

/// A certified 1-homogeneous projective factor.
#[derive(Clone)]
pub struct ProjectiveFactor {
    field: ScalarField,
    kind: FactorKind,
    desc: String,
}

impl ProjectiveFactor {
    /// P = λF. Inherits 1-homogeneity from the model contract.
    pub fn lambda_f(lambda: f64, model: &FinslerModel) -> ProjectiveFactor {
        ProjectiveFactor {
            field: model.f().scaled(lambda),
            kind: FactorKind::LambdaF {
                lambda,
                model: model.clone(),
            },
            desc: format!("{lambda}*F[{}]", model.name()),
        }
    }

    /// A custom factor, accepted only when the Euler residual
    /// |y^i ∂P/∂y^i − P| stays below [`FACTOR_CERT_TOL`] at every
    /// certificate point.
    pub fn custom(
        desc: impl Into<String>,
        field: ScalarField,
        certificate_points: &[ChartPoint],
    ) -> Result<ProjectiveFactor> {
        if certificate_points.is_empty() {
            return Err(GeomError::InvalidInput(
                "projective factors need at least one certificate point".into(),
            ));
        }
        let n = field.dim();
        let mut worst = 0.0f64;
        for p in certificate_points {
            let coords = p.jets();
            let val = field.eval(p);
            let mut euler = 0.0;
            for i in 0..n {
                euler +=
                    p.y()[i] * derive_scalar_multi(|c| field.eval_jets(c), &coords, &[n + i]).re();
            }
            worst = worst.max((euler - val).abs());
        }
        if worst > FACTOR_CERT_TOL {
            return Err(GeomError::HomogeneityCertificate {
                residual: worst,
                tolerance: FACTOR_CERT_TOL,
            });
        }
        Ok(ProjectiveFactor {
            field,
            kind: FactorKind::Custom,
            desc: desc.into(),
        })
    }

    /// Pointwise sum; used to flatten chained deformations. Two λF factors
    /// over the same model stay a λF factor.
    pub fn sum(a: &ProjectiveFactor, b: &ProjectiveFactor) -> ProjectiveFactor {
        let kind = match (&a.kind, &b.kind) {
            (
                FactorKind::LambdaF { lambda: la, model: ma },
                FactorKind::LambdaF { lambda: lb, model: mb },
            ) if ma.name() == mb.name() => FactorKind::LambdaF {
                lambda: la + lb,
                model: ma.clone(),
            },
            _ => FactorKind::Custom,
        };
        ProjectiveFactor {
            field: ScalarField::sum(&a.field, &b.field),
            kind,
            desc: format!("{} + {}", a.desc, b.desc),
        }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn kind(&self) -> &FactorKind {
        &self.kind
    }

    pub fn lambda(&self) -> Option<f64> {
        match &self.kind {
            FactorKind::LambdaF { lambda, .. } => Some(*lambda),
            FactorKind::Custom => None,
        }
    }

    pub fn describe(&self) -> &str {
        &self.desc
    }
}

/// A base spray together with a factor and the deformed spray
/// G̃^i = G^i + P·y^i.
#[derive(Clone)]
pub struct DeformationContext {
    pub base: SprayData,
    pub factor: ProjectiveFactor,
    pub deformed: SprayData,
}

/// Apply the projective deformation. Deforming an already deformed spray
/// flattens onto the original base with the summed factor, which keeps
/// repeated deformations exactly associative in coefficients.
pub fn deform(base: &SprayData, factor: &ProjectiveFactor) -> DeformationContext {
    let (eff_base, eff_factor) = match base.source() {
        SpraySource::Deformed { base: inner, factor: prev } => (
            inner.as_ref().clone(),
            ProjectiveFactor::sum(prev, factor),
        ),
        _ => (base.clone(), factor.clone()),
    };
    let dim = eff_base.dim();
    let inner = eff_base.clone();
    let p_field = eff_factor.field().clone();
    let coeffs = move |c: &[Jet]| -> Vec<Jet> {
        let mut g = inner.coeffs_jets(c);
        let p = p_field.eval_jets(c);
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = &*gi + &(&p * &c[dim + i]);
        }
        g
    };
    let chart_box = eff_base.chart_box().map(|b| b.to_vec());
    let deformed = SprayData::from_parts(
        dim,
        Arc::new(coeffs),
        SpraySource::Deformed {
            base: Arc::new(eff_base.clone()),
            factor: eff_factor.clone(),
        },
        chart_box,
    );
    DeformationContext {
        base: eff_base,
        factor: eff_factor,
        deformed,
    }
}

/// Deformed connection: direct ∂G̃^i/∂y^j against the transformation formula
/// Ñ^i_j = N^i_j + P δ^i_j + y^i ∂P/∂y^j. Returns the direct data and the
/// max entrywise discrepancy.
pub fn deformed_connection(
    ctx: &DeformationContext,
    p: &ChartPoint,
) -> Result<(ConnectionData, f64)> {
    let direct = connection(&ctx.deformed, p)?;
    let base_conn = connection(&ctx.base, p)?;
    let n = ctx.base.dim();
    let coords = p.jets();
    let pf = ctx.factor.field();
    let p_val = pf.eval(p);
    let mut formula = base_conn.n_ij.clone();
    for i in 0..n {
        for j in 0..n {
            let dp = derive_scalar_multi(|c| pf.eval_jets(c), &coords, &[n + j]).re();
            formula[(i, j)] += if i == j { p_val } else { 0.0 };
            formula[(i, j)] += p.y()[i] * dp;
        }
    }
    let discrepancy = (&direct.n_ij - &formula).amax();
    Ok((direct, discrepancy))
}

/// Both routes to the deformed Jacobi endomorphism.
#[derive(Clone, Debug)]
pub struct DeformedJacobi {
    pub direct: DMatrix<f64>,
    pub formula: DMatrix<f64>,
    pub max_discrepancy: f64,
}

/// General-factor route:
/// R̃^i_j = R^i_j + (P² − S(P)) δ^i_j
///        + (2 δP/δx^j − P ∂P/∂y^j − ∇(∂P/∂y^j)) y^i,
/// all built from base-spray objects, against the direct evaluation on the
/// deformed spray.
pub fn deformed_jacobi_general(ctx: &DeformationContext, p: &ChartPoint) -> Result<DeformedJacobi> {
    let n = ctx.base.dim();
    let coords = p.jets();
    let pf = ctx.factor.field();

    let direct = jacobi(&ctx.deformed, p)?.r_ij;

    let base_jac = jacobi(&ctx.base, p)?.r_ij;
    let base_conn = connection(&ctx.base, p)?;
    let p_val = pf.eval(p);
    let s_p = spray_derivative(&ctx.base, pf, p)?;
    let nabla_dp = nabla_semibasic_dj(&ctx.base, pf, p)?;
    let dp_dy: Vec<f64> = (0..n)
        .map(|i| derive_scalar_multi(|c| pf.eval_jets(c), &coords, &[n + i]).re())
        .collect();
    let dp_dx: Vec<f64> = (0..n)
        .map(|i| derive_scalar_multi(|c| pf.eval_jets(c), &coords, &[i]).re())
        .collect();

    let mut formula = base_jac.clone();
    for j in 0..n {
        // δP/δx^j = ∂P/∂x^j − N^k_j ∂P/∂y^k
        let mut delta_p = dp_dx[j];
        for k in 0..n {
            delta_p -= base_conn.n_ij[(k, j)] * dp_dy[k];
        }
        let semi_basic = 2.0 * delta_p - p_val * dp_dy[j] - nabla_dp[j];
        for i in 0..n {
            if i == j {
                formula[(i, j)] += p_val * p_val - s_p;
            }
            formula[(i, j)] += semi_basic * p.y()[i];
        }
    }
    let max_discrepancy = (&direct - &formula).amax();
    Ok(DeformedJacobi {
        direct,
        formula,
        max_discrepancy,
    })
}

fn require_geodesic_lambda_f(ctx: &DeformationContext, p: &ChartPoint) -> Result<(f64, FinslerModel)> {
    let (lambda, model) = match ctx.factor.kind() {
        FactorKind::LambdaF { lambda, model } => (*lambda, model.clone()),
        FactorKind::Custom => {
            return Err(GeomError::InvalidInput(
                "this route needs a P = lambda*F factor".into(),
            ))
        }
    };
    let sf = spray_derivative(&ctx.base, model.f(), p)?;
    if sf.abs() > GEODESIC_DETECT_TOL {
        return Err(GeomError::NotGeodesic { residual: sf.abs() });
    }
    Ok((lambda, model))
}

/// Scaled-factor route for P = λF on the geodesic spray of the model:
/// R̃^i_j = R^i_j + λ²F² h^i_j.
pub fn deformed_jacobi_finsler(ctx: &DeformationContext, p: &ChartPoint) -> Result<DeformedJacobi> {
    let (lambda, model) = require_geodesic_lambda_f(ctx, p)?;
    let direct = jacobi(&ctx.deformed, p)?.r_ij;
    let base_jac = jacobi(&ctx.base, p)?.r_ij;
    let ang = angular_data(&model, p)?;
    let f2 = model.f().eval(p).powi(2);
    let formula = &base_jac + ang.h_mixed.scale(lambda * lambda * f2);
    let max_discrepancy = (&direct - &formula).amax();
    Ok(DeformedJacobi {
        direct,
        formula,
        max_discrepancy,
    })
}

/// Scaled-factor curvature route:
/// R̃^i_{jk} = R^i_{jk} + λ²F (∂F/∂y^j δ^i_k − ∂F/∂y^k δ^i_j).
/// Returns the direct tensor and the max entrywise discrepancy.
pub fn deformed_curvature_finsler(
    ctx: &DeformationContext,
    p: &ChartPoint,
) -> Result<(CurvatureTensor, f64)> {
    let (lambda, model) = require_geodesic_lambda_f(ctx, p)?;
    let n = ctx.base.dim();
    let direct = crate::spray::curvature(&ctx.deformed, p)?;
    let base = crate::spray::curvature(&ctx.base, p)?;
    let coords = p.jets();
    let f_val = model.f().eval(p);
    let df_dy: Vec<f64> = (0..n)
        .map(|i| derive_scalar_multi(|c| model.f().eval_jets(c), &coords, &[n + i]).re())
        .collect();
    let scale = lambda * lambda * f_val;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = base.r_ijk[i][(j, k)];
                if i == k {
                    v += scale * df_dy[j];
                }
                if i == j {
                    v -= scale * df_dy[k];
                }
                worst = worst.max((direct.r_ijk[i][(j, k)] - v).abs());
            }
        }
    }
    Ok((direct, worst))
}

/// Eigen data of the Jacobi endomorphism restricted to the
/// g-orthocomplement of the flow direction.
#[derive(Clone, Debug)]
pub struct EigenData {
    /// n − 1 eigenvalues, ascending.
    pub kappas: Vec<f64>,
    /// g-orthonormal horizontal eigenvectors, g-orthogonal to y.
    pub eigvecs: Vec<DVector<f64>>,
    /// The flow direction (eigenvalue zero).
    pub zero_mode: DVector<f64>,
}

/// Spectrum of an endomorphism `r` that is g-symmetric and annihilates `y`,
/// restricted to the g-orthocomplement of `y`. Fails when the symmetry
/// defect exceeds `symmetry_tol`.
pub fn eigen_spectrum(
    g: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
    symmetry_tol: f64,
) -> Result<EigenData> {
    let defect = crate::spray::helmholtz_defect(g, r);
    let scale = 1.0 + (g * r).amax();
    if defect > symmetry_tol * scale {
        return Err(GeomError::NotMetrizableInput {
            defect,
            tolerance: symmetry_tol,
        });
    }
    let basis = g_orthocomplement_basis(g, y);
    let m = basis.len();
    let mut restricted = DMatrix::zeros(m, m);
    for (a, ba) in basis.iter().enumerate() {
        for (b, bb) in basis.iter().enumerate() {
            restricted[(a, b)] = (g * (r * bb)).dot(ba);
        }
    }
    // Symmetrize away the residual defect before the eigen solve.
    let sym = (restricted.clone() + restricted.transpose()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut kappas = Vec::with_capacity(m);
    let mut eigvecs = Vec::with_capacity(m);
    for &idx in &order {
        kappas.push(eig.eigenvalues[idx]);
        let mut v = DVector::zeros(y.len());
        for (b, bb) in basis.iter().enumerate() {
            v += bb * eig.eigenvectors[(b, idx)];
        }
        eigvecs.push(v);
    }
    Ok(EigenData {
        kappas,
        eigvecs,
        zero_mode: y.clone(),
    })
}

/// Eigen analysis of the geodesic spray of a model at a point.
pub fn eigen_analysis(m: &FinslerModel, p: &ChartPoint) -> Result<EigenData> {
    let sp = SprayData::geodesic(m);
    let g = metric_tensor(m, p)?;
    let r = jacobi(&sp, p)?;
    let y = DVector::from_column_slice(p.y());
    eigen_spectrum(&g.g, &r.r_ij, &y, 1e-6)
}

/// Admissibility verdict for one candidate λ.
#[derive(Clone, Debug)]
pub struct LambdaVerdict {
    pub lambda: f64,
    /// λ ≠ 0 and λ²F² + κ_α stays away from zero for every α.
    pub admissible: bool,
    /// min over α of |λ²F² + κ_α|.
    pub margin: f64,
    /// For constant-flag-curvature models: the κ + λ² ≠ 0 form.
    pub kl_admissible: Option<bool>,
}

/// Check λ²F² + κ_α ≠ 0 for each candidate (|·| > 1e-9·F²); λ = 0 is
/// rejected by convention. When the constant flag curvature κ is known the
/// κ + λ² ≠ 0 form is reported alongside.
pub fn admissible_lambda(
    eig: &EigenData,
    f_val: f64,
    kappa: Option<f64>,
    candidates: &[f64],
) -> Vec<LambdaVerdict> {
    let f2 = f_val * f_val;
    candidates
        .iter()
        .map(|&lambda| {
            let margin = eig
                .kappas
                .iter()
                .map(|&k| (lambda * lambda * f2 + k).abs())
                .fold(f64::INFINITY, f64::min);
            let admissible = lambda != 0.0 && margin > 1e-9 * f2;
            let kl_admissible = kappa.map(|k| {
                lambda != 0.0 && (k + lambda * lambda).abs() > 1e-9 * (1.0 + lambda * lambda + k.abs())
            });
            LambdaVerdict {
                lambda,
                admissible,
                margin,
                kl_admissible,
            }
        })
        .collect()
}
