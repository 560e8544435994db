//! Named tolerance checks over point batches, shared by the CLI reports.
//!
//! Every check carries the worst observed value across the batch, the
//! tolerance it was held to, and the verdict. Anchors are stable slugs
//! naming the identity being exercised.

use crate::autodiff::{fd::fd_partial, partial, MultiIndex};
use crate::batch::map_points;
use crate::chart::ChartPoint;
use crate::error::Result;
use crate::linalg::{singular_values, RANK_REL_TOL};
use crate::models::{angular_data, check_homogeneity, metric_tensor, FinslerModel};
use crate::projective::{
    admissible_lambda, deform, deformed_connection, deformed_curvature_finsler,
    deformed_jacobi_finsler, deformed_jacobi_general, eigen_analysis, eigen_spectrum,
    ProjectiveFactor,
};
use crate::spray::{
    connection, curvature, curvature_from_connection, euler_residual, geodesic_equation_residual,
    helmholtz_defect, jacobi, nabla_semibasic_dj, spray_derivative, SprayData,
};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// One verified identity: worst value over the batch against its tolerance.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub anchor: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when the value stays at or below the tolerance.
    pub fn le(name: impl Into<String>, anchor: &'static str, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            anchor,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Passes when the value stays at or above the tolerance (margins).
    pub fn ge(name: impl Into<String>, anchor: &'static str, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            anchor,
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }
}

/// Tolerance table with the pinned defaults; any entry can be overridden
/// from a config file.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub ad_vs_fd: f64,
    pub homogeneity: f64,
    pub metric_decomposition: f64,
    pub rank_rel: f64,
    pub momenta: f64,
    pub geodesic_equation: f64,
    pub connection_contraction: f64,
    pub berwald_symmetry: f64,
    pub jacobi_flow: f64,
    pub curvature_routes: f64,
    pub curvature_contraction: f64,
    pub covariant_momenta: f64,
    pub flow_preserves_f: f64,
    pub nabla_djf: f64,
    pub helmholtz: f64,
    pub ladder: f64,
    pub deform_formula: f64,
    pub deformed_connection: f64,
    pub deformed_euler: f64,
    pub s_of_p: f64,
    pub eigen_shift: f64,
    pub liouville: f64,
    pub obstruction_absent: f64,
    pub witness_rel: f64,
    pub path_equivalence: f64,
    pub f_drift_min: f64,
    pub reparam_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ad_vs_fd: 1e-5,
            homogeneity: 1e-10,
            metric_decomposition: 1e-9,
            rank_rel: RANK_REL_TOL,
            momenta: 1e-10,
            geodesic_equation: 1e-8,
            connection_contraction: 1e-9,
            berwald_symmetry: 1e-9,
            jacobi_flow: 1e-8,
            curvature_routes: 1e-7,
            curvature_contraction: 1e-8,
            covariant_momenta: 1e-8,
            flow_preserves_f: 1e-9,
            nabla_djf: 1e-8,
            helmholtz: 1e-8,
            ladder: 1e-8,
            deform_formula: 1e-7,
            deformed_connection: 1e-8,
            deformed_euler: 1e-9,
            s_of_p: 1e-9,
            eigen_shift: 1e-7,
            liouville: 1e-6,
            obstruction_absent: 0.5,
            witness_rel: 1e-5,
            path_equivalence: 1e-5,
            f_drift_min: 1e-2,
            reparam_rel: 1e-6,
        }
    }
}

fn fold_max(values: Vec<Result<f64>>) -> Result<f64> {
    let mut worst = 0.0f64;
    for v in values {
        worst = worst.max(v?);
    }
    Ok(worst)
}

fn fold_min(values: Vec<Result<f64>>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for v in values {
        best = best.min(v?);
    }
    Ok(best)
}

/// All multi-indices with 1 ≤ total ≤ `max_total` on a 2n-slot chart.
pub fn multi_indices_up_to(n: usize, max_total: usize) -> Vec<MultiIndex> {
    let slots = 2 * n;
    let mut out = Vec::new();
    let mut orders = vec![0u8; slots];
    fn rec(orders: &mut Vec<u8>, slot: usize, left: usize, out: &mut Vec<MultiIndex>) {
        if slot == orders.len() {
            if orders.iter().any(|&k| k > 0) {
                out.push(MultiIndex::from_orders(orders.clone()));
            }
            return;
        }
        for k in 0..=left {
            orders[slot] = k as u8;
            rec(orders, slot + 1, left - k, out);
        }
        orders[slot] = 0;
    }
    rec(&mut orders, 0, max_total, &mut out);
    out
}

/// Worst relative disagreement between the jet engine and the
/// finite-difference oracle over all partials of total order ≤ 3.
pub fn ad_fd_suite(m: &FinslerModel, pts: &[ChartPoint], tol: &Tolerances) -> Result<Vec<Check>> {
    let indices = multi_indices_up_to(m.dim(), 3);
    let worst = fold_max(map_points(pts, |p| -> Result<f64> {
        let mut w = 0.0f64;
        for idx in &indices {
            let ad = partial(m.f(), p, idx)?;
            let fd = fd_partial(m.f(), p, idx)?;
            w = w.max((ad - fd).abs() / (1.0 + ad.abs()));
        }
        Ok(w)
    }))?;
    Ok(vec![Check::le(
        "ad-matches-fd-order-le-3",
        "derivative-engine-cross-check",
        worst,
        tol.ad_vs_fd,
    )])
}

/// The structural identity suite for one model over a point batch.
pub fn identity_suite(
    m: &FinslerModel,
    pts: &[ChartPoint],
    tol: &Tolerances,
) -> Result<Vec<Check>> {
    let sp = SprayData::geodesic(m);
    let n = m.dim();

    struct PointData {
        homogeneity: f64,
        decomposition: f64,
        metric_rank_margin: f64,
        angular_rank_gap: f64,
        angular_rank_null: f64,
        momenta: f64,
        geodesic_eq: f64,
        connection_contraction: f64,
        berwald_symmetry: f64,
        jacobi_flow: f64,
        curvature_routes: f64,
        curvature_contraction: f64,
        covariant_momenta: f64,
        flow_preserves_f: f64,
        nabla_djf: f64,
        helmholtz: f64,
        ladder: f64,
    }

    let per_point = map_points(pts, |p| -> Result<PointData> {
        let hom = check_homogeneity(m, p)?;
        let metric = metric_tensor(m, p)?;
        let ang = angular_data(m, p)?;
        let f_val = m.f().eval(p);
        let f2 = f_val * f_val;

        let mut decomposition = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let rebuilt = ang.h_lower[(i, j)] + ang.y_lower[i] * ang.y_lower[j] / f2;
                decomposition = decomposition.max((metric.g[(i, j)] - rebuilt).abs());
            }
        }

        let sv_g = singular_values(&metric.g);
        let metric_rank_margin = sv_g.last().unwrap() / sv_g[0];
        let sv_h = singular_values(&ang.h_lower);
        let angular_rank_gap = sv_h[n - 2] / sv_h[0];
        let angular_rank_null = sv_h[n - 1] / sv_h[0];

        let y = DVector::from_column_slice(p.y());
        let momenta = ((&metric.g * &y) - &ang.y_lower)
            .amax()
            .max((&ang.h_mixed * &y).amax());

        let geodesic_eq = geodesic_equation_residual(m, &sp, p)?;

        let conn = connection(&sp, p)?;
        let g_coeffs = sp.coefficients(p)?;
        let mut connection_contraction = 0.0f64;
        for i in 0..n {
            let ny: f64 = (0..n).map(|j| conn.n_ij[(i, j)] * p.y()[j]).sum();
            connection_contraction = connection_contraction
                .max((ny - 2.0 * g_coeffs[i]).abs() / (1.0 + g_coeffs[i].abs()));
        }
        let berwald_symmetry = (0..n)
            .map(|i| (&conn.berwald[i] - conn.berwald[i].transpose()).amax())
            .fold(0.0, f64::max);

        let jac = jacobi(&sp, p)?;
        let jacobi_flow = (&jac.r_ij * &y).amax() / (1.0 + jac.r_ij.amax());

        let curv = curvature(&sp, p)?;
        let curv_alt = curvature_from_connection(&sp, p)?;
        let scale_r = 1.0 + curv.r_ijk.iter().map(|m| m.amax()).fold(0.0, f64::max);
        let curvature_routes = (0..n)
            .map(|i| (&curv.r_ijk[i] - &curv_alt.r_ijk[i]).amax())
            .fold(0.0, f64::max)
            / scale_r;
        let mut curvature_contraction = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let contracted: f64 = (0..n).map(|k| curv.r_ijk[i][(k, j)] * p.y()[k]).sum();
                curvature_contraction = curvature_contraction
                    .max((contracted - jac.r_ij[(i, j)]).abs() / (1.0 + jac.r_ij.amax()));
            }
        }

        let covariant_momenta = crate::spray::horizontal_covariant_y(m, p)?.amax();
        let flow_preserves_f = spray_derivative(&sp, m.f(), p)?.abs();
        let nabla = nabla_semibasic_dj(&sp, m.f(), p)?;
        let nabla_djf = nabla.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let helmholtz = helmholtz_defect(&metric.g, &jac.r_ij) / (1.0 + jac.r_ij.amax());

        // homogeneity ladder at λ = 2: exponents 1, 2, 1, 2, 1 for
        // F, G, N, Φ, R
        let p2 = ChartPoint::new(p.x().to_vec(), p.y().iter().map(|v| 2.0 * v).collect())?;
        let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs().max(b.abs()));
        let mut ladder = rel(m.f().eval(&p2), 2.0 * f_val);
        let g2 = sp.coefficients(&p2)?;
        for i in 0..n {
            ladder = ladder.max(rel(g2[i], 4.0 * g_coeffs[i]));
        }
        let conn2 = connection(&sp, &p2)?;
        ladder = ladder.max(
            (&conn2.n_ij - conn.n_ij.scale(2.0)).amax() / (1.0 + conn.n_ij.amax().max(1.0)),
        );
        let jac2 = jacobi(&sp, &p2)?;
        ladder = ladder
            .max((&jac2.r_ij - jac.r_ij.scale(4.0)).amax() / (1.0 + jac.r_ij.amax().max(1.0)));
        let curv2 = curvature(&sp, &p2)?;
        for i in 0..n {
            ladder = ladder.max(
                (&curv2.r_ijk[i] - curv.r_ijk[i].scale(2.0)).amax()
                    / (1.0 + curv.r_ijk[i].amax().max(1.0)),
            );
        }

        Ok(PointData {
            homogeneity: hom.scaling_residual.max(hom.euler_residual),
            decomposition,
            metric_rank_margin,
            angular_rank_gap,
            angular_rank_null,
            momenta,
            geodesic_eq,
            connection_contraction,
            berwald_symmetry,
            jacobi_flow,
            curvature_routes,
            curvature_contraction,
            covariant_momenta,
            flow_preserves_f,
            nabla_djf,
            helmholtz,
            ladder,
        })
    });

    let mut data = Vec::with_capacity(per_point.len());
    for d in per_point {
        data.push(d?);
    }
    let max = |f: fn(&PointData) -> f64| data.iter().map(f).fold(0.0f64, f64::max);
    let min = |f: fn(&PointData) -> f64| data.iter().map(f).fold(f64::INFINITY, f64::min);

    Ok(vec![
        Check::le(
            "finsler-homogeneity",
            "positive-1-homogeneity",
            max(|d| d.homogeneity),
            tol.homogeneity,
        ),
        Check::le(
            "metric-decomposition",
            "metric-equals-angular-plus-momenta",
            max(|d| d.decomposition),
            tol.metric_decomposition,
        ),
        Check::ge(
            "metric-rank-margin",
            "metric-regularity",
            min(|d| d.metric_rank_margin),
            tol.rank_rel,
        ),
        Check::ge(
            "angular-rank-gap",
            "angular-metric-corank-one",
            min(|d| d.angular_rank_gap),
            tol.rank_rel,
        ),
        Check::le(
            "angular-rank-null",
            "angular-metric-corank-one",
            max(|d| d.angular_rank_null),
            tol.rank_rel,
        ),
        Check::le(
            "momenta-consistency",
            "lowered-momenta-and-angular-annihilation",
            max(|d| d.momenta),
            tol.momenta,
        ),
        Check::le(
            "geodesic-equation-residual",
            "energy-euler-lagrange-contraction",
            max(|d| d.geodesic_eq),
            tol.geodesic_equation,
        ),
        Check::le(
            "connection-contraction",
            "connection-from-coefficients",
            max(|d| d.connection_contraction),
            tol.connection_contraction,
        ),
        Check::le(
            "berwald-symmetry",
            "berwald-coefficients-symmetric",
            max(|d| d.berwald_symmetry),
            tol.berwald_symmetry,
        ),
        Check::le(
            "jacobi-annihilates-flow",
            "jacobi-endomorphism-flow-kernel",
            max(|d| d.jacobi_flow),
            tol.jacobi_flow,
        ),
        Check::le(
            "curvature-route-equivalence",
            "curvature-two-routes",
            max(|d| d.curvature_routes),
            tol.curvature_routes,
        ),
        Check::le(
            "curvature-contracts-to-jacobi",
            "curvature-jacobi-contraction",
            max(|d| d.curvature_contraction),
            tol.curvature_contraction,
        ),
        Check::le(
            "horizontal-covariant-momenta",
            "momenta-parallel-along-horizontal",
            max(|d| d.covariant_momenta),
            tol.covariant_momenta,
        ),
        Check::le(
            "flow-preserves-f",
            "geodesic-flow-conserves-f",
            max(|d| d.flow_preserves_f),
            tol.flow_preserves_f,
        ),
        Check::le(
            "nabla-djf-vanishes",
            "dynamical-derivative-of-djf",
            max(|d| d.nabla_djf),
            tol.nabla_djf,
        ),
        Check::le(
            "helmholtz-symmetry",
            "jacobi-g-symmetric",
            max(|d| d.helmholtz),
            tol.helmholtz,
        ),
        Check::le(
            "homogeneity-ladder",
            "fiber-scaling-exponents",
            max(|d| d.ladder),
            tol.ladder,
        ),
    ])
}

/// Deformation identity suite for one model and a λ sweep.
pub fn deform_suite(
    m: &FinslerModel,
    pts: &[ChartPoint],
    lambdas: &[f64],
    tol: &Tolerances,
) -> Result<Vec<Check>> {
    let base = SprayData::geodesic(m);
    let mut checks = Vec::new();
    for &lambda in lambdas {
        let ctx = deform(&base, &ProjectiveFactor::lambda_f(lambda, m));
        let tag = |name: &str| format!("{name}[lambda={lambda}]");

        let eulers = fold_max(map_points(pts, |p| euler_residual(&ctx.deformed, p)))?;
        checks.push(Check::le(
            tag("deformed-euler"),
            "deformed-spray-homogeneous",
            eulers,
            tol.deformed_euler,
        ));

        let conn = fold_max(map_points(pts, |p| {
            deformed_connection(&ctx, p).map(|(_, d)| d)
        }))?;
        checks.push(Check::le(
            tag("deformed-connection-formula"),
            "projective-shift-connection",
            conn,
            tol.deformed_connection,
        ));

        let general = fold_max(map_points(pts, |p| {
            deformed_jacobi_general(&ctx, p).map(|d| d.max_discrepancy)
        }))?;
        checks.push(Check::le(
            tag("deformed-jacobi-general-route"),
            "projective-shift-jacobi-general",
            general,
            tol.deform_formula,
        ));

        let scaled = fold_max(map_points(pts, |p| {
            deformed_jacobi_finsler(&ctx, p).map(|d| d.max_discrepancy)
        }))?;
        checks.push(Check::le(
            tag("deformed-jacobi-scaled-route"),
            "projective-shift-jacobi-scaled",
            scaled,
            tol.deform_formula,
        ));

        let curv = fold_max(map_points(pts, |p| {
            deformed_curvature_finsler(&ctx, p).map(|(_, d)| d)
        }))?;
        checks.push(Check::le(
            tag("deformed-curvature-scaled-route"),
            "projective-shift-curvature-scaled",
            curv,
            tol.deform_formula,
        ));

        let flow = fold_max(map_points(pts, |p| -> Result<f64> {
            let jac = jacobi(&ctx.deformed, p)?;
            let y = DVector::from_column_slice(p.y());
            Ok((&jac.r_ij * &y).amax() / (1.0 + jac.r_ij.amax()))
        }))?;
        checks.push(Check::le(
            tag("deformed-jacobi-annihilates-flow"),
            "jacobi-endomorphism-flow-kernel",
            flow,
            tol.jacobi_flow,
        ));

        let s_of_p = fold_max(map_points(pts, |p| {
            spray_derivative(&base, ctx.factor.field(), p).map(f64::abs)
        }))?;
        checks.push(Check::le(
            tag("s-of-p-vanishes"),
            "factor-constant-along-flow",
            s_of_p,
            tol.s_of_p,
        ));

        let shift = fold_max(map_points(pts, |p| -> Result<f64> {
            let g = metric_tensor(m, p)?.g;
            let y = DVector::from_column_slice(p.y());
            let base_eig = eigen_spectrum(&g, &jacobi(&base, p)?.r_ij, &y, 1e-6)?;
            let def_eig = eigen_spectrum(&g, &jacobi(&ctx.deformed, p)?.r_ij, &y, 1e-6)?;
            let f2 = m.f().eval(p).powi(2);
            let mut worst = 0.0f64;
            for (kb, kd) in base_eig.kappas.iter().zip(&def_eig.kappas) {
                worst = worst.max((kd - (kb + lambda * lambda * f2)).abs() / (1.0 + f2));
            }
            Ok(worst)
        }))?;
        checks.push(Check::le(
            tag("eigen-shift"),
            "eigenvalue-shift-on-orthocomplement",
            shift,
            tol.eigen_shift,
        ));
    }

    // Admissibility: the generic spectrum condition must agree with the
    // constant-curvature shortcut whenever the model declares one.
    if let Some(kappa) = m.known_flag_curvature() {
        let candidates = [1.0, -1.0, 0.5, -0.5, 2.0, -2.0];
        let mismatches = fold_max(map_points(pts, |p| -> Result<f64> {
            let eig = eigen_analysis(m, p)?;
            let f_val = m.f().eval(p);
            let verdicts = admissible_lambda(&eig, f_val, Some(kappa), &candidates);
            let bad = verdicts
                .iter()
                .filter(|v| Some(v.admissible) != v.kl_admissible)
                .count();
            Ok(bad as f64)
        }))?;
        checks.push(Check::le(
            "admissibility-consistency",
            "admissible-scaling-condition",
            mismatches,
            0.0,
        ));
    }
    Ok(checks)
}

/// Minimum Liouville residual over a batch for an undeformed spray (the
/// obstruction must stay clearly absent).
pub fn obstruction_absent_margin(
    sp: &SprayData,
    pts: &[ChartPoint],
    max_gen: usize,
    rank_tol: f64,
) -> Result<f64> {
    fold_min(map_points(pts, |p| -> Result<f64> {
        let span = crate::holonomy::holonomy_span(sp, p, max_gen, rank_tol)?;
        Ok(crate::holonomy::liouville_test(&span, p).residual)
    }))
}

/// Maximum Liouville residual over a batch for a deformed spray (the
/// obstruction must be present everywhere).
pub fn obstruction_present_margin(
    sp: &SprayData,
    pts: &[ChartPoint],
    max_gen: usize,
    rank_tol: f64,
) -> Result<f64> {
    fold_max(map_points(pts, |p| -> Result<f64> {
        let span = crate::holonomy::holonomy_span(sp, p, max_gen, rank_tol)?;
        Ok(crate::holonomy::liouville_test(&span, p).residual)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multi_index_enumeration_counts() {
        // n = 2 → 4 slots: totals 1..3 give C(4,1)+C(5,2)+C(6,3) multisets
        // = 4 + 10 + 20 = 34.
        let idx = multi_indices_up_to(2, 3);
        assert_eq!(idx.len(), 34);
        assert!(idx.iter().all(|i| i.total() >= 1 && i.total() <= 3));
    }

    #[test]
    fn identity_suite_passes_on_catalog() {
        let tol = Tolerances::default();
        for m in [
            FinslerModel::euclidean(2).unwrap(),
            FinslerModel::hyperbolic(2).unwrap(),
            FinslerModel::randers(2, 0.3).unwrap(),
        ] {
            let pts = m.sample(10, 101);
            let checks = identity_suite(&m, &pts, &tol).unwrap();
            for c in &checks {
                assert!(
                    c.pass,
                    "model {}: {} = {:.3e} vs {:.1e}",
                    m.name(),
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
        }
    }

    #[test]
    fn deform_suite_passes_on_hyperbolic() {
        let tol = Tolerances::default();
        let m = FinslerModel::hyperbolic(2).unwrap();
        let pts = m.sample(6, 103);
        let checks = deform_suite(&m, &pts, &[0.5, 2.0], &tol).unwrap();
        assert!(!checks.is_empty());
        for c in &checks {
            assert!(c.pass, "{} = {:.3e} vs {:.1e}", c.name, c.value, c.tolerance);
        }
    }

    #[test]
    fn ad_fd_suite_passes() {
        let tol = Tolerances::default();
        let m = FinslerModel::hyperbolic(2).unwrap();
        let pts = m.sample(8, 107);
        let checks = ad_fd_suite(&m, &pts, &tol).unwrap();
        assert!(checks[0].pass, "worst {}", checks[0].value);
    }
}
