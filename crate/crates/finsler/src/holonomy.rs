//! Lie-bracket closure of horizontal fields and the metrizability
//! obstruction.
//!
//! The distribution generated by the horizontal fields of a spray and their
//! iterated Lie brackets is evaluated numerically at a point: bracket fields
//! are kept as composable closures, so higher brackets differentiate through
//! earlier brackets with fresh jet generators. When the Liouville field
//! enters the span, the spray cannot be the geodesic spray of any Finsler
//! function; absence of the witness at a point is reported as exactly that —
//! no obstruction found, never as a metrizability proof.

use crate::autodiff::{derive_scalar_multi, derive_vector, Jet, VectorFieldTM};
use crate::chart::ChartPoint;
use crate::error::{GeomError, Result};
use crate::linalg::{column_space_basis, residual_norm};
use crate::models::{angular_data, FinslerModel};
use crate::projective::{DeformationContext, FactorKind};
use crate::spray::{connection, SprayData};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Relative residual below which the Liouville field counts as inside the
/// span. Looser than the rank cutoff because bracket evaluations accumulate
/// derivative noise across generations.
pub const LIOUVILLE_TOL: f64 = 1e-6;

/// Default number of bracket generations.
pub const DEFAULT_MAX_GEN: usize = 4;

/// Horizontal coordinate frame of a spray: field i has components
/// (e_i, −N^j_i(x, y)).
pub fn horizontal_fields(sp: &SprayData) -> Vec<VectorFieldTM> {
    let n = sp.dim();
    (0..n)
        .map(|i| {
            let sp = sp.clone();
            VectorFieldTM::new(n, move |c| {
                let col = derive_vector(|cc| sp.coeffs_jets(cc), c, n + i);
                let mut out = vec![Jet::zero(); 2 * n];
                out[i] = Jet::real(1.0);
                for j in 0..n {
                    out[n + j] = -&col[j];
                }
                out
            })
        })
        .collect()
}

/// The frames h_i = δ/δx^i − (y_i/F²)·S and v_i = ∂/∂y^i − (y_i/F²)·𝔠,
/// spanning the (n−1)-dimensional horizontal and vertical sub-distributions
/// orthogonal to the flow.
pub fn special_frames(
    m: &FinslerModel,
    sp: &SprayData,
) -> (Vec<VectorFieldTM>, Vec<VectorFieldTM>) {
    let n = m.dim();
    let horizontal = horizontal_fields(sp);
    let mut h_frames = Vec::with_capacity(n);
    let mut v_frames = Vec::with_capacity(n);
    for i in 0..n {
        let f2 = m.f_squared();
        let sp_i = sp.clone();
        let delta_i = horizontal[i].clone();
        h_frames.push(VectorFieldTM::new(n, move |c| {
            let mut out = delta_i.eval_jets(c);
            // y_i / F² with y_i = ½ ∂F²/∂y^i
            let yi = derive_scalar_multi(|cc| f2.eval_jets(cc), c, &[n + i]).scale(0.5);
            let w = &yi / &f2.eval_jets(c);
            // S has components (y, −2G)
            let g = sp_i.coeffs_jets(c);
            for k in 0..n {
                out[k] = &out[k] - &(&w * &c[n + k]);
                out[n + k] = &out[n + k] + &(&w * &g[k]).scale(2.0);
            }
            out
        }));
        let f2 = m.f_squared();
        v_frames.push(VectorFieldTM::new(n, move |c| {
            let mut out = vec![Jet::zero(); 2 * n];
            out[n + i] = Jet::real(1.0);
            let yi = derive_scalar_multi(|cc| f2.eval_jets(cc), c, &[n + i]).scale(0.5);
            let w = &yi / &f2.eval_jets(c);
            for k in 0..n {
                out[n + k] = &out[n + k] - &(&w * &c[n + k]);
            }
            out
        }));
    }
    (h_frames, v_frames)
}

/// The coordinate Lie bracket [X, Y] = DY·X − DX·Y as a field, so brackets
/// of brackets keep differentiating through the operands.
pub fn bracket_field(x: &VectorFieldTM, y: &VectorFieldTM) -> VectorFieldTM {
    assert_eq!(x.dim(), y.dim());
    let n = x.dim();
    let (x, y) = (x.clone(), y.clone());
    VectorFieldTM::new(n, move |c| {
        let xv = x.eval_jets(c);
        let yv = y.eval_jets(c);
        let m = 2 * n;
        // Accumulate DY·X and DX·Y separately so that swapping the operands
        // produces the bitwise-negated result (exact antisymmetry) and
        // [X, X] is exactly zero.
        let mut plus = vec![Jet::zero(); m];
        let mut minus = vec![Jet::zero(); m];
        for b in 0..m {
            if !xv[b].is_zero() {
                let dy = derive_vector(|cc| y.eval_jets(cc), c, b);
                for a in 0..m {
                    plus[a] = &plus[a] + &(&dy[a] * &xv[b]);
                }
            }
            if !yv[b].is_zero() {
                let dx = derive_vector(|cc| x.eval_jets(cc), c, b);
                for a in 0..m {
                    minus[a] = &minus[a] + &(&dx[a] * &yv[b]);
                }
            }
        }
        plus.iter().zip(&minus).map(|(p, q)| p - q).collect()
    })
}

/// Bracket value at a point.
pub fn lie_bracket(x: &VectorFieldTM, y: &VectorFieldTM, p: &ChartPoint) -> Result<DVector<f64>> {
    let v = bracket_field(x, y).eval(p);
    if v.iter().any(|e| !e.is_finite()) {
        return Err(GeomError::DomainViolation(
            "non-finite Lie bracket".into(),
        ));
    }
    Ok(DVector::from_vec(v))
}

/// Numerically spanned subspace of the tangent space at a point, generated
/// by the horizontal fields and their iterated brackets.
#[derive(Clone, Debug)]
pub struct HolonomySpan {
    /// Orthonormal basis of the span.
    pub basis: Vec<DVector<f64>>,
    pub rank: usize,
    /// Bracket generations evaluated.
    pub generations: usize,
    pub tol: f64,
    /// False when max_gen was reached while the rank was still growing.
    pub converged: bool,
}

/// Close the horizontal distribution under brackets at `p`. Generation k
/// brackets every retained field with the fields born in generation k−1;
/// the loop stops as soon as the rank covers the whole tangent space, or
/// after one full generation without growth, or at `max_gen`.
pub fn holonomy_span(
    sp: &SprayData,
    p: &ChartPoint,
    max_gen: usize,
    tol: f64,
) -> Result<HolonomySpan> {
    if max_gen < 1 {
        return Err(GeomError::InvalidInput("max_gen must be at least 1".into()));
    }
    sp.check_point(p)?;
    let n = sp.dim();
    let full = 2 * n;

    let mut fields: Vec<(VectorFieldTM, usize)> = horizontal_fields(sp)
        .into_iter()
        .map(|f| (f, 0usize))
        .collect();
    let mut vectors: Vec<DVector<f64>> = Vec::new();
    for (f, _) in &fields {
        vectors.push(eval_field(f, p)?);
    }
    let rank_of = |vecs: &[DVector<f64>]| -> usize {
        let m = DMatrix::from_columns(vecs);
        crate::linalg::svd_rank(&m, tol)
    };
    let mut rank = rank_of(&vectors);
    let mut generations = 0;
    let mut converged = rank == full;

    'outer: for gen in 1..=max_gen {
        if converged {
            break;
        }
        generations = gen;
        let rank_before = rank;
        let newest: Vec<usize> = fields
            .iter()
            .enumerate()
            .filter(|(_, (_, g))| *g == gen - 1)
            .map(|(i, _)| i)
            .collect();
        let mut born = Vec::new();
        for &b in &newest {
            for a in 0..fields.len() {
                if a == b || (fields[a].1 == gen - 1 && a > b) {
                    continue; // antisymmetry: one orientation per pair
                }
                let bracket = bracket_field(&fields[a].0, &fields[b].0);
                let v = eval_field(&bracket, p)?;
                vectors.push(v);
                born.push((bracket, gen));
                rank = rank_of(&vectors);
                if rank == full {
                    fields.extend(born);
                    converged = true;
                    break 'outer;
                }
            }
        }
        fields.extend(born);
        if rank == rank_before {
            converged = true;
            break;
        }
    }

    let matrix = DMatrix::from_columns(&vectors);
    let basis = column_space_basis(&matrix, tol);
    Ok(HolonomySpan {
        rank: basis.len(),
        basis,
        generations,
        tol,
        converged,
    })
}

fn eval_field(f: &VectorFieldTM, p: &ChartPoint) -> Result<DVector<f64>> {
    let v = f.eval(p);
    if v.iter().any(|e| !e.is_finite()) {
        return Err(GeomError::DomainViolation(
            "non-finite field value in bracket closure".into(),
        ));
    }
    Ok(DVector::from_vec(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    BracketClosure,
    DirectFormula,
}

/// Outcome of projecting the Liouville field onto a holonomy span.
#[derive(Clone, Debug, Serialize)]
pub struct ObstructionReport {
    /// True: the span contains the fiber-dilation generator, so the spray is
    /// not Finsler metrizable near this point. False: no obstruction found
    /// at this point (not a metrizability proof).
    pub contains_liouville: bool,
    /// |𝔠 − proj 𝔠| / |𝔠| against the span.
    pub residual: f64,
    pub rank: usize,
    pub witness_used: WitnessKind,
}

/// Project 𝔠(p) = (0, y) onto the span.
pub fn liouville_test(span: &HolonomySpan, p: &ChartPoint) -> ObstructionReport {
    let n = p.n();
    let mut c = DVector::zeros(2 * n);
    for i in 0..n {
        c[n + i] = p.y()[i];
    }
    let residual = residual_norm(&span.basis, &c) / c.norm();
    ObstructionReport {
        contains_liouville: residual < LIOUVILLE_TOL,
        residual,
        rank: span.rank,
        witness_used: WitnessKind::BracketClosure,
    }
}

/// The direct bracket witness for P = λF: the vertical projection of
/// [h̃_i, v_j] carries the Liouville component (2λ/F)·h_ij·𝔠.
#[derive(Clone, Debug)]
pub struct DirectWitness {
    /// ṽ[h̃_i, v_j] at the point (2n components).
    pub witness: DVector<f64>,
    /// Measured coefficient of 𝔠 in the witness.
    pub coefficient: f64,
    /// (2λ/F)·h_ij.
    pub predicted: f64,
}

/// Evaluate the witness bracket and compare its Liouville coefficient with
/// the closed-form prediction.
pub fn direct_witness(
    ctx: &DeformationContext,
    p: &ChartPoint,
    i: usize,
    j: usize,
) -> Result<DirectWitness> {
    let (lambda, model) = match ctx.factor.kind() {
        FactorKind::LambdaF { lambda, model } => (*lambda, model.clone()),
        FactorKind::Custom => {
            return Err(GeomError::InvalidInput(
                "the direct witness needs a P = lambda*F factor".into(),
            ))
        }
    };
    let n = model.dim();
    if i >= n || j >= n {
        return Err(GeomError::InvalidInput(format!(
            "witness indices ({i}, {j}) out of range for dimension {n}"
        )));
    }
    let f_val = model.f().eval(p);
    if f_val.abs() < 1e-12 {
        return Err(GeomError::DomainViolation(
            "F vanishes at the witness point".into(),
        ));
    }

    let (h_frames, v_frames) = special_frames(&model, &ctx.base);
    // h̃_i = h_i − λF·v_i
    let htilde = {
        let h_i = h_frames[i].clone();
        let v_i = v_frames[i].clone();
        let f_field = model.f().clone();
        VectorFieldTM::new(n, move |c| {
            let mut out = h_i.eval_jets(c);
            let fv = f_field.eval_jets(c).scale(lambda);
            let vv = v_i.eval_jets(c);
            for (o, v) in out.iter_mut().zip(vv.iter()) {
                *o = &*o - &(&fv * v);
            }
            out
        })
    };
    let bracket = lie_bracket(&htilde, &v_frames[j], p)?;

    // Deformed vertical projector at the point:
    // ṽ(ξ) = (0, ξ_y + N ξ_x) + λF·(0, ξ_x) + λ(∂F/∂y · ξ_x)·(0, y)
    let conn = connection(&ctx.base, p)?;
    let coords = p.jets();
    let df_dy: Vec<f64> = (0..n)
        .map(|k| derive_scalar_multi(|c| model.f().eval_jets(c), &coords, &[n + k]).re())
        .collect();
    let xi_x = bracket.rows(0, n).into_owned();
    let xi_y = bracket.rows(n, n).into_owned();
    let mut w = &xi_y + &conn.n_ij * &xi_x;
    let df_contract: f64 = (0..n).map(|k| df_dy[k] * xi_x[k]).sum();
    for k in 0..n {
        w[k] += lambda * f_val * xi_x[k] + lambda * df_contract * p.y()[k];
    }

    let ang = angular_data(&model, p)?;
    let coefficient = (0..n).map(|k| w[k] * ang.y_lower[k]).sum::<f64>() / (f_val * f_val);
    let predicted = 2.0 * lambda * ang.h_lower[(i, j)] / f_val;

    let mut witness = DVector::zeros(2 * n);
    for k in 0..n {
        witness[n + k] = w[k];
    }
    Ok(DirectWitness {
        witness,
        coefficient,
        predicted,
    })
}

/// Sasaki-type inner product at a point:
/// G(X, Y) = g_ab X_x^a Y_x^b + g_ab (X_y + N X_x)^a (Y_y + N Y_x)^b.
pub fn sasaki_inner(
    g: &DMatrix<f64>,
    n_ij: &DMatrix<f64>,
    xx: &DVector<f64>,
    yy: &DVector<f64>,
) -> f64 {
    let n = g.nrows();
    let split = |v: &DVector<f64>| (v.rows(0, n).into_owned(), v.rows(n, n).into_owned());
    let (ax, ay) = split(xx);
    let (bx, by) = split(yy);
    let av = &ay + n_ij * &ax;
    let bv = &by + n_ij * &bx;
    (g * &bx).dot(&ax) + (g * &bv).dot(&av)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::metric_tensor;
    use crate::projective::{deform, ProjectiveFactor};
    use crate::spray::jacobi;
    use approx::assert_relative_eq;

    fn pt(x: Vec<f64>, y: Vec<f64>) -> ChartPoint {
        ChartPoint::new(x, y).unwrap()
    }

    #[test]
    fn euclidean_horizontal_fields_are_constant() {
        let m = FinslerModel::euclidean(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let fields = horizontal_fields(&sp);
        let p = pt(vec![0.3, -0.1], vec![1.0, 2.0]);
        assert_eq!(fields[0].eval(&p), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(fields[1].eval(&p), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn hyperbolic_horizontal_fields_read_off_connection() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let p = pt(vec![0.0, 1.0], vec![3.0, 4.0]);
        let fields = horizontal_fields(&sp);
        // N = [[-4, -3], [3, -4]]; field i carries −N^·_i in its y block.
        let f0 = fields[0].eval(&p);
        assert_relative_eq!(f0[2], 4.0, epsilon = 1e-9);
        assert_relative_eq!(f0[3], -3.0, epsilon = 1e-9);
        let f1 = fields[1].eval(&p);
        assert_relative_eq!(f1[2], 3.0, epsilon = 1e-9);
        assert_relative_eq!(f1[3], 4.0, epsilon = 1e-9);
        // J maps each horizontal basis field to (0, e_i).
        for (i, f) in fields.iter().enumerate() {
            let j = VectorFieldTM::apply_tangent_structure(2, &f.eval(&p));
            assert_eq!(&j[..2], &[0.0, 0.0]);
            let mut want = vec![0.0, 0.0];
            want[i] = 1.0;
            assert_eq!(&j[2..], want.as_slice());
        }
    }

    #[test]
    fn special_frames_contract_against_flow() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let (h, v) = special_frames(&m, &sp);
        for p in m.sample(15, 3) {
            let mut hy = vec![0.0; 4];
            let mut vy = vec![0.0; 4];
            for i in 0..2 {
                let hv = h[i].eval(&p);
                let vv = v[i].eval(&p);
                for a in 0..4 {
                    hy[a] += p.y()[i] * hv[a];
                    vy[a] += p.y()[i] * vv[a];
                }
            }
            assert!(hy.iter().all(|e| e.abs() < 1e-9), "y^i h_i = 0");
            assert!(vy.iter().all(|e| e.abs() < 1e-9), "y^i v_i = 0");
        }
    }

    #[test]
    fn vertical_frames_annihilate_f() {
        let m = FinslerModel::randers(2, 0.3).unwrap();
        let sp = SprayData::geodesic(&m);
        let (_, v) = special_frames(&m, &sp);
        for p in m.sample(15, 5) {
            let coords = p.jets();
            for vi in &v {
                // v_i(F) = Σ components · ∂F/∂(coord)
                let comps = vi.eval(&p);
                let mut df = 0.0;
                for (a, comp) in comps.iter().enumerate() {
                    if *comp != 0.0 {
                        df += comp
                            * derive_scalar_multi(|c| m.f().eval_jets(c), &coords, &[a]).re();
                    }
                }
                assert!(df.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn special_horizontal_frames_are_sasaki_orthogonal_to_flow() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let (h, _) = special_frames(&m, &sp);
        for p in m.sample(10, 7) {
            let g = metric_tensor(&m, &p).unwrap().g;
            let conn = connection(&sp, &p).unwrap();
            let gcoef = sp.coefficients(&p).unwrap();
            let mut s = DVector::zeros(4);
            for k in 0..2 {
                s[k] = p.y()[k];
                s[2 + k] = -2.0 * gcoef[k];
            }
            for hi in &h {
                let hv = DVector::from_vec(hi.eval(&p));
                let ip = sasaki_inner(&g, &conn.n_ij, &hv, &s);
                assert!(ip.abs() < 1e-8, "G(h_i, S) = {ip}");
            }
        }
    }

    #[test]
    fn bracket_antisymmetry_and_self_annihilation() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let fields = horizontal_fields(&sp);
        let p = pt(vec![0.2, 1.4], vec![0.8, -0.6]);
        let xy = lie_bracket(&fields[0], &fields[1], &p).unwrap();
        let yx = lie_bracket(&fields[1], &fields[0], &p).unwrap();
        for a in 0..4 {
            assert_eq!(xy[a], -yx[a]);
        }
        let xx = lie_bracket(&fields[0], &fields[0], &p).unwrap();
        assert!(xx.amax() == 0.0);
    }

    #[test]
    fn bracket_of_vertical_basis_with_liouville() {
        // [∂/∂y^i, 𝔠] = ∂/∂y^i
        let n = 2;
        let liouville = VectorFieldTM::liouville(n);
        let p = pt(vec![0.1, 0.9], vec![1.2, -0.5]);
        for i in 0..n {
            let e_i = VectorFieldTM::new(n, move |_| {
                let mut out = vec![Jet::zero(); 2 * n];
                out[n + i] = Jet::real(1.0);
                out
            });
            let br = lie_bracket(&e_i, &liouville, &p).unwrap();
            let mut want = DVector::zeros(2 * n);
            want[n + i] = 1.0;
            assert_eq!(br, want);
        }
    }

    #[test]
    fn euclidean_span_is_horizontal_after_one_generation() {
        let m = FinslerModel::euclidean(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let p = pt(vec![0.0, 0.0], vec![3.0, 4.0]);
        let span = holonomy_span(&sp, &p, DEFAULT_MAX_GEN, 1e-8).unwrap();
        assert_eq!(span.rank, 2);
        assert_eq!(span.generations, 1);
        assert!(span.converged);
        let report = liouville_test(&span, &p);
        assert!(!report.contains_liouville);
        assert!(report.residual > 0.99);
    }

    #[test]
    fn deformed_euclidean_span_reaches_full_rank_with_liouville() {
        let m = FinslerModel::euclidean(2).unwrap();
        let base = SprayData::geodesic(&m);
        let ctx = deform(&base, &ProjectiveFactor::lambda_f(1.0, &m));
        let p = pt(vec![0.0, 0.0], vec![3.0, 4.0]);
        let span = holonomy_span(&ctx.deformed, &p, DEFAULT_MAX_GEN, 1e-8).unwrap();
        assert_eq!(span.rank, 4);
        assert!(span.generations <= 3);
        let report = liouville_test(&span, &p);
        assert!(report.contains_liouville, "residual {}", report.residual);
        assert!(report.residual < 1e-6);
    }

    #[test]
    fn hyperbolic_span_contains_curvature_image_but_not_liouville() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        for p in m.sample(5, 11) {
            let span = holonomy_span(&sp, &p, DEFAULT_MAX_GEN, 1e-8).unwrap();
            // Im R ⊂ span: curvature image vectors are vertical columns.
            let curv = crate::spray::curvature(&sp, &p).unwrap();
            for j in 0..2 {
                for k in 0..2 {
                    let mut img = DVector::zeros(4);
                    for i in 0..2 {
                        img[2 + i] = curv.r_ijk[i][(j, k)];
                    }
                    let norm = img.norm();
                    if norm > 1e-9 {
                        let resid = residual_norm(&span.basis, &img) / norm;
                        assert!(resid < 1e-7, "Im R escapes the span: {resid}");
                    }
                }
            }
            let report = liouville_test(&span, &p);
            assert!(!report.contains_liouville);
            assert!(report.residual > 0.5);
        }
    }

    #[test]
    fn vertical_subframe_brackets_stay_clear_of_liouville() {
        // The 𝔠-component of [v_i, v_j] vanishes.
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let (_, v) = special_frames(&m, &sp);
        for p in m.sample(10, 13) {
            let ang = angular_data(&m, &p).unwrap();
            let f2 = m.f().eval(&p).powi(2);
            for i in 0..2 {
                for j in 0..2 {
                    let br = lie_bracket(&v[i], &v[j], &p).unwrap();
                    // vertical bracket of vertical fields
                    assert!(br.rows(0, 2).amax() < 1e-12);
                    let c_coeff: f64 =
                        (0..2).map(|k| br[2 + k] * ang.y_lower[k]).sum::<f64>() / f2;
                    assert!(c_coeff.abs() < 1e-8, "B_{i}{j} = {c_coeff}");
                }
            }
        }
    }

    #[test]
    fn direct_witness_hand_value_on_euclidean() {
        let m = FinslerModel::euclidean(2).unwrap();
        let base = SprayData::geodesic(&m);
        let ctx = deform(&base, &ProjectiveFactor::lambda_f(1.0, &m));
        let p = pt(vec![0.0, 0.0], vec![3.0, 4.0]);
        let w = direct_witness(&ctx, &p, 0, 0).unwrap();
        assert_relative_eq!(w.predicted, 32.0 / 125.0, epsilon = 1e-12);
        assert_relative_eq!(w.coefficient, w.predicted, max_relative = 1e-8);
    }

    #[test]
    fn direct_witness_degenerate_direction() {
        // y along e₁ makes h₁₁ = 0, so the predicted coefficient vanishes.
        let m = FinslerModel::euclidean(2).unwrap();
        let base = SprayData::geodesic(&m);
        let ctx = deform(&base, &ProjectiveFactor::lambda_f(1.0, &m));
        let p = pt(vec![0.0, 0.0], vec![5.0, 0.0]);
        let w = direct_witness(&ctx, &p, 0, 0).unwrap();
        assert!(w.predicted.abs() < 1e-12);
        assert!(w.coefficient.abs() < 1e-9);
    }

    #[test]
    fn direct_witness_matches_prediction_on_hyperbolic() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let base = SprayData::geodesic(&m);
        let ctx = deform(&base, &ProjectiveFactor::lambda_f(0.5, &m));
        for p in m.sample(10, 17) {
            for i in 0..2 {
                for j in 0..2 {
                    let w = direct_witness(&ctx, &p, i, j).unwrap();
                    let scale = 1.0 + w.predicted.abs();
                    assert!(
                        (w.coefficient - w.predicted).abs() / scale < 1e-5,
                        "({i},{j}): got {} want {}",
                        w.coefficient,
                        w.predicted
                    );
                }
            }
        }
    }

    #[test]
    fn report_serializes_with_expected_fields() {
        let m = FinslerModel::euclidean(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let p = pt(vec![0.0, 0.0], vec![3.0, 4.0]);
        let span = holonomy_span(&sp, &p, 2, 1e-8).unwrap();
        let report = liouville_test(&span, &p);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["contains_liouville"], false);
        assert_eq!(json["witness_used"], "bracket_closure");
        assert!(json["residual"].as_f64().unwrap() > 0.9);
    }

    #[test]
    fn rank_is_monotone_across_generations() {
        let m = FinslerModel::hyperbolic(2).unwrap();
        let sp = SprayData::geodesic(&m);
        let p = pt(vec![0.3, 1.1], vec![0.9, 0.7]);
        let mut prev = 0;
        for max_gen in 1..=3 {
            let span = holonomy_span(&sp, &p, max_gen, 1e-8).unwrap();
            assert!(span.rank >= prev);
            assert!(span.rank <= 4);
            prev = span.rank;
        }
    }
}
