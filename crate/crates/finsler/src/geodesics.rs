//! Geodesic integration, reparameterization, and path comparison.
//!
//! Fixed-step classical RK4 throughout: the acceptance numbers must be
//! reproducible, and the desk-scale problems here never justify adaptivity.

use crate::chart::ChartPoint;
use crate::error::{GeomError, Result};
use crate::fmt_full;
use crate::models::FinslerModel;
use crate::projective::{DeformationContext, ProjectiveFactor};
use crate::spray::SprayData;

/// One state sample along an integrated curve.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

/// An integrated solution of ẍ + 2G(x, ẋ) = 0 as the first-order system
/// (ẋ = v, v̇ = −2G).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub spray_id: String,
    pub step: f64,
    /// True when the integration left the chart domain and was truncated.
    pub exited: bool,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has samples")
    }
}

fn in_domain(sp: &SprayData, x: &[f64], v: &[f64]) -> bool {
    if v.iter().all(|e| *e == 0.0) {
        return false;
    }
    if x.iter().chain(v.iter()).any(|e| !e.is_finite()) {
        return false;
    }
    if let Some(bounds) = sp.chart_box() {
        for (&(lo, hi), &xi) in bounds.iter().zip(x) {
            if xi < lo || xi > hi {
                return false;
            }
        }
    }
    true
}

/// Classical RK4 with step t_end/steps. A domain exit truncates the
/// trajectory and sets the exit flag instead of failing.
pub fn integrate(
    sp: &SprayData,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 || !(t_end > 0.0) {
        return Err(GeomError::InvalidInput(
            "integration needs steps >= 1 and t_end > 0".into(),
        ));
    }
    let p0 = ChartPoint::new(x0.to_vec(), v0.to_vec())?;
    sp.check_point(&p0)?;
    let n = sp.dim();
    let h = t_end / steps as f64;
    let rhs = |x: &[f64], v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let g = sp.coefficients_unchecked(x, v);
        (v.to_vec(), g.iter().map(|gi| -2.0 * gi).collect())
    };
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    samples.push(TrajectorySample {
        t: 0.0,
        x: x.clone(),
        v: v.clone(),
    });
    let mut exited = false;
    for k in 0..steps {
        let (k1x, k1v) = rhs(&x, &v);
        let xa: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k1x[i]).collect();
        let va: Vec<f64> = (0..n).map(|i| v[i] + 0.5 * h * k1v[i]).collect();
        let (k2x, k2v) = rhs(&xa, &va);
        let xb: Vec<f64> = (0..n).map(|i| x[i] + 0.5 * h * k2x[i]).collect();
        let vb: Vec<f64> = (0..n).map(|i| v[i] + 0.5 * h * k2v[i]).collect();
        let (k3x, k3v) = rhs(&xb, &vb);
        let xc: Vec<f64> = (0..n).map(|i| x[i] + h * k3x[i]).collect();
        let vc: Vec<f64> = (0..n).map(|i| v[i] + h * k3v[i]).collect();
        let (k4x, k4v) = rhs(&xc, &vc);
        for i in 0..n {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        if !in_domain(sp, &x, &v) {
            exited = true;
            break;
        }
        samples.push(TrajectorySample {
            t: (k + 1) as f64 * h,
            x: x.clone(),
            v: v.clone(),
        });
    }
    Ok(Trajectory {
        samples,
        spray_id: sp.id(),
        step: h,
        exited,
    })
}

/// Max drift of F along a trajectory against its initial value.
pub fn f_drift(m: &FinslerModel, traj: &Trajectory) -> f64 {
    let f = m.f();
    let eval = |s: &TrajectorySample| {
        let coords: Vec<f64> = s.x.iter().chain(s.v.iter()).cloned().collect();
        f.eval_raw(&coords)
    };
    let f0 = eval(&traj.samples[0]);
    traj.samples
        .iter()
        .map(|s| (eval(s) - f0).abs())
        .fold(0.0, f64::max)
}

/// Reparameterization record along one trajectory.
#[derive(Clone, Debug)]
pub struct ReparamTrace {
    /// (t, t̃, dt̃/dt) per base sample.
    pub samples: Vec<(f64, f64, f64)>,
    pub params: String,
}

fn interp_state(traj: &Trajectory, t: f64) -> (Vec<f64>, Vec<f64>) {
    let samples = &traj.samples;
    let last = samples.len() - 1;
    let h = traj.step;
    let idx = ((t / h).floor() as usize).min(last.saturating_sub(1));
    let (a, b) = (&samples[idx], &samples[idx + 1]);
    let w = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
    let lerp = |u: &[f64], v: &[f64]| -> Vec<f64> {
        u.iter().zip(v).map(|(p, q)| p + w * (q - p)).collect()
    };
    (lerp(&a.x, &b.x), lerp(&a.v, &b.v))
}

/// Integrate d²t̃/dt² = 2P(x(t), ẋ(t))·dt̃/dt along a trajectory, starting
/// from t̃(0) = 0, dt̃/dt(0) = 1. Fails on orientation reversal.
pub fn reparam_ode(factor: &ProjectiveFactor, traj: &Trajectory) -> Result<ReparamTrace> {
    if traj.samples.len() < 2 {
        return Err(GeomError::InvalidInput(
            "reparameterization needs at least two trajectory samples".into(),
        ));
    }
    let pf = factor.field().clone();
    let p_at = |t: f64| -> f64 {
        let (x, v) = interp_state(traj, t);
        let coords: Vec<f64> = x.iter().chain(v.iter()).cloned().collect();
        pf.eval_raw(&coords)
    };
    let h = traj.step;
    let mut ttilde = 0.0f64;
    let mut u = 1.0f64;
    let mut out = Vec::with_capacity(traj.samples.len());
    out.push((0.0, 0.0, 1.0));
    for k in 0..traj.samples.len() - 1 {
        let t = traj.samples[k].t;
        // RK4 on (t̃, u) with u' = 2P(t)·u
        let f = |tq: f64, uq: f64| (uq, 2.0 * p_at(tq) * uq);
        let (k1t, k1u) = f(t, u);
        let (k2t, k2u) = f(t + 0.5 * h, u + 0.5 * h * k1u);
        let (k3t, k3u) = f(t + 0.5 * h, u + 0.5 * h * k2u);
        let (k4t, k4u) = f(t + h, u + h * k3u);
        ttilde += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        let t_next = traj.samples[k + 1].t;
        if !(u > 0.0) {
            return Err(GeomError::OrientationReversal {
                t: t_next,
                dttilde: u,
            });
        }
        out.push((t_next, ttilde, u));
    }
    Ok(ReparamTrace {
        samples: out,
        params: factor.describe().to_string(),
    })
}

/// Result of comparing base and deformed geodesics as unparameterized paths.
#[derive(Clone, Copy, Debug)]
pub struct PathComparison {
    /// Max pointwise distance between the arc-length-resampled images.
    pub max_distance: f64,
    /// Arc length (of the base model) over which both curves were compared.
    pub common_arc: f64,
    /// True when either integration exited the chart early.
    pub truncated: bool,
}

fn arc_lengths(m: &FinslerModel, traj: &Trajectory) -> Vec<f64> {
    let f = m.f();
    let speeds: Vec<f64> = traj
        .samples
        .iter()
        .map(|s| {
            let coords: Vec<f64> = s.x.iter().chain(s.v.iter()).cloned().collect();
            f.eval_raw(&coords)
        })
        .collect();
    let mut s = Vec::with_capacity(speeds.len());
    s.push(0.0);
    for k in 1..speeds.len() {
        let dt = traj.samples[k].t - traj.samples[k - 1].t;
        s.push(s[k - 1] + 0.5 * (speeds[k] + speeds[k - 1]) * dt);
    }
    s
}

fn position_at_arc(traj: &Trajectory, arcs: &[f64], s: f64) -> Vec<f64> {
    let idx = match arcs.binary_search_by(|a| a.partial_cmp(&s).unwrap()) {
        Ok(i) => i.min(arcs.len() - 2),
        Err(i) => i.saturating_sub(1).min(arcs.len() - 2),
    };
    let (sa, sb) = (arcs[idx], arcs[idx + 1]);
    let w = if sb > sa { (s - sa) / (sb - sa) } else { 0.0 };
    traj.samples[idx]
        .x
        .iter()
        .zip(&traj.samples[idx + 1].x)
        .map(|(a, b)| a + w.clamp(0.0, 1.0) * (b - a))
        .collect()
}

/// Integrate base and deformed sprays from the same initial condition
/// (velocity normalized to unit F), resample both images by the base
/// model's arc length, and return the max pointwise distance over the
/// common arc range.
pub fn path_equivalence(
    ctx: &DeformationContext,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<PathComparison> {
    let model = ctx
        .base
        .finsler_model()
        .ok_or_else(|| {
            GeomError::InvalidInput(
                "path equivalence needs the geodesic spray of a model as base".into(),
            )
        })?
        .clone();
    let p0 = ChartPoint::new(x0.to_vec(), v0.to_vec())?;
    let f0 = model.f().eval(&p0);
    if !(f0 > 0.0) {
        return Err(GeomError::DomainViolation(
            "initial velocity has non-positive F".into(),
        ));
    }
    let v0n: Vec<f64> = v0.iter().map(|v| v / f0).collect();
    let base = integrate(&ctx.base, x0, &v0n, t_end, steps)?;
    let deformed = integrate(&ctx.deformed, x0, &v0n, t_end, steps)?;
    let arcs_base = arc_lengths(&model, &base);
    let arcs_def = arc_lengths(&model, &deformed);
    let s_max = arcs_base
        .last()
        .unwrap()
        .min(*arcs_def.last().unwrap());
    let m_samples = steps.max(2);
    let mut max_distance = 0.0f64;
    for k in 0..=m_samples {
        let s = s_max * k as f64 / m_samples as f64;
        let a = position_at_arc(&base, &arcs_base, s);
        let b = position_at_arc(&deformed, &arcs_def, s);
        let d: f64 = a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        max_distance = max_distance.max(d);
    }
    Ok(PathComparison {
        max_distance,
        common_arc: s_max,
        truncated: base.exited || deformed.exited,
    })
}

/// Evaluation of the closed-form candidate t̃ = c₁t + 2λc₂e^{2λt} together
/// with its residual in the reparameterization equation with a constant
/// factor: residual = t̃'' − 2λ·t̃'. The residual is reported, never
/// asserted: it vanishes only on the c₁ = 0 boundary family.
#[derive(Clone, Copy, Debug)]
pub struct ClosedFormReparam {
    pub value: f64,
    pub derivative: f64,
    pub residual: f64,
}

/// Requires λ ≠ 0, λ·c₂ > 0, and c₁ ≥ 0 (c₁ = 0 is the diagnostic
/// boundary of the stated family).
pub fn closed_form_reparam(lambda: f64, c1: f64, c2: f64, t: f64) -> Result<ClosedFormReparam> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(GeomError::InvalidInput("lambda must be non-zero".into()));
    }
    if c1 < 0.0 {
        return Err(GeomError::InvalidInput("c1 must be non-negative".into()));
    }
    if !(lambda * c2 > 0.0) {
        return Err(GeomError::InvalidInput("lambda * c2 must be positive".into()));
    }
    let e = (2.0 * lambda * t).exp();
    let value = c1 * t + 2.0 * lambda * c2 * e;
    let derivative = c1 + 4.0 * lambda * lambda * c2 * e;
    let second = 8.0 * lambda.powi(3) * c2 * e;
    Ok(ClosedFormReparam {
        value,
        derivative,
        residual: second - 2.0 * lambda * derivative,
    })
}

/// CSV export with header `t,x1..xn,v1..vn`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.samples[0].x.len();
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",v{i}"));
    }
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&fmt_full(s.t));
        for v in s.x.iter().chain(s.v.iter()) {
            out.push(',');
            out.push_str(&fmt_full(*v));
        }
        out.push('\n');
    }
    out
}

/// CSV export with header `t,ttilde,dttilde`.
pub fn reparam_csv(trace: &ReparamTrace) -> String {
    let mut out = String::from("t,ttilde,dttilde\n");
    for (t, tt, dt) in &trace.samples {
        out.push_str(&format!("{},{},{}\n", fmt_full(*t), fmt_full(*tt), fmt_full(*dt)));
    }
    out
}
