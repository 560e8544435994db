//! Points of the slashed tangent bundle in an induced coordinate chart.

use crate::autodiff::Jet;
use crate::error::{GeomError, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A point (x, y) of the slashed tangent bundle, y ≠ 0. Coordinates are
/// ordered x¹..xⁿ then y¹..yⁿ everywhere in this crate.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl ChartPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(GeomError::InvalidInput(format!(
                "chart point needs matching non-empty x ({}) and y ({}) blocks",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GeomError::DomainViolation(
                "non-finite chart coordinate".into(),
            ));
        }
        if y.iter().all(|v| *v == 0.0) {
            return Err(GeomError::DomainViolation(
                "y = 0 is outside the slashed tangent bundle".into(),
            ));
        }
        Ok(ChartPoint { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Flat coordinate vector (x then y), length 2n.
    pub fn coords(&self) -> Vec<f64> {
        let mut c = Vec::with_capacity(2 * self.n());
        c.extend_from_slice(&self.x);
        c.extend_from_slice(&self.y);
        c
    }

    /// Coordinates lifted to depth-0 jets, ready for seeding.
    pub fn jets(&self) -> Vec<Jet> {
        self.coords().into_iter().map(Jet::real).collect()
    }

    pub fn y_norm(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Deterministic sampler: x uniform in the given box, y uniform in the cube
/// [-r_hi, r_hi]ⁿ rejected to the annulus r_lo ≤ |y| ≤ r_hi. The annulus
/// keeps samples clear of the y → 0 singularity of 1-homogeneous functions.
pub fn sample_points(
    x_box: &[(f64, f64)],
    annulus: (f64, f64),
    count: usize,
    seed: u64,
) -> Vec<ChartPoint> {
    let n = x_box.len();
    let (r_lo, r_hi) = annulus;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let x: Vec<f64> = x_box.iter().map(|(a, b)| rng.gen_range(*a..*b)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-r_hi..r_hi)).collect();
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < r_lo || r > r_hi {
            continue;
        }
        pts.push(ChartPoint { x, y });
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_velocity() {
        assert!(ChartPoint::new(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(ChartPoint::new(vec![0.0, 1.0], vec![3.0, 4.0]).is_ok());
    }

    #[test]
    fn rejects_mismatched_blocks() {
        assert!(ChartPoint::new(vec![0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_in_annulus() {
        let box2 = [(-2.0, 2.0), (0.5, 3.0)];
        let a = sample_points(&box2, (0.5, 2.0), 50, 7);
        let b = sample_points(&box2, (0.5, 2.0), 50, 7);
        assert_eq!(a, b);
        for p in &a {
            let r = p.y_norm();
            assert!((0.5..=2.0).contains(&r));
            assert!(p.x()[1] >= 0.5 && p.x()[1] <= 3.0);
        }
    }
}
