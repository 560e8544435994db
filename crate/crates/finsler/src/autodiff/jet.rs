//! Runtime-depth nested dual numbers.
//!
//! A [`Jet`] of depth `d` is a truncated polynomial in `d` nilpotent
//! generators ε₀,…,ε_{d−1} with εᵢ² = 0. Coefficients are stored flat:
//! `c[m]` multiplies the product of the generators whose bit is set in `m`,
//! so `c[0]` is the real part, `c[1]` the ε₀ part, `c[3]` the ε₀ε₁ part, and
//! so on. A depth-1 jet is the classical dual number; raising the depth by
//! one nests one more dual level, which is what makes mixed partials exact:
//! seed each differentiation slot with its own generator, evaluate once, and
//! read the fully mixed coefficient.
//!
//! Depth is chosen at run time by the seeding helpers in the parent module,
//! so fields built from other fields (spray coefficients, bracket closures)
//! can be differentiated through any number of layers without a fixed type
//! tower. Generators allocated by nested derivations always occupy fresh
//! high bits, which rules out perturbation confusion.

use smallvec::SmallVec;
use std::ops::{Add, Div, Mul, Neg, Sub};

type Coeffs = SmallVec<[f64; 8]>;

/// Nested dual number with runtime depth. Coefficient length is always a
/// power of two.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Jet {
    c: Coeffs,
}

impl Jet {
    /// Jet with the given real part and no derivative content.
    pub fn real(v: f64) -> Self {
        let mut c = Coeffs::new();
        c.push(v);
        Jet { c }
    }

    pub fn zero() -> Self {
        Jet::real(0.0)
    }

    /// Real (generator-free) part.
    pub fn re(&self) -> f64 {
        self.c[0]
    }

    /// Number of nesting levels currently carried.
    pub fn depth(&self) -> u32 {
        self.c.len().trailing_zeros()
    }

    /// Coefficient of the generator product encoded by `mask`, treating
    /// missing high coefficients as zero.
    pub fn coeff(&self, mask: usize) -> f64 {
        if mask < self.c.len() {
            self.c[mask]
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    /// Exact zero in every coefficient.
    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    /// Grow to at least `depth` levels by zero-extension.
    pub(crate) fn lift(&mut self, depth: u32) {
        let want = 1usize << depth;
        if self.c.len() < want {
            self.c.resize(want, 0.0);
        }
    }

    /// Add `v` to the pure ε_bit coefficient (seeding a derivation).
    pub(crate) fn seed(&mut self, bit: u32, v: f64) {
        self.lift(bit + 1);
        self.c[1 << bit] += v;
    }

    /// Extract the ε_bit part as a jet of depth `bit`. Coefficients with the
    /// bit unset are discarded; this is exactly "read off the derivative".
    pub(crate) fn extract(&self, bit: u32) -> Jet {
        let half = 1usize << bit;
        let mut c = Coeffs::with_capacity(half);
        for m in 0..half {
            c.push(self.coeff(m | half));
        }
        Jet { c }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    pub fn recip(&self) -> Jet {
        Jet {
            c: inv_slice(&self.c),
        }
    }

    pub fn sqrt(&self) -> Jet {
        Jet {
            c: sqrt_slice(&self.c),
        }
    }

    pub fn exp(&self) -> Jet {
        Jet {
            c: exp_slice(&self.c),
        }
    }

    pub fn ln(&self) -> Jet {
        Jet {
            c: ln_slice(&self.c),
        }
    }

    pub fn sin(&self) -> Jet {
        Jet {
            c: sin_cos_slice(&self.c).0,
        }
    }

    pub fn cos(&self) -> Jet {
        Jet {
            c: sin_cos_slice(&self.c).1,
        }
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut acc = Jet::real(1.0);
        let mut base = self.clone();
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }
}

fn mul_slice(a: &[f64], b: &[f64]) -> Coeffs {
    let n = a.len().max(b.len());
    let mut out = Coeffs::from_elem(0.0, n);
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            // Disjoint masks only: any shared generator squares to zero.
            if i & j == 0 && bj != 0.0 {
                out[i | j] += ai * bj;
            }
        }
    }
    out
}

fn inv_slice(x: &[f64]) -> Coeffs {
    if x.len() == 1 {
        return Coeffs::from_slice(&[1.0 / x[0]]);
    }
    let h = x.len() / 2;
    let (lo, hi) = x.split_at(h);
    // (lo + ε·hi)⁻¹ = lo⁻¹ − ε·hi·lo⁻²
    let ilo = inv_slice(lo);
    let t = mul_slice(&mul_slice(&ilo, hi), &ilo);
    let mut out = ilo;
    out.extend(t.iter().map(|v| -v));
    out
}

fn sqrt_slice(x: &[f64]) -> Coeffs {
    if x.len() == 1 {
        return Coeffs::from_slice(&[x[0].sqrt()]);
    }
    let h = x.len() / 2;
    let (lo, hi) = x.split_at(h);
    let slo = sqrt_slice(lo);
    // √(lo + ε·hi) = √lo + ε·hi/(2√lo)
    let denom: Coeffs = slo.iter().map(|v| 2.0 * v).collect();
    let top = mul_slice(hi, &inv_slice(&denom));
    let mut out = slo;
    out.extend_from_slice(&top);
    out
}

fn exp_slice(x: &[f64]) -> Coeffs {
    if x.len() == 1 {
        return Coeffs::from_slice(&[x[0].exp()]);
    }
    let h = x.len() / 2;
    let (lo, hi) = x.split_at(h);
    let elo = exp_slice(lo);
    let top = mul_slice(hi, &elo);
    let mut out = elo;
    out.extend_from_slice(&top);
    out
}

fn ln_slice(x: &[f64]) -> Coeffs {
    if x.len() == 1 {
        return Coeffs::from_slice(&[x[0].ln()]);
    }
    let h = x.len() / 2;
    let (lo, hi) = x.split_at(h);
    let llo = ln_slice(lo);
    let top = mul_slice(hi, &inv_slice(lo));
    let mut out = llo;
    out.extend_from_slice(&top);
    out
}

fn sin_cos_slice(x: &[f64]) -> (Coeffs, Coeffs) {
    if x.len() == 1 {
        let (s, c) = x[0].sin_cos();
        return (Coeffs::from_slice(&[s]), Coeffs::from_slice(&[c]));
    }
    let h = x.len() / 2;
    let (lo, hi) = x.split_at(h);
    let (slo, clo) = sin_cos_slice(lo);
    let stop = mul_slice(hi, &clo);
    let ctop = mul_slice(hi, &slo);
    let mut s = slo;
    s.extend_from_slice(&stop);
    let mut c = clo;
    c.extend(ctop.iter().map(|v| -v));
    (s, c)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let n = self.c.len().max(rhs.c.len());
        let mut c = Coeffs::with_capacity(n);
        for m in 0..n {
            c.push(self.coeff(m) + rhs.coeff(m));
        }
        Jet { c }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let n = self.c.len().max(rhs.c.len());
        let mut c = Coeffs::with_capacity(n);
        for m in 0..n {
            c.push(self.coeff(m) - rhs.coeff(m));
        }
        Jet { c }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet {
            c: mul_slice(&self.c, &rhs.c),
        }
    }
}

impl Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            c: self.c.iter().map(|v| -v).collect(),
        }
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        -(&self)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        (&self).add(rhs)
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add(-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        (&self).add(-rhs)
    }
}
