//! Second-order forward-mode scalars.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian with
//! respect to a declared set of seed variables. All arithmetic propagates
//! first and second derivatives through the chain rule, so any quantity
//! assembled from jets comes out with exact (up to roundoff) partials.
//!
//! The Hessian is stored as a packed lower triangle, which makes symmetry
//! structural rather than numerical.

use crate::error::{Error, Result};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar algebra shared by plain `f64` and [`Jet2`].
///
/// Expression evaluation and all geometric/dynamic assembly are generic
/// over this trait, so the same formulas run with or without derivative
/// tracking.
pub trait Scalar:
    Clone
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;

    fn sqrt(&self) -> Result<Self>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Result<Self>;
    fn abs(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, c: f64) -> Result<Self>;
    /// General power with a non-constant exponent, via `exp(e·ln(base))`.
    fn pow(&self, e: &Self) -> Result<Self>;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive value {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, c: f64) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::Domain(format!(
                "power {self}^{c} with negative base and fractional exponent"
            )));
        }
        Ok(f64::powf(*self, c))
    }
    fn pow(&self, e: &Self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(Error::Domain(format!(
                "power {self}^{e} requires a positive base"
            )));
        }
        Ok(f64::powf(*self, *e))
    }
}

/// Value, gradient and Hessian over the active seed set.
///
/// An empty `grad` marks a constant: it acts as a zero gradient of any
/// width, so constants mix freely with seeded jets without knowing the
/// seed count.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

#[inline]
fn packed_len(k: usize) -> usize {
    k * (k + 1) / 2
}

impl Jet2 {
    /// Jet with unit gradient on `slot` out of `width` seed variables.
    pub fn seeded(value: f64, slot: usize, width: usize) -> Self {
        assert!(slot < width, "seed slot {slot} out of width {width}");
        let mut grad = vec![0.0; width];
        grad[slot] = 1.0;
        Jet2 {
            value,
            grad,
            hess: vec![0.0; packed_len(width)],
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_constant(&self) -> bool {
        self.grad.is_empty()
    }

    /// Width of the seed set (0 for constants).
    pub fn width(&self) -> usize {
        self.grad.len()
    }

    /// First partial with respect to seed `i` (0 for constants).
    #[inline]
    pub fn deriv(&self, i: usize) -> f64 {
        if self.grad.is_empty() {
            0.0
        } else {
            self.grad[i]
        }
    }

    /// Second partial with respect to seeds `i`, `j` (symmetric).
    #[inline]
    pub fn deriv2(&self, i: usize, j: usize) -> f64 {
        if self.hess.is_empty() {
            0.0
        } else {
            self.hess[packed(i, j)]
        }
    }

    pub fn gradient(&self, width: usize) -> Vec<f64> {
        (0..width).map(|i| self.deriv(i)).collect()
    }

    pub fn hessian(&self, width: usize) -> Vec<Vec<f64>> {
        (0..width)
            .map(|i| (0..width).map(|j| self.deriv2(i, j)).collect())
            .collect()
    }

    fn widths_or_panic(a: &Jet2, b: &Jet2) -> usize {
        match (a.grad.len(), b.grad.len()) {
            (0, w) => w,
            (w, 0) => w,
            (wa, wb) => {
                assert_eq!(wa, wb, "mixed jet widths {wa} and {wb}");
                wa
            }
        }
    }

    /// Unary chain rule: given φ(f), φ′(f), φ″(f) at the current value.
    fn chain(&self, v: f64, d1: f64, d2: f64) -> Jet2 {
        if self.is_constant() {
            return Jet2::constant(v);
        }
        let k = self.grad.len();
        let grad = self.grad.iter().map(|g| d1 * g).collect();
        let mut hess = vec![0.0; packed_len(k)];
        for i in 0..k {
            for j in 0..=i {
                hess[packed(i, j)] = d1 * self.deriv2(i, j) + d2 * self.grad[i] * self.grad[j];
            }
        }
        Jet2 { value: v, grad, hess }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        let k = Jet2::widths_or_panic(&self, &rhs);
        if k == 0 {
            return Jet2::constant(self.value + rhs.value);
        }
        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; packed_len(k)];
        for i in 0..k {
            grad[i] = self.deriv(i) + rhs.deriv(i);
        }
        for i in 0..k {
            for j in 0..=i {
                hess[packed(i, j)] = self.deriv2(i, j) + rhs.deriv2(i, j);
            }
        }
        Jet2 {
            value: self.value + rhs.value,
            grad,
            hess,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        let k = Jet2::widths_or_panic(&self, &rhs);
        if k == 0 {
            return Jet2::constant(self.value - rhs.value);
        }
        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; packed_len(k)];
        for i in 0..k {
            grad[i] = self.deriv(i) - rhs.deriv(i);
        }
        for i in 0..k {
            for j in 0..=i {
                hess[packed(i, j)] = self.deriv2(i, j) - rhs.deriv2(i, j);
            }
        }
        Jet2 {
            value: self.value - rhs.value,
            grad,
            hess,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let k = Jet2::widths_or_panic(&self, &rhs);
        if k == 0 {
            return Jet2::constant(self.value * rhs.value);
        }
        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; packed_len(k)];
        for i in 0..k {
            grad[i] = self.deriv(i) * rhs.value + self.value * rhs.deriv(i);
        }
        for i in 0..k {
            for j in 0..=i {
                hess[packed(i, j)] = self.deriv2(i, j) * rhs.value
                    + self.value * rhs.deriv2(i, j)
                    + self.deriv(i) * rhs.deriv(j)
                    + self.deriv(j) * rhs.deriv(i);
            }
        }
        Jet2 {
            value: self.value * rhs.value,
            grad,
            hess,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        let k = Jet2::widths_or_panic(&self, &rhs);
        let q = self.value / rhs.value;
        if k == 0 {
            return Jet2::constant(q);
        }
        // From f = q·g: q_i = (f_i − q g_i)/g and
        // q_ij = (f_ij − q g_ij − q_i g_j − q_j g_i)/g.
        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; packed_len(k)];
        for i in 0..k {
            grad[i] = (self.deriv(i) - q * rhs.deriv(i)) / rhs.value;
        }
        for i in 0..k {
            for j in 0..=i {
                hess[packed(i, j)] = (self.deriv2(i, j)
                    - q * rhs.deriv2(i, j)
                    - grad[i] * rhs.deriv(j)
                    - grad[j] * rhs.deriv(i))
                    / rhs.value;
            }
        }
        Jet2 { value: q, grad, hess }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
}

impl Scalar for Jet2 {
    fn constant(c: f64) -> Self {
        Jet2 {
            value: c,
            grad: Vec::new(),
            hess: Vec::new(),
        }
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn sqrt(&self) -> Result<Self> {
        if self.value < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {}", self.value)));
        }
        if self.value == 0.0 && !self.is_constant() {
            return Err(Error::Domain("sqrt not differentiable at 0".into()));
        }
        let v = self.value.sqrt();
        Ok(self.chain(v, 0.5 / v, -0.25 / (v * self.value)))
    }

    fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    fn tan(&self) -> Self {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * sec2 * t)
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    fn ln(&self) -> Result<Self> {
        if self.value <= 0.0 {
            return Err(Error::Domain(format!(
                "log of non-positive value {}",
                self.value
            )));
        }
        Ok(self.chain(
            self.value.ln(),
            1.0 / self.value,
            -1.0 / (self.value * self.value),
        ))
    }

    fn abs(&self) -> Self {
        // Derivative of |f| away from 0; abs is flagged non-smooth upstream.
        let s = if self.value < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.value.abs(), s, 0.0)
    }

    fn powi(&self, n: i32) -> Self {
        let v = self.value.powi(n);
        let d1 = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.value.powi(n - 1)
        };
        let c2 = f64::from(n) * f64::from(n - 1);
        let d2 = if c2 == 0.0 {
            0.0
        } else {
            c2 * self.value.powi(n - 2)
        };
        self.chain(v, d1, d2)
    }

    fn powf(&self, c: f64) -> Result<Self> {
        if self.value < 0.0 {
            return Err(Error::Domain(format!(
                "power {}^{c} with negative base and fractional exponent",
                self.value
            )));
        }
        let v = self.value.powf(c);
        let d1 = c * self.value.powf(c - 1.0);
        let d2 = c * (c - 1.0) * self.value.powf(c - 2.0);
        Ok(self.chain(v, d1, d2))
    }

    fn pow(&self, e: &Self) -> Result<Self> {
        if e.is_constant() {
            let c = e.value;
            return if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
                Ok(self.powi(c as i32))
            } else {
                self.powf(c)
            };
        }
        if self.value <= 0.0 {
            return Err(Error::Domain(format!(
                "power {}^(...) with non-constant exponent requires a positive base",
                self.value
            )));
        }
        Ok((e.clone() * self.ln()?).exp())
    }
}

/// Seed a vector of values: positions listed in `which` become independent
/// variables (in the order given), the rest are constants.
pub fn seed(values: &[f64], which: &[usize]) -> Result<Vec<Jet2>> {
    let k = which.len();
    let mut slot_of = vec![None; values.len()];
    for (s, &pos) in which.iter().enumerate() {
        if pos >= values.len() {
            return Err(Error::DimensionMismatch(format!(
                "seed index {pos} out of range for {} values",
                values.len()
            )));
        }
        if slot_of[pos].is_some() {
            return Err(Error::DuplicateSeed(pos));
        }
        slot_of[pos] = Some(s);
    }
    Ok(values
        .iter()
        .zip(slot_of)
        .map(|(&v, slot)| match slot {
            Some(s) => Jet2::seeded(v, s, k),
            None => Jet2::constant(v),
        })
        .collect())
}

/// Evaluate `f` at `x` with derivatives over the seeded positions.
///
/// Returns the value, the gradient and the full (dense, symmetric)
/// Hessian restricted to the seeded variables.
pub fn eval_with_derivatives<F>(
    f: F,
    x: &[f64],
    seeds: &[usize],
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)>
where
    F: FnOnce(&[Jet2]) -> Result<Jet2>,
{
    let args = seed(x, seeds)?;
    let out = f(&args)?;
    let k = seeds.len();
    Ok((out.value(), out.gradient(k), out.hessian(k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn seed_then_square() {
        let v = seed(&[3.0], &[0]).unwrap();
        let sq = v[0].clone() * v[0].clone();
        assert_eq!(sq.value(), 9.0);
        assert_eq!(sq.deriv(0), 6.0);
        assert_eq!(sq.deriv2(0, 0), 2.0);
    }

    #[test]
    fn bilinear_product() {
        let v = seed(&[2.0, 5.0], &[0, 1]).unwrap();
        let f = v[0].clone() * v[1].clone();
        assert_eq!(f.value(), 10.0);
        assert_eq!(f.gradient(2), vec![5.0, 2.0]);
        assert_eq!(f.deriv2(0, 0), 0.0);
        assert_eq!(f.deriv2(0, 1), 1.0);
        assert_eq!(f.deriv2(1, 1), 0.0);
    }

    #[test]
    fn sine_derivatives() {
        let v = seed(&[0.7], &[0]).unwrap();
        let f = v[0].sin();
        assert!(close(f.deriv(0), 0.7f64.cos(), 1e-15));
        assert!(close(f.deriv2(0, 0), -(0.7f64.sin()), 1e-15));
    }

    #[test]
    fn polynomial_mixed_partials() {
        // f(x) = x0^2 x1 at (2, 3): value 12, grad (12, 4), hess [[6,4],[4,0]].
        let (v, g, h) = eval_with_derivatives(
            |x| Ok(x[0].powi(2) * x[1].clone()),
            &[2.0, 3.0],
            &[0, 1],
        )
        .unwrap();
        assert_eq!(v, 12.0);
        assert_eq!(g, vec![12.0, 4.0]);
        assert_eq!(h[0][0], 6.0);
        assert_eq!(h[0][1], 4.0);
        assert_eq!(h[1][0], 4.0);
        assert_eq!(h[1][1], 0.0);
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let (v, g, h) =
            eval_with_derivatives(|_| Ok(Jet2::constant(4.25)), &[1.0], &[0]).unwrap();
        assert_eq!(v, 4.25);
        assert_eq!(g, vec![0.0]);
        assert_eq!(h[0][0], 0.0);
    }

    #[test]
    fn euclidean_norm_frozen_values() {
        // f = sqrt(y1^2 + y2^2) at (3, 4): value 5, grad (0.6, 0.8),
        // hess = (1/125)[[16, -12], [-12, 9]]. Hand-differentiated and
        // cross-checked against central finite differences below.
        let (v, g, h) = eval_with_derivatives(
            |x| (x[0].powi(2) + x[1].powi(2)).sqrt(),
            &[3.0, 4.0],
            &[0, 1],
        )
        .unwrap();
        assert!(close(v, 5.0, 1e-15));
        assert!(close(g[0], 0.6, 1e-15));
        assert!(close(g[1], 0.8, 1e-15));
        assert!(close(h[0][0], 16.0 / 125.0, 1e-14));
        assert!(close(h[0][1], -12.0 / 125.0, 1e-14));
        assert!(close(h[1][1], 9.0 / 125.0, 1e-14));
    }

    #[test]
    fn duplicate_seed_rejected() {
        assert!(matches!(
            seed(&[1.0, 2.0], &[0, 0]),
            Err(Error::DuplicateSeed(0))
        ));
    }

    #[test]
    fn sqrt_of_negative_rejected() {
        let v = seed(&[-1.0], &[0]).unwrap();
        assert!(v[0].sqrt().is_err());
    }

    // Each case freezes one formula and checks the jet chain rules against
    // the independent central-finite-difference oracle (step 1e-5). The
    // second-difference stencil carries a roundoff floor of about
    // eps*|f|/step^2 ~ 1e-6*|f|, so comparisons scale with |f|.
    macro_rules! fd_case {
        ($name:ident, $x:expr, $tol:expr, |$v:ident| $body:expr) => {
            #[test]
            fn $name() {
                fn formula<S: Scalar>($v: &[S]) -> S {
                    $body
                }
                let x: Vec<f64> = $x;
                let seeds: Vec<usize> = (0..x.len()).collect();
                let (_, g, h) =
                    eval_with_derivatives(|args| Ok(formula(args)), &x, &seeds).unwrap();
                let f = |p: &[f64]| formula(p);
                let scale = 1.0 + f(&x).abs();
                let step = 1e-5;
                for i in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (f(&xp) - f(&xm)) / (2.0 * step);
                    assert!(
                        close(g[i] / scale, fd / scale, $tol),
                        "grad[{i}]: ad {} vs fd {fd}",
                        g[i]
                    );
                    for j in 0..x.len() {
                        let mut xpp = x.clone();
                        let mut xpm = x.clone();
                        let mut xmp = x.clone();
                        let mut xmm = x.clone();
                        xpp[i] += step;
                        xpp[j] += step;
                        xpm[i] += step;
                        xpm[j] -= step;
                        xmp[i] -= step;
                        xmp[j] += step;
                        xmm[i] -= step;
                        xmm[j] -= step;
                        let fd2 =
                            (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * step * step);
                        assert!(
                            close(h[i][j] / scale, fd2 / scale, $tol),
                            "hess[{i}][{j}]: ad {} vs fd {fd2}",
                            h[i][j]
                        );
                    }
                }
            }
        };
    }

    fd_case!(fd_rational, vec![1.3, -0.4], 1e-6, |v| {
        (v[0].clone() * v[1].clone() + S::constant(2.0))
            / (v[0].powi(2) + v[1].powi(2) + S::constant(1.0))
    });

    fd_case!(fd_trig_composition, vec![0.8, 0.3], 1e-6, |v| {
        (v[0].sin() * v[1].cos() + v[0].clone() * v[1].clone()).exp()
    });

    fd_case!(fd_sqrt_chain, vec![3.0, 4.0, 0.5], 1e-6, |v| {
        (v[0].powi(2) + v[1].powi(2)).sqrt().unwrap() * v[2].tan()
    });

    fd_case!(fd_log_pow, vec![1.7, 0.9], 1e-6, |v| {
        v[0].ln().unwrap() * v[1].powf(2.5).unwrap() + v[0].pow(&v[1]).unwrap()
    });

    #[test]
    fn random_polynomials_match_finite_differences() {
        // 100 random polynomial/trig compositions, relative 1e-6 vs FD.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
            let cj = c.clone();
            let formula = move |v: &[f64]| -> f64 {
                c[0] * v[0] * v[0] * v[1]
                    + c[1] * (c[2] * v[2]).sin() * v[0]
                    + c[3] * (v[1] * v[2]).cos()
                    + c[4] * (c[5] * (v[0] + v[1])).exp()
            };
            let jet_formula = move |v: &[Jet2]| -> Result<Jet2> {
                Ok(
                    Jet2::constant(cj[0]) * v[0].clone() * v[0].clone() * v[1].clone()
                        + Jet2::constant(cj[1]) * (Jet2::constant(cj[2]) * v[2].clone()).sin()
                            * v[0].clone()
                        + Jet2::constant(cj[3]) * (v[1].clone() * v[2].clone()).cos()
                        + Jet2::constant(cj[4])
                            * (Jet2::constant(cj[5]) * (v[0].clone() + v[1].clone())).exp(),
                )
            };
            let (_, g, h) = eval_with_derivatives(jet_formula, &x, &[0, 1, 2]).unwrap();
            let scale = 1.0 + formula(&x).abs();
            let step = 1e-5;
            for i in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += step;
                xm[i] -= step;
                let fd = (formula(&xp) - formula(&xm)) / (2.0 * step);
                assert!(close(g[i] / scale, fd / scale, 1e-6));
                for j in 0..3 {
                    let mut xpp = x.clone();
                    let mut xpm = x.clone();
                    let mut xmp = x.clone();
                    let mut xmm = x.clone();
                    xpp[i] += step;
                    xpp[j] += step;
                    xpm[i] += step;
                    xpm[j] -= step;
                    xmp[i] -= step;
                    xmp[j] += step;
                    xmm[i] -= step;
                    xmm[j] -= step;
                    let fd2 = (formula(&xpp) - formula(&xpm) - formula(&xmp) + formula(&xmm))
                        / (4.0 * step * step);
                    assert!(close(h[i][j] / scale, fd2 / scale, 1e-6));
                }
            }
        }
    }

    #[test]
    fn hessian_symmetry_is_structural() {
        let v = seed(&[1.1, 2.2, 0.3], &[0, 1, 2]).unwrap();
        let f = (v[0].clone() * v[1].clone() / (v[2].clone() + Jet2::constant(2.0))).sin()
            * v[0].exp();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.deriv2(i, j).to_bits(), f.deriv2(j, i).to_bits());
            }
        }
    }
}
