//! Small dense linear algebra: LU with partial pivoting, solve, inverse
//! and a 1-norm condition number. Chart dimensions never exceed a handful,
//! so a plain factorization is all that is needed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    pub singular: bool,
}

pub fn factor(a: &[Vec<f64>]) -> Lu {
    let n = a.len();
    let mut lu: Vec<f64> = a.iter().flat_map(|r| r.iter().copied()).collect();
    let mut piv: Vec<usize> = (0..n).collect();
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[k * n + k].abs();
        for i in k + 1..n {
            let v = lu[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            singular = true;
            continue;
        }
        if p != k {
            piv.swap(k, p);
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
            }
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let m = lu[i * n + k] / pivot;
            lu[i * n + k] = m;
            for j in k + 1..n {
                lu[i * n + j] -= m * lu[k * n + j];
            }
        }
    }
    Lu { n, lu, piv, singular }
}

impl Lu {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.singular {
            return Err(Error::SingularJacobian { cond: f64::INFINITY });
        }
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.n;
        let mut inv = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e)?;
            e[j] = 0.0;
            for i in 0..n {
                inv[i][j] = col[i];
            }
        }
        Ok(inv)
    }
}

fn norm1(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    (0..n)
        .map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve `a x = b`, also returning the 1-norm condition number estimate.
pub fn solve_with_cond(a: &[Vec<f64>], b: &[f64]) -> Result<(Vec<f64>, f64)> {
    let lu = factor(a);
    if lu.singular {
        return Err(Error::SingularJacobian { cond: f64::INFINITY });
    }
    let inv = lu.inverse()?;
    let cond = norm1(a) * norm1(&inv);
    Ok((lu.solve(b)?, cond))
}

/// Inverse together with the 1-norm condition number.
pub fn inverse_with_cond(a: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let lu = factor(a);
    if lu.singular {
        return Err(Error::SingularJacobian { cond: f64::INFINITY });
    }
    let inv = lu.inverse()?;
    let cond = norm1(a) * norm1(&inv);
    Ok((inv, cond))
}

pub fn cond1(a: &[Vec<f64>]) -> f64 {
    let lu = factor(a);
    if lu.singular {
        return f64::INFINITY;
    }
    match lu.inverse() {
        Ok(inv) => norm1(a) * norm1(&inv),
        Err(_) => f64::INFINITY,
    }
}

/// Gaussian elimination over a generic scalar algebra. Used to invert the
/// transverse Jacobian of a chart change with full derivative tracking.
pub fn solve_generic<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>]) -> Result<Vec<Vec<S>>> {
    let n = a.len();
    let cols = if n == 0 { 0 } else { b[0].len() };
    let mut m: Vec<Vec<S>> = a.iter().map(|r| r.to_vec()).collect();
    let mut rhs: Vec<Vec<S>> = b.iter().map(|r| r.to_vec()).collect();
    for k in 0..n {
        let mut p = k;
        let mut best = m[k][k].value().abs();
        for i in k + 1..n {
            let v = m[i][k].value().abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return Err(Error::SingularJacobian { cond: f64::INFINITY });
        }
        m.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k].clone() / m[k][k].clone();
            for j in k + 1..n {
                m[i][j] = m[i][j].clone() - f.clone() * m[k][j].clone();
            }
            for j in 0..cols {
                rhs[i][j] = rhs[i][j].clone() - f.clone() * rhs[k][j].clone();
            }
        }
    }
    for i in (0..n).rev() {
        for j in 0..cols {
            let mut acc = rhs[i][j].clone();
            for l in i + 1..n {
                acc = acc - m[i][l].clone() * rhs[l][j].clone();
            }
            rhs[i][j] = acc / m[i][i].clone();
        }
    }
    Ok(rhs)
}
