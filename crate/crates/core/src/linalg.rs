//! Small dense complex helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = Vec<Complex64>;
pub type CMat = DMatrix<Complex64>;

pub fn zeros(n: usize) -> CVec {
    vec![Complex64::new(0.0, 0.0); n]
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

/// Row vector `w^H A`, one entry per column of `a`.
pub fn hermitian_row(w: &[Complex64], a: &CMat) -> CVec {
    debug_assert_eq!(w.len(), a.nrows());
    (0..a.ncols())
        .map(|j| {
            a.column(j)
                .iter()
                .zip(w)
                .fold(Complex64::new(0.0, 0.0), |acc, (x, wi)| acc + wi.conj() * x)
        })
        .collect()
}

/// `A conj(u)`.
pub fn a_conj(a: &CMat, u: &[Complex64]) -> CVec {
    debug_assert_eq!(u.len(), a.ncols());
    let mut out = zeros(a.nrows());
    for (j, uj) in u.iter().enumerate() {
        let c = uj.conj();
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (o, x) in out.iter_mut().zip(a.column(j).iter()) {
            *o += x * c;
        }
    }
    out
}

/// `G w` for a square matrix stored column-major.
pub fn mat_vec(g: &CMat, w: &[Complex64]) -> CVec {
    debug_assert_eq!(g.ncols(), w.len());
    let mut out = zeros(g.nrows());
    for (j, wj) in w.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(g.column(j).iter()) {
            *o += x * wj;
        }
    }
    out
}

pub fn gram(a: &CMat) -> CMat {
    a * a.adjoint()
}

/// Solution of a Hermitian positive semidefinite system, and whether a ridge was added.
#[derive(Debug, Clone)]
pub struct HermitianSolve {
    pub x: CVec,
    pub ridge: f64,
}

const SINGULAR_RATIO: f64 = 1e-13;

/// Cholesky factor of a Hermitian PSD matrix, with a ridge `gamma I` added when the
/// plain factorization fails or is numerically singular
/// (`gamma = 1e-10 trace(G) / n`).
#[derive(Debug, Clone)]
pub struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
    pub ridge: f64,
}

impl HermitianFactor {
    pub fn new(g: &CMat) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return Err(Error::Dimension {
                what: "square Gram matrix",
                expected: n,
                got: g.ncols(),
            });
        }
        if n == 0 {
            return Err(Error::Degenerate("empty Gram matrix".into()));
        }
        if let Some(chol) = try_cholesky(g.clone()) {
            return Ok(Self { chol, ridge: 0.0 });
        }
        let trace: f64 = (0..n).map(|i| g[(i, i)].re).sum();
        let mut gamma = 1e-10 * trace / n as f64;
        if !(gamma > 0.0) {
            gamma = 1e-10;
        }
        let mut reg = g.clone();
        for i in 0..n {
            reg[(i, i)] += Complex64::new(gamma, 0.0);
        }
        match try_cholesky(reg) {
            Some(chol) => Ok(Self { chol, ridge: gamma }),
            None => Err(Error::Degenerate(
                "Gram matrix stays singular after ridge regularization".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<CVec> {
        crate::error::check_len("right-hand side", self.dim(), b.len())?;
        let x = self.chol.solve(&DVector::from_column_slice(b));
        if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(x.iter().copied().collect())
        } else {
            Err(Error::Degenerate("non-finite linear solve".into()))
        }
    }
}

fn try_cholesky(g: CMat) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = g.cholesky()?;
    let l = chol.l_dirty();
    let n = l.nrows();
    let diag = (0..n).map(|i| l[(i, i)].re);
    let max = diag.clone().fold(0.0, f64::max);
    let min = diag.fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || (min / max).powi(2) < SINGULAR_RATIO {
        return None;
    }
    Some(chol)
}

/// Solve `G x = b` for Hermitian PSD `G`, see [`HermitianFactor`].
pub fn solve_hermitian(g: &CMat, b: &[Complex64]) -> Result<HermitianSolve> {
    crate::error::check_len("right-hand side", g.nrows(), b.len())?;
    if g.nrows() == 0 {
        return Ok(HermitianSolve { x: Vec::new(), ridge: 0.0 });
    }
    let f = HermitianFactor::new(g)?;
    Ok(HermitianSolve {
        x: f.solve(b)?,
        ridge: f.ridge,
    })
}

/// Least squares solution of `min ||u - w^H A||^2`, i.e. `(A A^H)^{-1} A conj(u)`.
pub fn ls_solve(a: &CMat, u: &[Complex64]) -> Result<HermitianSolve> {
    crate::error::check_len("targets vs steering columns", a.ncols(), u.len())?;
    solve_hermitian(&gram(a), &a_conj(a, u))
}

/// Phase-only projection `exp(j angle(z))`; zero entries map to phase 0.
pub fn unit_modulus(v: &[Complex64]) -> CVec {
    v.iter()
        .map(|z| {
            if z.norm() > 0.0 {
                Complex64::cis(z.arg())
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_ls() {
        let a = CMat::from_element(1, 1, c(2.0, 0.0));
        let s = ls_solve(&a, &[c(4.0, 0.0)]).unwrap();
        assert!((s.x[0] - c(2.0, 0.0)).norm() < 1e-14);
        assert_eq!(s.ridge, 0.0);
    }

    #[test]
    fn singular_gram_gets_ridge() {
        // two identical rows
        let a = CMat::from_row_slice(2, 3, &[c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)]);
        let s = ls_solve(&a, &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 1.0)]).unwrap();
        assert!(s.ridge > 0.0);
        assert!(s.x.iter().all(|z| z.re.is_finite()));
    }

    #[test]
    fn hermitian_row_matches_adjoint_product() {
        let a = CMat::from_fn(3, 4, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let w = vec![c(0.1, 0.2), c(-0.3, 0.4), c(0.5, -0.6)];
        let row = hermitian_row(&w, &a);
        let wv = DVector::from_column_slice(&w);
        let direct = wv.adjoint() * &a;
        for j in 0..4 {
            assert!((row[j] - direct[(0, j)]).norm() < 1e-14);
        }
    }
}
