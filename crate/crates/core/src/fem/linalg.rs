//! Sparse Cholesky factorization (faer) with iterative refinement.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Side};

use super::assemble::CsrMatrix;
use crate::error::{Error, Result};

/// Relative residual accepted after refinement.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Achieved accuracy of a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

pub struct Cholesky {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix. The pattern must be
    /// symmetric, so the CSR arrays double as the CSC arrays.
    pub fn factor(a: &CsrMatrix) -> Result<Cholesky> {
        if a.n == 0 {
            return Ok(Cholesky { n: 0, llt: None });
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let sym = SymbolicSparseColMatRef::new_checked(a.n, a.n, &a.row_ptr, None, &a.col);
        let mat = SparseColMatRef::new(sym, &a.val);
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed (matrix not SPD): {e:?}")))?;
        Ok(Cholesky { n: a.n, llt: Some(llt) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let Some(llt) = &self.llt else {
            return Vec::new();
        };
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `A x = b` with up to three refinement steps and checks the
    /// relative residual against [`RESIDUAL_TOL`].
    pub fn solve_refined(&self, a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = self.solve(b);
        if bnorm == 0.0 {
            return Ok((x, SolveReport::default()));
        }
        let mut report = SolveReport::default();
        loop {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            report.relative_residual = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
            if report.relative_residual <= 1e-14 || report.refinement_steps == 3 {
                break;
            }
            let dx = self.solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
            report.refinement_steps += 1;
        }
        if !(report.relative_residual <= RESIDUAL_TOL) {
            return Err(Error::Solver(format!("relative residual {:e} above {RESIDUAL_TOL:e}", report.relative_residual)));
        }
        Ok((x, report))
    }
}
