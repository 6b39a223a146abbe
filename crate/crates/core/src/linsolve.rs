//! Linear solvers for the per-step system.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, MatMut, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{gmres, CsrMatrix};

/// Largest `n_div` for which [`SolverKind::Auto`] picks the direct solver.
pub const DIRECT_LIMIT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Auto,
    Direct,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub restart: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            restart: 50,
            tol: 1e-10,
            max_iter: 5000,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter("restart and max_iter must be positive".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter(format!("solver tol must be in (0, 1), got {}", self.tol)));
        }
        Ok(())
    }

    pub fn use_direct(&self, n_div: usize) -> bool {
        match self.kind {
            SolverKind::Auto => n_div <= DIRECT_LIMIT,
            SolverKind::Direct => true,
            SolverKind::Gmres => false,
        }
    }
}

/// Sparse LU whose symbolic analysis is computed once per pattern.
///
/// The CSR arrays are handed to faer as the CSC storage of `Aᵀ`; solving with the
/// transposed factors then yields `A x = b`.
pub struct DirectSolver {
    symbolic_mat: SymbolicSparseColMat<usize>,
    symbolic_lu: SymbolicLu<usize>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("n", &self.symbolic_mat.nrows())
            .finish_non_exhaustive()
    }
}

impl DirectSolver {
    pub fn new(pattern: &CsrMatrix) -> Result<Self> {
        faer::set_global_parallelism(Par::Seq);
        if pattern.n_rows != pattern.n_cols {
            return Err(Error::InvalidParameter("direct solver needs a square matrix".into()));
        }
        let symbolic_mat = SymbolicSparseColMat::new_checked(
            pattern.n_cols,
            pattern.n_rows,
            pattern.row_offsets.clone(),
            None,
            pattern.col_indices.clone(),
        );
        let symbolic_lu = SymbolicLu::try_new(symbolic_mat.as_ref()).map_err(|_| Error::Singular)?;
        Ok(DirectSolver {
            symbolic_mat,
            symbolic_lu,
        })
    }

    /// Factorizes `a` (which must share the pattern) and solves `a x = b`.
    pub fn solve(&self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if a.col_indices.len() != self.symbolic_mat.compute_nnz() || a.n_rows != self.symbolic_mat.nrows() {
            return Err(Error::InvalidParameter("matrix pattern differs from the analysed one".into()));
        }
        let mat = SparseColMatRef::new(self.symbolic_mat.as_ref(), &a.values);
        let lu = Lu::try_new_with_symbolic(self.symbolic_lu.clone(), mat).map_err(|_| Error::Singular)?;
        let mut x = b.to_vec();
        let n = x.len();
        lu.solve_transpose_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, n, 1));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular);
        }
        Ok(x)
    }
}

/// Dispatches between the direct solver and GMRES(m)+ILU(0).
#[derive(Debug)]
pub struct LinearSolver {
    options: SolverOptions,
    direct: Option<DirectSolver>,
    /// Relative residual histories of the most recent iterative solve.
    pub last_history: Vec<f64>,
}

impl LinearSolver {
    pub fn new(pattern: &CsrMatrix, n_div: usize, options: SolverOptions) -> Result<Self> {
        options.validate()?;
        let direct = if options.use_direct(n_div) {
            Some(DirectSolver::new(pattern)?)
        } else {
            None
        };
        Ok(LinearSolver {
            options,
            direct,
            last_history: Vec::new(),
        })
    }

    pub fn is_direct(&self) -> bool {
        self.direct.is_some()
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        match &self.direct {
            Some(d) => d.solve(a, b),
            None => {
                let (x, hist) = gmres(a, b, guess, self.options.restart, self.options.tol, self.options.max_iter)?;
                self.last_history = hist;
                Ok(x)
            }
        }
    }
}
