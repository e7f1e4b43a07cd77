//! The SPD system β₂·G + (ρ + β₁)·I shared by every v-update of the inner
//! solver. Factorized once (sparse LDLᵀ, reverse Cuthill-McKee ordering) or,
//! for large meshes, solved by diagonally preconditioned CG.

use sprs::{CsMat, FillInReduction, SymmetryCheck, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::diffops::{csr_mul_into, GramMatrix};
use crate::error::{check_len, Error, Result};
use crate::scalar::{norm, Real};

/// Vertex count up to which [`LinearSolver::Auto`] factorizes directly.
pub const DIRECT_SOLVE_LIMIT: usize = 50_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LinearSolver {
    #[default]
    Auto,
    Direct,
    Cg,
}

enum Backend<T> {
    Direct(LdlNumeric<T, usize>),
    Cg { inv_diag: Vec<T> },
}

pub struct NormalEquationSystem<T> {
    matrix: CsMat<T>,
    backend: Backend<T>,
}

impl<T: Real> std::fmt::Debug for NormalEquationSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormalEquationSystem")
            .field("dim", &self.dim())
            .field("nnz", &self.matrix.nnz())
            .field("direct", &matches!(self.backend, Backend::Direct(_)))
            .finish()
    }
}

impl<T: Real> NormalEquationSystem<T> {
    /// Builds `gram_weight · G + shift · I`.
    pub fn new(gram: &GramMatrix<T>, gram_weight: T, shift: T, kind: LinearSolver) -> Result<Self> {
        let n = gram.dim();
        let mut tri = TriMat::with_capacity((n, n), gram.nnz() + n);
        for (i, row) in gram.matrix().outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                tri.add_triplet(i, j, gram_weight * v);
            }
        }
        for i in 0..n {
            tri.add_triplet(i, i, shift);
        }
        Self::from_matrix(tri.to_csr(), kind)
    }

    /// Wraps an arbitrary symmetric positive definite matrix.
    pub fn from_matrix(matrix: CsMat<T>, kind: LinearSolver) -> Result<Self> {
        let n = matrix.rows();
        check_len("normal-equation matrix", n, matrix.cols())?;
        let direct = match kind {
            LinearSolver::Auto => n <= DIRECT_SOLVE_LIMIT,
            LinearSolver::Direct => true,
            LinearSolver::Cg => false,
        };
        let backend = if direct {
            let csc = matrix.to_csc();
            let ldl = Ldl::new()
                .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
                .check_symmetry(SymmetryCheck::DontCheckSymmetry)
                .numeric(csc.view())
                .map_err(|_| Error::SingularSystem)?;
            if ldl.d().iter().any(|&d| !(d > T::zero())) {
                return Err(Error::SingularSystem);
            }
            Backend::Direct(ldl)
        } else {
            let mut inv_diag = vec![T::zero(); n];
            for (i, row) in matrix.outer_iterator().enumerate() {
                let d = row.get(i).copied().unwrap_or_else(T::zero);
                if !(d > T::zero()) {
                    return Err(Error::SingularSystem);
                }
                inv_diag[i] = T::one() / d;
            }
            Backend::Cg { inv_diag }
        };
        Ok(Self { matrix, backend })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsMat<T> {
        &self.matrix
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct(_))
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        csr_mul_into(&self.matrix, x, &mut y);
        y
    }

    /// Solves A x = rhs. `guess` warm-starts the CG path and is ignored by the
    /// direct path.
    pub fn solve(&self, rhs: &[T], guess: Option<&[T]>, cg_tol: T, cg_max_iter: usize) -> Result<Vec<T>> {
        check_len("normal-equation rhs", self.dim(), rhs.len())?;
        match &self.backend {
            Backend::Direct(ldl) => Ok(ldl.solve(rhs.to_vec())),
            Backend::Cg { inv_diag } => self.pcg(inv_diag, rhs, guess, cg_tol, cg_max_iter),
        }
    }

    fn pcg(&self, inv_diag: &[T], b: &[T], guess: Option<&[T]>, tol: T, max_iter: usize) -> Result<Vec<T>> {
        let n = self.dim();
        let b_norm = norm(b);
        if b_norm == T::zero() {
            return Ok(vec![T::zero(); n]);
        }
        let mut x = match guess {
            Some(g) if g.len() == n => g.to_vec(),
            _ => vec![T::zero(); n],
        };
        let mut r = self.mul_vec(&x);
        r.iter_mut().zip(b).for_each(|(ri, &bi)| *ri = bi - *ri);
        let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(&ri, &d)| ri * d).collect();
        let mut p = z.clone();
        let mut rz: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
        let mut ap = vec![T::zero(); n];
        let mut res = norm(&r) / b_norm;
        for _ in 0..max_iter {
            if res <= tol {
                return Ok(x);
            }
            csr_mul_into(&self.matrix, &p, &mut ap);
            let pap: T = p.iter().zip(&ap).map(|(&a, &b)| a * b).sum();
            if !(pap > T::zero()) {
                return Err(Error::SingularSystem);
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            res = norm(&r) / b_norm;
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_next: T = r.iter().zip(&z).map(|(&a, &b)| a * b).sum();
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        if res <= tol {
            Ok(x)
        } else {
            Err(Error::IterationLimitExceeded {
                iterations: max_iter,
                residual: res.to_f64_lossy(),
            })
        }
    }
}
