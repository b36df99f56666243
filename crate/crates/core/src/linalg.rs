//! Sparse linear algebra: Laplacian assembly, a direct/iterative solver
//! behind one interface, and gauge-fixed singular solves.
//!
//! The direct path is `sprs-ldl` (LDLᵀ with reverse Cuthill–McKee
//! ordering); the iterative path is Jacobi-preconditioned conjugate
//! gradients.

use sprs::{CsMat, TriMat};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::{Error, Result};

pub type SparseMatrix = CsMat<f64>;

/// Above this many unknowns [`SolverChoice::Auto`] switches to CG.
pub const DIRECT_SOLVER_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverChoice {
    #[default]
    Auto,
    Direct,
    Iterative,
}

/// Weighted graph Laplacian `L = D - W` (CSR) from `(i, j, w)` edges.
pub fn laplacian(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> SparseMatrix {
    let mut tri = TriMat::new((n, n));
    let mut diag = vec![0.0; n];
    for (i, j, w) in edges {
        tri.add_triplet(i, j, -w);
        tri.add_triplet(j, i, -w);
        diag[i] += w;
        diag[j] += w;
    }
    for (i, d) in diag.into_iter().enumerate() {
        tri.add_triplet(i, i, d);
    }
    tri.to_csr()
}

/// `out = A x`.
pub fn matvec(a: &SparseMatrix, x: &[f64], out: &mut [f64]) {
    for (row, vec) in a.outer_iterator().enumerate() {
        out[row] = vec.iter().map(|(col, &v)| v * x[col]).sum();
    }
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Sizes of the connected components of the graph whose edges are the
/// nonzero off-diagonal entries of `a`.
pub fn components(a: &SparseMatrix) -> Vec<usize> {
    let n = a.rows();
    let mut uf = petgraph::unionfind::UnionFind::<usize>::new(n);
    for (row, vec) in a.outer_iterator().enumerate() {
        for (col, &v) in vec.iter() {
            if col != row && v != 0.0 {
                uf.union(row, col);
            }
        }
    }
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    for i in 0..n {
        *counts.entry(uf.find(i)).or_default() += 1;
    }
    let mut sizes: Vec<usize> = counts.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Factorized symmetric positive definite operator.
pub enum LinearSolver {
    /// A 1×1 system (the sparse factorization needs at least two rows).
    Scalar(f64),
    Direct(LdlNumeric<f64, usize>),
    ConjugateGradient(ConjugateGradient),
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinearSolver::Scalar(a) => write!(f, "LinearSolver::Scalar({a})"),
            LinearSolver::Direct(ldl) => write!(f, "LinearSolver::Direct(n = {}, nnz(L) = {})", ldl.problem_size(), ldl.nnz()),
            LinearSolver::ConjugateGradient(cg) => write!(f, "LinearSolver::ConjugateGradient(n = {})", cg.matrix.rows()),
        }
    }
}

impl LinearSolver {
    pub fn new(matrix: SparseMatrix, choice: SolverChoice) -> Result<Self> {
        let n = matrix.rows();
        let direct = match choice {
            SolverChoice::Auto => n < DIRECT_SOLVER_LIMIT,
            SolverChoice::Direct => true,
            SolverChoice::Iterative => false,
        };
        if n == 1 {
            let a = matrix.get(0, 0).copied().unwrap_or(0.0);
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Solver("matrix is not positive definite".into()));
            }
            return Ok(LinearSolver::Scalar(a));
        }
        if direct {
            let csc = matrix.to_csc();
            let ldl = Ldl::new().numeric(csc.view()).map_err(|e| Error::Solver(format!("LDL factorization failed: {e}")))?;
            if ldl.d().iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
                return Err(Error::Solver("matrix is not positive definite".into()));
            }
            Ok(LinearSolver::Direct(ldl))
        } else {
            Ok(LinearSolver::ConjugateGradient(ConjugateGradient::new(matrix)?))
        }
    }

    pub fn size(&self) -> usize {
        match self {
            LinearSolver::Scalar(_) => 1,
            LinearSolver::Direct(ldl) => ldl.problem_size(),
            LinearSolver::ConjugateGradient(cg) => cg.matrix.rows(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            LinearSolver::Scalar(a) => Ok(vec![rhs[0] / a]),
            LinearSolver::Direct(ldl) => Ok(ldl.solve(rhs)),
            LinearSolver::ConjugateGradient(cg) => cg.solve(rhs),
        }
    }
}

pub struct ConjugateGradient {
    matrix: SparseMatrix,
    inv_diag: Vec<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl ConjugateGradient {
    pub fn new(matrix: SparseMatrix) -> Result<Self> {
        let n = matrix.rows();
        let mut inv_diag = vec![0.0; n];
        for (row, vec) in matrix.outer_iterator().enumerate() {
            let d = vec.get(row).copied().unwrap_or(0.0);
            if !(d > 0.0) {
                return Err(Error::Solver(format!("nonpositive diagonal at row {row}")));
            }
            inv_diag[row] = 1.0 / d;
        }
        Ok(ConjugateGradient { matrix, inv_diag, tolerance: 1e-13, max_iterations: 20 * n.max(50) })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut x = vec![0.0; n];
        if norm_b == 0.0 {
            return Ok(x);
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..self.max_iterations {
            matvec(&self.matrix, &p, &mut ap);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let norm_r = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm_r <= self.tolerance * norm_b {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * self.inv_diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::Solver(format!("conjugate gradients did not converge in {} iterations", self.max_iterations)))
    }
}

/// Solves the singular Laplacian-like system `K x = f` (symmetric PSD, zero
/// row sums, connected) with `x[pin] = 0`. The right-hand side must sum to
/// zero within `BALANCE` of `Σ|f|`; any tiny residual imbalance is dropped.
/// Residual target: `‖K x − f‖∞ ≤ 1e−9 ‖f‖∞`.
pub fn solve_pinned(k: &SparseMatrix, f: &[f64], pin: usize, choice: SolverChoice) -> Result<Vec<f64>> {
    let n = k.rows();
    if f.len() != n || pin >= n {
        return Err(Error::invalid("solve_pinned: dimension mismatch"));
    }
    let sizes = components(k);
    if sizes.len() > 1 {
        return Err(Error::Disconnected { components: sizes.len(), sizes });
    }
    let imbalance: f64 = f.iter().sum();
    let scale: f64 = f.iter().map(|v| v.abs()).sum();
    if imbalance != 0.0 && imbalance.abs() > crate::network::BALANCE_TOLERANCE * scale {
        return Err(Error::Unbalanced { imbalance });
    }
    let f_norm = max_abs(f);
    if f_norm == 0.0 || n == 1 {
        return Ok(vec![0.0; n]);
    }
    let shift = imbalance / n as f64;
    let rhs: Vec<f64> = f.iter().map(|v| v - shift).collect();

    // Reduced system without the pinned row/column.
    let map = |i: usize| if i < pin { i } else { i - 1 };
    let mut tri = TriMat::new((n - 1, n - 1));
    for (row, vec) in k.outer_iterator().enumerate() {
        if row == pin {
            continue;
        }
        for (col, &v) in vec.iter() {
            if col != pin {
                tri.add_triplet(map(row), map(col), v);
            }
        }
    }
    let solver = LinearSolver::new(tri.to_csr(), choice)?;
    let reduced_rhs: Vec<f64> = (0..n).filter(|&i| i != pin).map(|i| rhs[i]).collect();
    let mut x = vec![0.0; n];
    let mut y = solver.solve(&reduced_rhs)?;
    let mut kx = vec![0.0; n];
    for _refine in 0..3 {
        for i in 0..n {
            x[i] = if i == pin { 0.0 } else { y[map(i)] };
        }
        matvec(k, &x, &mut kx);
        let residual: Vec<f64> = (0..n).map(|i| rhs[i] - kx[i]).collect();
        if max_abs(&residual) <= 1e-10 * f_norm {
            return Ok(x);
        }
        let r_red: Vec<f64> = (0..n).filter(|&i| i != pin).map(|i| residual[i]).collect();
        let dy = solver.solve(&r_red)?;
        for (a, b) in y.iter_mut().zip(dy) {
            *a += b;
        }
    }
    for i in 0..n {
        x[i] = if i == pin { 0.0 } else { y[map(i)] };
    }
    matvec(k, &x, &mut kx);
    let res = (0..n).map(|i| (rhs[i] - kx[i]).abs()).fold(0.0, f64::max);
    if res > 1e-9 * f_norm {
        return Err(Error::Solver(format!("steady-state residual {res:e} exceeds tolerance")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> SparseMatrix {
        laplacian(n, (0..n - 1).map(|i| (i, i + 1, 1.0 + i as f64)))
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let l = path_laplacian(5);
        let ones = vec![1.0; 5];
        let mut out = vec![0.0; 5];
        matvec(&l, &ones, &mut out);
        assert!(max_abs(&out) < 1e-15);
        assert_eq!(components(&l), vec![5]);
    }

    #[test]
    fn direct_and_cg_agree() {
        let n = 30;
        let l = path_laplacian(n);
        let mut tri = TriMat::new((n, n));
        for (r, vec) in l.outer_iterator().enumerate() {
            for (c, &v) in vec.iter() {
                tri.add_triplet(r, c, v + if r == c { 0.5 } else { 0.0 });
            }
        }
        let a: SparseMatrix = tri.to_csr();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x1 = LinearSolver::new(a.clone(), SolverChoice::Direct).unwrap().solve(&rhs).unwrap();
        let x2 = LinearSolver::new(a, SolverChoice::Iterative).unwrap().solve(&rhs).unwrap();
        for (a, b) in x1.iter().zip(&x2) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn pinned_solve_two_nodes() {
        let l = laplacian(2, [(0, 1, 2.0)]);
        let x = solve_pinned(&l, &[1.0, -1.0], 0, SolverChoice::Auto).unwrap();
        assert_eq!(x[0], 0.0);
        assert!((x[1] + 0.5).abs() < 1e-15);
        assert!(matches!(solve_pinned(&l, &[1.0, 0.0], 0, SolverChoice::Auto), Err(Error::Unbalanced { .. })));
        let disconnected = laplacian(3, [(0, 1, 1.0)]);
        assert!(matches!(solve_pinned(&disconnected, &[0.0; 3], 0, SolverChoice::Auto), Err(Error::Disconnected { .. })));
    }
}
