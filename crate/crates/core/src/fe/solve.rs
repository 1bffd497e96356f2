//! Constrained solves of assembled systems.

use super::assembly::{Csr, DofSystem, SolveConfig, SolverKind};
use crate::error::{CigaError, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Solution with diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Values of every unknown (prescribed ones included).
    pub u: Vec<f64>,
    /// ||K_ff u_f - rhs|| / ||rhs|| on the free unknowns.
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Free-free block and right-hand side after substituting prescribed values.
fn reduce(sys: &DofSystem) -> (Csr, Vec<f64>, Vec<usize>, Vec<f64>) {
    let n = sys.k.n;
    let mut u = vec![0.0; n];
    let mut is_fixed = vec![false; n];
    for &(d, v) in &sys.fixed {
        u[d] = v;
        is_fixed[d] = true;
    }
    let mut free_index = vec![usize::MAX; n];
    let mut free = Vec::new();
    for d in 0..n {
        if !is_fixed[d] {
            free_index[d] = free.len();
            free.push(d);
        }
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = Vec::with_capacity(free.len());
    for &d in &free {
        let mut r = sys.f[d];
        for k in sys.k.row_ptr[d]..sys.k.row_ptr[d + 1] {
            let c = sys.k.cols[k];
            if is_fixed[c] {
                r -= sys.k.vals[k] * u[c];
            } else {
                cols.push(free_index[c]);
                vals.push(sys.k.vals[k]);
            }
        }
        rhs.push(r);
        row_ptr.push(cols.len());
    }
    (
        Csr {
            n: free.len(),
            row_ptr,
            cols,
            vals,
        },
        rhs,
        free,
        u,
    )
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(k: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; k.n];
    k.matvec(x, &mut r);
    let num: f64 = r.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den = norm(b);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

const REFINEMENT_STEPS: usize = 3;

fn cholesky(k: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let n = k.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    // lower triangle of the symmetric matrix
    let mut trip = Vec::with_capacity(k.nnz() / 2 + n);
    for i in 0..n {
        for p in k.row_ptr[i]..k.row_ptr[i + 1] {
            let j = k.cols[p];
            if j <= i {
                trip.push(Triplet::new(i, j, k.vals[p]));
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| CigaError::Config(format!("sparse matrix construction failed: {e:?}")))?;
    let llt = a.sp_cholesky(faer::Side::Lower).map_err(|e| CigaError::SingularSystem(format!("Cholesky factorization failed: {e:?}")))?;
    let mut rhs = Mat::<f64>::zeros(n, 1);
    for (i, &v) in b.iter().enumerate() {
        rhs[(i, 0)] = v;
    }
    let x = llt.solve(&rhs);
    let mut out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CigaError::SingularSystem("non-finite solution".into()));
    }
    // a few steps of iterative refinement for ill-conditioned stiffness
    let mut kx = vec![0.0; n];
    let mut res = residual(k, &out, b);
    for _ in 0..REFINEMENT_STEPS {
        if res < 1e-13 {
            break;
        }
        k.matvec(&out, &mut kx);
        for i in 0..n {
            rhs[(i, 0)] = b[i] - kx[i];
        }
        let dx = llt.solve(&rhs);
        let trial: Vec<f64> = out.iter().enumerate().map(|(i, v)| v + dx[(i, 0)]).collect();
        let r = residual(k, &trial, b);
        if !(r < res) {
            break;
        }
        out = trial;
        res = r;
    }
    Ok(out)
}

fn pcg(k: &Csr, b: &[f64], tol: f64, max_it: usize) -> Result<(Vec<f64>, usize)> {
    let n = k.n;
    let diag = k.diagonal();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(CigaError::SingularSystem("non-positive diagonal entry".into()));
    }
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_it {
        k.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(CigaError::SingularSystem("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = norm(&r);
        if rn <= tol * bn {
            return Ok((x, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(CigaError::NoConvergence {
        iterations: max_it,
        residual: norm(&r) / bn,
    })
}

/// Solves K u = f with the prescribed values substituted.
pub fn solve_system(sys: &DofSystem, cfg: &SolveConfig) -> Result<Solution> {
    cfg.validate()?;
    let (kff, rhs, free, mut u) = reduce(sys);
    let (x, iterations) = match cfg.solver {
        SolverKind::Direct => (cholesky(&kff, &rhs)?, 1),
        SolverKind::ConjugateGradient {
            tolerance,
            max_iterations,
        } => pcg(&kff, &rhs, tolerance, max_iterations)?,
    };
    let relative_residual = residual(&kff, &x, &rhs);
    if let SolverKind::Direct = cfg.solver {
        if !(relative_residual < 1e-8) {
            return Err(CigaError::SingularSystem(format!("direct solve left relative residual {relative_residual:e}")));
        }
    }
    for (&d, v) in free.iter().zip(x) {
        u[d] = v;
    }
    Ok(Solution {
        u,
        relative_residual,
        iterations,
    })
}
