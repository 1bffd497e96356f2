use super::basis::{Monomials, PolySpace, ReproducedBasis, WeightFn, WeightedMonomials};
use super::rbf::{rbf_eval, RbfKind};
use crate::error::{CigaError, Result};
use crate::spline::Point;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Reproduced basis family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    #[default]
    Polynomial,
    /// Monomials divided by the NURBS weighting function.
    NurbsWeightedPolynomial,
}

/// Convolution patch parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    /// Patch size: element layers around the centre node.
    pub s: usize,
    /// Dilation (support radius). Mesh-level code measures it in units of
    /// the local element size.
    pub a: f64,
    /// Reproducing order.
    pub p: usize,
    pub rbf: RbfKind,
    pub basis_kind: BasisKind,
    pub space: PolySpace,
}

impl ConvSpec {
    /// `a = s + 1`, cubic kernel, tensor polynomials.
    pub fn new(s: usize, p: usize) -> Self {
        Self {
            s,
            a: (s + 1) as f64,
            p,
            rbf: RbfKind::Cubic,
            basis_kind: BasisKind::Polynomial,
            space: PolySpace::Tensor,
        }
    }

    /// The reproduced basis for nodes in `dim` dimensions, in coordinates
    /// scaled about `center`. `weight` is required for the weighted kind.
    pub fn basis(
        &self,
        dim: usize,
        order: usize,
        center: Point,
        scale: f64,
        weight: Option<WeightFn>,
    ) -> Result<Arc<dyn ReproducedBasis>> {
        let mono = Monomials::new(dim, order, self.space, center, scale);
        match (self.basis_kind, weight) {
            (BasisKind::Polynomial, _) => Ok(Arc::new(mono)),
            (BasisKind::NurbsWeightedPolynomial, Some(w)) => {
                Ok(Arc::new(WeightedMonomials { inner: mono, weight: w }))
            }
            (BasisKind::NurbsWeightedPolynomial, None) => Err(CigaError::Config(
                "weighted basis requested without a weighting function".into(),
            )),
        }
    }
}

/// The convolution patch functions W_K of one centre node:
/// W(x) = [Psi(x); P(x)]^T G^{-1}[:, ..n].
#[derive(Debug, Clone)]
pub struct ConvFunctions {
    nodes: Vec<Point>,
    dim: usize,
    a: f64,
    rbf: RbfKind,
    basis: Arc<dyn ReproducedBasis>,
    /// (n + m) x n, row-major.
    h: Vec<f64>,
}

fn dist(dim: usize, x: &Point, y: &Point) -> (f64, [f64; 2]) {
    let d = [x[0] - y[0], if dim == 1 { 0.0 } else { x[1] - y[1] }];
    ((d[0] * d[0] + d[1] * d[1]).sqrt(), d)
}

const REFINEMENT_STEPS: usize = 2;

/// rhs - g * x with each entry summed in double-double (Dot2).
fn compensated_residual(g: &DMatrix<f64>, x: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(g.nrows(), x.ncols(), |i, c| {
        let (mut s, mut e) = (rhs[(i, c)], 0.0);
        for k in 0..x.nrows() {
            let p = -g[(i, k)] * x[(k, c)];
            let pe = (-g[(i, k)]).mul_add(x[(k, c)], -p);
            let t = s + p;
            let z = t - s;
            e += (s - (t - z)) + (p - z) + pe;
            s = t;
        }
        s + e
    })
}

/// Solves the moment system for the patch `nodes` centred at mesh node
/// `center` (used only for error reporting). The dilation is `spec.a` in the
/// coordinates of `nodes`.
pub fn build_conv_functions(
    center: usize,
    nodes: &[Point],
    basis: Arc<dyn ReproducedBasis>,
    spec: &ConvSpec,
) -> Result<ConvFunctions> {
    let n = nodes.len();
    let m = basis.len();
    let dim = basis.dim();
    if n < m || n == 0 {
        return Err(CigaError::InsufficientNodes { node: center, n, m });
    }
    if !(spec.a > 0.0) {
        return Err(CigaError::Config(format!("dilation must be positive, got {}", spec.a)));
    }
    if n > 1 {
        for (j, xj) in nodes.iter().enumerate() {
            let covered = nodes
                .iter()
                .enumerate()
                .any(|(k, xk)| k != j && dist(dim, xj, xk).0 < spec.a);
            if !covered {
                return Err(CigaError::SupportMissesNodes {
                    node: center,
                    member: j,
                    a: spec.a,
                });
            }
        }
    }
    let size = n + m;
    let mut g = DMatrix::<f64>::zeros(size, size);
    let mut pv = vec![0.0; m];
    let mut pg = vec![[0.0; 2]; m];
    for i in 0..n {
        for j in i..n {
            let v = rbf_eval(spec.rbf, dist(dim, &nodes[i], &nodes[j]).0, spec.a, 0);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        basis.eval(nodes[i], &mut pv, &mut pg);
        for k in 0..m {
            g[(i, n + k)] = pv[k];
            g[(n + k, i)] = pv[k];
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(size, n);
    for i in 0..n {
        rhs[(i, i)] = 1.0;
    }
    let lu = g.clone().full_piv_lu();
    let mut sol = lu.solve(&rhs).ok_or(CigaError::SingularMoment { node: center })?;
    // The cubic kernel matrix is poorly conditioned for wide stencils, so
    // refine with residuals accumulated in compensated arithmetic.
    for _ in 0..REFINEMENT_STEPS {
        let r = compensated_residual(&g, &sol, &rhs);
        match lu.solve(&r) {
            Some(dx) => sol += dx,
            None => break,
        }
    }
    let resid = (&g * &sol - &rhs).amax();
    if !resid.is_finite() || resid > 1e-8 {
        return Err(CigaError::SingularMoment { node: center });
    }
    // G [0; I] = [P_n; 0], so H P_n = [0; I] exactly: H reproduces every
    // basis function. Rounding in a wide stencil spoils this, so remove the
    // defect with the least-norm change of each row of H.
    let pn = g.view((0, n), (n, m)).into_owned();
    let target = DMatrix::from_fn(size, m, |r, k| if r == n + k { 1.0 } else { 0.0 });
    let defect = compensated_residual(&sol, &pn, &target);
    let proj = (pn.transpose() * &pn)
        .lu()
        .solve(&pn.transpose())
        .ok_or(CigaError::SingularMoment { node: center })?;
    sol += defect * proj;
    let mut h = vec![0.0; size * n];
    for r in 0..size {
        for c in 0..n {
            h[r * n + c] = sol[(r, c)];
        }
    }
    Ok(ConvFunctions {
        nodes: nodes.to_vec(),
        dim,
        a: spec.a,
        rbf: spec.rbf,
        basis,
        h,
    })
}

impl ConvFunctions {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn basis(&self) -> &Arc<dyn ReproducedBasis> {
        &self.basis
    }

    /// Values and gradients of all W_K at `x`.
    pub fn eval_into(&self, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let n = self.nodes.len();
        let m = self.basis.len();
        let mut row = vec![0.0; n + m];
        let mut drow = vec![[0.0; 2]; n + m];
        for (j, xj) in self.nodes.iter().enumerate() {
            let (r, d) = dist(self.dim, &x, xj);
            row[j] = rbf_eval(self.rbf, r, self.a, 0);
            if r > 0.0 {
                let dr = rbf_eval(self.rbf, r, self.a, 1) / r;
                drow[j] = [dr * d[0], dr * d[1]];
            }
        }
        self.basis.eval(x, &mut row[n..], &mut drow[n..]);
        // Values are accumulated with error compensation: wide stencils have
        // large, cancelling coefficients.
        let mut err = vec![0.0; n];
        values[..n].fill(0.0);
        grads[..n].fill([0.0; 2]);
        for (r, (v, dv)) in row.iter().zip(&drow).enumerate() {
            if *v == 0.0 && dv[0] == 0.0 && dv[1] == 0.0 {
                continue;
            }
            let hr = &self.h[r * n..(r + 1) * n];
            for k in 0..n {
                let p = v * hr[k];
                let pe = v.mul_add(hr[k], -p);
                let t = values[k] + p;
                let z = t - values[k];
                err[k] += (values[k] - (t - z)) + (p - z) + pe;
                values[k] = t;
                grads[k][0] += dv[0] * hr[k];
                grads[k][1] += dv[1] * hr[k];
            }
        }
        for k in 0..n {
            values[k] += err[k];
        }
    }

    pub fn eval(&self, x: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut v = vec![0.0; self.len()];
        let mut g = vec![[0.0; 2]; self.len()];
        self.eval_into(x, &mut v, &mut g);
        (v, g)
    }

    /// Values only.
    pub fn values(&self, x: Point) -> Vec<f64> {
        self.eval(x).0
    }
}
