use super::knots::KnotVector;
use super::Point;
use crate::error::{CigaError, Result};
use serde::{Deserialize, Serialize};

/// Default lower bound on |det J| for the bijectivity check.
pub const DEFAULT_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchKind {
    Bspline,
    Nurbs,
}

/// A B-spline or NURBS map from [0,1]^d (d = 1 or 2) into the plane (d = 2)
/// or the line (d = 1, stored in the x slot).
///
/// Control points are stored with the first parametric index varying
/// fastest: point (i, j) lives at `i + n1 * j`.
#[derive(Debug, Clone)]
pub struct NurbsPatch {
    id: usize,
    knots: Vec<KnotVector>,
    points: Vec<Point>,
    weights: Vec<f64>,
    kind: PatchKind,
}

/// Nonzero rational basis functions at a parametric point.
#[derive(Debug, Clone)]
pub struct RationalBasis {
    /// Global control-point indices.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Parametric gradients (second slot unused for d = 1).
    pub grads: Vec<[f64; 2]>,
    /// Weighting function W(xi) and its parametric gradient.
    pub weight: f64,
    pub weight_grad: [f64; 2],
}

/// Everything a single pass over the nonzero basis yields.
#[derive(Debug, Clone, Copy)]
pub struct PatchEval {
    pub x: Point,
    /// `jac[r][c] = d x_r / d xi_c`
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub weight: f64,
    pub weight_grad: [f64; 2],
}

/// On-disk patch description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchJson {
    pub degree: Vec<usize>,
    pub knots: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Vec<f64>,
    pub kind: PatchKind,
}

impl NurbsPatch {
    /// Builds a patch and samples det J on a (4p+1)^d grid per knot span,
    /// rejecting it if |det J| <= delta anywhere.
    pub fn new(
        id: usize,
        knots: Vec<KnotVector>,
        points: Vec<Point>,
        weights: Vec<f64>,
        kind: PatchKind,
        delta: f64,
    ) -> Result<Self> {
        let patch = Self::new_unchecked(id, knots, points, weights, kind)?;
        patch.check_bijective(delta)?;
        Ok(patch)
    }

    /// Validates sizes and weights but skips the bijectivity sampling.
    pub fn new_unchecked(
        id: usize,
        knots: Vec<KnotVector>,
        points: Vec<Point>,
        weights: Vec<f64>,
        kind: PatchKind,
    ) -> Result<Self> {
        if knots.is_empty() || knots.len() > 2 {
            return Err(CigaError::InvalidPatch(format!(
                "{} parametric directions; only 1 or 2 are supported",
                knots.len()
            )));
        }
        let count: usize = knots.iter().map(|k| k.basis_count()).product();
        if points.len() != count {
            return Err(CigaError::InvalidPatch(format!(
                "{} control points for a {count}-point net",
                points.len()
            )));
        }
        let weights = if weights.is_empty() { vec![1.0; count] } else { weights };
        if weights.len() != count {
            return Err(CigaError::InvalidPatch(format!(
                "{} weights for {count} control points",
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(CigaError::InvalidPatch("weights must be positive".into()));
        }
        if kind == PatchKind::Bspline && weights.iter().any(|&w| w != 1.0) {
            return Err(CigaError::InvalidPatch("a B-spline patch cannot carry weights".into()));
        }
        Ok(Self {
            id,
            knots,
            points,
            weights,
            kind,
        })
    }

    /// Univariate patch with unit weights.
    pub fn bspline_1d(id: usize, knots: KnotVector, points: &[f64]) -> Result<Self> {
        let pts = points.iter().map(|&x| [x, 0.0]).collect();
        Self::new(id, vec![knots], pts, Vec::new(), PatchKind::Bspline, DEFAULT_DELTA)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.knots.len()
    }

    pub fn kind(&self) -> PatchKind {
        self.kind
    }

    pub fn knot_vectors(&self) -> &[KnotVector] {
        &self.knots
    }

    pub fn control_points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Control net dimensions (n1, n2); n2 = 1 for curves.
    pub fn net_dims(&self) -> (usize, usize) {
        let n1 = self.knots[0].basis_count();
        let n2 = self.knots.get(1).map_or(1, |k| k.basis_count());
        (n1, n2)
    }

    fn check_domain(&self, xi: &Point) -> Result<()> {
        for &v in &xi[..self.dim()] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CigaError::Domain { value: v });
            }
        }
        Ok(())
    }

    /// Rational basis functions R = N w / W with parametric gradients.
    pub fn eval_nurbs_basis(&self, xi: Point) -> Result<RationalBasis> {
        self.check_domain(&xi)?;
        let bu = self.knots[0].eval(xi[0])?;
        let (bv, n1) = match self.knots.get(1) {
            Some(kv) => (Some(kv.eval(xi[1])?), self.knots[0].basis_count()),
            None => (None, 0),
        };
        let mut indices = Vec::new();
        let mut nw = Vec::new();
        let mut dnw = Vec::new();
        match &bv {
            None => {
                for a in 0..bu.values.len() {
                    let k = bu.first + a;
                    let w = self.weights[k];
                    indices.push(k);
                    nw.push(bu.values[a] * w);
                    dnw.push([bu.derivs[a] * w, 0.0]);
                }
            }
            Some(bv) => {
                for b in 0..bv.values.len() {
                    for a in 0..bu.values.len() {
                        let k = (bu.first + a) + n1 * (bv.first + b);
                        let w = self.weights[k];
                        indices.push(k);
                        nw.push(bu.values[a] * bv.values[b] * w);
                        dnw.push([
                            bu.derivs[a] * bv.values[b] * w,
                            bu.values[a] * bv.derivs[b] * w,
                        ]);
                    }
                }
            }
        }
        let weight: f64 = nw.iter().sum();
        if !(weight > 0.0) {
            return Err(CigaError::InvalidPatch(format!(
                "weighting function vanished at {xi:?}"
            )));
        }
        let weight_grad = dnw.iter().fold([0.0, 0.0], |acc, g| [acc[0] + g[0], acc[1] + g[1]]);
        let values: Vec<f64> = nw.iter().map(|v| v / weight).collect();
        let grads = nw
            .iter()
            .zip(&dnw)
            .map(|(v, g)| {
                [
                    (g[0] - v * weight_grad[0] / weight) / weight,
                    (g[1] - v * weight_grad[1] / weight) / weight,
                ]
            })
            .collect();
        Ok(RationalBasis {
            indices,
            values,
            grads,
            weight,
            weight_grad,
        })
    }

    /// Position, Jacobian, determinant and weighting function in one pass.
    pub fn eval(&self, xi: Point) -> Result<PatchEval> {
        let rb = self.eval_nurbs_basis(xi)?;
        let mut x = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for ((&k, &r), g) in rb.indices.iter().zip(&rb.values).zip(&rb.grads) {
            let p = self.points[k];
            for c in 0..2 {
                x[c] += r * p[c];
                jac[c][0] += g[0] * p[c];
                jac[c][1] += g[1] * p[c];
            }
        }
        let det = if self.dim() == 1 {
            jac[0][0]
        } else {
            jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]
        };
        Ok(PatchEval {
            x,
            jac,
            det,
            weight: rb.weight,
            weight_grad: rb.weight_grad,
        })
    }

    pub fn map_forward(&self, xi: Point) -> Result<Point> {
        Ok(self.eval(xi)?.x)
    }

    /// Jacobian and determinant; fails when |det J| <= delta.
    pub fn jacobian(&self, xi: Point, delta: f64) -> Result<([[f64; 2]; 2], f64)> {
        let e = self.eval(xi)?;
        if e.det.abs() <= delta {
            return Err(CigaError::Bijectivity { det: e.det, xi });
        }
        Ok((e.jac, e.det))
    }

    /// Weighting function W and its parametric gradient.
    pub fn weight_fn(&self, xi: Point) -> Result<(f64, [f64; 2])> {
        let rb = self.eval_nurbs_basis(xi)?;
        Ok((rb.weight, rb.weight_grad))
    }

    /// Samples det J on a (4p+1)-point grid per span and direction.
    pub fn check_bijective(&self, delta: f64) -> Result<()> {
        let samples: Vec<Vec<f64>> = self
            .knots
            .iter()
            .map(|kv| {
                let q = 4 * kv.degree().max(1);
                let b = kv.breakpoints();
                let mut s = Vec::new();
                for w in b.windows(2) {
                    for t in 0..=q {
                        s.push(w[0] + (w[1] - w[0]) * t as f64 / q as f64);
                    }
                }
                s
            })
            .collect();
        let sv = samples.get(1).cloned().unwrap_or_else(|| vec![0.0]);
        let mut sign = 0.0;
        for &v in &sv {
            for &u in &samples[0] {
                let xi = [u, v];
                let det = self.eval(xi)?.det;
                if det.abs() <= delta || (sign != 0.0 && det.signum() != sign) {
                    return Err(CigaError::Bijectivity { det, xi });
                }
                sign = det.signum();
            }
        }
        Ok(())
    }

    pub fn from_json(id: usize, json: &PatchJson) -> Result<Self> {
        if json.degree.len() != json.knots.len() {
            return Err(CigaError::InvalidPatch("degree and knots lengths differ".into()));
        }
        let knots = json
            .knots
            .iter()
            .zip(&json.degree)
            .map(|(k, &p)| KnotVector::new(k.clone(), p))
            .collect::<Result<Vec<_>>>()?;
        let points = json
            .points
            .iter()
            .map(|p| match p.as_slice() {
                [x] => Ok([*x, 0.0]),
                [x, y] => Ok([*x, *y]),
                _ => Err(CigaError::InvalidPatch(format!("bad control point {p:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(id, knots, points, json.weights.clone(), json.kind, DEFAULT_DELTA)
    }

    pub fn to_json(&self) -> PatchJson {
        let d = self.dim();
        PatchJson {
            degree: self.knots.iter().map(|k| k.degree()).collect(),
            knots: self.knots.iter().map(|k| k.knots().to_vec()).collect(),
            points: self.points.iter().map(|p| p[..d].to_vec()).collect(),
            weights: self.weights.clone(),
            kind: self.kind,
        }
    }
}
