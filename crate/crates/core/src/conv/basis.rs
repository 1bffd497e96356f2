use crate::spline::Point;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Basis reproduced exactly by convolution patch functions.
pub trait ReproducedBasis: Send + Sync + std::fmt::Debug {
    /// Spatial dimension of the query coordinate (1 or 2).
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Writes all basis values and gradients at `x`.
    fn eval(&self, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]);
}

/// Polynomial space used in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolySpace {
    /// Total degree <= p: (p+1)(p+2)/2 terms.
    Complete,
    /// Degree <= p in each variable: (p+1)^2 terms.
    #[default]
    Tensor,
}

/// Monomials in shifted and scaled coordinates z = (x - center) / scale.
#[derive(Debug, Clone)]
pub struct Monomials {
    dim: usize,
    exps: Vec<(u32, u32)>,
    center: Point,
    scale: f64,
}

impl Monomials {
    pub fn new(dim: usize, order: usize, space: PolySpace, center: Point, scale: f64) -> Self {
        let p = order as u32;
        let exps = if dim == 1 {
            (0..=p).map(|i| (i, 0)).collect()
        } else {
            match space {
                PolySpace::Complete => (0..=p)
                    .flat_map(|t| (0..=t).map(move |j| (t - j, j)))
                    .collect(),
                PolySpace::Tensor => (0..=p).flat_map(|j| (0..=p).map(move |i| (i, j))).collect(),
            }
        };
        Self {
            dim,
            exps,
            center,
            scale,
        }
    }

    /// Monomials in the raw coordinates.
    pub fn plain(dim: usize, order: usize, space: PolySpace) -> Self {
        Self::new(dim, order, space, [0.0, 0.0], 1.0)
    }

    /// Number of terms for the given dimension, order and space.
    pub fn count(dim: usize, order: usize, space: PolySpace) -> usize {
        match (dim, space) {
            (1, _) => order + 1,
            (_, PolySpace::Complete) => (order + 1) * (order + 2) / 2,
            (_, PolySpace::Tensor) => (order + 1) * (order + 1),
        }
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exps
    }
}

fn powi_d(z: f64, e: u32) -> (f64, f64) {
    match e {
        0 => (1.0, 0.0),
        1 => (z, 1.0),
        _ => {
            let zm = z.powi(e as i32 - 1);
            (zm * z, e as f64 * zm)
        }
    }
}

impl ReproducedBasis for Monomials {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.exps.len()
    }

    fn eval(&self, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let zx = (x[0] - self.center[0]) / self.scale;
        let zy = (x[1] - self.center[1]) / self.scale;
        for (k, &(i, j)) in self.exps.iter().enumerate() {
            let (px, dx) = powi_d(zx, i);
            let (py, dy) = if self.dim == 1 { (1.0, 0.0) } else { powi_d(zy, j) };
            values[k] = px * py;
            grads[k] = [dx * py / self.scale, px * dy / self.scale];
        }
    }
}

/// A weighting function returning W and its gradient.
pub type WeightFn = Arc<dyn Fn(Point) -> (f64, [f64; 2]) + Send + Sync>;

/// Monomials divided by a weighting function: P(x) / W(x).
#[derive(Clone)]
pub struct WeightedMonomials {
    pub inner: Monomials,
    pub weight: WeightFn,
}

impl std::fmt::Debug for WeightedMonomials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightedMonomials").field("inner", &self.inner).finish()
    }
}

impl ReproducedBasis for WeightedMonomials {
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn len(&self) -> usize {
        self.inner.len()
    }

    fn eval(&self, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        self.inner.eval(x, values, grads);
        let (w, dw) = (self.weight)(x);
        for (v, g) in values.iter_mut().zip(grads.iter_mut()) {
            *g = [(g[0] - *v * dw[0] / w) / w, (g[1] - *v * dw[1] / w) / w];
            *v /= w;
        }
    }
}

/// Rows of several bases stacked, optionally keeping only a subset.
#[derive(Debug, Clone)]
pub struct Stacked {
    parts: Vec<Arc<dyn ReproducedBasis>>,
    keep: Vec<usize>,
    total: usize,
}

impl Stacked {
    pub fn new(parts: Vec<Arc<dyn ReproducedBasis>>) -> Self {
        let total = parts.iter().map(|p| p.len()).sum();
        Self {
            parts,
            keep: (0..total).collect(),
            total,
        }
    }

    /// Drops every row that coincides (max abs difference < tol) with an
    /// earlier kept row at all of `nodes`.
    pub fn dedup_at(mut self, nodes: &[Point], tol: f64) -> Self {
        let rows: Vec<Vec<f64>> = {
            let mut rows = vec![Vec::with_capacity(nodes.len()); self.total];
            let mut v = vec![0.0; self.total];
            let mut g = vec![[0.0; 2]; self.total];
            for &x in nodes {
                self.eval_all(x, &mut v, &mut g);
                for (r, &val) in rows.iter_mut().zip(&v) {
                    r.push(val);
                }
            }
            rows
        };
        let mut keep: Vec<usize> = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            let dup = keep.iter().any(|&k| {
                rows[k].iter().zip(r).all(|(a, b)| (a - b).abs() < tol)
            });
            if !dup {
                keep.push(i);
            }
        }
        self.keep = keep;
        self
    }

    fn eval_all(&self, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let mut off = 0;
        for p in &self.parts {
            let n = p.len();
            p.eval(x, &mut values[off..off + n], &mut grads[off..off + n]);
            off += n;
        }
    }
}

impl ReproducedBasis for Stacked {
    fn dim(&self) -> usize {
        self.parts.first().map_or(1, |p| p.dim())
    }

    fn len(&self) -> usize {
        self.keep.len()
    }

    fn eval(&self, x: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let mut v = vec![0.0; self.total];
        let mut g = vec![[0.0; 2]; self.total];
        self.eval_all(x, &mut v, &mut g);
        for (o, &k) in self.keep.iter().enumerate() {
            values[o] = v[k];
            grads[o] = g[k];
        }
    }
}
