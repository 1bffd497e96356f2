//! One-dimensional C-IGA interpolation on a single spline curve.

use crate::conv::{build_conv_functions, ConvFunctions, ConvSpec, Monomials, PolySpace};
use crate::error::{CigaError, Result};
use crate::spline::NurbsPatch;
use std::sync::Arc;

/// C-IGA shape functions over sorted parametric nodes of a curve.
#[derive(Debug)]
pub struct Shape1d {
    patch: NurbsPatch,
    params: Vec<f64>,
    weights: Vec<f64>,
    /// Per node: first member index and reduced convolution functions.
    sets: Vec<(usize, ConvFunctions, f64)>,
}

impl Shape1d {
    /// `params` must be strictly increasing and span [0, 1].
    pub fn new(patch: &NurbsPatch, params: &[f64], spec: &ConvSpec) -> Result<Self> {
        let n = params.len();
        if n < 2 || params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CigaError::InvalidMesh("1D nodes must be strictly increasing".into()));
        }
        let weights = params
            .iter()
            .map(|&t| patch.weight_fn([t, 0.0]).map(|w| w.0))
            .collect::<Result<Vec<_>>>()?;
        let mut sets = Vec::with_capacity(n);
        for i in 0..n {
            let lo = i.saturating_sub(spec.s);
            let hi = (i + spec.s).min(n - 1);
            let mut gaps = Vec::new();
            if i > 0 {
                gaps.push(params[i] - params[i - 1]);
            }
            if i + 1 < n {
                gaps.push(params[i + 1] - params[i]);
            }
            let h = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let z: Vec<[f64; 2]> = (lo..=hi).map(|k| [(params[k] - params[i]) / h, 0.0]).collect();
            let order = spec.p.min(z.len() - 1);
            let mono = Monomials::plain(1, order, PolySpace::Tensor);
            let conv = build_conv_functions(i, &z, Arc::new(mono), spec)?;
            sets.push((lo, conv, h));
        }
        Ok(Shape1d {
            patch: patch.clone(),
            params: params.to_vec(),
            weights,
            sets,
        })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Nonzero shape functions at parameter `t`: (node, value, d/dt).
    pub fn eval(&self, t: f64) -> Result<Vec<(usize, f64, f64)>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(CigaError::Domain { value: t });
        }
        let n = self.params.len();
        let e = match self.params.partition_point(|&p| p <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (t0, t1) = (self.params[e], self.params[e + 1]);
        let len = t1 - t0;
        let s = (t - t0) / len;
        let base = [(1.0 - s, -1.0 / len), (s, 1.0 / len)];
        let (w, dw) = self.patch.weight_fn([t, 0.0])?;
        let mut out: Vec<(usize, f64, f64)> = Vec::new();
        for (c, &(nv, dn)) in base.iter().enumerate() {
            let (lo, conv, h) = &self.sets[e + c];
            let centre = self.params[e + c];
            let (v, g) = conv.eval([(t - centre) / h, 0.0]);
            for (k, (&vk, gk)) in v.iter().zip(&g).enumerate() {
                let node = lo + k;
                let d = dn * vk + nv * gk[0] / h;
                match out.iter_mut().find(|o| o.0 == node) {
                    Some(o) => {
                        o.1 += nv * vk;
                        o.2 += d;
                    }
                    None => out.push((node, nv * vk, d)),
                }
            }
        }
        for o in &mut out {
            let f = self.weights[o.0] / w;
            let (sv, ds) = (o.1, o.2);
            o.1 = f * sv;
            o.2 = f * (ds - sv * dw[0] / w);
        }
        Ok(out)
    }

    pub fn interpolate(&self, t: f64, values: &[f64]) -> Result<f64> {
        Ok(self.eval(t)?.iter().map(|&(n, v, _)| v * values[n]).sum())
    }
}
