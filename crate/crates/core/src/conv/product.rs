use super::basis::WeightFn;
use super::functions::ConvFunctions;
use crate::spline::Point;
use std::sync::Arc;

/// Two-dimensional convolution functions from a product of 1D functions,
/// scaled by the weight factor rho = W(xi) / W(xi)|_interface:
/// W_K(xi) = rho_K / rho(xi) * Wt_m(t) * Wn_n(eta), K = (m, n).
#[derive(Clone)]
pub struct ProductConv {
    tangent: Arc<ConvFunctions>,
    transverse: Arc<ConvFunctions>,
    axis: usize,
    weight: Option<WeightFn>,
    trace: Option<WeightFn>,
    /// Weight factor at every member node, tangent index fastest.
    rho_nodes: Vec<f64>,
}

impl std::fmt::Debug for ProductConv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProductConv")
            .field("axis", &self.axis)
            .field("members", &self.len())
            .finish()
    }
}

fn other(axis: usize) -> usize {
    1 - axis
}

/// `tangent_axis` is the parametric direction along the interface; `trace`
/// is the weighting function restricted to the interface, taking the
/// tangent coordinate in the first slot. Without a weighting function the
/// factor is 1 (B-spline patch).
pub fn product_rule_conv_2d(
    tangent: Arc<ConvFunctions>,
    transverse: Arc<ConvFunctions>,
    tangent_axis: usize,
    weight: Option<WeightFn>,
    trace: Option<WeightFn>,
) -> ProductConv {
    let mut pc = ProductConv {
        tangent,
        transverse,
        axis: tangent_axis,
        weight,
        trace,
        rho_nodes: Vec::new(),
    };
    let mut rho = Vec::with_capacity(pc.len());
    for nn in 0..pc.transverse.len() {
        for m in 0..pc.tangent.len() {
            rho.push(pc.rho(pc.node_point(m, nn)).0);
        }
    }
    pc.rho_nodes = rho;
    pc
}

impl ProductConv {
    pub fn len(&self) -> usize {
        self.tangent.len() * self.transverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node_point(&self, m: usize, n: usize) -> Point {
        let mut p = [0.0; 2];
        p[self.axis] = self.tangent.nodes()[m][0];
        p[other(self.axis)] = self.transverse.nodes()[n][0];
        p
    }

    /// Member node coordinates, tangent index fastest.
    pub fn member_points(&self) -> Vec<Point> {
        let mut v = Vec::with_capacity(self.len());
        for n in 0..self.transverse.len() {
            for m in 0..self.tangent.len() {
                v.push(self.node_point(m, n));
            }
        }
        v
    }

    /// rho and its gradient.
    fn rho(&self, xi: Point) -> (f64, [f64; 2]) {
        let (w, dw) = self.weight.as_ref().map_or((1.0, [0.0; 2]), |f| f(xi));
        let (wt, dwt) = self
            .trace
            .as_ref()
            .map_or((1.0, [0.0; 2]), |f| f([xi[self.axis], 0.0]));
        let mut dtrace = [0.0; 2];
        dtrace[self.axis] = dwt[0];
        let r = w / wt;
        (r, [(dw[0] - r * dtrace[0]) / wt, (dw[1] - r * dtrace[1]) / wt])
    }

    pub fn eval_into(&self, xi: Point, values: &mut [f64], grads: &mut [[f64; 2]]) {
        let (a, da) = self.tangent.eval([xi[self.axis], 0.0]);
        let (b, db) = self.transverse.eval([xi[other(self.axis)], 0.0]);
        let (r, dr) = self.rho(xi);
        let nt = a.len();
        for n in 0..b.len() {
            for m in 0..nt {
                let k = m + nt * n;
                let f = self.rho_nodes[k] / r;
                let ab = a[m] * b[n];
                let mut dab = [0.0; 2];
                dab[self.axis] = da[m][0] * b[n];
                dab[other(self.axis)] = a[m] * db[n][0];
                values[k] = f * ab;
                grads[k] = [
                    f * (dab[0] - ab * dr[0] / r),
                    f * (dab[1] - ab * dr[1] / r),
                ];
            }
        }
    }

    pub fn eval(&self, xi: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let mut v = vec![0.0; self.len()];
        let mut g = vec![[0.0; 2]; self.len()];
        self.eval_into(xi, &mut v, &mut g);
        (v, g)
    }
}
