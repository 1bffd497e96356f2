//! Physical-to-parametric inversion of a patch map: an optional cheap warm
//! start followed by box-projected damped Gauss-Newton.

use crate::error::{CigaError, Result};
use crate::par::{map_range, Execution};
use crate::spline::{NurbsPatch, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarmStart {
    None,
    /// Piecewise-multilinear inverse of a forward-sampled grid.
    #[default]
    Lookup,
    /// Small sigmoid network fitted by mean-squared error.
    Mlp,
}

impl std::str::FromStr for WarmStart {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(WarmStart::None),
            "lookup" => Ok(WarmStart::Lookup),
            "mlp" => Ok(WarmStart::Mlp),
            _ => Err(format!("unknown warm start `{s}` (none|lookup|mlp)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseMapConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub warm_start: WarmStart,
    /// Samples per parametric direction used to train the warm start.
    pub sample_grid: usize,
    pub seed: u64,
}

impl Default for InverseMapConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            warm_start: WarmStart::Lookup,
            sample_grid: 11,
            seed: 7,
        }
    }
}

impl InverseMapConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(CigaError::Config(
                "inverse map needs tolerance > 0 and max_iterations >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Approximate inverse used as the Gauss-Newton starting point.
#[derive(Debug, Clone)]
pub enum Predictor {
    Center { dim: usize },
    Lookup(LookupGrid),
    Mlp(Mlp),
}

impl Predictor {
    /// Parametric estimate, clamped to the unit box.
    pub fn predict(&self, x: Point) -> Point {
        let xi = match self {
            Predictor::Center { dim } => {
                if *dim == 1 {
                    [0.5, 0.0]
                } else {
                    [0.5, 0.5]
                }
            }
            Predictor::Lookup(l) => l.predict(x),
            Predictor::Mlp(m) => m.predict(x),
        };
        [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)]
    }
}

/// Trains the configured warm start on a forward-sampled grid.
pub fn train_warm_start(patch: &NurbsPatch, config: &InverseMapConfig) -> Result<Predictor> {
    let g = config.sample_grid.max(2);
    match config.warm_start {
        WarmStart::None => Ok(Predictor::Center { dim: patch.dim() }),
        WarmStart::Lookup => Ok(Predictor::Lookup(LookupGrid::sample(patch, g)?)),
        WarmStart::Mlp => Ok(Predictor::Mlp(Mlp::train(patch, g, config.seed)?)),
    }
}

/// Forward samples on a uniform parametric grid, inverted cell by cell.
#[derive(Debug, Clone)]
pub struct LookupGrid {
    dim: usize,
    g: usize,
    /// Physical points, first index fastest.
    x: Vec<Point>,
}

impl LookupGrid {
    pub fn sample(patch: &NurbsPatch, g: usize) -> Result<Self> {
        let dim = patch.dim();
        let gv = if dim == 1 { 1 } else { g };
        let mut x = Vec::with_capacity(g * gv);
        for j in 0..gv {
            for i in 0..g {
                let v = if dim == 1 { 0.0 } else { j as f64 / (g - 1) as f64 };
                x.push(patch.map_forward([i as f64 / (g - 1) as f64, v])?);
            }
        }
        Ok(Self { dim, g, x })
    }

    fn at(&self, i: usize, j: usize) -> Point {
        self.x[i + self.g * j]
    }

    pub fn predict(&self, x: Point) -> Point {
        let h = 1.0 / (self.g - 1) as f64;
        let d2 = |p: Point| (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
        let nearest = (0..self.x.len())
            .min_by(|&a, &b| d2(self.x[a]).total_cmp(&d2(self.x[b])))
            .unwrap();
        let (ni, nj) = (nearest % self.g, nearest / self.g);
        if self.dim == 1 {
            let mut best = ([ni as f64 * h, 0.0], f64::INFINITY);
            for i in ni.saturating_sub(1)..=ni.min(self.g - 2) {
                let (a, b) = (self.at(i, 0)[0], self.at(i + 1, 0)[0]);
                if a == b {
                    continue;
                }
                let s = (x[0] - a) / (b - a);
                let out = (s.clamp(0.0, 1.0) - s).abs();
                if out < best.1 {
                    best = ([(i as f64 + s.clamp(0.0, 1.0)) * h, 0.0], out);
                }
            }
            return best.0;
        }
        let mut best = ([ni as f64 * h, nj as f64 * h], f64::INFINITY);
        for j in nj.saturating_sub(1)..=nj.min(self.g - 2) {
            for i in ni.saturating_sub(1)..=ni.min(self.g - 2) {
                let c = [self.at(i, j), self.at(i + 1, j), self.at(i + 1, j + 1), self.at(i, j + 1)];
                let (st, res) = invert_bilinear(&c, x);
                let out = (st[0].clamp(0.0, 1.0) - st[0]).abs() + (st[1].clamp(0.0, 1.0) - st[1]).abs() + res;
                if out < best.1 {
                    let st = [st[0].clamp(0.0, 1.0), st[1].clamp(0.0, 1.0)];
                    best = ([(i as f64 + st[0]) * h, (j as f64 + st[1]) * h], out);
                }
            }
        }
        best.0
    }
}

/// Local coordinates (s, t) of `x` in the bilinear quad `c` (counter-
/// clockwise from (0,0)), by Newton's method, plus the final residual.
pub(crate) fn invert_bilinear(c: &[Point; 4], x: Point) -> ([f64; 2], f64) {
    let mut st = [0.5, 0.5];
    let mut res = f64::INFINITY;
    for _ in 0..12 {
        let (s, t) = (st[0], st[1]);
        let n = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
        let ds = [-(1.0 - t), 1.0 - t, t, -t];
        let dt = [-(1.0 - s), -s, s, 1.0 - s];
        let mut f = [-x[0], -x[1]];
        let mut j = [[0.0; 2]; 2];
        for k in 0..4 {
            for r in 0..2 {
                f[r] += n[k] * c[k][r];
                j[r][0] += ds[k] * c[k][r];
                j[r][1] += dt[k] * c[k][r];
            }
        }
        res = (f[0] * f[0] + f[1] * f[1]).sqrt();
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || res < 1e-15 {
            break;
        }
        st[0] -= (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        st[1] -= (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        if !st[0].is_finite() || !st[1].is_finite() {
            return ([0.5, 0.5], f64::INFINITY);
        }
    }
    (st, res)
}

/// One-hidden-layer sigmoid regressor x -> xi.
#[derive(Debug, Clone)]
pub struct Mlp {
    dim: usize,
    lo: Point,
    span: Point,
    w1: Vec<[f64; 2]>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    const HIDDEN: usize = 16;
    const EPOCHS: usize = 3000;

    pub fn train(patch: &NurbsPatch, g: usize, seed: u64) -> Result<Self> {
        let dim = patch.dim();
        let grid = LookupGrid::sample(patch, g)?;
        let gv = if dim == 1 { 1 } else { g };
        let mut data = Vec::new();
        for j in 0..gv {
            for i in 0..g {
                let xi = [i as f64 / (g - 1) as f64, if dim == 1 { 0.0 } else { j as f64 / (g - 1) as f64 }];
                data.push((grid.at(i, j), xi));
            }
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (x, _) in &data {
            for c in 0..2 {
                lo[c] = lo[c].min(x[c]);
                hi[c] = hi[c].max(x[c]);
            }
        }
        let span = [(hi[0] - lo[0]).max(1e-12), (hi[1] - lo[1]).max(1e-12)];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = Self::HIDDEN;
        let mut net = Mlp {
            dim,
            lo,
            span,
            w1: (0..h).map(|_| [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect(),
            b1: (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            w2: (0..dim).map(|_| (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            b2: vec![0.0; dim],
        };
        // Full-batch Adam on the mean squared parametric error.
        let np = h * 3 + dim * (h + 1);
        let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
        let (lr, b1, b2, eps) = (0.02, 0.9, 0.999, 1e-8);
        for epoch in 1..=Self::EPOCHS {
            let mut grad = vec![0.0; np];
            for (x, xi) in &data {
                let z = net.normalize(*x);
                let a: Vec<f64> = (0..h)
                    .map(|k| sigmoid(net.w1[k][0] * z[0] + net.w1[k][1] * z[1] + net.b1[k]))
                    .collect();
                for o in 0..dim {
                    let y = sigmoid(net.b2[o] + (0..h).map(|k| net.w2[o][k] * a[k]).sum::<f64>());
                    let dy = 2.0 * (y - xi[o]) * y * (1.0 - y) / data.len() as f64;
                    let base = h * 3 + o * (h + 1);
                    for k in 0..h {
                        grad[base + k] += dy * a[k];
                        let da = dy * net.w2[o][k] * a[k] * (1.0 - a[k]);
                        grad[3 * k] += da * z[0];
                        grad[3 * k + 1] += da * z[1];
                        grad[3 * k + 2] += da;
                    }
                    grad[base + h] += dy;
                }
            }
            let t = epoch as i32;
            let mut params = net.params_mut();
            for i in 0..np {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                let mh = m[i] / (1.0 - b1.powi(t));
                let vh = v[i] / (1.0 - b2.powi(t));
                *params[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
        Ok(net)
    }

    fn params_mut(&mut self) -> Vec<&mut f64> {
        let mut p: Vec<&mut f64> = Vec::new();
        for (w, b) in self.w1.iter_mut().zip(self.b1.iter_mut()) {
            let [w0, w1] = w;
            p.push(w0);
            p.push(w1);
            p.push(b);
        }
        for (w, b) in self.w2.iter_mut().zip(self.b2.iter_mut()) {
            for x in w.iter_mut() {
                p.push(x);
            }
            p.push(b);
        }
        p
    }

    fn normalize(&self, x: Point) -> Point {
        [
            (x[0] - self.lo[0]) / self.span[0],
            if self.dim == 1 { 0.0 } else { (x[1] - self.lo[1]) / self.span[1] },
        ]
    }

    pub fn predict(&self, x: Point) -> Point {
        let z = self.normalize(x);
        let a: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(w, b)| sigmoid(w[0] * z[0] + w[1] * z[1] + b))
            .collect();
        let mut out = [0.0; 2];
        for o in 0..self.dim {
            out[o] = sigmoid(self.b2[o] + self.w2[o].iter().zip(&a).map(|(w, a)| w * a).sum::<f64>());
        }
        out
    }
}

fn residual(patch: &NurbsPatch, xi: Point, x: Point) -> Result<(f64, [f64; 2], [[f64; 2]; 2])> {
    let e = patch.eval(xi)?;
    let r = [e.x[0] - x[0], if patch.dim() == 1 { 0.0 } else { e.x[1] - x[1] }];
    Ok(((r[0] * r[0] + r[1] * r[1]).sqrt(), r, e.jac))
}

fn newton_step(dim: usize, r: [f64; 2], jac: [[f64; 2]; 2]) -> Option<Point> {
    if dim == 1 {
        (jac[0][0] != 0.0).then(|| [-r[0] / jac[0][0], 0.0])
    } else {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        (det != 0.0).then(|| {
            [
                -(jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                -(-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
            ]
        })
    }
}

fn project(dim: usize, xi: Point) -> Point {
    [xi[0].clamp(0.0, 1.0), if dim == 1 { 0.0 } else { xi[1].clamp(0.0, 1.0) }]
}

/// Gauss-Newton inversion returning the parametric point and the residual
/// history (one entry per evaluated iterate).
pub fn invert_point_traced(
    patch: &NurbsPatch,
    x: Point,
    config: &InverseMapConfig,
    xi0: Option<Point>,
) -> Result<(Point, Vec<f64>)> {
    config.validate()?;
    let dim = patch.dim();
    let mut xi = project(dim, xi0.unwrap_or(if dim == 1 { [0.5, 0.0] } else { [0.5, 0.5] }));
    let (mut res, mut r, mut jac) = residual(patch, xi, x)?;
    let mut history = vec![res];
    for _ in 0..config.max_iterations {
        if res < config.tolerance {
            break;
        }
        let Some(step) = newton_step(dim, r, jac) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=20 {
            let trial = project(dim, [xi[0] + lambda * step[0], xi[1] + lambda * step[1]]);
            let (tres, tr, tjac) = residual(patch, trial, x)?;
            if tres < res {
                xi = trial;
                res = tres;
                r = tr;
                jac = tjac;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(res);
        if !accepted {
            break;
        }
    }
    if res < config.tolerance {
        // A couple of extra full steps push the point to round-off level.
        for _ in 0..2 {
            let Some(step) = newton_step(dim, r, jac) else { break };
            let trial = project(dim, [xi[0] + step[0], xi[1] + step[1]]);
            let (tres, tr, tjac) = residual(patch, trial, x)?;
            if tres >= res {
                break;
            }
            (xi, res, r, jac) = (trial, tres, tr, tjac);
            history.push(res);
        }
        return Ok((xi, history));
    }
    Err(CigaError::Inversion { residual: res, point: x })
}

/// Parametric coordinates of `x` with ||F(xi) - x|| below the tolerance.
pub fn invert_point(
    patch: &NurbsPatch,
    x: Point,
    config: &InverseMapConfig,
    xi0: Option<Point>,
) -> Result<Point> {
    invert_point_traced(patch, x, config, xi0).map(|r| r.0)
}

/// Inverts every point, starting each from the warm-start prediction.
pub fn invert_mesh(
    patch: &NurbsPatch,
    points: &[Point],
    config: &InverseMapConfig,
    exec: Execution,
) -> Result<Vec<Point>> {
    config.validate()?;
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let predictor = train_warm_start(patch, config)?;
    let out = map_range(exec, points.len(), |i| {
        let guess = predictor.predict(points[i]);
        invert_point(patch, points[i], config, Some(guess))
    });
    let mut result = Vec::with_capacity(points.len());
    let mut failures = Vec::new();
    for (i, r) in out.into_iter().enumerate() {
        match r {
            Ok(xi) => result.push(xi),
            Err(CigaError::Inversion { residual, .. }) => failures.push((i, residual)),
            Err(e) => return Err(e),
        }
    }
    if failures.is_empty() {
        Ok(result)
    } else {
        Err(CigaError::MeshInversion { failures })
    }
}

/// Uniformly distributed parametric points, for held-out checks.
pub fn random_params(dim: usize, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| [rng.gen::<f64>(), if dim == 1 { 0.0 } else { rng.gen::<f64>() }])
        .collect()
}
