//! Gauss-Legendre rules on the unit interval and the unit square.

use crate::spline::Point;

/// Points and weights of the n-point Gauss-Legendre rule on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a quadrature rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// A set of parent-coordinate points on the unit square with weights.
/// Rules with an `id` may have their shape values cached.
#[derive(Debug, Clone)]
pub struct PointRule {
    pub id: Option<u64>,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// For edge rules: the element side (corners k -> k+1), weights are per
    /// unit parent length.
    pub side: Option<usize>,
}

impl PointRule {
    /// Tensor Gauss rule with n points per direction.
    pub fn volume(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        Self {
            id: Some(n as u64),
            points,
            weights,
            side: None,
        }
    }

    /// n-point Gauss rule along element side `side`.
    pub fn edge(n: usize, side: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let points = x.iter().map(|&l| side_point(side, l)).collect();
        Self {
            id: Some(1000 * (side as u64 + 1) + n as u64),
            points,
            weights: w,
            side: Some(side),
        }
    }

    /// Arbitrary points, never cached.
    pub fn points(points: Vec<Point>) -> Self {
        let weights = vec![1.0; points.len()];
        Self {
            id: None,
            points,
            weights,
            side: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parent point at fraction `l` along side `side` (corner k to corner k+1).
pub fn side_point(side: usize, l: f64) -> Point {
    match side {
        0 => [l, 0.0],
        1 => [1.0, l],
        2 => [1.0 - l, 1.0],
        _ => [0.0, 1.0 - l],
    }
}
