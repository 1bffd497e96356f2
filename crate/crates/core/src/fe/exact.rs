//! Closed-form fields used by the benchmarks.

use crate::spline::Point;
use std::f64::consts::PI;

/// Gaussian hump centred at (-0.5, 1).
pub fn hump(x: Point) -> f64 {
    let (dx, dy) = (x[0] + 0.5, x[1] - 1.0);
    (-PI * (dx * dx + dy * dy)).exp()
}

pub fn hump_grad(x: Point) -> [f64; 2] {
    let u = hump(x);
    [-2.0 * PI * (x[0] + 0.5) * u, -2.0 * PI * (x[1] - 1.0) * u]
}

/// Source b = -Laplacian of the hump.
pub fn hump_source(x: Point) -> f64 {
    let (dx, dy) = (x[0] + 0.5, x[1] - 1.0);
    hump(x) * (4.0 * PI - 4.0 * PI * PI * (dx * dx + dy * dy))
}

/// Kirsch stresses (xx, yy, xy) around a hole of radius `r_hole` under unit
/// tension along x.
pub fn kirsch_stress(x: Point, r_hole: f64) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let th = x[1].atan2(x[0]);
    let a2 = r_hole * r_hole / r2;
    let a4 = 1.5 * a2 * a2;
    let (c2, c4, s2, s4) = ((2.0 * th).cos(), (4.0 * th).cos(), (2.0 * th).sin(), (4.0 * th).sin());
    [
        1.0 - a2 * (1.5 * c2 + c4) + a4 * c4,
        -a2 * (0.5 * c2 - c4) - a4 * c4,
        -a2 * (0.5 * s2 + s4) + a4 * s4,
    ]
}

/// Plane-stress elasticity matrix in Voigt order (xx, yy, xy).
pub fn plane_stress(e: f64, nu: f64) -> [[f64; 3]; 3] {
    let c = e / (1.0 - nu * nu);
    [[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, c * (1.0 - nu) / 2.0]]
}

/// Compliance (inverse of `plane_stress`).
pub fn plane_stress_compliance(e: f64, nu: f64) -> [[f64; 3]; 3] {
    [
        [1.0 / e, -nu / e, 0.0],
        [-nu / e, 1.0 / e, 0.0],
        [0.0, 0.0, 2.0 * (1.0 + nu) / e],
    ]
}
