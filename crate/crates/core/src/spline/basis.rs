use super::knots::KnotVector;
use crate::error::Result;

/// The p+1 basis functions that are nonzero at a parameter, with their first
/// derivatives. Entry `k` belongs to global basis index `first + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub first: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl KnotVector {
    /// Cox-de Boor evaluation of the nonzero basis functions and their first
    /// derivatives (0/0 := 0).
    pub fn eval(&self, xi: f64) -> Result<BasisValues> {
        let span = self.find_span(xi)?;
        let p = self.degree();
        let u = self.knots();
        // ndu as in the triangular table: upper part basis values of
        // increasing degree, lower part knot differences.
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = xi - u[span + 1 - j];
            right[j] = u[span + j] - xi;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = if ndu[j][r] == 0.0 { 0.0 } else { ndu[r][j - 1] / ndu[j][r] };
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let values: Vec<f64> = (0..=p).map(|j| ndu[j][p]).collect();
        let mut derivs = vec![0.0; p + 1];
        if p > 0 {
            for (r, d) in derivs.iter_mut().enumerate() {
                // N'_{i,p} = p [N_{i,p-1}/(u_{i+p}-u_i) - N_{i+1,p-1}/(u_{i+p+1}-u_{i+1})]
                let mut acc = 0.0;
                if r >= 1 {
                    let den = ndu[p][r - 1];
                    if den != 0.0 {
                        acc += ndu[r - 1][p - 1] / den;
                    }
                }
                if r < p {
                    let den = ndu[p][r];
                    if den != 0.0 {
                        acc -= ndu[r][p - 1] / den;
                    }
                }
                *d = p as f64 * acc;
            }
        }
        Ok(BasisValues {
            first: span - p,
            values,
            derivs,
        })
    }
}

/// Nonzero basis values (`order` 0) or first derivatives (`order` 1) at `xi`,
/// plus the index of the first nonzero function.
pub fn eval_basis(kv: &KnotVector, xi: f64, order: usize) -> Result<(usize, Vec<f64>)> {
    let b = kv.eval(xi)?;
    match order {
        0 => Ok((b.first, b.values)),
        1 => Ok((b.first, b.derivs)),
        _ => Err(crate::error::CigaError::Config(format!(
            "derivative order {order} not supported"
        ))),
    }
}
