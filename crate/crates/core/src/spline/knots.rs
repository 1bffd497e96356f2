use crate::error::{CigaError, Result};
use serde::{Deserialize, Serialize};

/// Open knot vector on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Validates monotonicity, the unit interval, open ends (multiplicity
    /// exactly p+1) and interior multiplicity at most p.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(CigaError::InvalidKnots(format!(
                "{} knots cannot hold degree {p}",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(CigaError::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(CigaError::InvalidKnots("knots must be non-decreasing".into()));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(CigaError::InvalidKnots("knots must start at 0 and end at 1".into()));
        }
        let mut i = 0;
        while i < knots.len() {
            let mut j = i;
            while j + 1 < knots.len() && knots[j + 1] == knots[i] {
                j += 1;
            }
            let mult = j - i + 1;
            let end = i == 0 || j == knots.len() - 1;
            if end && mult != p + 1 {
                return Err(CigaError::InvalidKnots(format!(
                    "end knot {} has multiplicity {mult}, expected {}",
                    knots[i],
                    p + 1
                )));
            }
            if !end && mult > p {
                return Err(CigaError::InvalidKnots(format!(
                    "interior knot {} has multiplicity {mult} > {p}",
                    knots[i]
                )));
            }
            i = j + 1;
        }
        Ok(Self { knots, degree })
    }

    /// Bezier knot vector [0,..,0,1,..,1].
    pub fn bezier(degree: usize) -> Self {
        let mut k = vec![0.0; degree + 1];
        k.extend(std::iter::repeat_n(1.0, degree + 1));
        Self { knots: k, degree }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn basis_count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values, i.e. the breakpoints of the coarsest spans.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if b.last() != Some(&k) {
                b.push(k);
            }
        }
        b
    }

    /// Interior breakpoints (span boundaries strictly inside (0, 1)).
    pub fn interior_breakpoints(&self) -> Vec<f64> {
        let b = self.breakpoints();
        b[1..b.len() - 1].to_vec()
    }

    /// Index `i` with knots[i] <= xi < knots[i+1]; at xi = 1 the last
    /// non-empty span is used (left limit).
    pub fn find_span(&self, xi: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(CigaError::Domain { value: xi });
        }
        let n = self.basis_count();
        let p = self.degree;
        if xi >= self.knots[n] {
            return Ok(n - 1);
        }
        // knots[p] = 0 <= xi < knots[n] = 1
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if xi < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }
}
