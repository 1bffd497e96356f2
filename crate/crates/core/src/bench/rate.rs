use crate::error::{CigaError, Result};

/// Least-squares slope of log(e) against log(h).
pub fn estimate_rate(errors: &[f64], h: &[f64]) -> Result<f64> {
    if errors.len() != h.len() {
        return Err(CigaError::RateEstimate(format!("{} errors for {} mesh sizes", errors.len(), h.len())));
    }
    if errors.len() < 3 {
        return Err(CigaError::RateEstimate(format!("need at least 3 points, got {}", errors.len())));
    }
    if errors.iter().chain(h).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(CigaError::RateEstimate("errors and mesh sizes must be positive".into()));
    }
    let n = errors.len() as f64;
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CigaError::RateEstimate("mesh sizes must differ".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e2: Vec<f64> = h.iter().map(|v| v * v).collect();
        assert!((estimate_rate(&e2, &h).unwrap() - 2.0).abs() < 1e-12);
        let e3: Vec<f64> = h.iter().map(|v| 5.0 * v * v * v).collect();
        assert!((estimate_rate(&e3, &h).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let h = [0.1, 0.05, 0.025];
        let e = [1e-2, 2.6e-3, 6.2e-4];
        // normal equations [[n, Sx], [Sx, Sxx]] [c, k] = [Sy, Sxy]
        let x: Vec<f64> = h.iter().map(|v: &f64| v.ln()).collect();
        let y: Vec<f64> = e.iter().map(|v: &f64| v.ln()).collect();
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let k = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
        assert!((estimate_rate(&e, &h).unwrap() - k).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(estimate_rate(&[1.0, 0.5], &[1.0, 0.5]).is_err());
        assert!(estimate_rate(&[1.0, 0.0, 0.1], &[1.0, 0.5, 0.25]).is_err());
        assert!(estimate_rate(&[1.0, 0.5, 0.1], &[1.0, -0.5, 0.25]).is_err());
    }
}
