//! Small numerical helpers shared by the verification routines.

/// Least-squares slope and intercept of `ln y` against `ln x`.
///
/// Points with non-positive or non-finite coordinates are skipped. Returns
/// `None` when fewer than two usable points remain or all abscissae coincide.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<LogLogFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| x.is_finite() && y.is_finite() && **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LogLogFit {
        slope,
        log_intercept: my - slope * mx,
        points: pts.len(),
    })
}

/// Result of [`loglog_fit`]: `y ~ exp(log_intercept) * x^slope`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub log_intercept: f64,
    pub points: usize,
}

impl LogLogFit {
    pub fn coefficient(&self) -> f64 {
        self.log_intercept.exp()
    }
}

/// One Richardson step for a quantity with error `O(h^order)`, given values
/// at `h` (`coarse`) and `h/2` (`fine`).
pub fn richardson(coarse: f64, fine: f64, order: i32) -> f64 {
    let r = 2f64.powi(order);
    (r * fine - coarse) / (r - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_slope() {
        let xs = [1e-3, 1e-2, 1e-1];
        let ys: Vec<f64> = xs.iter().map(|x| 5.0 * x * x * x).collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.coefficient() - 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_residuals_give_no_fit() {
        assert!(loglog_fit(&[0.1, 0.2], &[0.0, 0.0]).is_none());
    }

    #[test]
    fn richardson_removes_quadratic_error() {
        let f = |h: f64| 2.0 + 3.0 * h * h;
        assert!((richardson(f(0.1), f(0.05), 2) - 2.0).abs() < 1e-14);
    }
}
