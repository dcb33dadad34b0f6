use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::FormSet;
use crate::numeric::{loglog_fit, richardson};

/// `det(I + A)^2` against its printed second-order expansion, with
/// `A = sum_alpha eps_alpha k^(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetExpansion {
    pub exact: f64,
    pub paper_series: f64,
    /// `exact - paper_series`.
    pub residual: f64,
}

/// Evaluates the six-term expansion
/// `1 + 2 sum eps k_aa + 2 (sum eps k_aa)^2 - 2 sum_a (sum eps k_aa)^2
///  + 3 sum_ab (sum eps k_ab)^2 - 2 sum_a (sum eps k_aa)^2`
/// term by term, as printed.
pub fn det_expansion_check(forms: &FormSet, eps: &[f64]) -> Result<DetExpansion> {
    if eps.len() != forms.codim() {
        return Err(invalid("one displacement per form required"));
    }
    let m = forms.dim();
    let ks = forms.forms();
    let pairs = || (0..ks.len()).flat_map(|a| (0..ks.len()).map(move |b| (a, b)));

    let linear: f64 = (0..ks.len()).map(|al| eps[al] * ks[al].trace()).sum();
    let traces: f64 = pairs()
        .map(|(al, be)| eps[al] * eps[be] * ks[al].trace() * ks[be].trace())
        .sum();
    let diagonal_products: f64 = pairs()
        .map(|(al, be)| {
            eps[al] * eps[be] * (0..m).map(|a| ks[al][(a, a)] * ks[be][(a, a)]).sum::<f64>()
        })
        .sum();
    let a_matrix = forms.offset_operator(eps) - DMatrix::identity(m, m);
    let all_squares: f64 = a_matrix.iter().map(|x| x * x).sum();
    let diag_squares: f64 = a_matrix.diagonal().iter().map(|x| x * x).sum();

    let paper_series =
        1.0 + 2.0 * linear + 2.0 * traces - 2.0 * diagonal_products + 3.0 * all_squares - 2.0 * diag_squares;
    let exact = forms.offset_operator(eps).determinant().powi(2);
    Ok(DetExpansion {
        exact,
        paper_series,
        residual: exact - paper_series,
    })
}

/// Residual magnitudes along `t * direction` for each `t` in `scales`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionOrder {
    pub scales: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Fitted log-log slope; `None` if every residual vanishes.
    pub slope: Option<f64>,
}

pub fn det_expansion_order(forms: &FormSet, direction: &[f64], scales: &[f64]) -> Result<ExpansionOrder> {
    let residuals = scales
        .iter()
        .map(|&t| {
            let eps: Vec<f64> = direction.iter().map(|d| d * t).collect();
            Ok(det_expansion_check(forms, &eps)?.residual.abs())
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = loglog_fit(scales, &residuals).map(|f| f.slope);
    Ok(ExpansionOrder {
        scales: scales.to_vec(),
        residuals,
        slope,
    })
}

/// Settings for [`vq_numeric_fd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdOptions {
    pub step: f64,
    /// Largest tolerated change of `V_q` between steps `h` and `h/2`.
    pub tolerance: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            step: 1e-3,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericVq {
    pub value: f64,
    pub step: f64,
    /// `|V(h) - V(h/2)|`.
    pub disagreement: f64,
}

/// `V_q = -(1/2) sum_alpha [phi_aa/phi - 2 (phi_a/phi)^2]` at `eps = 0` with
/// `phi = g^{-1/4}` and `g = det(I + sum eps k)^2`, the derivatives taken by
/// central differences in each `eps_alpha` and extrapolated once.
///
/// ```
/// use geomq::{adapted::{vq_numeric_fd, FdOptions}, geometry::FormSet};
/// let torus = FormSet::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.5]]).unwrap();
/// let v = vq_numeric_fd(&torus, FdOptions::default()).unwrap().value;
/// assert!((v + 0.15625).abs() < 1e-7);
/// ```
pub fn vq_numeric_fd(forms: &FormSet, options: FdOptions) -> Result<NumericVq> {
    if !(options.step > 0.0 && options.tolerance > 0.0) {
        return Err(invalid("step and tolerance must be positive"));
    }
    let codim = forms.codim();
    // g^{-1/4} - 1 = expm1(-(1/2) sum ln(1 + lambda_i(A))), free of the
    // cancellation that computing the determinant first would cause.
    let phi_minus_one = |eps: &[f64]| {
        let mut a = DMatrix::zeros(forms.dim(), forms.dim());
        for (k, e) in forms.forms().iter().zip(eps) {
            a += k * *e;
        }
        let log_det: f64 = SymmetricEigen::new(a).eigenvalues.iter().map(|l| l.ln_1p()).sum();
        (-0.5 * log_det).exp_m1()
    };
    let assemble = |h: f64| {
        let mut total = 0.0;
        for alpha in 0..codim {
            let mut e = vec![0.0; codim];
            e[alpha] = h;
            let plus = phi_minus_one(&e);
            e[alpha] = -h;
            let minus = phi_minus_one(&e);
            // phi(0) = 1
            let d1 = (plus - minus) / (2.0 * h);
            let d2 = (plus + minus) / (h * h);
            total += d2 - 2.0 * d1 * d1;
        }
        -0.5 * total
    };
    let (coarse, fine) = (assemble(options.step), assemble(options.step / 2.0));
    let disagreement = (coarse - fine).abs();
    if !(disagreement <= options.tolerance) {
        return Err(Error::StepFailure {
            disagreement,
            step: options.step,
        });
    }
    Ok(NumericVq {
        value: richardson(coarse, fine, 2),
        step: options.step,
        disagreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::vq_general_invariant;
    use crate::random;

    #[test]
    fn zero_curvature_expansion_is_trivial() {
        let f = FormSet::diagonal(&[vec![0.0, 0.0]]).unwrap();
        let d = det_expansion_check(&f, &[0.3]).unwrap();
        assert_eq!((d.exact, d.paper_series), (1.0, 1.0));
    }

    #[test]
    fn diagonal_expansion_residual_is_cubic() {
        let f = FormSet::diagonal(&[vec![1.0, 2.0]]).unwrap();
        let d = det_expansion_check(&f, &[0.01]).unwrap();
        // (1.01 * 1.02)^2 - (1 + 0.06 + 0.0018 + 0.0015 - 0.002) = 12 eps^3 + 4 eps^4
        assert!((d.residual - 1.204e-5).abs() < 1e-15, "{d:?}");
        let order = det_expansion_order(&f, &[1.0], &[1e-3, 3e-3, 1e-2, 3e-2]).unwrap();
        assert!(order.slope.unwrap() >= 2.7);
    }

    #[test]
    fn off_diagonal_terms_leave_a_quadratic_residual() {
        let f = FormSet::new(vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])]).unwrap();
        // 4 sum_{a != b} A_ab^2 = 8 eps^2, and the exact value is (1 - eps^2)^2.
        let d = det_expansion_check(&f, &[0.01]).unwrap();
        assert!((d.paper_series - d.exact - 8e-4).abs() < 2e-8, "{d:?}");
        let order = det_expansion_order(&f, &[1.0], &[1e-3, 1e-2]).unwrap();
        assert!((order.slope.unwrap() - 2.0).abs() < 0.01);
    }

    #[test]
    fn numeric_potential_matches_closed_forms() {
        let sphere = FormSet::diagonal(&[vec![1.0, 1.0]]).unwrap();
        assert!(vq_numeric_fd(&sphere, FdOptions::default()).unwrap().value.abs() < 1e-8);
        let torus = FormSet::diagonal(&[vec![1.0, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((vq_numeric_fd(&torus, FdOptions::default()).unwrap().value + 0.15625).abs() < 1e-7);
        let mut rng = random::stream(11, 0);
        let forms = FormSet::new(vec![random::symmetric(&mut rng, 3, 1.0), random::symmetric(&mut rng, 3, 1.0)])
            .unwrap();
        let v = vq_numeric_fd(&forms, FdOptions::default()).unwrap().value;
        assert!((v - vq_general_invariant(&forms)).abs() < 1e-6);
    }

    #[test]
    fn large_curvature_trips_the_step_check() {
        let f = FormSet::diagonal(&[vec![20.0, -15.0]]).unwrap();
        let err = vq_numeric_fd(&f, FdOptions::default()).unwrap_err();
        assert!(matches!(err, Error::StepFailure { .. }));
        let smaller = FdOptions {
            step: 1e-6,
            ..FdOptions::default()
        };
        assert!(vq_numeric_fd(&f, smaller).is_ok());
    }
}
