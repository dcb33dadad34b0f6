//! Closed forms of the geometric potential `V_q` and a cross-path report.
//!
//! All functions use `hbar = 1` and unit mass. Forms are taken in an
//! orthonormal tangent basis, as produced by
//! [`curvature_forms`](crate::geometry::curvature_forms).

mod stereographic;

use serde::Serialize;

use crate::adapted::{vq_numeric_fd, FdOptions};
use crate::error::Error;
use crate::geometry::FormSet;

pub use stereographic::{
    stereographic_operator_check, stereographic_samples, StereographicCheck, TestFunction,
    POLE_DISTANCE,
};

/// Above this `|paper - invariant|` a report is flagged basis sensitive.
pub const BASIS_SENSITIVITY: f64 = 1e-10;

/// Hypersurface potential `((sum k)^2 - 2 sum k^2) / 8` from principal
/// curvatures.
///
/// ```
/// // S^3 of radius 1 in R^4: (n-1)(n-3)/8 with n = 4
/// assert_eq!(geomq::potentials::vq_codim1(&[1.0, 1.0, 1.0]), 0.375);
/// ```
pub fn vq_codim1(principal: &[f64]) -> f64 {
    let sum: f64 = principal.iter().sum();
    let squares: f64 = principal.iter().map(|k| k * k).sum();
    (sum * sum - 2.0 * squares) / 8.0
}

/// Surface in `R^3`: `-(k1 - k2)^2 / 8`.
pub fn vq_dacosta_2d(k1: f64, k2: f64) -> f64 {
    -(k1 - k2).powi(2) / 8.0
}

/// Curve in `R^n`: `-sum_alpha (k^(alpha))^2 / 8`, one curvature per normal.
pub fn vq_curve(curvatures: &[f64]) -> f64 {
    -curvatures.iter().map(|k| k * k).sum::<f64>() / 8.0
}

/// The general-codimension closed form exactly as printed:
/// `(1/8) sum_alpha [ (sum_a k_aa)^2 + 6 sum_ab k_ab^2 - 8 sum_a k_aa^2 ]`.
///
/// The last term depends on the tangent basis; it agrees with
/// [`vq_general_invariant`] only when the forms are diagonal.
pub fn vq_general_paper(forms: &FormSet) -> f64 {
    forms
        .forms()
        .iter()
        .map(|k| {
            let tr = k.trace();
            let all: f64 = k.iter().map(|x| x * x).sum();
            let diag: f64 = k.diagonal().iter().map(|x| x * x).sum();
            tr * tr + 6.0 * all - 8.0 * diag
        })
        .sum::<f64>()
        / 8.0
}

/// Basis-invariant form `(1/8) sum_alpha [ (tr k)^2 - 2 tr(k^2) ]`.
///
/// Second-order expansion of `-(1/2) sum_alpha [phi_aa/phi - 2 (phi_a/phi)^2]`
/// with `phi = det(I + sum eps k)^{-1/2}`: writing `A = sum eps k`,
/// `log det(I + A) = tr A - tr(A^2)/2 + ...`, so `d_alpha log phi = -tr k/2`
/// and `d_alpha^2 log phi = tr(k^2)/2` at the origin, and
/// `phi_aa/phi - 2 (phi_a/phi)^2 = (log phi)'' - (log phi)'^2`.
pub fn vq_general_invariant(forms: &FormSet) -> f64 {
    forms
        .forms()
        .iter()
        .map(|k| {
            let tr = k.trace();
            tr * tr - 2.0 * k.component_mul(k).sum()
        })
        .sum::<f64>()
        / 8.0
}

/// One pairwise difference between two evaluation paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub first: &'static str,
    pub second: &'static str,
    pub difference: f64,
}

/// `V_q` by every applicable path, scaled by `hbar^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub point: Option<Vec<f64>>,
    pub hbar: f64,
    pub vq_codim1: Option<f64>,
    pub vq_dacosta_2d: Option<f64>,
    pub vq_curve: Option<f64>,
    pub vq_general_paper: f64,
    pub vq_general_invariant: f64,
    pub vq_numeric: Option<f64>,
    /// Why the numerical path is absent, if it is.
    pub numeric_error: Option<String>,
    /// Pairwise `|a - b|` over present paths, in a fixed order.
    pub discrepancies: Vec<Discrepancy>,
    /// `|paper - invariant| > 1e-10`: the printed form depends on the basis
    /// here. Data, not an error.
    pub basis_sensitive: bool,
}

impl PotentialReport {
    /// Present paths as `(name, value)` in report order.
    pub fn paths(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let optional = [
            ("vq_codim1", self.vq_codim1),
            ("vq_curve", self.vq_curve),
            ("vq_dacosta_2d", self.vq_dacosta_2d),
        ];
        out.extend(optional.iter().filter_map(|(n, v)| v.map(|v| (*n, v))));
        out.push(("vq_general_invariant", self.vq_general_invariant));
        out.push(("vq_general_paper", self.vq_general_paper));
        if let Some(v) = self.vq_numeric {
            out.push(("vq_numeric", v));
        }
        out
    }

    /// Largest discrepancy among paths that are expected to agree, i.e.
    /// excluding the printed general form when it is flagged.
    pub fn max_expected_discrepancy(&self) -> f64 {
        self.discrepancies
            .iter()
            .filter(|d| {
                !(self.basis_sensitive
                    && (d.first == "vq_general_paper" || d.second == "vq_general_paper"))
            })
            .map(|d| d.difference)
            .fold(0.0, f64::max)
    }
}

/// [`compare_potentials_with`] at `hbar = 1` and default step settings.
pub fn compare_potentials(forms: &FormSet) -> PotentialReport {
    compare_potentials_with(forms, 1.0, FdOptions::default())
}

/// Evaluates every path applicable to `forms` and their discrepancies.
///
/// The numerical path retries with halved steps (up to four times) when
/// its Richardson check fails; if it still fails the error is recorded in
/// the report.
pub fn compare_potentials_with(forms: &FormSet, hbar: f64, fd: FdOptions) -> PotentialReport {
    let scale = hbar * hbar;
    let m = forms.dim();
    let principal = forms.principal();
    let vq_codim1 = principal.as_deref().map(|k| scale * vq_codim1(k));
    let vq_dacosta_2d = match principal.as_deref() {
        Some(&[k1, k2]) => Some(scale * vq_dacosta_2d(k1, k2)),
        _ => None,
    };
    let vq_curve = (m == 1).then(|| {
        let k: Vec<f64> = forms.forms().iter().map(|f| f[(0, 0)]).collect();
        scale * vq_curve(&k)
    });
    let paper = scale * vq_general_paper(forms);
    let invariant = scale * vq_general_invariant(forms);

    let mut options = fd;
    let mut numeric = Err(Error::StepFailure {
        disagreement: f64::NAN,
        step: options.step,
    });
    for _ in 0..5 {
        numeric = vq_numeric_fd(forms, options);
        match numeric {
            Err(Error::StepFailure { .. }) => options.step /= 2.0,
            _ => break,
        }
    }
    let (vq_numeric, numeric_error) = match numeric {
        Ok(v) => (Some(scale * v.value), None),
        Err(e) => (None, Some(e.to_string())),
    };

    let mut report = PotentialReport {
        point: None,
        hbar,
        vq_codim1,
        vq_dacosta_2d,
        vq_curve,
        vq_general_paper: paper,
        vq_general_invariant: invariant,
        vq_numeric,
        numeric_error,
        discrepancies: Vec::new(),
        basis_sensitive: (paper - invariant).abs() > BASIS_SENSITIVITY * scale.max(f64::MIN_POSITIVE),
    };
    let paths = report.paths();
    for (i, (a, x)) in paths.iter().enumerate() {
        for (b, y) in &paths[i + 1..] {
            report.discrepancies.push(Discrepancy {
                first: a,
                second: b,
                difference: (x - y).abs(),
            });
        }
    }
    report
}
