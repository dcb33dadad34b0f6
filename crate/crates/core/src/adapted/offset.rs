use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    align_frame, curvature_forms, frame_cross_terms, normal_frame, Chart, CurvatureData,
};
use crate::numeric::loglog_fit;

/// Residuals at or below this count as exact termination of the series.
pub const TERMINATION_TOL: f64 = 1e-12;

/// The surface pushed along its normal frame, `u -> r(u) + sum eps_alpha n^(alpha)(u)`.
#[derive(Debug, Clone)]
pub struct OffsetFrame {
    base: Chart,
    displacement: Vec<f64>,
}

impl OffsetFrame {
    pub fn new(base: Chart, displacement: Vec<f64>) -> Result<Self> {
        if displacement.len() != base.codim() {
            return Err(invalid(format!(
                "displacement has {} entries, chart has {} normals",
                displacement.len(),
                base.codim()
            )));
        }
        if displacement.iter().any(|e| !e.is_finite()) {
            return Err(invalid("displacement must be finite"));
        }
        Ok(Self { base, displacement })
    }

    pub fn base_chart(&self) -> &Chart {
        &self.base
    }

    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    /// Offset point, using the deterministic normal frame at `u`.
    pub fn offset_point(&self, u: &[f64]) -> Result<DVector<f64>> {
        let frame = normal_frame(&self.base, u)?;
        Ok(self.base.eval(u) + frame * DVector::from_column_slice(&self.displacement))
    }

    /// Jacobian of the offset map at `u`.
    pub fn offset_jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let data = curvature_forms(&self.base, u)?;
        check_immersion(&data, &self.displacement, self.base.rank_tol())?;
        offset_jacobian(&self.base, u, &data, &self.displacement)
    }

    pub fn offset_metric(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.offset_jacobian(u)?;
        Ok(j.tr_mul(&j))
    }

    /// `sqrt(det g_offset / det g_base)` at `u`.
    pub fn area_ratio(&self, u: &[f64]) -> Result<f64> {
        area_ratio_exact(&self.base, u, &self.displacement)
    }

    /// The offset surface as a chart in its own right, with central
    /// difference derivatives. Normals are sign-aligned with the frame at
    /// `reference`, so the map is smooth on the patch around it.
    pub fn to_chart(&self, reference: &[f64]) -> Result<Chart> {
        let frame0 = normal_frame(&self.base, reference)?;
        let base = self.base.clone();
        let eps = DVector::from_column_slice(&self.displacement);
        let (m, n) = (base.dim(), base.ambient_dim());
        let probe = base.clone();
        let chart = Chart::from_fn(format!("{}+offset", base.name()), m, n, move |u: &[f64]| {
            let frame = normal_frame(&probe, u)
                .and_then(|f| align_frame(&f, &frame0))
                .expect("offset chart evaluated outside its aligned patch");
            probe.eval(u) + frame * &eps
        })?;
        chart.with_periods(base.periods().to_vec())?.with_base_point(reference.to_vec())
    }
}

/// Fails when `I + sum eps k` has an eigenvalue at or below `tol`.
pub(crate) fn check_immersion(data: &CurvatureData, eps: &[f64], tol: f64) -> Result<()> {
    let op = data.forms.offset_operator(eps);
    let min = SymmetricEigen::new(op).eigenvalues.min();
    if min <= tol {
        return Err(Error::OffsetDegenerate { factor: min });
    }
    Ok(())
}

/// `J + sum_alpha eps_alpha d n^(alpha)`: the tangential part of `d n` from
/// the Weingarten equation, the normal part from the frame connection.
fn offset_jacobian(chart: &Chart, u: &[f64], data: &CurvatureData, eps: &[f64]) -> Result<DMatrix<f64>> {
    let jac = chart.jacobian(u)?;
    let second = chart.second_derivatives(u)?;
    let g_inv = jac
        .tr_mul(&jac)
        .try_inverse()
        .ok_or_else(|| invalid("metric not invertible"))?;
    let normals = &data.normal_frame;
    let m = chart.dim();
    let cross = if chart.codim() > 1 && eps.iter().filter(|e| **e != 0.0).count() > 0 {
        Some(frame_cross_terms(chart, u)?)
    } else {
        None
    };
    let mut out = jac.clone();
    for (alpha, &e) in eps.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        let n = normals.column(alpha);
        let h = DMatrix::from_fn(m, m, |a, b| n.dot(second.get(a, b)));
        let mut dn = -(&jac * &g_inv * h);
        if let Some(cross) = &cross {
            for a in 0..m {
                for beta in 0..normals.ncols() {
                    let c = cross.get(beta, alpha, a);
                    dn.column_mut(a).axpy(c, &normals.column(beta), 1.0);
                }
            }
        }
        out += dn * e;
    }
    Ok(out)
}

/// Exact ratio of offset to base area elements, `sqrt(det g' / det g)`.
///
/// ```
/// use geomq::{adapted::area_ratio_exact, geometry::registry};
/// let sphere = registry::build("sphere:R=1").unwrap();
/// let u = sphere.base_point().to_vec();
/// assert!((area_ratio_exact(&sphere, &u, &[0.1]).unwrap() - 1.21).abs() < 1e-12);
/// ```
pub fn area_ratio_exact(chart: &Chart, u: &[f64], eps: &[f64]) -> Result<f64> {
    if eps.len() != chart.codim() {
        return Err(invalid("one displacement per normal required"));
    }
    let data = curvature_forms(chart, u)?;
    check_immersion(&data, eps, chart.rank_tol())?;
    let jo = offset_jacobian(chart, u, &data, eps)?;
    let jac = chart.jacobian(u)?;
    let det_offset = jo.tr_mul(&jo).determinant();
    let det_base = jac.tr_mul(&jac).determinant();
    Ok((det_offset / det_base).sqrt())
}

/// `dS'/dS = c0 + c1 eps + c2 eps^2 + O(eps^3)` for a hypersurface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaRatioSeries {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl AreaRatioSeries {
    pub fn eval(&self, eps: f64) -> f64 {
        self.c0 + eps * (self.c1 + eps * self.c2)
    }
}

/// `c1 = sum k`, `c2 = ((sum k)^2 - sum k^2) / 2`.
pub fn area_ratio_series(principal: &[f64]) -> AreaRatioSeries {
    let sum: f64 = principal.iter().sum();
    let squares: f64 = principal.iter().map(|k| k * k).sum();
    AreaRatioSeries {
        c0: 1.0,
        c1: sum,
        c2: (sum * sum - squares) / 2.0,
    }
}

/// How the exact area ratio departs from the quadratic series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SeriesOutcome {
    /// Every residual is at or below [`TERMINATION_TOL`]: the series is exact.
    Terminates { max_residual: f64 },
    /// Log-log fit of the residuals.
    Remainder { slope: f64, coefficient: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesOrder {
    pub eps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub outcome: SeriesOutcome,
}

impl SeriesOrder {
    pub fn slope(&self) -> Option<f64> {
        match self.outcome {
            SeriesOutcome::Remainder { slope, .. } => Some(slope),
            SeriesOutcome::Terminates { .. } => None,
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// `|area_ratio_exact - series|` over `eps_grid` and its fitted order.
pub fn verify_series_order(chart: &Chart, u: &[f64], eps_grid: &[f64]) -> Result<SeriesOrder> {
    if chart.codim() != 1 {
        return Err(invalid("the area-ratio series is defined for hypersurfaces"));
    }
    if eps_grid.len() < 2 {
        return Err(invalid("need at least two eps values"));
    }
    let data = curvature_forms(chart, u)?;
    let series = area_ratio_series(data.principal.as_deref().unwrap_or_default());
    let residuals = eps_grid
        .iter()
        .map(|&e| Ok((area_ratio_exact(chart, u, &[e])? - series.eval(e)).abs()))
        .collect::<Result<Vec<_>>>()?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let outcome = if max_residual <= TERMINATION_TOL {
        SeriesOutcome::Terminates { max_residual }
    } else {
        let abs_eps: Vec<f64> = eps_grid.iter().map(|e| e.abs()).collect();
        match loglog_fit(&abs_eps, &residuals) {
            Some(fit) => SeriesOutcome::Remainder {
                slope: fit.slope,
                coefficient: fit.coefficient(),
            },
            None => SeriesOutcome::Terminates { max_residual },
        }
    };
    Ok(SeriesOrder {
        eps: eps_grid.to_vec(),
        residuals,
        outcome,
    })
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::registry;

    #[test]
    fn exact_ratios() {
        let sphere = registry::build("sphere:R=1").unwrap();
        let u = [1.1, 0.4];
        assert!((area_ratio_exact(&sphere, &u, &[0.1]).unwrap() - 1.21).abs() < 1e-12);
        let plane = registry::build("plane").unwrap();
        assert!((area_ratio_exact(&plane, &[0.3, 2.0], &[0.7]).unwrap() - 1.0).abs() < 1e-15);
        let cyl = registry::build("cylinder:R=1").unwrap();
        assert!((area_ratio_exact(&cyl, &[0.5, 0.1], &[0.05]).unwrap() - 1.05).abs() < 1e-12);
    }

    #[test]
    fn breakdown_is_reported() {
        let circle = registry::build("circle:R=1").unwrap();
        let err = area_ratio_exact(&circle, &[0.0], &[-1.0]).unwrap_err();
        assert!(matches!(err, Error::OffsetDegenerate { .. }));
    }

    #[test]
    fn series_coefficients() {
        assert_eq!(area_ratio_series(&[1.0, 1.0]), AreaRatioSeries { c0: 1.0, c1: 2.0, c2: 1.0 });
        assert_eq!(area_ratio_series(&[1.0, 0.0]), AreaRatioSeries { c0: 1.0, c1: 1.0, c2: 0.0 });
        assert_eq!(area_ratio_series(&[1.0, -1.0]), AreaRatioSeries { c0: 1.0, c1: 0.0, c2: -1.0 });
    }

    #[test]
    fn series_terminates_on_sphere_and_cylinder() {
        let grid = log_grid(1e-3, 1e-1, 7);
        for spec in ["sphere:R=1", "cylinder:R=1"] {
            let chart = registry::build(spec).unwrap();
            let order = verify_series_order(&chart, &[1.0, 0.3], &grid).unwrap();
            assert!(matches!(order.outcome, SeriesOutcome::Terminates { .. }), "{spec}: {order:?}");
        }
    }

    #[test]
    fn three_dimensional_patch_has_cubic_remainder() {
        // The cubic coefficient is k1 k2 k3.
        let chart = registry::build("paraboloid_patch:k1=1,k2=0.5,k3=-0.7").unwrap();
        let order = verify_series_order(&chart, &[0.0, 0.0, 0.0], &log_grid(1e-3, 1e-1, 7)).unwrap();
        let SeriesOutcome::Remainder { slope, coefficient } = order.outcome else {
            panic!("{order:?}")
        };
        assert!((slope - 3.0).abs() < 0.02, "{slope}");
        assert!((coefficient - 0.35).abs() < 0.01, "{coefficient}");
    }

    #[test]
    fn weingarten_jacobian_matches_offset_chart() {
        let chart = registry::build("ellipse:a=1,b=0.6").unwrap();
        let frame = OffsetFrame::new(chart, vec![0.1]).unwrap();
        let offset = frame.to_chart(&[0.3]).unwrap();
        let fd = offset.jacobian(&[0.3]).unwrap();
        let exact = frame.offset_jacobian(&[0.3]).unwrap();
        assert!((fd - exact).amax() < 1e-8);
    }

    #[test]
    fn codimension_two_offset_uses_frame_connection() {
        let helix = registry::build("curve_helix:a=1,b=1").unwrap();
        let frame = OffsetFrame::new(helix, vec![0.05, -0.03]).unwrap();
        let offset = frame.to_chart(&[0.4]).unwrap();
        let fd = offset.jacobian(&[0.4]).unwrap();
        let exact = frame.offset_jacobian(&[0.4]).unwrap();
        let diff = (fd - exact).amax();
        assert!(diff < 1e-7, "{diff:e}");
    }
}
