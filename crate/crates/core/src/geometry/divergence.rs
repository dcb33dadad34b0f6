use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::chart::Chart;
use super::frame::{align_frame, curvature_forms, normal_frame};
use crate::error::{invalid, Result};
use crate::numeric::richardson;

/// Ambient step for the divergence of the extended normal field.
pub const AMBIENT_STEP: f64 = 1e-3;

/// `div n` at one point, from the curvatures and from the extended field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceCheck {
    /// Sum of principal curvatures.
    pub from_curvatures: f64,
    /// Central-difference divergence in ambient space.
    pub numerical: f64,
}

impl DivergenceCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.from_curvatures - self.numerical).abs()
    }
}

/// Parameters of the surface point nearest to `x`, by Newton iteration on
/// `J^T (r(u) - x) = 0` started from `guess`.
pub fn project_to_surface(chart: &Chart, x: &DVector<f64>, guess: &[f64]) -> Result<Vec<f64>> {
    let m = chart.dim();
    let mut u = guess.to_vec();
    for _ in 0..50 {
        let r = chart.eval(&u) - x;
        let jac = chart.jacobian(&u)?;
        let second = chart.second_derivatives(&u)?;
        let grad = jac.tr_mul(&r);
        let mut hess = jac.tr_mul(&jac);
        for a in 0..m {
            for b in 0..m {
                hess[(a, b)] += r.dot(second.get(a, b));
            }
        }
        let step = hess
            .lu()
            .solve(&(-grad))
            .ok_or_else(|| invalid("singular Hessian in closest-point projection"))?;
        let scale = 1.0 + u.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (ui, si) in u.iter_mut().zip(step.iter()) {
            *ui += si;
        }
        if step.amax() <= 1e-15 * scale {
            return Ok(u);
        }
    }
    Ok(u)
}

/// `div n` by two routes: the sum of principal curvatures, and central
/// differences of the unit normal at the nearest surface point, taken in
/// ambient coordinates (one Richardson step). Codimension 1 only.
pub fn divergence_of_normal(chart: &Chart, u: &[f64]) -> Result<DivergenceCheck> {
    if chart.codim() != 1 {
        return Err(invalid("divergence of the normal needs a codimension-1 chart"));
    }
    let data = curvature_forms(chart, u)?;
    let from_curvatures = data.forms.forms()[0].trace();
    let reference = data.normal_frame.clone();
    let x0 = chart.eval(u);
    let n = chart.ambient_dim();

    let normal_at = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let p = project_to_surface(chart, x, u)?;
        let frame: DMatrix<f64> = align_frame(&normal_frame(chart, &p)?, &reference)?;
        Ok(frame.column(0).into_owned())
    };
    let divergence = |h: f64| -> Result<f64> {
        let mut total = 0.0;
        for i in 0..n {
            let mut xp = x0.clone();
            xp[i] += h;
            let mut xm = x0.clone();
            xm[i] -= h;
            total += (normal_at(&xp)?[i] - normal_at(&xm)?[i]) / (2.0 * h);
        }
        Ok(total)
    };
    let coarse = divergence(AMBIENT_STEP)?;
    let fine = divergence(AMBIENT_STEP / 2.0)?;
    Ok(DivergenceCheck {
        from_curvatures,
        numerical: richardson(coarse, fine, 2),
    })
}
