use serde::Serialize;

use super::offset::area_ratio_exact;
use crate::error::{invalid, Result};
use crate::geometry::{curvature_forms, divergence_of_normal, Chart};
use crate::numeric::richardson;
use crate::potentials::vq_codim1;

const STEP: f64 = 1e-3;

/// `|chi|` below this makes the relative residual meaningless.
pub const MIN_CHI: f64 = 1e-3;

/// Every term of the replayed constraint computation at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProkhorovCheck {
    pub point: Vec<f64>,
    pub chi: f64,
    /// `Delta_LB chi`.
    pub laplacian_chi: f64,
    /// `d_n Psi` and `d_n^2 Psi` at the surface.
    pub normal_first: f64,
    pub normal_second: f64,
    /// `div n` from ambient differences of the normal field.
    pub div_n: f64,
    /// `(d_n^2 + div n d_n + Delta_LB) Psi` at the surface.
    pub adapted_laplacian: f64,
    /// Closed-form hypersurface potential.
    pub vq_closed: f64,
    /// `(Delta_LB chi - adapted_laplacian) / (2 chi)`.
    pub vq_recovered: f64,
    /// `|adapted_laplacian - (Delta_LB chi - 2 V_q chi)| / |chi|`.
    pub residual: f64,
}

/// Default test function: `cos(u_0) + (1/2) sum_{a>0} sin(u_a)`.
pub fn default_chi(u: &[f64]) -> f64 {
    u[0].cos() + 0.5 * u[1..].iter().map(|x| x.sin()).sum::<f64>()
}

/// [`prokhorov_equivalence_check_with`] using [`default_chi`].
pub fn prokhorov_equivalence_check(chart: &Chart, u: &[f64]) -> Result<ProkhorovCheck> {
    prokhorov_equivalence_check_with(chart, u, &default_chi)
}

/// Replays the normal-momentum constraint on a hypersurface.
///
/// The physical state is built as `Psi(u, x_n) = chi(u) / sqrt(dS'/dS)`
/// from the exact area ratio, so `d_n (sqrt(dS'/dS) Psi) = 0` holds by
/// construction. The adapted Laplacian
/// `d_n^2 + div n d_n + Delta_LB` is then applied at `x_n = 0` by central
/// differences and compared with `Delta_LB chi - 2 V_q chi`, which is the
/// statement `-(1/2) Delta Psi = -(1/2) Delta_LB chi + V_q chi`.
pub fn prokhorov_equivalence_check_with(
    chart: &Chart,
    u: &[f64],
    chi: &dyn Fn(&[f64]) -> f64,
) -> Result<ProkhorovCheck> {
    if chart.codim() != 1 {
        return Err(invalid("the constraint replay needs a hypersurface"));
    }
    let chi0 = chi(u);
    if chi0.abs() < MIN_CHI {
        return Err(invalid(format!("test function vanishes at the point (chi = {chi0:e})")));
    }
    let data = curvature_forms(chart, u)?;
    let vq_closed = vq_codim1(data.principal.as_deref().unwrap_or_default());

    let psi = |v: &[f64], x: f64| -> Result<f64> { Ok(chi(v) / area_ratio_exact(chart, v, &[x])?.sqrt()) };
    let first = |h: f64| -> Result<f64> { Ok((psi(u, h)? - psi(u, -h)?) / (2.0 * h)) };
    let second = |h: f64| -> Result<f64> { Ok((psi(u, h)? - 2.0 * psi(u, 0.0)? + psi(u, -h)?) / (h * h)) };
    let normal_first = richardson(first(STEP)?, first(STEP / 2.0)?, 2);
    let normal_second = richardson(second(STEP)?, second(STEP / 2.0)?, 2);
    let div_n = divergence_of_normal(chart, u)?.numerical;

    let laplacian_chi = laplace_beltrami(chart, u, &|v| chi(v))?;
    let on_surface = |v: &[f64]| psi(v, 0.0).unwrap_or(f64::NAN);
    let laplacian_psi = laplace_beltrami(chart, u, &on_surface)?;

    let adapted_laplacian = normal_second + div_n * normal_first + laplacian_psi;
    let expected = laplacian_chi - 2.0 * vq_closed * chi0;
    Ok(ProkhorovCheck {
        point: u.to_vec(),
        chi: chi0,
        laplacian_chi,
        normal_first,
        normal_second,
        div_n,
        adapted_laplacian,
        vq_closed,
        vq_recovered: (laplacian_chi - adapted_laplacian) / (2.0 * chi0),
        residual: (adapted_laplacian - expected).abs() / chi0.abs(),
    })
}

/// `Delta_LB f = g^{-1/2} d_a (g^{1/2} g^{ab} d_b f)` by nested central
/// differences (step 1e-3, one Richardson level).
pub fn laplace_beltrami(chart: &Chart, u: &[f64], f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    let m = chart.dim();
    let flux = |v: &[f64], a: usize, h: f64| -> Result<f64> {
        let g = chart.metric(v)?;
        let sqrt_det = g.determinant().sqrt();
        let g_inv = g.try_inverse().ok_or_else(|| invalid("metric not invertible"))?;
        let mut total = 0.0;
        for b in 0..m {
            let mut p = v.to_vec();
            let mut q = v.to_vec();
            p[b] += h;
            q[b] -= h;
            total += g_inv[(a, b)] * (f(&p) - f(&q)) / (2.0 * h);
        }
        Ok(sqrt_det * total)
    };
    let at = |h: f64| -> Result<f64> {
        let mut total = 0.0;
        for a in 0..m {
            let mut p = u.to_vec();
            let mut q = u.to_vec();
            p[a] += h;
            q[a] -= h;
            total += (flux(&p, a, h)? - flux(&q, a, h)?) / (2.0 * h);
        }
        Ok(total / chart.metric(u)?.determinant().sqrt())
    };
    Ok(richardson(at(STEP)?, at(STEP / 2.0)?, 2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::registry;

    #[test]
    fn laplace_beltrami_on_sphere_harmonic() {
        // z = cos(theta) is an l = 1 harmonic on the unit sphere: eigenvalue -2.
        let sphere = registry::build("sphere:R=1").unwrap();
        let u = [0.9, 0.4];
        let lap = laplace_beltrami(&sphere, &u, &|v| v[0].cos()).unwrap();
        assert!((lap + 2.0 * u[0].cos()).abs() < 1e-7, "{lap}");
    }

    #[test]
    fn flat_plane_has_no_potential() {
        let plane = registry::build("plane").unwrap();
        let check = prokhorov_equivalence_check_with(&plane, &[0.4, -0.2], &|v| v[0].cos()).unwrap();
        assert!(check.residual <= 1e-8, "{check:?}");
        assert!(check.vq_recovered.abs() <= 1e-8);
        assert_eq!(check.vq_closed, 0.0);
    }

    #[test]
    fn circle_recovers_its_potential() {
        let circle = registry::build("circle:R=1").unwrap();
        let check = prokhorov_equivalence_check_with(&circle, &[0.3], &|v| v[0].cos()).unwrap();
        assert!((check.vq_recovered + 0.125).abs() <= 1e-6, "{check:?}");
    }

    #[test]
    fn random_quadric_replay() {
        let chart = registry::build("random_quadric:seed=7").unwrap();
        let check = prokhorov_equivalence_check(&chart, &[0.0, 0.0]).unwrap();
        assert!(check.residual <= 1e-5, "{check:?}");
    }
}
