use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numeric::richardson;
use crate::random;

/// Minimum geodesic distance from the projection pole for a sample point.
pub const POLE_DISTANCE: f64 = 1e-3;

const STEP: f64 = 1e-3;

/// Smooth test functions on the stereographic plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    Constant(f64),
    /// `x_i`, `i` in `{0, 1}`.
    Coordinate(usize),
    /// `exp(-|x - c|^2 / w^2)`.
    Gaussian { center: [f64; 2], width: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            TestFunction::Constant(c) => c,
            TestFunction::Coordinate(i) => x[i],
            TestFunction::Gaussian { center, width } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                (-d2 / (width * width)).exp()
            }
        }
    }
}

/// Outcome of [`stereographic_operator_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StereographicCheck {
    pub max_residual: f64,
    /// `(function index, sample index)` of the largest residual.
    pub worst: (usize, usize),
    /// Every `|lhs - rhs| / max(|rhs|, 1)`, function-major.
    pub residuals: Vec<Vec<f64>>,
}

/// `count` points drawn uniformly from the disc `|x| < radius`.
pub fn stereographic_samples(seed: u64, count: usize, radius: f64) -> Vec<[f64; 2]> {
    let mut rng = random::stream(seed, 1);
    (0..count)
        .map(|_| {
            let r = radius * random::uniform(&mut rng, 0.0, 1.0).sqrt();
            let t = random::uniform(&mut rng, 0.0, std::f64::consts::TAU);
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

/// Compares `F (p1^2 + p2^2)/2 F f` with `-(1/2) F^2 (d1^2 + d2^2) f` on a
/// sphere of radius `r`, where `F = 1 + |x|^2/(4 r^2)` and the momenta are
/// `p_i = -i g^{-1/4} d_i g^{1/4}` with `g^{1/4} = 1/F`.
///
/// Both sides are evaluated by central differences (step 1e-3, one
/// Richardson level). Residuals are relative to `max(|rhs|, 1)`.
pub fn stereographic_operator_check(
    r: f64,
    functions: &[TestFunction],
    samples: &[[f64; 2]],
) -> Result<StereographicCheck> {
    if !(r.is_finite() && r > 0.0) {
        return Err(invalid("sphere radius must be positive"));
    }
    if functions.is_empty() || samples.is_empty() {
        return Err(invalid("need at least one test function and one sample point"));
    }
    for &[x, y] in samples {
        let rho = x.hypot(y);
        // Geodesic distance to the pole of the point projecting to (x, y).
        let distance = 2.0 * r * (2.0 * r / rho).atan();
        if distance < POLE_DISTANCE || !distance.is_finite() {
            return Err(Error::PoleProximity { x, y, distance });
        }
    }
    let f_factor = |x: [f64; 2]| 1.0 + (x[0] * x[0] + x[1] * x[1]) / (4.0 * r * r);

    let mut residuals = Vec::with_capacity(functions.len());
    let (mut max_residual, mut worst) = (0.0, (0, 0));
    for (fi, func) in functions.iter().enumerate() {
        // F f, the function the momenta act on.
        let inner = |x: [f64; 2]| f_factor(x) * func.eval(x);
        // p_i^2 h = -g^{-1/4} d_i^2 (g^{1/4} h) = -F d_i^2 (h / F)
        let weighted = |x: [f64; 2]| inner(x) / f_factor(x);
        let mut row = Vec::with_capacity(samples.len());
        for (si, &x) in samples.iter().enumerate() {
            let lhs_at = |h: f64| -> f64 {
                let kinetic = -f_factor(x) * second_difference_sum(&weighted, x, h) / 2.0;
                f_factor(x) * kinetic
            };
            let rhs_at = |h: f64| -> f64 {
                -0.5 * f_factor(x).powi(2) * second_difference_sum(&|y| func.eval(y), x, h)
            };
            let lhs = richardson(lhs_at(STEP), lhs_at(STEP / 2.0), 2);
            let rhs = richardson(rhs_at(STEP), rhs_at(STEP / 2.0), 2);
            let res = (lhs - rhs).abs() / rhs.abs().max(1.0);
            if res > max_residual {
                max_residual = res;
                worst = (fi, si);
            }
            row.push(res);
        }
        residuals.push(row);
    }
    Ok(StereographicCheck {
        max_residual,
        worst,
        residuals,
    })
}

/// `(d1^2 + d2^2) f` at `x` by the five-point stencil.
fn second_difference_sum(f: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], h: f64) -> f64 {
    let c = f(x);
    let d1 = f([x[0] + h, x[1]]) - 2.0 * c + f([x[0] - h, x[1]]);
    let d2 = f([x[0], x[1] + h]) - 2.0 * c + f([x[0], x[1] - h]);
    (d1 + d2) / (h * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian() -> TestFunction {
        TestFunction::Gaussian {
            center: [0.0, 0.0],
            width: 1.0,
        }
    }

    #[test]
    fn coordinate_and_gaussian_satisfy_the_identity() {
        let samples = stereographic_samples(5, 50, 2.0);
        let check = stereographic_operator_check(
            1.0,
            &[TestFunction::Coordinate(0), TestFunction::Coordinate(1), gaussian()],
            &samples,
        )
        .unwrap();
        assert!(check.max_residual <= 1e-6, "{check:?}");
    }

    #[test]
    fn constants_are_annihilated_on_both_sides() {
        let check =
            stereographic_operator_check(1.5, &[TestFunction::Constant(3.0)], &[[0.2, -0.4]]).unwrap();
        assert!(check.max_residual < 1e-9);
    }

    #[test]
    fn pole_is_rejected() {
        let err = stereographic_operator_check(1.0, &[gaussian()], &[[1e4, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::PoleProximity { .. }));
    }
}
