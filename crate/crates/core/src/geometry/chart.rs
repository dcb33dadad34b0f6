use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_dual::{DualNum, HyperDual64};

use crate::error::{invalid, Error, Result};

/// Default smallest admissible singular value of a chart Jacobian.
pub const RANK_TOL: f64 = 1e-8;
/// Default relative step for first derivatives in finite-difference mode.
pub const FIRST_STEP: f64 = 1e-6;
/// Default relative step for second derivatives in finite-difference mode;
/// the stencil is evaluated at this step and twice it, then extrapolated.
pub const SECOND_STEP: f64 = 1e-3;

/// A parametrisation written once and evaluated on plain floats or on
/// (hyper-)dual numbers, which yields exact first and second derivatives.
pub trait Embedding: Send + Sync + 'static {
    fn dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D>;
}

/// Second derivatives `d_a d_b r` of a chart, stored as `m * m` ambient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    dim: usize,
    data: Vec<DVector<f64>>,
}

impl SecondDerivatives {
    pub fn new(dim: usize, data: Vec<DVector<f64>>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(invalid(format!(
                "expected {} second-derivative vectors, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn get(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.data[a * self.dim + b]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

type MapFn = dyn Fn(&[f64]) -> DVector<f64> + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;
type SecondFn = dyn Fn(&[f64]) -> SecondDerivatives + Send + Sync;

/// How a chart's derivatives are obtained.
#[derive(Clone)]
pub enum DerivativeMode {
    /// Caller-supplied derivative callbacks.
    Analytic {
        first: Arc<JacobianFn>,
        second: Arc<SecondFn>,
    },
    /// Central differences with steps `step * max(1, |u_a|)`.
    FiniteDifference { first_step: f64, second_step: f64 },
}

impl fmt::Debug for DerivativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivativeMode::Analytic { .. } => f.write_str("Analytic"),
            DerivativeMode::FiniteDifference {
                first_step,
                second_step,
            } => write!(f, "FiniteDifference({first_step:e}, {second_step:e})"),
        }
    }
}

/// Parametric embedding of an `m`-dimensional patch into `R^n`.
#[derive(Clone)]
pub struct Chart {
    name: String,
    dim: usize,
    ambient: usize,
    map: Arc<MapFn>,
    mode: DerivativeMode,
    periods: Vec<Option<f64>>,
    base_point: Vec<f64>,
    rank_tol: f64,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("ambient", &self.ambient)
            .field("mode", &self.mode)
            .field("periods", &self.periods)
            .finish()
    }
}

impl Chart {
    /// Chart from a bare map; derivatives by central differences.
    pub fn from_fn<F>(name: impl Into<String>, dim: usize, ambient: usize, map: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
    {
        Self::validate_dims(dim, ambient)?;
        Ok(Self {
            name: name.into(),
            dim,
            ambient,
            map: Arc::new(map),
            mode: DerivativeMode::FiniteDifference {
                first_step: FIRST_STEP,
                second_step: SECOND_STEP,
            },
            periods: vec![None; dim],
            base_point: vec![0.0; dim],
            rank_tol: RANK_TOL,
        })
    }

    /// Chart with caller-supplied first and second derivative callbacks.
    pub fn analytic<F, J, S>(
        name: impl Into<String>,
        dim: usize,
        ambient: usize,
        map: F,
        first: J,
        second: S,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
        S: Fn(&[f64]) -> SecondDerivatives + Send + Sync + 'static,
    {
        let mut chart = Self::from_fn(name, dim, ambient, map)?;
        chart.mode = DerivativeMode::Analytic {
            first: Arc::new(first),
            second: Arc::new(second),
        };
        Ok(chart)
    }

    /// Chart whose derivatives come from evaluating `embedding` on dual and
    /// hyper-dual numbers.
    pub fn from_embedding<E: Embedding>(name: impl Into<String>, embedding: E) -> Result<Self> {
        let dim = embedding.dim();
        let ambient = embedding.ambient_dim();
        let e = Arc::new(embedding);
        let (e0, e1, e2) = (e.clone(), e.clone(), e);
        Self::analytic(
            name,
            dim,
            ambient,
            move |u| DVector::from_vec(e0.eval(u)),
            move |u| {
                let mut jac = DMatrix::zeros(ambient, dim);
                for a in 0..dim {
                    let v = seeded(u, a, None);
                    for (i, x) in e1.eval(&v).iter().enumerate() {
                        jac[(i, a)] = x.eps1;
                    }
                }
                jac
            },
            move |u| {
                let mut data = Vec::with_capacity(dim * dim);
                for a in 0..dim {
                    for b in 0..dim {
                        let v = seeded(u, a, Some(b));
                        data.push(DVector::from_iterator(
                            ambient,
                            e2.eval(&v).iter().map(|x| x.eps1eps2),
                        ));
                    }
                }
                SecondDerivatives { dim, data }
            },
        )
    }

    fn validate_dims(dim: usize, ambient: usize) -> Result<()> {
        if dim == 0 || dim >= ambient {
            return Err(invalid(format!(
                "chart dimensions must satisfy 1 <= m < n, got m={dim}, n={ambient}"
            )));
        }
        Ok(())
    }

    pub fn with_periods(mut self, periods: Vec<Option<f64>>) -> Result<Self> {
        if periods.len() != self.dim {
            return Err(invalid("one period entry per parameter required"));
        }
        if periods.iter().flatten().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid("periods must be positive"));
        }
        self.periods = periods;
        Ok(self)
    }

    pub fn with_base_point(mut self, u: Vec<f64>) -> Result<Self> {
        if u.len() != self.dim {
            return Err(invalid("base point has wrong length"));
        }
        self.base_point = u;
        Ok(self)
    }

    pub fn with_rank_tol(mut self, tol: f64) -> Self {
        self.rank_tol = tol;
        self
    }

    /// Same map, derivatives switched to central differences.
    pub fn with_finite_differences(mut self, first_step: f64, second_step: f64) -> Self {
        self.mode = DerivativeMode::FiniteDifference {
            first_step,
            second_step,
        };
        self
    }

    /// The chart composed with the rigid motion `x -> Q x + t`.
    pub fn rigidly_moved(&self, rotation: &DMatrix<f64>, translation: &DVector<f64>) -> Result<Self> {
        if rotation.shape() != (self.ambient, self.ambient) || translation.len() != self.ambient {
            return Err(invalid("rigid motion has wrong dimensions"));
        }
        let (q, t) = (rotation.clone(), translation.clone());
        let inner = self.map.clone();
        let mode = match &self.mode {
            DerivativeMode::Analytic { first, second } => {
                let (f, s) = (first.clone(), second.clone());
                let (q1, q2) = (q.clone(), q.clone());
                DerivativeMode::Analytic {
                    first: Arc::new(move |u: &[f64]| &q1 * f(u)),
                    second: Arc::new(move |u: &[f64]| {
                        let sd = s(u);
                        SecondDerivatives {
                            dim: sd.dim,
                            data: sd.data.iter().map(|v| &q2 * v).collect(),
                        }
                    }),
                }
            }
            fd => fd.clone(),
        };
        Ok(Self {
            name: format!("{}+rigid", self.name),
            map: Arc::new(move |u: &[f64]| &q * inner(u) + &t),
            mode,
            ..self.clone()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Intrinsic dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn codim(&self) -> usize {
        self.ambient - self.dim
    }

    pub fn periods(&self) -> &[Option<f64>] {
        &self.periods
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn derivative_mode(&self) -> &DerivativeMode {
        &self.mode
    }

    pub(crate) fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim {
            return Err(invalid(format!(
                "chart `{}` expects {} parameters, got {}",
                self.name,
                self.dim,
                u.len()
            )));
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(invalid("parameter point is not finite"));
        }
        Ok(())
    }

    /// Position `r(u)`.
    pub fn eval(&self, u: &[f64]) -> DVector<f64> {
        (self.map)(u)
    }

    /// Columns `d r / d u_a`, without the rank check.
    pub(crate) fn raw_jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        match &self.mode {
            DerivativeMode::Analytic { first, .. } => first(u),
            DerivativeMode::FiniteDifference { first_step, .. } => {
                let mut jac = DMatrix::zeros(self.ambient, self.dim);
                let mut v = u.to_vec();
                for a in 0..self.dim {
                    let h = first_step * u[a].abs().max(1.0);
                    v[a] = u[a] + h;
                    let plus = self.eval(&v);
                    v[a] = u[a] - h;
                    let minus = self.eval(&v);
                    v[a] = u[a];
                    jac.set_column(a, &((plus - minus) / (2.0 * h)));
                }
                jac
            }
        }
    }

    /// Jacobian with the full-rank check.
    pub fn jacobian(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(u)?;
        let jac = self.raw_jacobian(u);
        let sigma_min = jac
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(sigma_min > self.rank_tol) {
            return Err(Error::DegenerateChart {
                point: u.to_vec(),
                sigma_min,
                tol: self.rank_tol,
            });
        }
        Ok(jac)
    }

    /// `d_a d_b r` for all parameter pairs.
    pub fn second_derivatives(&self, u: &[f64]) -> Result<SecondDerivatives> {
        self.check_point(u)?;
        match &self.mode {
            DerivativeMode::Analytic { second, .. } => {
                let sd = second(u);
                if sd.dim != self.dim || sd.data.iter().any(|v| v.len() != self.ambient) {
                    return Err(invalid("second-derivative callback returned wrong shape"));
                }
                Ok(sd)
            }
            DerivativeMode::FiniteDifference { second_step, .. } => {
                let m = self.dim;
                let fine = self.second_difference(u, *second_step);
                let coarse = self.second_difference(u, 2.0 * second_step);
                let data = fine
                    .iter()
                    .zip(&coarse)
                    .map(|(f, c)| (f * 4.0 - c) / 3.0)
                    .collect();
                Ok(SecondDerivatives { dim: m, data })
            }
        }
    }

    /// Central second differences with steps `step * max(1, |u_a|)`.
    fn second_difference(&self, u: &[f64], step: f64) -> Vec<DVector<f64>> {
        let m = self.dim;
        let steps: Vec<f64> = u.iter().map(|x| step * x.abs().max(1.0)).collect();
        let center = self.eval(u);
        let mut data = vec![DVector::zeros(self.ambient); m * m];
        let mut v = u.to_vec();
        for a in 0..m {
            let h = steps[a];
            v[a] = u[a] + h;
            let plus = self.eval(&v);
            v[a] = u[a] - h;
            let minus = self.eval(&v);
            v[a] = u[a];
            data[a * m + a] = (plus - &center * 2.0 + minus) / (h * h);
            for b in (a + 1)..m {
                let k = steps[b];
                let mut at = |sa: f64, sb: f64| {
                    v[a] = u[a] + sa * h;
                    v[b] = u[b] + sb * k;
                    let r = self.eval(&v);
                    v[a] = u[a];
                    v[b] = u[b];
                    r
                };
                let mixed = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * k);
                data[a * m + b] = mixed.clone();
                data[b * m + a] = mixed;
            }
        }
        data
    }

    /// Induced metric `g = J^T J`.
    pub fn metric(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let jac = self.jacobian(u)?;
        Ok(jac.tr_mul(&jac))
    }

    /// `u` with periodic parameters reduced to `[0, period)`.
    pub fn wrap(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.periods)
            .map(|(x, p)| match p {
                Some(p) => x.rem_euclid(*p),
                None => *x,
            })
            .collect()
    }
}

fn seeded(u: &[f64], a: usize, b: Option<usize>) -> Vec<HyperDual64> {
    u.iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut d = HyperDual64::from_re(x);
            if i == a {
                d = d.derivative1();
            }
            if Some(i) == b {
                d = d.derivative2();
            }
            d
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Circle;
    impl Embedding for Circle {
        fn dim(&self) -> usize {
            1
        }
        fn ambient_dim(&self) -> usize {
            2
        }
        fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
            vec![u[0].cos(), u[0].sin()]
        }
    }

    #[test]
    fn hyperdual_derivatives_match_closed_form() {
        let c = Chart::from_embedding("circle", Circle).unwrap();
        let u = [0.4];
        let j = c.jacobian(&u).unwrap();
        assert!((j[(0, 0)] + 0.4f64.sin()).abs() < 1e-15);
        assert!((j[(1, 0)] - 0.4f64.cos()).abs() < 1e-15);
        let s = c.second_derivatives(&u).unwrap();
        assert!((s.get(0, 0)[0] + 0.4f64.cos()).abs() < 1e-15);
        assert!((s.get(0, 0)[1] + 0.4f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Chart::from_fn("bad", 2, 2, |u| DVector::from_row_slice(u)).is_err());
        assert!(Chart::from_fn("bad", 0, 2, |_| DVector::zeros(2)).is_err());
    }

    #[test]
    fn degenerate_jacobian_is_reported() {
        let c = Chart::from_fn("collapsed", 2, 3, |u| DVector::from_vec(vec![u[0] + u[1], 0.0, 0.0])).unwrap();
        assert!(matches!(c.jacobian(&[0.0, 0.0]), Err(Error::DegenerateChart { .. })));
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let c = Chart::from_embedding("circle", Circle).unwrap();
        assert!(matches!(c.jacobian(&[0.0, 1.0]), Err(Error::InvalidInput(_))));
    }
}
