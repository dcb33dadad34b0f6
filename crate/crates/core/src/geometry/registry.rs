//! Built-in charts addressed by name, e.g. `sphere:R=2,n=4` or
//! `ellipse:a=1,b=0.6`.
//!
//! | name | parameters (defaults) | m, n |
//! |------|-----------------------|------|
//! | `circle` | `R=1` | 1, 2 |
//! | `ellipse` | `a=1, b=0.6` | 1, 2 |
//! | `flat_strip` | `L=2pi` (straight segment, ends identified) | 1, 2 |
//! | `curve_helix` | `a=1, b=1` | 1, 3 |
//! | `line` | (none) | 1, 3 |
//! | `quartic_curve` | (none) | 1, 3 |
//! | `cylinder` | `R=1` | 2, 3 |
//! | `plane` | (none) | 2, 3 |
//! | `sphere` | `R=1, n=3` (`S^{n-1}` in `R^n`) | n-1, n |
//! | `flat_torus` | `R1=1, R2=2` | 2, 4 |
//! | `paraboloid_patch` | `k1=1, k2=-1, ...` | #k, #k+1 |
//! | `random_quadric` | `seed=0` | 2, 3 |
//!
//! Declared periods are honest periods of the map except for `flat_strip`,
//! whose period is an identification of the parameter only: a ring of zero
//! curvature has no embedding in the plane, but the layer solver only needs
//! the local geometry and the identification.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_dual::DualNum;
use serde::{Deserialize, Serialize};

use super::chart::{Chart, Embedding};
use crate::error::{invalid, Error, Result};
use crate::random;

/// A registry name plus `key=value` parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChartSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl ChartSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn build(&self) -> Result<Chart> {
        let p = Params::new(self);
        let chart = match self.name.as_str() {
            "circle" => {
                let r = p.positive("R", 1.0)?;
                p.finish()?;
                Chart::from_embedding("circle", Ellipse { a: r, b: r })?
                    .with_periods(vec![Some(TAU)])?
            }
            "ellipse" => {
                let a = p.positive("a", 1.0)?;
                let b = p.positive("b", 0.6)?;
                p.finish()?;
                Chart::from_embedding("ellipse", Ellipse { a, b })?.with_periods(vec![Some(TAU)])?
            }
            "flat_strip" => {
                let len = p.positive("L", TAU)?;
                p.finish()?;
                Chart::from_embedding("flat_strip", Strip)?.with_periods(vec![Some(len)])?
            }
            "curve_helix" => {
                let a = p.positive("a", 1.0)?;
                let b = p.real("b", 1.0)?;
                p.finish()?;
                Chart::from_embedding("curve_helix", Helix { a, b })?
            }
            "line" => {
                p.finish()?;
                Chart::from_embedding("line", Line)?
            }
            "quartic_curve" => {
                p.finish()?;
                Chart::from_embedding("quartic_curve", QuarticCurve)?.with_base_point(vec![0.3])?
            }
            "cylinder" => {
                let r = p.positive("R", 1.0)?;
                p.finish()?;
                Chart::from_embedding("cylinder", Cylinder { r })?.with_periods(vec![Some(TAU), None])?
            }
            "plane" => {
                p.finish()?;
                Chart::from_embedding("plane", Plane)?
            }
            "sphere" => {
                let r = p.positive("R", 1.0)?;
                let n = p.integer("n", 3)?;
                p.finish()?;
                if n < 2 {
                    return Err(invalid("sphere needs ambient dimension n >= 2"));
                }
                let n = n as usize;
                let mut periods = vec![None; n - 1];
                periods[n - 2] = Some(TAU);
                let mut base = vec![FRAC_PI_2; n - 1];
                base[n - 2] = 0.0;
                Chart::from_embedding("sphere", Sphere { r, n })?
                    .with_periods(periods)?
                    .with_base_point(base)?
            }
            "flat_torus" => {
                let r1 = p.positive("R1", 1.0)?;
                let r2 = p.positive("R2", 2.0)?;
                p.finish()?;
                Chart::from_embedding("flat_torus", FlatTorus { r1, r2 })?
                    .with_periods(vec![Some(TAU), Some(TAU)])?
            }
            "paraboloid_patch" => {
                let mut k = Vec::new();
                for i in 1.. {
                    match p.optional_real(&format!("k{i}"))? {
                        Some(v) => k.push(v),
                        None => break,
                    }
                }
                if k.is_empty() {
                    k = vec![1.0, -1.0];
                }
                p.finish()?;
                Chart::from_embedding("paraboloid_patch", Paraboloid { k })?
            }
            "random_quadric" => {
                let seed = p.seed("seed", 0)?;
                p.finish()?;
                Chart::from_embedding("random_quadric", Quadric::from_seed(seed))?
            }
            other => return Err(Error::UnknownChart(other.to_string())),
        };
        Ok(chart)
    }
}

impl fmt::Display for ChartSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl FromStr for ChartSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s, None),
        };
        if name.is_empty() {
            return Err(invalid("empty chart name"));
        }
        let mut spec = ChartSpec::new(name);
        if let Some(rest) = rest {
            for item in rest.split(',').filter(|x| !x.trim().is_empty()) {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| invalid(format!("chart parameter `{item}` is not key=value")))?;
                if spec.params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    return Err(invalid(format!("duplicate chart parameter `{}`", k.trim())));
                }
            }
        }
        Ok(spec)
    }
}

impl TryFrom<String> for ChartSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChartSpec> for String {
    fn from(spec: ChartSpec) -> String {
        spec.to_string()
    }
}

/// Parses and builds a chart in one step.
pub fn build(spec: &str) -> Result<Chart> {
    spec.parse::<ChartSpec>()?.build()
}

struct Params<'a> {
    spec: &'a ChartSpec,
    used: std::cell::RefCell<Vec<String>>,
}

impl<'a> Params<'a> {
    fn new(spec: &'a ChartSpec) -> Self {
        Self {
            spec,
            used: Default::default(),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.used.borrow_mut().push(key.to_string());
        self.spec.params.get(key).map(String::as_str)
    }

    fn optional_real(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| invalid(format!("parameter {key}={v} is not a finite number")))
            })
            .transpose()
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.optional_real(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if v <= 0.0 {
            return Err(invalid(format!("parameter {key} must be positive")));
        }
        Ok(v)
    }

    fn integer(&self, key: &str, default: i64) -> Result<i64> {
        self.raw(key)
            .map(|v| v.parse::<i64>().map_err(|_| invalid(format!("parameter {key}={v} is not an integer"))))
            .unwrap_or(Ok(default))
    }

    fn seed(&self, key: &str, default: u64) -> Result<u64> {
        self.raw(key)
            .map(|v| v.parse::<u64>().map_err(|_| invalid(format!("parameter {key}={v} is not a u64 seed"))))
            .unwrap_or(Ok(default))
    }

    fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.spec.params.keys().find(|k| !used.contains(k)) {
            Some(k) => Err(invalid(format!("chart `{}` has no parameter `{k}`", self.spec.name))),
            None => Ok(()),
        }
    }
}

fn c<D: DualNum<Primitive = f64> + Copy>(x: f64) -> D {
    D::from(x)
}

struct Ellipse {
    a: f64,
    b: f64,
}

impl Embedding for Ellipse {
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![u[0].cos() * self.a, u[0].sin() * self.b]
    }
}

struct Strip;

impl Embedding for Strip {
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        2
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![u[0], c(0.0)]
    }
}

struct Helix {
    a: f64,
    b: f64,
}

impl Embedding for Helix {
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![u[0].cos() * self.a, u[0].sin() * self.a, u[0] * self.b]
    }
}

struct Line;

impl Embedding for Line {
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![u[0], c(0.0), c(0.0)]
    }
}

/// A space curve with non-trivial curvature and torsion near `t = 0`.
struct QuarticCurve;

impl Embedding for QuarticCurve {
    fn dim(&self) -> usize {
        1
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        let t = u[0];
        let t2 = t * t;
        vec![t, t2 * 0.5 + t2 * t2 * 0.25, t2 * t / 3.0 + t2 * t2 * 0.2]
    }
}

struct Cylinder {
    r: f64,
}

impl Embedding for Cylinder {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![u[0].cos() * self.r, u[0].sin() * self.r, u[1]]
    }
}

struct Plane;

impl Embedding for Plane {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![u[0], u[1], c(0.0)]
    }
}

/// Hyperspherical angles; the last one is the periodic azimuth.
struct Sphere {
    r: f64,
    n: usize,
}

impl Embedding for Sphere {
    fn dim(&self) -> usize {
        self.n - 1
    }
    fn ambient_dim(&self) -> usize {
        self.n
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        let (n, m) = (self.n, self.n - 1);
        let mut x = vec![c::<D>(0.0); n];
        let mut p = c::<D>(self.r);
        for i in 0..m - 1 {
            x[n - 1 - i] = p * u[i].cos();
            p *= u[i].sin();
        }
        x[0] = p * u[m - 1].cos();
        x[1] = p * u[m - 1].sin();
        x
    }
}

struct FlatTorus {
    r1: f64,
    r2: f64,
}

impl Embedding for FlatTorus {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        4
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        vec![
            u[0].cos() * self.r1,
            u[0].sin() * self.r1,
            u[1].cos() * self.r2,
            u[1].sin() * self.r2,
        ]
    }
}

/// Graph `y = (1/2) sum k_i u_i^2` over `R^m`.
struct Paraboloid {
    k: Vec<f64>,
}

impl Embedding for Paraboloid {
    fn dim(&self) -> usize {
        self.k.len()
    }
    fn ambient_dim(&self) -> usize {
        self.k.len() + 1
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        let mut x = u.to_vec();
        let height = u
            .iter()
            .zip(&self.k)
            .fold(c::<D>(0.0), |acc, (&ui, &ki)| acc + ui * ui * (0.5 * ki));
        x.push(height);
        x
    }
}

/// Quadric graph `z = (1/2) u^T H u` under a rigid motion, with the
/// eigenvalues of `H` drawn uniformly from `[-2, 2]`.
pub(crate) struct Quadric {
    hess: [[f64; 2]; 2],
    rotation: DMatrix<f64>,
    shift: [f64; 3],
}

impl Quadric {
    pub(crate) fn from_seed(seed: u64) -> Self {
        let mut rng = random::stream(seed, 0);
        let k1 = random::uniform(&mut rng, -2.0, 2.0);
        let k2 = random::uniform(&mut rng, -2.0, 2.0);
        let th = random::uniform(&mut rng, 0.0, PI);
        let (s, co) = th.sin_cos();
        let hess = [
            [co * co * k1 + s * s * k2, co * s * (k1 - k2)],
            [co * s * (k1 - k2), s * s * k1 + co * co * k2],
        ];
        let rotation = random::rotation(&mut rng, 3);
        let shift = [
            random::uniform(&mut rng, -1.0, 1.0),
            random::uniform(&mut rng, -1.0, 1.0),
            random::uniform(&mut rng, -1.0, 1.0),
        ];
        Self { hess, rotation, shift }
    }
}

impl Embedding for Quadric {
    fn dim(&self) -> usize {
        2
    }
    fn ambient_dim(&self) -> usize {
        3
    }
    fn eval<D: DualNum<Primitive = f64> + Copy>(&self, u: &[D]) -> Vec<D> {
        let h = &self.hess;
        let z = (u[0] * u[0] * h[0][0] + u[0] * u[1] * (2.0 * h[0][1]) + u[1] * u[1] * h[1][1]) * 0.5;
        let p = [u[0], u[1], z];
        (0..3)
            .map(|i| {
                (0..3).fold(c::<D>(self.shift[i]), |acc, j| acc + p[j] * self.rotation[(i, j)])
            })
            .collect()
    }
}
