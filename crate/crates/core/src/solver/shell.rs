use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::assembly::{GeneralizedProblem, StencilBuilder};
use super::eigen::{lowest_eigenpairs, SolverKind};
use super::{discrete_transverse_energy, grid_estimate, GridMeta, SpectrumResult, WavefunctionGrid};
use crate::error::{invalid, Error, Result};

/// Largest tolerated Richardson estimate for shell spectra.
pub const SHELL_GRID_TOL: f64 = 0.005;
pub const MIN_RADIAL: usize = 16;

/// The Dirichlet shell `R - delta < r < R + delta` in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellOptions {
    pub radius: f64,
    pub delta: f64,
    pub l_max: usize,
    pub n_radial: usize,
    #[serde(default = "yes")]
    pub check_grid: bool,
}

fn yes() -> bool {
    true
}

impl ShellOptions {
    pub fn new(radius: f64, delta: f64, l_max: usize, n_radial: usize) -> Self {
        Self {
            radius,
            delta,
            l_max,
            n_radial,
            check_grid: true,
        }
    }
}

struct Radial {
    value: f64,
    vector: Vec<f64>,
    weights: Vec<f64>,
}

/// `-(1/2) (u'' + (2/r) u' - l(l+1) u / r^2)` on `n` interior nodes with
/// Dirichlet ends, from the form `(1/2) int [r^2 u'^2 + l(l+1) u^2] dr`
/// against `r^2 dr`.
pub fn shell_radial_operator(radius: f64, delta: f64, l: usize, n: usize) -> Result<GeneralizedProblem> {
    let dr = 2.0 * delta / (n as f64 + 1.0);
    let r = |j: f64| radius - delta + j * dr;
    let centrifugal = 0.5 * (l * (l + 1)) as f64 * dr;
    let mut b = StencilBuilder::new(n);
    for p in 0..n {
        let j = p as f64 + 1.0;
        b.mass(p, r(j).powi(2) * dr);
        b.diagonal(p, centrifugal);
        let outer = 0.5 * r(j + 0.5).powi(2) / dr;
        if p + 1 < n {
            b.edge(p, p + 1, outer);
        } else {
            b.diagonal(p, outer);
        }
        if p == 0 {
            b.diagonal(p, 0.5 * r(j - 0.5).powi(2) / dr);
        }
    }
    b.build()
}

fn radial_ground(radius: f64, delta: f64, l: usize, n: usize) -> Result<Radial> {
    let problem = shell_radial_operator(radius, delta, l, n)?;
    let pairs = lowest_eigenpairs(&problem, 1, SolverKind::Dense, None)?;
    Ok(Radial {
        value: pairs.values[0],
        vector: pairs.vectors[0].iter().copied().collect(),
        weights: problem.mass,
    })
}

fn shell_levels(o: &ShellOptions, n: usize) -> Result<Vec<Radial>> {
    (0..=o.l_max).map(|l| radial_ground(o.radius, o.delta, l, n)).collect()
}

/// Lowest radial level of each angular momentum `l <= l_max`, repeated
/// `2l + 1` times and sorted.
///
/// With `V_q = 0` on the two-sphere the subtracted levels approach
/// `l(l+1) / (2 R^2)`.
///
/// ```
/// use geomq::solver::{layer_spectrum_shell, ShellOptions};
/// let s = layer_spectrum_shell(&ShellOptions::new(1.0, 0.025, 2, 64)).unwrap();
/// let e = s.subtracted.unwrap();
/// assert_eq!(s.angular_momentum.as_deref(), Some(&[0, 1, 1, 1, 2, 2, 2, 2, 2][..]));
/// assert!((e[1] - 1.0).abs() < 0.02);
/// ```
pub fn layer_spectrum_shell(options: &ShellOptions) -> Result<SpectrumResult> {
    let o = options;
    if !(o.radius > 0.0 && o.delta > 0.0 && o.delta < 0.5 * o.radius) {
        return Err(invalid("shell needs 0 < delta < R/2"));
    }
    if o.n_radial < MIN_RADIAL {
        return Err(invalid(format!("shell needs n_radial >= {MIN_RADIAL}")));
    }
    let radial = shell_levels(o, o.n_radial)?;
    let dr = 2.0 * o.delta / (o.n_radial as f64 + 1.0);
    let e_perp = discrete_transverse_energy(o.n_radial, dr);
    let scale = 1.0 / (o.radius * o.radius);
    let estimate = if o.check_grid {
        let half = o.n_radial / 2;
        let coarse_perp = discrete_transverse_energy(half, 2.0 * o.delta / (half as f64 + 1.0));
        let coarse: Vec<f64> = shell_levels(o, half)?.iter().map(|r| r.value - coarse_perp).collect();
        let fine: Vec<f64> = radial.iter().map(|r| r.value - e_perp).collect();
        let estimate = grid_estimate(&fine, &coarse, scale);
        if estimate > SHELL_GRID_TOL {
            return Err(Error::GridTooCoarse {
                estimate,
                tolerance: SHELL_GRID_TOL,
            });
        }
        Some(estimate)
    } else {
        None
    };

    let mut labelled: Vec<(f64, usize)> = radial
        .iter()
        .enumerate()
        .flat_map(|(l, r)| std::iter::repeat_n((r.value, l), 2 * l + 1))
        .collect();
    labelled.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let waves = labelled
        .iter()
        .map(|&(_, l)| WavefunctionGrid {
            n_tangent: 1,
            n_normal: o.n_radial,
            values: radial[l].vector.clone(),
            weights: radial[l].weights.clone(),
        })
        .collect();
    let grid = GridMeta {
        kind: "layer-shell".into(),
        n_tangent: None,
        n_normal: None,
        n_radial: Some(o.n_radial),
        delta: Some(o.delta),
        unknowns: o.n_radial * (o.l_max + 1),
        solver: SolverKind::Dense,
        energy_scale: scale,
        grid_estimate: estimate,
    };
    let continuum = PI * PI / (8.0 * o.delta * o.delta);
    let mut result = SpectrumResult::finish(
        labelled.iter().map(|p| p.0).collect(),
        Some((e_perp, continuum)),
        grid,
        waves,
    );
    result.angular_momentum = Some(labelled.iter().map(|p| p.1).collect());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_reproduces_free_rotor_on_sphere() {
        let s = layer_spectrum_shell(&ShellOptions::new(1.0, 0.025, 3, 64)).unwrap();
        let labels = s.angular_momentum.clone().unwrap();
        let e = s.subtracted.unwrap();
        assert_eq!(e.len(), 16);
        for (v, l) in e.iter().zip(&labels) {
            let target = (l * (l + 1)) as f64 / 2.0;
            assert!((v - target).abs() <= 0.02 * target.max(1.0), "l={l} {v}");
        }
        assert_eq!(s.degeneracies.iter().map(|g| g.size).collect::<Vec<_>>(), vec![1, 3, 5, 7]);
    }

    #[test]
    fn radial_operator_is_symmetric_with_unit_ground_state() {
        assert!(shell_radial_operator(1.0, 0.1, 2, 20).unwrap().relative_asymmetry() <= 1e-12);
        let r = radial_ground(1.0, 0.1, 2, 20).unwrap();
        let norm: f64 = r.vector.iter().zip(&r.weights).map(|(v, w)| w * v * v).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn thick_shell_is_rejected() {
        assert!(layer_spectrum_shell(&ShellOptions::new(1.0, 0.6, 1, 32)).is_err());
        assert!(layer_spectrum_shell(&ShellOptions::new(1.0, 0.1, 1, 8)).is_err());
    }
}
