use rayon::prelude::*;
use serde::Serialize;

use super::curve::{layer_spectrum_curve, surface_spectrum, ThinLayerScenario};
use super::eigen::SolverKind;
use super::shell::{layer_spectrum_shell, ShellOptions};
use super::SpectrumResult;
use crate::error::{invalid, Result};
use crate::geometry::Chart;
use crate::numeric::loglog_fit;

/// A family of layers indexed by the half-width.
#[derive(Debug, Clone)]
pub enum SweepFamily {
    Curve {
        chart: Chart,
        n_tangent: usize,
        n_normal: usize,
        num_eigenvalues: usize,
        solver: SolverKind,
    },
    Shell {
        radius: f64,
        l_max: usize,
        n_radial: usize,
    },
}

impl SweepFamily {
    pub fn curve(chart: Chart) -> Self {
        Self::Curve {
            chart,
            n_tangent: 64,
            n_normal: 16,
            num_eigenvalues: 3,
            solver: SolverKind::Auto,
        }
    }

    fn layer(&self, delta: f64) -> Result<SpectrumResult> {
        match self {
            Self::Curve {
                chart,
                n_tangent,
                n_normal,
                num_eigenvalues,
                solver,
            } => {
                let scenario = ThinLayerScenario::new(chart.clone(), delta)
                    .grid(*n_tangent, *n_normal)
                    .eigenvalues(*num_eigenvalues)
                    .solver(*solver);
                layer_spectrum_curve(&scenario)
            }
            Self::Shell {
                radius,
                l_max,
                n_radial,
            } => layer_spectrum_shell(&ShellOptions::new(*radius, delta, *l_max, *n_radial)),
        }
    }

    /// Surface levels the subtracted layer levels should approach.
    fn reference(&self) -> Result<Vec<f64>> {
        match self {
            Self::Curve {
                chart,
                n_tangent,
                num_eigenvalues,
                ..
            } => Ok(surface_spectrum(chart, true, *n_tangent, *num_eigenvalues)?.eigenvalues),
            Self::Shell { radius, l_max, .. } => {
                let mut levels = Vec::new();
                for l in 0..=*l_max {
                    let e = (l * (l + 1)) as f64 / (2.0 * radius * radius);
                    levels.extend(std::iter::repeat_n(e, 2 * l + 1));
                }
                Ok(levels)
            }
        }
    }
}

/// Convergence of one tracked level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepLevel {
    pub index: usize,
    pub reference: f64,
    /// Subtracted layer level at each half-width.
    pub values: Vec<f64>,
    /// `|value - reference|`.
    pub errors: Vec<f64>,
    /// Log-log slope of the errors against `delta`; `None` if fewer than two
    /// errors are nonzero.
    pub slope: Option<f64>,
    pub coefficient: Option<f64>,
    /// Least-squares intercept of `value = a + b delta^p` with `p` the
    /// fitted slope (2 when there is none).
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub deltas: Vec<f64>,
    pub levels: Vec<SweepLevel>,
    pub spectra: Vec<SpectrumResult>,
}

impl SweepReport {
    pub fn level(&self, index: usize) -> Option<&SweepLevel> {
        self.levels.iter().find(|l| l.index == index)
    }
}

/// Solves the family at every `delta` and fits each level's error against
/// the surface reference.
///
/// The solves run in parallel; results keep the order of `deltas`.
pub fn delta_sweep(family: &SweepFamily, deltas: &[f64]) -> Result<SweepReport> {
    if deltas.len() < 3 {
        return Err(invalid("a sweep needs at least three half-widths"));
    }
    let reference = family.reference()?;
    let spectra = deltas
        .par_iter()
        .map(|&d| family.layer(d))
        .collect::<Result<Vec<_>>>()?;
    let count = spectra.iter().map(|s| s.levels().len()).min().unwrap_or(0).min(reference.len());
    let levels = (0..count)
        .map(|index| {
            let values: Vec<f64> = spectra.iter().map(|s| s.levels()[index]).collect();
            let errors: Vec<f64> = values.iter().map(|v| (v - reference[index]).abs()).collect();
            let fit = loglog_fit(deltas, &errors);
            let power = fit.map_or(2.0, |f| f.slope.max(0.5));
            SweepLevel {
                index,
                reference: reference[index],
                intercept: linear_intercept(deltas, &values, power),
                slope: fit.map(|f| f.slope),
                coefficient: fit.map(|f| f.coefficient()),
                values,
                errors,
            }
        })
        .collect();
    Ok(SweepReport {
        deltas: deltas.to_vec(),
        levels,
        spectra,
    })
}

fn linear_intercept(deltas: &[f64], values: &[f64], power: f64) -> f64 {
    let xs: Vec<f64> = deltas.iter().map(|d| d.powf(power)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = values.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(values).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - sxy / sxx * mx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::registry;

    #[test]
    fn flat_strip_sweep_is_exact() {
        let family = SweepFamily::curve(registry::build("flat_strip").unwrap());
        let report = delta_sweep(&family, &[0.1, 0.05, 0.025]).unwrap();
        for level in &report.levels {
            assert!(level.errors.iter().all(|e| *e < 1e-9), "{level:?}");
        }
    }

    #[test]
    fn intercept_of_exact_power_law() {
        let d = [0.1, 0.05, 0.025];
        let v: Vec<f64> = d.iter().map(|x| 0.3 + 2.0 * x * x).collect();
        assert!((linear_intercept(&d, &v, 2.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn too_few_deltas() {
        let family = SweepFamily::Shell {
            radius: 1.0,
            l_max: 1,
            n_radial: 32,
        };
        assert!(delta_sweep(&family, &[0.1, 0.05]).is_err());
    }
}
