use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use super::assembly::{interleaved, GeneralizedProblem, StencilBuilder};
use super::eigen::{lowest_eigenpairs, SolverKind};
use super::{discrete_transverse_energy, grid_estimate, GridMeta, SpectrumResult, WavefunctionGrid, GRID_TOL};
use crate::error::{invalid, Error, Result};
use crate::geometry::{align_frame, curvature_forms, Chart};
use crate::potentials::{vq_curve, vq_general_invariant};

pub const MIN_NORMAL: usize = 16;
pub const MIN_TANGENT: usize = 32;
/// Largest admissible `delta * max |k|`.
pub const MAX_DELTA_CURVATURE: f64 = 0.5;

/// A Dirichlet layer of half-width `delta` around a closed plane curve.
#[derive(Debug, Clone)]
pub struct ThinLayerScenario {
    pub chart: Chart,
    pub delta: f64,
    pub n_tangent: usize,
    pub n_normal: usize,
    pub num_eigenvalues: usize,
    pub solver: SolverKind,
    /// Solve again on the half grid and fail with `GridTooCoarse` if the
    /// Richardson estimate exceeds 1%.
    pub check_grid: bool,
}

impl ThinLayerScenario {
    pub fn new(chart: Chart, delta: f64) -> Self {
        Self {
            chart,
            delta,
            n_tangent: 128,
            n_normal: 32,
            num_eigenvalues: 6,
            solver: SolverKind::Auto,
            check_grid: true,
        }
    }

    pub fn grid(mut self, n_tangent: usize, n_normal: usize) -> Self {
        self.n_tangent = n_tangent;
        self.n_normal = n_normal;
        self
    }

    pub fn eigenvalues(mut self, nev: usize) -> Self {
        self.num_eigenvalues = nev;
        self
    }

    pub fn solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn check_grid(mut self, check: bool) -> Self {
        self.check_grid = check;
        self
    }
}

/// Speed, signed curvature and potential of a closed curve at the nodes
/// `t_i = i P / N` and midpoints `t_{i+1/2}`.
#[derive(Debug, Clone)]
pub(crate) struct CurveSamples {
    pub n: usize,
    pub dt: f64,
    pub speed: Vec<f64>,
    pub speed_mid: Vec<f64>,
    /// Curvature along a normal field continued around the curve (codim 1).
    pub curvature: Vec<f64>,
    pub curvature_mid: Vec<f64>,
    pub vq: Vec<f64>,
    pub length: f64,
}

impl CurveSamples {
    pub fn new(chart: &Chart, n: usize) -> Result<Self> {
        if chart.dim() != 1 {
            return Err(invalid("curve solvers need a one-dimensional chart"));
        }
        let period = chart.periods()[0].ok_or_else(|| invalid("curve solvers need a closed (periodic) curve"))?;
        let dt = period / n as f64;
        let mut speed = Vec::with_capacity(n);
        let mut speed_mid = Vec::with_capacity(n);
        let mut curvature = Vec::with_capacity(n);
        let mut curvature_mid = Vec::with_capacity(n);
        let mut vq = Vec::with_capacity(n);
        let mut reference: Option<DMatrix<f64>> = None;
        let mut first: Option<DMatrix<f64>> = None;
        for s in 0..2 * n {
            let t = 0.5 * s as f64 * dt;
            let data = curvature_forms(chart, &[t])?;
            let g = chart.metric(&[t])?[(0, 0)];
            let ks: Vec<f64> = data.forms.forms().iter().map(|f| f[(0, 0)]).collect();
            let mut k = ks[0];
            if chart.codim() == 1 {
                let aligned = match &reference {
                    Some(r) => align_frame(&data.normal_frame, r)?,
                    None => data.normal_frame.clone(),
                };
                if aligned.column(0).dot(&data.normal_frame.column(0)) < 0.0 {
                    k = -k;
                }
                if first.is_none() {
                    first = Some(aligned.clone());
                }
                reference = Some(aligned);
            }
            if s % 2 == 0 {
                speed.push(g.sqrt());
                curvature.push(k);
                vq.push(vq_curve(&ks));
            } else {
                speed_mid.push(g.sqrt());
                curvature_mid.push(k);
            }
        }
        if let (Some(first), Some(last)) = (&first, &reference) {
            // The continued normal must close up after one period.
            align_frame(first, last)?;
            if first.column(0).dot(&last.column(0)) < 0.0 {
                return Err(Error::FrameDiscontinuity { overlap: -1.0 });
            }
        }
        let length = speed.iter().sum::<f64>() * dt;
        Ok(Self {
            n,
            dt,
            speed,
            speed_mid,
            curvature,
            curvature_mid,
            vq,
            length,
        })
    }

    pub fn max_curvature(&self) -> f64 {
        self.curvature
            .iter()
            .chain(&self.curvature_mid)
            .fold(0.0, |a, k| a.max(k.abs()))
    }

    /// `1 / l^2` with `l = length / (2 pi)`.
    pub fn energy_scale(&self) -> f64 {
        (2.0 * PI / self.length).powi(2)
    }
}

fn curve_operator(s: &CurveSamples, include_vq: bool) -> Result<GeneralizedProblem> {
    let n = s.n;
    let mut b = StencilBuilder::new(n);
    for i in 0..n {
        b.edge(i, (i + 1) % n, 0.5 / (s.speed_mid[i] * s.dt));
        b.mass(i, s.speed[i] * s.dt);
        if include_vq {
            b.diagonal(i, s.vq[i] * s.speed[i] * s.dt);
        }
    }
    b.build()
}

/// The assembled surface operator on `n` parameter nodes.
pub fn surface_operator(chart: &Chart, include_vq: bool, n: usize) -> Result<GeneralizedProblem> {
    curve_operator(&CurveSamples::new(chart, n)?, include_vq)
}

/// The assembled layer operator on `n_tangent x n_normal` nodes, unknowns
/// in interleaved tangential order.
pub fn layer_operator(chart: &Chart, delta: f64, n_tangent: usize, n_normal: usize) -> Result<GeneralizedProblem> {
    Ok(assemble_layer(chart, delta, n_tangent, n_normal)?.problem)
}

fn solve_curve(chart: &Chart, include_vq: bool, n: usize, nev: usize) -> Result<(Vec<f64>, CurveSamples, Vec<WavefunctionGrid>)> {
    let samples = CurveSamples::new(chart, n)?;
    let problem = curve_operator(&samples, include_vq)?;
    let hint = if include_vq { samples.vq.iter().fold(0.0, |a: f64, v| a.min(*v)) } else { 0.0 } - 1.0;
    let pairs = lowest_eigenpairs(&problem, nev, SolverKind::Auto, Some(hint))?;
    let waves = pairs
        .vectors
        .iter()
        .map(|x| WavefunctionGrid {
            n_tangent: n,
            n_normal: 1,
            values: x.iter().copied().collect(),
            weights: problem.mass.clone(),
        })
        .collect();
    Ok((pairs.values, samples, waves))
}

/// Lowest eigenvalues of `-(1/2) Delta_LB (+ V_q)` on a closed curve, or
/// analytically on a flat torus.
///
/// Curves are discretised on `n_grid` uniform parameter nodes; with speed
/// `L = |r'|` the Laplace–Beltrami operator is `(1/L) d/dt (1/L) d/dt`, whose
/// quadratic form `(1/2) sum (x_{i+1} - x_i)^2 / (L_{i+1/2} dt)` against the
/// mass `L_i dt` is the usual three-point arclength stencil. The grid error
/// is estimated against `n_grid / 2`.
///
/// A chart with two periodic axes and a constant diagonal metric is treated
/// as a flat torus: the spectrum is `(1/2) sum (2 pi p_a / (P_a sqrt(g_aa)))^2
/// + V_q` over integer modes.
///
/// ```
/// use geomq::{geometry::registry, solver::surface_spectrum};
/// let circle = registry::build("circle:R=1").unwrap();
/// let s = surface_spectrum(&circle, true, 256, 3).unwrap();
/// assert!((s.eigenvalues[0] + 0.125).abs() < 1e-12);
/// assert!((s.eigenvalues[1] - 0.375).abs() < 1e-4);
/// ```
pub fn surface_spectrum(chart: &Chart, include_vq: bool, n_grid: usize, num_eigenvalues: usize) -> Result<SpectrumResult> {
    if chart.dim() == 2 {
        return flat_torus_spectrum(chart, include_vq, num_eigenvalues);
    }
    if n_grid < 8 || num_eigenvalues == 0 || num_eigenvalues > n_grid / 2 {
        return Err(invalid("surface spectrum needs n_grid >= 8 and 0 < nev <= n_grid/2"));
    }
    let (values, samples, waves) = solve_curve(chart, include_vq, n_grid, num_eigenvalues)?;
    let (coarse, _, _) = solve_curve(chart, include_vq, n_grid / 2, num_eigenvalues)?;
    let scale = samples.energy_scale();
    let estimate = grid_estimate(&values, &coarse, scale);
    if estimate > GRID_TOL {
        return Err(Error::GridTooCoarse {
            estimate,
            tolerance: GRID_TOL,
        });
    }
    let grid = GridMeta {
        kind: "surface-curve".into(),
        n_tangent: Some(n_grid),
        n_normal: None,
        n_radial: None,
        delta: None,
        unknowns: n_grid,
        solver: if n_grid <= super::eigen::DENSE_LIMIT { SolverKind::Dense } else { SolverKind::Iterative },
        energy_scale: scale,
        grid_estimate: Some(estimate),
    };
    Ok(SpectrumResult::finish(values, None, grid, waves))
}

fn flat_torus_spectrum(chart: &Chart, include_vq: bool, nev: usize) -> Result<SpectrumResult> {
    let periods: Vec<f64> = chart
        .periods()
        .iter()
        .map(|p| p.ok_or_else(|| invalid("surface spectrum in 2D needs both axes periodic")))
        .collect::<Result<_>>()?;
    let u0 = chart.base_point().to_vec();
    let g0 = chart.metric(&u0)?;
    let vq0 = vq_general_invariant(&curvature_forms(chart, &u0)?.forms);
    // Flatness and constant potential, checked on a few points.
    for (a, b) in [(0.7, 1.9), (2.3, 4.1), (5.0, 0.4)] {
        let u = [a * periods[0] / 6.0, b * periods[1] / 6.0];
        let g = chart.metric(&u)?;
        let vq = vq_general_invariant(&curvature_forms(chart, &u)?.forms);
        if (&g - &g0).amax() > 1e-10 || g[(0, 1)].abs() > 1e-10 || (vq - vq0).abs() > 1e-10 {
            return Err(invalid("2D surface spectra are available for flat tori only"));
        }
    }
    if g0[(0, 1)].abs() > 1e-10 {
        return Err(invalid("2D surface spectra are available for flat tori only"));
    }
    let wave = [
        2.0 * PI / (periods[0] * g0[(0, 0)].sqrt()),
        2.0 * PI / (periods[1] * g0[(1, 1)].sqrt()),
    ];
    let reach = nev as i64 + 2;
    let mut values = Vec::new();
    for p in -reach..=reach {
        for q in -reach..=reach {
            let kinetic = 0.5 * ((p as f64 * wave[0]).powi(2) + (q as f64 * wave[1]).powi(2));
            values.push(kinetic + if include_vq { vq0 } else { 0.0 });
        }
    }
    values.sort_by(f64::total_cmp);
    values.truncate(nev);
    let scale = wave[0].min(wave[1]).powi(2);
    let grid = GridMeta {
        kind: "surface-flat-torus-analytic".into(),
        n_tangent: None,
        n_normal: None,
        n_radial: None,
        delta: None,
        unknowns: 0,
        solver: SolverKind::Dense,
        energy_scale: scale,
        grid_estimate: None,
    };
    Ok(SpectrumResult::finish(values, None, grid, Vec::new()))
}

/// The assembled layer problem and what is needed to read its solutions.
pub(crate) struct LayerProblem {
    pub problem: GeneralizedProblem,
    pub samples: CurveSamples,
    pub w: Vec<f64>,
    pub dw: f64,
    pub n_normal: usize,
}

impl LayerProblem {
    pub fn index(&self, i: usize, j: usize) -> usize {
        interleaved(i, self.samples.n) * self.n_normal + j
    }

    pub fn transverse_energy(&self) -> f64 {
        discrete_transverse_energy(self.n_normal, self.dw)
    }

    fn grid_of(&self, x: &nalgebra::DVector<f64>) -> WavefunctionGrid {
        let (nt, nw) = (self.samples.n, self.n_normal);
        let mut values = Vec::with_capacity(nt * nw);
        let mut weights = Vec::with_capacity(nt * nw);
        for i in 0..nt {
            for j in 0..nw {
                let p = self.index(i, j);
                values.push(x[p]);
                weights.push(self.problem.mass[p]);
            }
        }
        WavefunctionGrid {
            n_tangent: nt,
            n_normal: nw,
            values,
            weights,
        }
    }
}

/// `-(1/2) (1/(L h)) [d_t (1/(L h)) d_t + d_w (L h) d_w]` with `h = 1 + w k(t)`,
/// as the quadratic form `(1/2) int [(d_t psi)^2 / (L h) + L h (d_w psi)^2] dt dw`
/// against the mass `L h dt dw`.
pub(crate) fn assemble_layer(chart: &Chart, delta: f64, nt: usize, nw: usize) -> Result<LayerProblem> {
    let samples = CurveSamples::new(chart, nt)?;
    if chart.codim() != 1 {
        return Err(invalid("layer spectra need a plane curve"));
    }
    let factor = 1.0 - delta * samples.max_curvature();
    if delta * samples.max_curvature() >= MAX_DELTA_CURVATURE {
        return Err(Error::OffsetDegenerate { factor });
    }
    let dw = 2.0 * delta / (nw as f64 + 1.0);
    let w: Vec<f64> = (1..=nw).map(|j| -delta + j as f64 * dw).collect();
    let dt = samples.dt;
    let mut b = StencilBuilder::new(nt * nw);
    let layer = LayerProblem {
        problem: GeneralizedProblem {
            stiffness: nalgebra_sparse::CscMatrix::zeros(0, 0),
            mass: Vec::new(),
        },
        samples,
        w,
        dw,
        n_normal: nw,
    };
    let s = &layer.samples;
    for i in 0..nt {
        let next = (i + 1) % nt;
        for j in 0..nw {
            let p = layer.index(i, j);
            let wj = layer.w[j];
            let h = 1.0 + wj * s.curvature[i];
            b.mass(p, s.speed[i] * h * dt * dw);
            let h_mid = 1.0 + wj * s.curvature_mid[i];
            b.edge(p, layer.index(next, j), 0.5 * dw / (s.speed_mid[i] * h_mid * dt));
            let radial = |w_half: f64| 0.5 * s.speed[i] * (1.0 + w_half * s.curvature[i]) * dt / dw;
            if j + 1 < nw {
                b.edge(p, layer.index(i, j + 1), radial(wj + 0.5 * dw));
            }
            if j == 0 {
                b.diagonal(p, radial(wj - 0.5 * dw));
            }
            if j + 1 == nw {
                b.diagonal(p, radial(wj + 0.5 * dw));
            }
        }
    }
    Ok(LayerProblem {
        problem: b.build()?,
        ..layer
    })
}

fn solve_layer(
    chart: &Chart,
    delta: f64,
    nt: usize,
    nw: usize,
    nev: usize,
    solver: SolverKind,
) -> Result<(LayerProblem, super::eigen::Eigenpairs)> {
    let layer = assemble_layer(chart, delta, nt, nw)?;
    let kmax = layer.samples.max_curvature();
    let hint = layer.transverse_energy() - 0.5 * kmax * kmax - 0.5 * layer.samples.energy_scale();
    let pairs = lowest_eigenpairs(&layer.problem, nev, solver, Some(hint))?;
    Ok((layer, pairs))
}

fn validate(s: &ThinLayerScenario) -> Result<()> {
    if !(s.delta.is_finite() && s.delta > 0.0) {
        return Err(invalid("layer half-width must be positive"));
    }
    if s.n_normal < MIN_NORMAL || s.n_tangent < MIN_TANGENT {
        return Err(invalid(format!(
            "layer grids need n_normal >= {MIN_NORMAL} and n_tangent >= {MIN_TANGENT}"
        )));
    }
    if s.num_eigenvalues == 0 {
        return Err(invalid("request at least one eigenvalue"));
    }
    Ok(())
}

/// Spectrum of the Dirichlet layer `|w| < delta` around a closed plane
/// curve, in adapted coordinates `(t, w)`.
///
/// ```no_run
/// use geomq::{geometry::registry, solver::{layer_spectrum_curve, ThinLayerScenario}};
/// let circle = registry::build("circle:R=1").unwrap();
/// let s = layer_spectrum_curve(&ThinLayerScenario::new(circle, 0.05)).unwrap();
/// let e = s.subtracted.unwrap();
/// assert!((e[0] + 0.125).abs() < 0.0025);
/// ```
pub fn layer_spectrum_curve(scenario: &ThinLayerScenario) -> Result<SpectrumResult> {
    validate(scenario)?;
    let s = scenario;
    let (layer, pairs) = solve_layer(&s.chart, s.delta, s.n_tangent, s.n_normal, s.num_eigenvalues, s.solver)?;
    let e_perp = layer.transverse_energy();
    let scale = layer.samples.energy_scale();
    let estimate = if s.check_grid {
        let (coarse_layer, coarse) = solve_layer(
            &s.chart,
            s.delta,
            s.n_tangent / 2,
            s.n_normal / 2,
            s.num_eigenvalues,
            s.solver,
        )?;
        let fine: Vec<f64> = pairs.values.iter().map(|v| v - e_perp).collect();
        let c_perp = coarse_layer.transverse_energy();
        let coarse: Vec<f64> = coarse.values.iter().map(|v| v - c_perp).collect();
        let estimate = grid_estimate(&fine, &coarse, scale);
        if estimate > GRID_TOL {
            return Err(Error::GridTooCoarse {
                estimate,
                tolerance: GRID_TOL,
            });
        }
        Some(estimate)
    } else {
        None
    };
    let waves = pairs.vectors.iter().map(|x| layer.grid_of(x)).collect();
    let grid = GridMeta {
        kind: "layer-curve".into(),
        n_tangent: Some(s.n_tangent),
        n_normal: Some(s.n_normal),
        n_radial: None,
        delta: Some(s.delta),
        unknowns: layer.problem.size(),
        solver: pairs.solver,
        energy_scale: scale,
        grid_estimate: estimate,
    };
    let continuum = PI * PI / (8.0 * s.delta * s.delta);
    Ok(SpectrumResult::finish(pairs.values, Some((e_perp, continuum)), grid, waves))
}

/// How far the layer ground state is from a product `f(t) cos(pi w / 2 delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub delta: f64,
    /// `||chi - f cos||^2 / ||chi||^2` for `chi = Psi sqrt(h)`, measure `L dt dw`.
    pub chi_defect: f64,
    /// The same for `Psi` itself, measure `L h dt dw`.
    pub psi_defect: f64,
    pub ground_energy: f64,
}

/// Projects the layer ground state onto the transverse ground mode.
///
/// `cos(pi w / 2 delta)` restricted to the Dirichlet grid is exactly the
/// discrete transverse ground vector. The defect is accumulated directly
/// as the squared norm of the orthogonal remainder, so it stays accurate
/// far below `1 - |projection|^2` roundoff.
pub fn factorization_residual(scenario: &ThinLayerScenario) -> Result<FactorizationReport> {
    validate(scenario)?;
    let s = scenario;
    let (layer, pairs) = solve_layer(&s.chart, s.delta, s.n_tangent, s.n_normal, 1, s.solver)?;
    let ground = &pairs.vectors[0];
    let mode: Vec<f64> = layer.w.iter().map(|w| (PI * w / (2.0 * s.delta)).cos()).collect();
    let samples = &layer.samples;
    let (mut chi_rem, mut chi_norm, mut psi_rem, mut psi_norm) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..samples.n {
        let h: Vec<f64> = layer.w.iter().map(|w| 1.0 + w * samples.curvature[i]).collect();
        let psi: Vec<f64> = (0..s.n_normal).map(|j| ground[layer.index(i, j)]).collect();
        let chi: Vec<f64> = psi.iter().zip(&h).map(|(p, h)| p * h.sqrt()).collect();
        let measure = samples.speed[i] * samples.dt * layer.dw;

        let f_chi = dot(&chi, &mode, None) / dot(&mode, &mode, None);
        let f_psi = dot(&psi, &mode, Some(&h)) / dot(&mode, &mode, Some(&h));
        for j in 0..s.n_normal {
            chi_rem += measure * (chi[j] - f_chi * mode[j]).powi(2);
            chi_norm += measure * chi[j] * chi[j];
            psi_rem += measure * h[j] * (psi[j] - f_psi * mode[j]).powi(2);
            psi_norm += measure * h[j] * psi[j] * psi[j];
        }
    }
    Ok(FactorizationReport {
        delta: s.delta,
        chi_defect: chi_rem / chi_norm,
        psi_defect: psi_rem / psi_norm,
        ground_energy: pairs.values[0] - layer.transverse_energy(),
    })
}

fn dot(a: &[f64], b: &[f64], weight: Option<&[f64]>) -> f64 {
    match weight {
        Some(w) => a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum(),
        None => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}
