//! Finite-difference spectra of the surface Hamiltonian `-(1/2) Delta_LB + V_q`
//! and of the Dirichlet layer `|x_n| < delta` around a curve or sphere.
//!
//! Every discretisation is written as a quadratic form
//! `sum c (x_p - x_q)^2` plus a diagonal mass from the volume element, so
//! the operators are symmetric by construction and the eigenproblem is the
//! generalised `K x = lambda M x`.
//!
//! Layer spectra are reported raw and with the transverse ground energy
//! removed. The removed baseline is the ground energy of the *discrete*
//! transverse Dirichlet problem, `(2/dw^2) sin^2(pi / (2 (N_w + 1)))`; the
//! continuum value `pi^2 / (8 delta^2)` is reported alongside. With the
//! discrete baseline the grid error of the `1/delta^2` term, which dwarfs
//! the `O(1)` energies of interest, cancels exactly in the flat case.
//!
//! There is no layer solver for codimension above one: the transverse
//! derivatives of the factorised state scale like `1/delta` there, so the
//! squeezing limit does not reduce to a surface Hamiltonian.

mod assembly;
mod curve;
mod eigen;
mod shell;
mod sweep;

use serde::Serialize;

pub use assembly::{GeneralizedProblem, StencilBuilder};
pub use curve::{
    factorization_residual, layer_operator, layer_spectrum_curve, surface_operator, surface_spectrum,
    FactorizationReport, ThinLayerScenario, MAX_DELTA_CURVATURE, MIN_NORMAL, MIN_TANGENT,
};
pub use eigen::{lowest_eigenpairs, BlockLanczos, Eigenpairs, SolverKind, DENSE_LIMIT, LANCZOS_TOL};
pub use shell::{layer_spectrum_shell, shell_radial_operator, ShellOptions, MIN_RADIAL, SHELL_GRID_TOL};
pub use sweep::{delta_sweep, SweepFamily, SweepLevel, SweepReport};

/// Relative spread allowed within a degeneracy group.
pub const DEGENERACY_TOL: f64 = 1e-6;
/// Largest tolerated Richardson estimate of the grid error, relative to
/// the spectral scale.
pub const GRID_TOL: f64 = 0.01;

/// Consecutive eigenvalues that agree to [`DEGENERACY_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyGroup {
    pub start: usize,
    pub size: usize,
    /// Mean of the group.
    pub value: f64,
    /// `(max - min) / max(|value|, energy scale)`.
    pub spread: f64,
}

/// Resolution and solver data for a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub kind: String,
    pub n_tangent: Option<usize>,
    pub n_normal: Option<usize>,
    pub n_radial: Option<usize>,
    pub delta: Option<f64>,
    pub unknowns: usize,
    pub solver: SolverKind,
    /// `1/l^2` with `l` the characteristic length of the surface.
    pub energy_scale: f64,
    /// Richardson estimate of the grid error relative to the energy scale.
    pub grid_estimate: Option<f64>,
}

/// Values of one eigenfunction on the grid, with volume weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WavefunctionGrid {
    pub n_tangent: usize,
    pub n_normal: usize,
    /// Tangent-major: `values[i * n_normal + j]`.
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WavefunctionGrid {
    /// `sum w v^2`.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_normal + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues minus the discrete transverse ground energy (layers only).
    pub subtracted: Option<Vec<f64>>,
    pub transverse_energy: Option<f64>,
    /// `pi^2 / (8 delta^2)`.
    pub continuum_transverse_energy: Option<f64>,
    /// For shells: the angular momentum of each eigenvalue.
    pub angular_momentum: Option<Vec<usize>>,
    pub degeneracies: Vec<DegeneracyGroup>,
    pub grid: GridMeta,
    #[serde(skip)]
    pub wavefunctions: Vec<WavefunctionGrid>,
}

impl SpectrumResult {
    /// Subtracted values if present, otherwise the raw eigenvalues.
    pub fn levels(&self) -> &[f64] {
        self.subtracted.as_deref().unwrap_or(&self.eigenvalues)
    }

    /// Size of the degeneracy group containing eigenvalue `i`.
    pub fn degeneracy_of(&self, i: usize) -> usize {
        self.degeneracies
            .iter()
            .find(|g| (g.start..g.start + g.size).contains(&i))
            .map_or(1, |g| g.size)
    }

    pub(crate) fn finish(
        eigenvalues: Vec<f64>,
        transverse: Option<(f64, f64)>,
        grid: GridMeta,
        wavefunctions: Vec<WavefunctionGrid>,
    ) -> Self {
        let subtracted = transverse.map(|(e, _)| eigenvalues.iter().map(|v| v - e).collect::<Vec<_>>());
        let degeneracies = group_degeneracies(subtracted.as_deref().unwrap_or(&eigenvalues), grid.energy_scale);
        Self {
            eigenvalues,
            subtracted,
            transverse_energy: transverse.map(|t| t.0),
            continuum_transverse_energy: transverse.map(|t| t.1),
            angular_momentum: None,
            degeneracies,
            grid,
            wavefunctions,
        }
    }
}

/// Groups consecutive levels whose spread stays within [`DEGENERACY_TOL`].
pub fn group_degeneracies(levels: &[f64], energy_scale: f64) -> Vec<DegeneracyGroup> {
    let mut groups: Vec<DegeneracyGroup> = Vec::new();
    let mut start = 0;
    while start < levels.len() {
        let mut end = start + 1;
        while end < levels.len() {
            let scale = levels[start].abs().max(levels[end].abs()).max(energy_scale);
            if (levels[end] - levels[start]).abs() > DEGENERACY_TOL * scale {
                break;
            }
            end += 1;
        }
        let slice = &levels[start..end];
        let value = slice.iter().sum::<f64>() / slice.len() as f64;
        let spread = (slice[slice.len() - 1] - slice[0]).abs() / value.abs().max(energy_scale);
        groups.push(DegeneracyGroup {
            start,
            size: end - start,
            value,
            spread,
        });
        start = end;
    }
    groups
}

/// Richardson estimate `max_i |fine_i - coarse_i| / 3` relative to
/// `max(max |fine|, energy_scale)`, for second-order schemes on grids `N`
/// and `N/2`.
pub(crate) fn grid_estimate(fine: &[f64], coarse: &[f64], energy_scale: f64) -> f64 {
    let scale = fine.iter().map(|v| v.abs()).fold(energy_scale, f64::max);
    fine.iter()
        .zip(coarse)
        .map(|(f, c)| (f - c).abs() / 3.0)
        .fold(0.0, f64::max)
        / scale
}

/// Ground energy of `-(1/2) d^2/dw^2` on `n` interior Dirichlet nodes with
/// spacing `dw`.
pub fn discrete_transverse_energy(n: usize, dw: f64) -> f64 {
    let s = (std::f64::consts::PI / (2.0 * (n as f64 + 1.0))).sin();
    2.0 * s * s / (dw * dw)
}
