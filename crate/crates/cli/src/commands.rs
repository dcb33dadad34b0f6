use geomq::geometry::{curvature_forms, registry::ChartSpec, Chart};
use geomq::potentials::compare_potentials_with;
use geomq::solver::{
    delta_sweep, factorization_residual, layer_spectrum_curve, layer_spectrum_shell, surface_spectrum,
    ShellOptions, SolverKind, SpectrumResult, SweepFamily, ThinLayerScenario,
};
use geomq::Error;

use crate::config::{ConfigError, RunConfig};
use crate::report::Record;
use crate::timed;

fn chart_of(config: &RunConfig, default: &str) -> Result<(ChartSpec, Chart), ConfigError> {
    let spec = config.chart.clone().unwrap_or_else(|| default.parse().expect("valid spec"));
    let chart = spec.build()?;
    Ok((spec, chart))
}

fn point(config: &RunConfig, chart: &Chart) -> Result<Vec<f64>, ConfigError> {
    let u = config.at.clone().unwrap_or_else(|| chart.base_point().to_vec());
    if u.len() != chart.dim() {
        return Err(ConfigError(format!(
            "--at needs {} coordinates for {}, got {}",
            chart.dim(),
            chart.name(),
            u.len()
        )));
    }
    Ok(u)
}

/// Errors caused by the request rather than by a failed check.
fn usage_error(e: &Error) -> bool {
    matches!(e, Error::InvalidInput(_) | Error::UnknownChart(_))
}

fn failed(r: Record, e: Error) -> Result<Record, ConfigError> {
    if usage_error(&e) {
        Err(e.into())
    } else {
        Ok(r.fail(e))
    }
}

pub fn curvature(config: &RunConfig) -> Result<Vec<Record>, ConfigError> {
    let (spec, chart) = chart_of(config, "sphere:R=1")?;
    let u = point(config, &chart)?;
    let (record, seconds) = timed(|| {
        let r = Record::new(format!("curvature/{}", spec.name))
            .input("chart", spec.to_string())
            .input("at", &u);
        match curvature_forms(&chart, &u) {
            Ok(d) => Ok(r
                .value("principal", &d.principal)
                .value("forms", &d.forms)
                .value("metric", chart.metric(&u).ok().map(|g| g.row_iter().map(|x| x.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()))),
            Err(e) => failed(r, e),
        }
    });
    Ok(vec![record?.timed(seconds, config)])
}

pub fn potential(config: &RunConfig) -> Result<Vec<Record>, ConfigError> {
    let (spec, chart) = chart_of(config, "sphere:R=1")?;
    let u = point(config, &chart)?;
    let tol = config.tolerance_or(1e-6);
    let (record, seconds) = timed(|| {
        let r = Record::new(format!("potential/{}", spec.name))
            .input("chart", spec.to_string())
            .input("at", &u);
        match curvature_forms(&chart, &u) {
            Ok(d) => {
                let mut report = compare_potentials_with(&d.forms, 1.0, config.fd());
                report.point = Some(u.clone());
                let residual = report.max_expected_discrepancy();
                let mut r = r;
                for (name, v) in report.paths() {
                    r = r.value(name, v);
                }
                Ok(r.value("report", &report).check(residual, tol))
            }
            Err(e) => failed(r, e),
        }
    });
    Ok(vec![record?.timed(seconds, config)])
}

fn grid2(config: &RunConfig, default: (usize, usize)) -> (usize, usize) {
    match config.grid.as_deref() {
        Some([n]) => (*n, default.1),
        Some([a, b]) => (*a, *b),
        _ => default,
    }
}

fn spectrum_record(name: String, result: geomq::Result<SpectrumResult>) -> Result<Record, ConfigError> {
    let r = Record::new(name);
    match result {
        Ok(s) => {
            let mut r = r.value("spectrum", &s);
            r.residual = s.grid.grid_estimate;
            r.tolerance = s.grid.grid_estimate.map(|_| match s.grid.kind.as_str() {
                "layer-shell" => geomq::solver::SHELL_GRID_TOL,
                _ => geomq::solver::GRID_TOL,
            });
            r.spectrum = Some(s);
            Ok(r)
        }
        Err(e) => failed(r, e),
    }
}

pub fn spectrum(kind: &str, config: &RunConfig) -> Result<Vec<Record>, ConfigError> {
    let nev = config.nev.unwrap_or(6);
    let solver = config.solver.unwrap_or(SolverKind::Auto);
    let (record, seconds) = match kind {
        "surface" => {
            let (spec, chart) = chart_of(config, "circle:R=1")?;
            let n = grid2(config, (256, 0)).0;
            let (r, t) = timed(|| spectrum_record(format!("spectrum/surface/{}", spec.name), surface_spectrum(&chart, true, n, nev)));
            (r?.input("chart", spec.to_string()).input("grid", n).input("nev", nev), t)
        }
        "layer" => {
            let (spec, chart) = chart_of(config, "circle:R=1")?;
            let delta = config.delta.unwrap_or(0.05);
            let (nt, nw) = grid2(config, (128, 32));
            let scenario = ThinLayerScenario::new(chart, delta).grid(nt, nw).eigenvalues(nev).solver(solver);
            let (r, t) = timed(|| spectrum_record(format!("spectrum/layer/{}", spec.name), layer_spectrum_curve(&scenario)));
            (r?.input("chart", spec.to_string()).input("delta", delta).input("grid", [nt, nw]).input("nev", nev), t)
        }
        "shell" => {
            let radius = config.radius.unwrap_or(1.0);
            let delta = config.delta.unwrap_or(0.025);
            let l_max = config.l_max.unwrap_or(3);
            let n = grid2(config, (64, 0)).0;
            let options = ShellOptions::new(radius, delta, l_max, n);
            let (r, t) = timed(|| spectrum_record("spectrum/shell".into(), layer_spectrum_shell(&options)));
            (r?.input("options", options), t)
        }
        "sweep" => return sweep(config, nev, solver),
        "factorization" => return factorization(config, solver),
        other => {
            return Err(ConfigError(format!(
                "unknown spectrum kind `{other}` (expected surface, layer, shell, sweep or factorization)"
            )))
        }
    };
    Ok(vec![record.timed(seconds, config)])
}

fn sweep(config: &RunConfig, nev: usize, solver: SolverKind) -> Result<Vec<Record>, ConfigError> {
    let deltas = config.deltas.clone().unwrap_or_else(|| vec![0.1, 0.05, 0.025]);
    let (spec, chart) = chart_of(config, "circle:R=1")?;
    let family = if spec.name == "sphere" {
        SweepFamily::Shell {
            radius: config.radius.unwrap_or(spec.params.get("R").and_then(|r| r.parse().ok()).unwrap_or(1.0)),
            l_max: config.l_max.unwrap_or(3),
            n_radial: grid2(config, (64, 0)).0,
        }
    } else {
        let (n_tangent, n_normal) = grid2(config, (64, 256));
        SweepFamily::Curve {
            chart,
            n_tangent,
            n_normal,
            num_eigenvalues: config.nev.map_or(3, |_| nev),
            solver,
        }
    };
    let (result, seconds) = timed(|| delta_sweep(&family, &deltas));
    let r = Record::new(format!("spectrum/sweep/{}", spec.name))
        .input("chart", spec.to_string())
        .input("deltas", &deltas)
        .input("grid", &config.grid);
    let r = match result {
        Ok(report) => {
            // Reported, not asserted: the fitted rate is an observation.
            r.value("levels", &report.levels)
        }
        Err(e) => failed(r, e)?,
    };
    Ok(vec![r.timed(seconds, config)])
}

fn factorization(config: &RunConfig, solver: SolverKind) -> Result<Vec<Record>, ConfigError> {
    let (spec, chart) = chart_of(config, "circle:R=1")?;
    let deltas = match (&config.deltas, config.delta) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => vec![d],
        (None, None) => vec![0.05, 0.025],
    };
    let (nt, nw) = grid2(config, (64, 32));
    let mut out = Vec::new();
    for (i, delta) in deltas.iter().enumerate() {
        let scenario = ThinLayerScenario::new(chart.clone(), *delta).grid(nt, nw).solver(solver);
        let (result, seconds) = timed(|| factorization_residual(&scenario));
        let r = Record::new(format!("spectrum/factorization/{}/{i:02}", spec.name))
            .input("chart", spec.to_string())
            .input("delta", delta)
            .input("grid", [nt, nw]);
        let r = match result {
            Ok(f) => r.value("factorization", f),
            Err(e) => failed(r, e)?,
        };
        out.push(r.timed(seconds, config));
    }
    Ok(out)
}
