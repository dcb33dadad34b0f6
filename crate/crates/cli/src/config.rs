use std::fmt;
use std::path::{Path, PathBuf};

use geomq::adapted::FdOptions;
use geomq::geometry::registry::ChartSpec;
use geomq::solver::SolverKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Curvature,
    Potential,
    Verify,
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Everything a run needs. Read from `--config` (JSON) and overridden by
/// flags; echoed verbatim into the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    /// Verification suite or spectrum kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nev: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    /// Randomized suite name, e.g. `random20`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd: Option<FdOptions>,
    /// Overrides the default tolerance of every record.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<geomq::Error> for ConfigError {
    fn from(e: geomq::Error) -> Self {
        Self(e.to_string())
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` replace those in `self`.
    pub fn overridden_by(mut self, flags: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(
            command, target, chart, at, delta, deltas, nev, grid, seed, radius, l_max, suite, diagonal, solver,
            fd, tolerance, out, format, timings
        );
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(format!("{name} must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("delta", self.delta)?;
        positive("radius", self.radius)?;
        positive("tolerance", self.tolerance)?;
        if let Some(fd) = self.fd {
            positive("fd.step", Some(fd.step))?;
            positive("fd.tolerance", Some(fd.tolerance))?;
        }
        if let Some(ds) = &self.deltas {
            if ds.is_empty() {
                return Err(bad("deltas must not be empty"));
            }
            for d in ds {
                positive("deltas entry", Some(*d))?;
            }
        }
        if let Some(g) = &self.grid {
            if g.is_empty() || g.len() > 2 || g.contains(&0) {
                return Err(bad("grid takes one or two positive sizes"));
            }
        }
        if self.nev == Some(0) {
            return Err(bad("nev must be positive"));
        }
        if let Some(at) = &self.at {
            if at.iter().any(|x| !x.is_finite()) {
                return Err(bad("at must be finite"));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn timings(&self) -> bool {
        self.timings.unwrap_or(false)
    }

    pub fn fd(&self) -> FdOptions {
        self.fd.unwrap_or_default()
    }

    pub fn tolerance_or(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"chart": "circle", "colour": 3}"#).unwrap_err();
        assert!(err.to_string().contains("colour"));
        assert!(serde_json::from_str::<RunConfig>(r#"{"fd": {"step": 1e-3, "tol": 1}}"#).is_err());
    }

    #[test]
    fn flags_win() {
        let file: RunConfig = serde_json::from_str(r#"{"chart": "circle:R=2", "delta": 0.1, "seed": 3}"#).unwrap();
        let flags = RunConfig {
            delta: Some(0.05),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.delta, Some(0.05));
        assert_eq!(merged.seed, Some(3));
        assert_eq!(merged.chart.unwrap().to_string(), "circle:R=2");
    }

    #[test]
    fn validation() {
        let c = RunConfig {
            tolerance: Some(-1.0),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = RunConfig {
            grid: Some(vec![1, 2, 3]),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"chart": "circle:R"}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": -4}"#).is_err());
    }
}
