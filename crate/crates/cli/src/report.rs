use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use geomq::solver::SpectrumResult;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub type Fields = BTreeMap<String, Value>;

/// One check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub name: String,
    pub inputs: Fields,
    pub values: Fields,
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub seconds: f64,
    /// Set by spectrum records for the CSV writer.
    #[serde(skip)]
    pub spectrum: Option<SpectrumResult>,
}

impl Record {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            inputs: Fields::new(),
            values: Fields::new(),
            residual: None,
            tolerance: None,
            pass: true,
            seconds: 0.0,
            spectrum: None,
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs.insert(key.into(), to_value(value));
        self
    }

    pub fn value(mut self, key: &str, value: impl Serialize) -> Self {
        self.values.insert(key.into(), to_value(value));
        self
    }

    /// Passes iff `residual <= tolerance`.
    pub fn check(mut self, residual: f64, tolerance: f64) -> Self {
        self.residual = Some(residual);
        self.tolerance = Some(tolerance);
        self.pass = residual <= tolerance;
        self
    }

    /// Wall-clock time is recorded only with `--timings`, so that reports
    /// stay byte-identical by default.
    pub fn timed(mut self, seconds: f64, config: &RunConfig) -> Self {
        if config.timings() {
            self.seconds = seconds;
        }
        self
    }

    pub fn fail(mut self, error: impl ToString) -> Self {
        self.pass = false;
        self.values.insert("error".into(), Value::String(error.to_string()));
        self
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub pass: bool,
}

impl Report {
    pub fn new(config: RunConfig, mut records: Vec<Record>) -> Self {
        records.sort_by(|a, b| a.name.cmp(&b.name));
        let pass = records.iter().all(|r| r.pass);
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            records,
            pass,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    /// Spectrum records as `index,eigenvalue,subtracted,degeneracy` rows,
    /// other records as `name,residual,tolerance,pass`.
    pub fn to_csv(&self) -> std::io::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let spectra: Vec<&SpectrumResult> = self.records.iter().filter_map(|r| r.spectrum.as_ref()).collect();
        if !spectra.is_empty() {
            let several = spectra.len() > 1;
            if several {
                w.write_record(["record", "index", "eigenvalue", "subtracted", "degeneracy"])?;
            } else {
                w.write_record(["index", "eigenvalue", "subtracted", "degeneracy"])?;
            }
            for r in &self.records {
                let Some(s) = &r.spectrum else { continue };
                for (i, e) in s.eigenvalues.iter().enumerate() {
                    let sub = s.subtracted.as_ref().map(|v| v[i].to_string()).unwrap_or_default();
                    let row = [i.to_string(), e.to_string(), sub, s.degeneracy_of(i).to_string()];
                    if several {
                        w.write_record(std::iter::once(r.name.clone()).chain(row))?;
                    } else {
                        w.write_record(row)?;
                    }
                }
            }
        } else {
            w.write_record(["name", "residual", "tolerance", "pass"])?;
            for r in &self.records {
                let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
                w.write_record([r.name.clone(), opt(r.residual), opt(r.tolerance), r.pass.to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomically(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_sorted_and_pass_is_conjunction() {
        let r = Report::new(
            RunConfig::default(),
            vec![Record::new("b").check(2.0, 1.0), Record::new("a").check(0.5, 1.0)],
        );
        assert_eq!(r.records[0].name, "a");
        assert!(!r.pass);
        let json: Value = serde_json::from_str(&r.to_json()).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["config", "pass", "records", "version"]);
        let rec: Vec<&String> = json["records"][0].as_object().unwrap().keys().collect();
        assert_eq!(rec, ["inputs", "name", "pass", "residual", "seconds", "tolerance", "values"]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        write_atomically(&p, "one").unwrap();
        write_atomically(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    }
}
