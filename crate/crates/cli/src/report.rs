use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// One JSON report per command run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub config: Value,
    pub wall_clock_seconds: f64,
    pub result: Value,
}

pub struct Stopwatch(Instant);

impl Stopwatch {
    pub fn start() -> Self {
        Self(Instant::now())
    }

    pub fn report(&self, config: impl Serialize, result: impl Serialize) -> Result<RunReport> {
        Ok(RunReport {
            command: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            wall_clock_seconds: self.0.elapsed().as_secs_f64(),
            result: serde_json::to_value(result)?,
        })
    }
}

pub fn report_path(base: &Path) -> PathBuf {
    with_suffix(base, ".report.json")
}

/// `base` with `suffix` appended to its file name.
pub fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_report(base: &Path, report: &RunReport) -> Result<PathBuf> {
    let path = report_path(base);
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
