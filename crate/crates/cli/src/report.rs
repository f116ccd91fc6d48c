//! Pass/fail checks and the `report.json` written for every run.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `value <= limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            passed: value <= limit,
            value: Some(value),
            limit: Some(limit),
            detail: None,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            passed: value >= limit,
            value: Some(value),
            limit: Some(limit),
            detail: None,
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            passed,
            value: None,
            limit: None,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub passed: bool,
    pub failures: Vec<String>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Collects checks and written files for one run.
pub struct Run {
    pub dir: PathBuf,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Run {
            dir: dir.to_owned(),
            checks: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn check(&mut self, c: Check) {
        log::info!("{} {}", if c.passed { "ok  " } else { "FAIL" }, c.name);
        self.checks.push(c);
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_owned());
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> io::Result<()> {
        let path = self.path(name);
        fs::write(path, contents)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self, subcommand: &str, error: Option<String>) -> io::Result<bool> {
        let failures: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .chain(error.iter().map(|_| "run".to_owned()))
            .collect();
        let report = Report {
            subcommand: subcommand.to_owned(),
            passed: failures.is_empty(),
            failures,
            checks: self.checks,
            artifacts: self.artifacts,
            error,
        };
        let mut text = serde_json::to_string_pretty(&report).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(self.dir.join("report.json"), text)?;
        Ok(report.passed)
    }
}
