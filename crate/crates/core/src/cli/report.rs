//! JSON reports and CSV outputs. Reports embed the resolved configuration and
//! a schema version; field order follows the struct definitions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Serialize, Serializer};

use super::config::{Command, RunConfig};
use crate::error::{CbfError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A float that serializes non-finite values as strings (`"inf"`, `"-inf"`,
/// `"nan"`) instead of JSON `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub result: T,
}

pub fn render<T: Serialize>(command: Command, config: &RunConfig, result: T) -> Result<String> {
    // the output location is not part of what was computed
    let mut resolved = config.clone();
    resolved.output_dir = None;
    resolved.command = Some(command);
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command: command.name(),
        config: &resolved,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| CbfError::numerical(format!("report serialization: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Writes `name` under `dir`, creating the directory.
pub fn write(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}
