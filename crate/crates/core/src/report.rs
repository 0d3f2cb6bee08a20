//! Named-check result sets, serialized as versioned JSON.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check_id: String,
    /// Name of the identity or law being checked.
    pub anchor: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub environment: Environment,
    pub checks: Vec<Check>,
    /// Scalar outputs that are not pass/fail checks.
    pub values: BTreeMap<String, f64>,
    /// Non-numeric outputs such as a solver status.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub info: BTreeMap<String, String>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &str, environment: Environment) -> Self {
        Report {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            environment,
            checks: Vec::new(),
            values: BTreeMap::new(),
            info: BTreeMap::new(),
            pass: true,
        }
    }

    /// Records `max_error <= tolerance`; NaN never passes.
    pub fn check(&mut self, check_id: &str, anchor: &str, max_error: f64, tolerance: f64) -> bool {
        let pass = max_error <= tolerance;
        self.checks.push(Check {
            check_id: check_id.to_string(),
            anchor: anchor.to_string(),
            max_error,
            tolerance,
            pass,
        });
        self.pass &= pass;
        pass
    }

    /// Records a boolean condition as error 0 (holds) or 1 (fails) against tolerance 0.
    pub fn check_true(&mut self, check_id: &str, anchor: &str, holds: bool) -> bool {
        self.check(check_id, anchor, if holds { 0.0 } else { 1.0 }, 0.0)
    }

    pub fn value(&mut self, key: &str, v: f64) {
        self.values.insert(key.to_string(), v);
    }

    pub fn note(&mut self, key: &str, v: impl Into<String>) {
        self.info.insert(key.to_string(), v.into());
    }

    pub fn extend(&mut self, other: Report) {
        self.pass &= other.pass;
        self.checks.extend(other.checks);
        self.values.extend(other.values);
        self.info.extend(other.info);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_pass_is_conjunction() {
        let mut r = Report::new("verify", Environment { seed: 1, n: 8, dim: 2 });
        assert!(r.check("a", "x", 1e-12, 1e-10));
        assert!(r.pass);
        assert!(!r.check("b", "y", f64::NAN, 1.0));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn json_round_trip() {
        let mut r = Report::new("blaschke", Environment::default());
        r.check("t", "stress-energy", 0.0, 1e-10);
        r.value("energy", 2.5);
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.schema, 1);
    }
}
