//! `report.json` and the auxiliary JSON documents.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }

    /// Passes when `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: value >= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub wall_time_s: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub l1_error: f64,
    pub tv_eulerian: f64,
    pub mass_defect: f64,
}

/// Shared by the variational and systems pipelines; for systems
/// `residual_conserved` holds the Euler–Lagrange residual.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremalityDocument {
    pub case: String,
    pub epsilon: f64,
    pub extremal_derivative: Vec<f64>,
    pub control_derivative: Vec<f64>,
    pub ratio: f64,
    pub residual_conserved: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_directions() {
        assert!(Check::at_most("a", 1.0, 1.0).pass);
        assert!(!Check::at_most("a", f64::NAN, 1.0).pass);
        assert!(Check::at_least("a", 10.0, 10.0).pass);
        assert!(!Check::at_least("a", 9.9, 10.0).pass);
    }

    #[test]
    fn report_layout() {
        let r = Report {
            scenario: "s".into(),
            checks: vec![Check::at_most("m", 0.5, 1.0)],
            wall_time_s: 0.0,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"scenario":"s","checks":[{"name":"m","value":0.5,"bound":1.0,"pass":true}],"wall_time_s":0.0}"#
        );
    }
}
