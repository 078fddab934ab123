use std::path::{Path, PathBuf};

use num_complex::Complex64;
use ptbloch::dubrovin::Sheet;
use ptbloch::newton::Window;
use ptbloch::PotentialSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A complex number written either as a plain real number or as `[re, im]`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum ComplexInput {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexInput {
    pub fn value(self) -> Complex64 {
        match self {
            Self::Real(re) => Complex64::new(re, 0.0),
            Self::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

impl PartialEq for ComplexInput {
    fn eq(&self, other: &Self) -> bool {
        self.value() == other.value()
    }
}

impl Serialize for ComplexInput {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let z = self.value();
        [z.re, z.im].serialize(serializer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub integrator: f64,
    pub newton: f64,
    pub trace: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            integrator: 1e-10,
            newton: 1e-11,
            trace: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    pub re_points: usize,
    pub im_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            re_points: 401,
            im_points: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocusConfig {
    pub start: ComplexInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorSeed {
    pub gamma: ComplexInput,
    pub sheet: Sheet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DubrovinConfig {
    pub branch_points: Vec<ComplexInput>,
    pub divisor: Vec<DivisorSeed>,
    pub span: [f64; 2],
    #[serde(default = "default_flow_samples")]
    pub samples: usize,
    #[serde(default = "default_branch_tol")]
    pub branch_tol: f64,
}

fn default_flow_samples() -> usize {
    400
}

fn default_branch_tol() -> f64 {
    ptbloch::dubrovin::DEFAULT_BRANCH_TOL
}

fn default_scales() -> Vec<f64> {
    vec![1.0, 0.5, 0.25]
}

fn default_steps() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "PotentialSpec::zero")]
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub resonances: Vec<u32>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_steps")]
    pub divisor_steps: usize,
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locus: Option<LocusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dubrovin: Option<DubrovinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Config(e.into_inner().to_string())
            } else {
                CliError::Config(format!("`{path}`: {}", e.into_inner()))
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let t = &self.tolerances;
        for (name, v) in [("integrator", t.integrator), ("newton", t.newton), ("trace", t.trace)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerances.{name} must be positive, got {v}"));
            }
        }
        if let Some(w) = &self.window {
            w.validate().or_else(|e| bad(format!("window: {e}")))?;
        }
        if self.grid.re_points == 0 || self.grid.im_points == 0 {
            return bad("grid sizes must be at least 1".into());
        }
        if let Some(n) = self.resonances.iter().find(|&&n| n == 0) {
            return bad(format!("resonance indices start at 1, got {n}"));
        }
        if self.divisor_steps < 8 {
            return bad(format!("divisor_steps must be at least 8, got {}", self.divisor_steps));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("scales must be positive, got {s}"));
        }
        if let Some(d) = &self.dubrovin {
            if d.branch_tol.is_nan() || d.branch_tol <= 0.0 {
                return bad(format!("dubrovin.branch_tol must be positive, got {}", d.branch_tol));
            }
            if d.span.iter().any(|x| !x.is_finite()) {
                return bad("dubrovin.span must be finite".into());
            }
            if d.samples == 0 {
                return bad("dubrovin.samples must be at least 1".into());
            }
        }
        Ok(())
    }

    pub fn newton(&self) -> ptbloch::newton::NewtonOptions {
        ptbloch::newton::NewtonOptions {
            residual_tol: self.tolerances.newton,
            ..Default::default()
        }
    }

    /// Scan window: the configured one, or a rectangle around the listed
    /// resonances.
    pub fn scan_window(&self) -> Window {
        self.window.unwrap_or_else(|| {
            let n_max = self.resonances.iter().copied().max().unwrap_or(2);
            ptbloch::spectrum::default_window(n_max)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse("{}").unwrap();
        assert!(c.potential.is_zero());
        assert_eq!(c.grid.re_points, 401);
        assert_eq!(c.scales, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::parse(r#"{"tolerances": {"integrator": 1e-9, "bogus": 1}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tolerances") && msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            r#"{"tolerances": {"integrator": -1}}"#,
            r#"{"resonances": [0]}"#,
            r#"{"window": {"re_min": 1, "re_max": 0, "im_min": 0, "im_max": 0}}"#,
            r#"{"scales": [0.0]}"#,
            r#"{"potential": {"coefficients": {"0": 1.0}}}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn complex_inputs() {
        let c = ExperimentConfig::parse(r#"{"locus": {"start": [0.25, 0.05]}}"#).unwrap();
        assert_eq!(c.locus.unwrap().start.value(), Complex64::new(0.25, 0.05));
        let c = ExperimentConfig::parse(r#"{"locus": {"start": 0.1}}"#).unwrap();
        assert_eq!(c.locus.unwrap().start.value(), Complex64::new(0.1, 0.0));
    }

    #[test]
    fn serialized_config_parses_back() {
        let text = r#"{"potential": {"coefficients": {"1": 0.2, "-1": -0.05}}, "resonances": [1, 2],
            "dubrovin": {"branch_points": [0, 1, 2], "divisor": [{"gamma": 1.5, "sheet": "plus"}], "span": [0, 3]}}"#;
        let c = ExperimentConfig::parse(text).unwrap();
        let again = ExperimentConfig::parse(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
