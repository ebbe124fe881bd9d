//! TOML run configuration: problem, grid, solver knobs and output location.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{default_grading, default_r_max, make_grid, RadialGrid};
use crate::greens::{Dimension, InteractionStrength};
use crate::nonlinearity::{check_assumptions, NonlinearitySpec, Term};
use crate::solver::{target_lambda, SolverConfig};

/// The nonlinearity, either as one of the built-in families or as explicit terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Power {
        omega: f64,
        p: f64,
        #[serde(default)]
        omega1: Option<f64>,
    },
    DoublePower {
        omega: f64,
        mu: f64,
        p1: f64,
        sign: f64,
        p2: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        omega1: Option<f64>,
    },
    LogPower {
        omega: f64,
        p: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        omega1: Option<f64>,
    },
    Saturating {
        omega: f64,
        p: f64,
        q: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        omega1: Option<f64>,
    },
    Terms {
        omega: f64,
        terms: Vec<Term>,
        p_growth: f64,
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        omega1: Option<f64>,
    },
}

impl NonlinearityConfig {
    pub fn to_spec(&self) -> Result<NonlinearitySpec> {
        use NonlinearityConfig::*;
        let (spec, beta, omega1) = match self {
            Power { omega, p, omega1 } => (NonlinearitySpec::power(*omega, *p)?, None, omega1),
            DoublePower { omega, mu, p1, sign, p2, beta, omega1 } => {
                (NonlinearitySpec::double_power(*omega, *mu, *p1, *sign, *p2)?, *beta, omega1)
            }
            LogPower { omega, p, beta, omega1 } => (NonlinearitySpec::log_power(*omega, *p)?, *beta, omega1),
            Saturating { omega, p, q, beta, omega1 } => (NonlinearitySpec::saturating(*omega, *p, *q)?, *beta, omega1),
            Terms { omega, terms, p_growth, beta, omega1 } => {
                (NonlinearitySpec::new(*omega, terms.clone(), *p_growth)?, *beta, omega1)
            }
        };
        let mut spec = match beta {
            Some(b) => spec.with_beta(b),
            None => spec,
        };
        if let Some(w) = omega1 {
            spec = spec.with_omega1(*w);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub m: usize,
    /// Defaults to `20/√λ`.
    pub r_max: Option<f64>,
    /// Defaults to `max(2, 1/(3-p))`.
    pub grading: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { m: 512, r_max: None, grading: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: Dimension,
    pub alpha: f64,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A validated configuration with its derived objects.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: RunConfig,
    pub spec: NonlinearitySpec,
    pub strength: InteractionStrength,
    pub grid: Arc<RadialGrid>,
    /// Hypotheses that fail for both existence results, if any.
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let before = &text[..span.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    format!("line {line}, column {col}")
                }
                None => "unknown location".into(),
            };
            Error::Parse { location, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn problem(&self) -> Result<Problem> {
        let spec = self.nonlinearity.to_spec()?;
        if self.dim == Dimension::Three && spec.p_growth >= 3.0 {
            return Err(Error::Config(format!(
                "N = 3 requires growth exponent p < 3 (energy-subcritical range of the point interaction), got p = {}",
                spec.p_growth
            )));
        }
        self.solver.validate()?;
        let strength = InteractionStrength::new(self.alpha, self.dim);
        let lambda = target_lambda(&spec, &strength, &self.solver);
        let r_max = self.grid.r_max.unwrap_or_else(|| default_r_max(lambda));
        let grading = self.grid.grading.unwrap_or_else(|| default_grading(Some(spec.p_growth)));
        let grid = Arc::new(make_grid(self.dim, r_max, self.grid.m, grading)?);
        let report = check_assumptions(&spec, &strength);
        let warnings = if report.any_existence_result_applies() {
            Vec::new()
        } else {
            let failed: Vec<String> = report.entries.iter().filter(|e| !e.passed).map(|e| format!("{}: {}", e.name, e.detail)).collect();
            vec![format!(
                "neither existence result covers this configuration; failed checks: {}",
                if failed.is_empty() { "none (regime mismatch)".to_string() } else { failed.join("; ") }
            )]
        };
        Ok(Problem { config: self.clone(), spec, strength, grid, warnings })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
dim = 3
alpha = 1.0

[nonlinearity]
family = "power"
omega = 1.0
p = 2.5

[grid]
M = 128
"#;

    #[test]
    fn parses_power_config_with_defaults() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(cfg.dim, Dimension::Three);
        assert_eq!(cfg.solver, SolverConfig::default());
        let pb = cfg.problem().unwrap();
        assert_eq!(pb.spec, NonlinearitySpec::power(1.0, 2.5).unwrap());
        assert_eq!(pb.grid.nodes().len(), 129);
        assert_eq!(pb.grid.r_max(), 20.0);
        assert!(pb.warnings.is_empty());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unsupported_dimension() {
        let err = RunConfig::from_toml(&BASE.replace("dim = 3", "dim = 4")).unwrap_err().to_string();
        assert!(err.contains("{2, 3}"), "{err}");
    }

    #[test]
    fn rejects_supercritical_3d_exponent() {
        let err = RunConfig::from_toml(&BASE.replace("p = 2.5", "p = 3.0")).unwrap().problem().unwrap_err();
        assert!(err.to_string().contains("p < 3"), "{err}");
        assert!(RunConfig::from_toml(&BASE.replace("dim = 3", "dim = 2").replace("p = 2.5", "p = 4.0"))
            .unwrap()
            .problem()
            .is_ok());
    }

    #[test]
    fn unknown_keys_are_errors_with_location() {
        for text in [
            BASE.replace("alpha = 1.0", "alpha = 1.0\nalhpa = 2.0"),
            BASE.replace("M = 128", "M = 128\ngradng = 3.0"),
            BASE.replace("p = 2.5", "p = 2.5\nbeta = 3.0"),
            format!("{BASE}\n[solver]\ngrad_tool = 1e-9\n"),
        ] {
            match RunConfig::from_toml(&text) {
                Err(Error::Parse { location, .. }) => assert!(location.starts_with("line"), "{location}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn families_and_explicit_terms() {
        let text = BASE.replace(
            "family = \"power\"\nomega = 1.0\np = 2.5",
            "family = \"terms\"\nomega = 1.0\np_growth = 2.5\nbeta = 2.5\nterms = [{ kind = \"power\", coeff = 1.0, exponent = 2.5 }]",
        );
        let spec = RunConfig::from_toml(&text).unwrap().problem().unwrap().spec;
        assert_eq!(spec, NonlinearitySpec::power(1.0, 2.5).unwrap());
        let text = BASE.replace("family = \"power\"\nomega = 1.0\np = 2.5", "family = \"saturating\"\nomega = 1.0\np = 2.8\nq = 2.4");
        let spec = RunConfig::from_toml(&text).unwrap().problem().unwrap().spec;
        assert_eq!(spec, NonlinearitySpec::saturating(1.0, 2.8, 2.4).unwrap());
    }

    #[test]
    fn warns_when_no_existence_result_applies() {
        // ω below the planar threshold violates the linearization hypothesis.
        let text = BASE.replace("dim = 3", "dim = 2").replace("alpha = 1.0", "alpha = 0.0").replace("p = 2.5", "p = 4.0");
        let pb = RunConfig::from_toml(&text).unwrap().problem().unwrap();
        assert_eq!(pb.warnings.len(), 1);
        assert!(pb.warnings[0].contains("g2"), "{:?}", pb.warnings);
    }
}
