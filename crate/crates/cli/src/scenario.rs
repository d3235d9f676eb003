//! Scenario files: JSON with `"schema": 1`, chart coordinates throughout.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use elastica_core::continuation::DEFAULT_SCHEDULE;
use elastica_core::curve::DEFAULT_SEGMENTS;
use elastica_core::functionals::PenaltyWindow;
use elastica_core::optimizer::{BoundaryConditions, SolverConfig};
use elastica_core::verifier::VerifyOptions;
use elastica_core::ManifoldModel;

pub const SCHEMA_VERSION: u32 = 1;

/// Boundary data as written in a scenario file. Tangents are directions;
/// they are rescaled to unit Riemannian length at their base points.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub x1: Vec<f64>,
    pub v1: Vec<f64>,
    pub x2: Vec<f64>,
    pub v2: Vec<f64>,
    #[serde(rename = "L")]
    pub length: f64,
}

fn default_dimension() -> usize {
    2
}

fn default_n() -> usize {
    DEFAULT_SEGMENTS
}

fn default_schedule() -> Vec<f64> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_seed() -> u64 {
    1
}

fn default_el1() -> f64 {
    5e-2
}

fn default_el2() -> f64 {
    1e-2
}

/// Residual thresholds for a pass verdict.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_el1")]
    pub el1: f64,
    #[serde(default = "default_el2")]
    pub el2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            el1: default_el1(),
            el2: default_el2(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub model: String,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    pub bc: BoundarySpec,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default = "default_schedule")]
    pub p_schedule: Vec<f64>,
    /// Penalty weight; when a reference is given and this is absent the
    /// heuristic `10 K² L` is used.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub reference_path: Option<PathBuf>,
    #[serde(default)]
    pub window: Option<PenaltyWindow>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub verify: Option<VerifyOptions>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// A scenario whose model and boundary data passed validation.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub model: ManifoldModel,
    pub bc: BoundaryConditions,
    pub solver: SolverConfig,
    pub verify: VerifyOptions,
    /// Directory of the scenario file; relative paths resolve against it.
    pub base_dir: PathBuf,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text).context("malformed scenario JSON")?;
        if scenario.schema != SCHEMA_VERSION {
            bail!(
                "unsupported scenario schema {} (expected {SCHEMA_VERSION})",
                scenario.schema
            );
        }
        Ok(scenario)
    }

    /// Validates the model and every boundary constraint.
    pub fn load(self, base_dir: &Path) -> Result<LoadedScenario> {
        let model = ManifoldModel::from_id(&self.model, self.dimension)
            .with_context(|| format!("scenario {:?}: bad model", self.name))?;
        let b = &self.bc;
        let bc = BoundaryConditions::from_directions(
            &model,
            b.x1.clone(),
            b.v1.clone(),
            b.x2.clone(),
            b.v2.clone(),
            b.length,
        )
        .with_context(|| format!("scenario {:?}: invalid boundary conditions", self.name))?;
        let mut solver = self.solver.unwrap_or_default();
        solver.seed = self.seed;
        solver
            .validate()
            .with_context(|| format!("scenario {:?}: invalid solver settings", self.name))?;
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                bail!("scenario {:?}: sigma must be a non-negative number", self.name);
            }
        }
        if self.sigma.is_some_and(|s| s > 0.0) && self.reference_path.is_none() {
            bail!("scenario {:?}: sigma > 0 requires reference_path", self.name);
        }
        Ok(LoadedScenario {
            verify: self.verify.unwrap_or_default(),
            scenario: self,
            model,
            bc,
            solver,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn read(path: &Path) -> Result<LoadedScenario> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text)
            .with_context(|| format!("in {}", path.display()))?
            .load(base)
    }
}

impl LoadedScenario {
    pub fn name(&self) -> &str {
        &self.scenario.name
    }

    /// Output directory: `<root>/<name>` when a root is given, otherwise the
    /// scenario's own `output_dir`, otherwise `out/<name>`.
    pub fn output_dir(&self, root: Option<&Path>) -> PathBuf {
        match (root, &self.scenario.output_dir) {
            (Some(r), _) => r.join(self.name()),
            (None, Some(d)) => d.clone(),
            (None, None) => Path::new("out").join(self.name()),
        }
    }

    pub fn reference_path(&self) -> Option<PathBuf> {
        self.scenario
            .reference_path
            .as_ref()
            .map(|p| if p.is_absolute() { p.clone() } else { self.base_dir.join(p) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUARTER: &str = r#"{
        "schema": 1, "name": "q", "model": "euclidean", "dimension": 2,
        "bc": {"x1": [0, 0], "v1": [0, 2], "x2": [1, 1], "v2": [1, 0], "L": 1.5707963267948966}
    }"#;

    #[test]
    fn defaults_fill_optional_fields() {
        let s = Scenario::from_json(QUARTER).unwrap();
        assert_eq!(s.n, 400);
        assert_eq!(s.p_schedule, DEFAULT_SCHEDULE.to_vec());
        assert_eq!(s.seed, 1);
        let loaded = s.load(Path::new(".")).unwrap();
        // directions are normalised
        assert_eq!(loaded.bc.v1(), &[0.0, 1.0]);
    }

    #[test]
    fn short_length_names_the_constraint() {
        let text = QUARTER.replace("1.5707963267948966", "1.0");
        let err = Scenario::from_json(&text).unwrap().load(Path::new(".")).unwrap_err();
        assert!(format!("{err:#}").contains("L >= d(x1, x2)"), "{err:#}");
    }

    #[test]
    fn wrong_schema_and_unknown_fields_are_rejected() {
        let text = QUARTER.replace("\"schema\": 1", "\"schema\": 2");
        assert!(Scenario::from_json(&text).is_err());
        let text = QUARTER.replace("\"schema\": 1", "\"schema\": 1, \"colour\": 3");
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn penalty_without_reference_is_rejected() {
        let text = QUARTER.replace("\"schema\": 1", "\"schema\": 1, \"sigma\": 2.0");
        let err = Scenario::from_json(&text).unwrap().load(Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("reference_path"));
    }

    #[test]
    fn output_dir_resolution() {
        let loaded = Scenario::from_json(QUARTER).unwrap().load(Path::new(".")).unwrap();
        assert_eq!(loaded.output_dir(None), Path::new("out/q"));
        assert_eq!(loaded.output_dir(Some(Path::new("/tmp/r"))), Path::new("/tmp/r/q"));
    }
}
