//! Experiment documents: one JSON object per run.

use locdep::config::FamilySpec;
use locdep::statistics::Statistic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A problem with the document itself; maps to exit status 2.
#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("{path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("{path}: field `{field}`: {message}")]
    Invalid { path: String, field: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    Exact,
    Mc { reps: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentSource {
    Exact,
    Mc { reps: u64 },
}

/// Declared neighborhood `A_i` (0-based) replacing the induced one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub index: usize,
    pub set: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkers {
    /// Run the checker battery on the configured field at each grid size.
    #[serde(default = "yes")]
    pub on_field: bool,
    /// Extra randomized enumerable instances.
    #[serde(default)]
    pub suite_instances: usize,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    pub max_ks: Option<f64>,
    /// Inclusive range for the fitted log-log slope.
    pub slope: Option<[f64; 2]>,
    /// Largest allowed `max/min` of ks over the shape of `ratio_bound`.
    pub max_spread: Option<f64>,
    pub ratio_bound: Option<String>,
    pub max_rejected_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub family: FamilySpec,
    pub grid: Vec<usize>,
    #[serde(default = "w1")]
    pub statistic: Statistic,
    pub mode: Mode,
    #[serde(default = "default_bounds")]
    pub bounds: Vec<String>,
    #[serde(default = "exact_moments")]
    pub moments: MomentSource,
    #[serde(default)]
    pub neighborhoods: Vec<Override>,
    pub checkers: Option<Checkers>,
    #[serde(default)]
    pub assertions: Assertions,
    #[serde(default = "default_threshold")]
    pub rejection_threshold: f64,
    pub seed: Option<u64>,
    pub out: Option<String>,
}

fn w1() -> Statistic {
    Statistic::W1
}

fn default_bounds() -> Vec<String> {
    vec!["main".into()]
}

fn exact_moments() -> MomentSource {
    MomentSource::Exact
}

fn default_threshold() -> f64 {
    0.01
}

pub const BOUND_NAMES: [&str; 12] = [
    "main",
    "self_normalized",
    "general_beta",
    "graph",
    "graph_self_normalized",
    "distributed_u",
    "distributed_u_unnormalized",
    "variance_deviation",
    "constrained_u",
    "constrained_u_self_normalized",
    "decorated",
    "decorated_self_normalized",
];

/// The family kind a bound needs, when `family` does not provide it.
fn bound_requirement(bound: &str, family: &FamilySpec) -> Option<&'static str> {
    let ok = match bound {
        "graph" | "graph_self_normalized" => matches!(family, FamilySpec::Graph { .. }),
        "distributed_u" | "distributed_u_unnormalized" | "variance_deviation" => {
            matches!(family, FamilySpec::Ustat { .. })
        }
        "constrained_u" | "constrained_u_self_normalized" => {
            matches!(family, FamilySpec::ConstrainedUstat { .. } | FamilySpec::Word { .. } | FamilySpec::Pattern { .. })
        }
        "decorated" | "decorated_self_normalized" => matches!(family, FamilySpec::DecoratedGraph { .. }),
        _ => true,
    };
    if ok {
        return None;
    }
    Some(match bound {
        "graph" | "graph_self_normalized" => "graph",
        "distributed_u" | "distributed_u_unnormalized" | "variance_deviation" => "ustat",
        "constrained_u" | "constrained_u_self_normalized" => "constrained_ustat, word or pattern",
        _ => "decorated_graph",
    })
}

impl ExperimentSpec {
    /// Parses and validates; `seed` overrides the document's seed.
    pub fn parse(path: &str, text: &str, seed: Option<u64>) -> Result<Self, SchemaError> {
        let mut spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|source| SchemaError::Parse { path: path.into(), source })?;
        if seed.is_some() {
            spec.seed = seed;
        }
        spec.validate(path)?;
        Ok(spec)
    }

    fn validate(&self, path: &str) -> Result<(), SchemaError> {
        let bad = |field: &str, message: String| {
            Err(SchemaError::Invalid { path: path.into(), field: field.into(), message })
        };
        if self.grid.is_empty() {
            return bad("grid", "must list at least one size".into());
        }
        if self.grid.contains(&0) {
            return bad("grid", "sizes must be positive".into());
        }
        if self.seed.is_none() {
            return bad("seed", "missing (set it in the document or pass --seed)".into());
        }
        if let Mode::Mc { reps } = self.mode {
            if reps < 1000 {
                return bad("mode.reps", format!("{reps} is below the minimum of 1000"));
            }
        }
        if let MomentSource::Mc { reps } = self.moments {
            if reps < 1000 {
                return bad("moments.reps", format!("{reps} is below the minimum of 1000"));
            }
        }
        if let Some(b) = self.bounds.iter().find(|b| !BOUND_NAMES.contains(&b.as_str())) {
            return bad("bounds", format!("unknown bound `{b}`, expected one of {}", BOUND_NAMES.join(", ")));
        }
        for b in &self.bounds {
            if let Some(needs) = bound_requirement(b, &self.family) {
                return bad("bounds", format!("bound `{b}` needs a {needs} family, got `{}`", self.family.name()));
            }
        }
        if let Some(r) = &self.assertions.ratio_bound {
            if !self.bounds.contains(r) {
                return bad("assertions.ratio_bound", format!("`{r}` is not among the configured bounds"));
            }
        }
        if self.assertions.max_spread.is_some() && self.assertions.ratio_bound.is_none() {
            return bad("assertions.max_spread", "needs assertions.ratio_bound".into());
        }
        if !(0.0..=1.0).contains(&self.rejection_threshold) {
            return bad("rejection_threshold", "must lie in [0, 1]".into());
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name", "must be a nonempty plain file name".into());
        }
        for (k, o) in self.neighborhoods.iter().enumerate() {
            if self.grid.iter().any(|&n| o.index >= n) {
                return bad(&format!("neighborhoods[{k}].index"), format!("{} is outside some grid size", o.index));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    /// SHA-256 of the canonical (sorted-key, compact) document with the effective seed.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("spec serializes");
        let bytes = serde_json::to_vec(&value).expect("value serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
