//! Run configuration and tolerance profiles.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use svcheck::boundary::BoundaryData;

use crate::error::CliError;

pub const PROFILE_ENV: &str = "SVCHECK_TOLERANCE_PROFILE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Verify,
    Sweep,
    Trace,
    Boundary,
    Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsGrid {
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSampling {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_count() -> usize {
    20
}

impl Default for PointSampling {
    fn default() -> Self {
        Self {
            count: default_count(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    /// Boundary value of the lapse; defaults to the horizon when the entry
    /// has one, else the lapse at the inner end of the window.
    #[serde(default)]
    pub f0: Option<f64>,
    /// Number of equally spaced levels.
    #[serde(default)]
    pub levels: Option<usize>,
    /// Last level; defaults to the outer end of the window, kept 1e-3 away
    /// from 1.
    #[serde(default)]
    pub f_end: Option<f64>,
}

/// A single object or an array of them; the shape is chosen before
/// deserializing so field errors are reported as is.
#[derive(Debug, Clone)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<'de, T: serde::de::DeserializeOwned> Deserialize<'de> for OneOrMany<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = serde_json::Value::deserialize(de)?;
        if v.is_array() {
            serde_json::from_value(v).map(OneOrMany::Many).map_err(D::Error::custom)
        } else {
            serde_json::from_value(v).map(OneOrMany::One).map_err(D::Error::custom)
        }
    }
}

impl<T> Default for OneOrMany<T> {
    fn default() -> Self {
        OneOrMany::Many(Vec::new())
    }
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<CommandName>,
    #[serde(default)]
    pub entry_keys: Vec<String>,
    #[serde(default)]
    pub params_grid: ParamsGrid,
    #[serde(default)]
    pub point_sampling: PointSampling,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub boundary: OneOrMany<BoundaryData>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Tolerances used by the commands; every field can be overridden by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Vacuum residuals relative to `1 + max|∇²f|`.
    pub vacuum: f64,
    /// `|T|²` on entries expected to be T-flat.
    pub t_zero: f64,
    /// Closed-form against direct `|T|²`, relative.
    pub t_closed_form: f64,
    /// The `f²|T|²` identity and `f·C = W(∇f) + T`, relative.
    pub identity: f64,
    /// Normalized divergence-identity residual.
    pub robinson: f64,
    /// Allowed negative part of `div Z` where it must be nonnegative.
    pub sign: f64,
    /// Allowed negative Kato slack relative to `|∇²f|²`.
    pub kato: f64,
    /// `S + c·T` and the conformal Killing residual, max-abs.
    pub nozawa: f64,
    /// Contracted Bianchi and Bochner cross-checks.
    pub bianchi: f64,
    /// Monotonicity and constancy of traces, relative to the trace scale.
    pub monotone: f64,
    /// Relation between `H_p^{c,d}` and `(U_p, U_p′)`.
    pub relation: f64,
    /// Equality flags on boundary data.
    pub equality: f64,
}

impl Tolerances {
    pub fn default_profile() -> Self {
        Self {
            vacuum: 1e-9,
            t_zero: 1e-16,
            t_closed_form: 1e-9,
            identity: 1e-8,
            robinson: 1e-7,
            sign: 1e-10,
            kato: 1e-12,
            nozawa: 1e-8,
            bianchi: 1e-8,
            monotone: 1e-8,
            relation: 1e-7,
            equality: 1e-9,
        }
    }

    pub fn profile(name: &str) -> Result<Self, CliError> {
        let d = Self::default_profile();
        match name {
            "default" => Ok(d),
            "strict" => Ok(d.scaled(0.1)),
            "loose" => Ok(d.scaled(100.0)),
            other => Err(CliError::Config(format!(
                "unknown tolerance profile `{other}` (expected strict, default or loose)"
            ))),
        }
    }

    fn scaled(mut self, k: f64) -> Self {
        for (_, v) in self.fields_mut() {
            *v *= k;
        }
        self
    }

    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 12] {
        [
            ("vacuum", &mut self.vacuum),
            ("t_zero", &mut self.t_zero),
            ("t_closed_form", &mut self.t_closed_form),
            ("identity", &mut self.identity),
            ("robinson", &mut self.robinson),
            ("sign", &mut self.sign),
            ("kato", &mut self.kato),
            ("nozawa", &mut self.nozawa),
            ("bianchi", &mut self.bianchi),
            ("monotone", &mut self.monotone),
            ("relation", &mut self.relation),
            ("equality", &mut self.equality),
        ]
    }

    /// Profile from the environment, then per-name overrides.
    pub fn resolve(overrides: &BTreeMap<String, f64>) -> Result<Self, CliError> {
        let name = std::env::var(PROFILE_ENV).unwrap_or_else(|_| "default".into());
        let mut t = Self::profile(name.trim())?;
        for (key, value) in overrides {
            if !(value.is_finite() && *value >= 0.0) {
                return Err(CliError::Config(format!("tolerance `{key}` must be a nonnegative number")));
            }
            let mut fields = t.fields_mut();
            let slot = fields
                .iter_mut()
                .find(|(name, _)| name == key)
                .ok_or_else(|| CliError::Config(format!("unknown tolerance `{key}`")))?;
            *slot.1 = *value;
        }
        Ok(t)
    }
}
