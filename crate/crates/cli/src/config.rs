use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_p() -> f64 {
    0.95
}

/// One JSON document drives a run. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    /// Observations CSV with a header row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Text column excluded from the numeric data; used by key splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Edge list for `fit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    /// Variogram CSV (`NA` for unknown entries) for `fit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<PathBuf>,
    /// `variogram` (default) or `chi`, for EMST.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    /// Shift constant for the parameter-shift method; defaults to 1/d.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<Vec<ModelRef>>,
    /// Model JSON for `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// The config as written plus overrides, before path resolution.
    #[serde(skip)]
    pub echo: serde_json::Value,
}

/// Train/test split. Row ranges are 0-based and half-open; key ranges are
/// inclusive and compare as strings, so ISO dates order correctly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "snake_case", deny_unknown_fields)]
pub enum Split {
    Rows { train: [usize; 2], test: [usize; 2] },
    Key { train: [String; 2], test: [String; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Test,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRef {
    pub name: String,
    pub gamma: PathBuf,
    pub graph: PathBuf,
}

#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub method: Option<String>,
    pub grid: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        if let Some(p) = overrides.p {
            cfg.p = p;
        }
        if overrides.seed.is_some() {
            cfg.seed = overrides.seed;
        }
        if overrides.method.is_some() {
            cfg.method.clone_from(&overrides.method);
        }
        if overrides.grid.is_some() {
            cfg.grid.clone_from(&overrides.grid);
        }
        cfg.validate()?;
        cfg.echo = serde_json::to_value(&cfg).expect("config serializes");
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [&mut self.data, &mut self.graph, &mut self.gamma, &mut self.model].into_iter().flatten() {
            fix(p);
        }
        for m in self.models.iter_mut().flatten() {
            fix(&mut m.gamma);
            fix(&mut m.graph);
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(CliError::config(format!("p = {} is not in (0, 1)", self.p)));
        }
        if let Some(grid) = &self.grid {
            if grid.is_empty() {
                return Err(CliError::config("penalty grid is empty"));
            }
            if grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(CliError::config("penalties must be finite and nonnegative"));
            }
        }
        if let Some(Split::Rows { train, test }) = &self.split {
            if train[0] >= train[1] || test[0] >= test[1] {
                return Err(CliError::config("row ranges must be nonempty [start, end)"));
            }
        }
        if matches!(self.split, Some(Split::Key { .. })) && self.key_column.is_none() {
            return Err(CliError::config("a key split needs key_column"));
        }
        Ok(())
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| CliError::config(format!("missing `{name}` in config")))
    }
}

/// Penalty list given on the command line.
#[derive(Debug, Clone)]
pub struct Grid(pub Vec<f64>);

pub fn parse_grid(text: &str) -> Result<Grid, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad grid value {s:?}")))
        .collect::<Result<_, _>>()
        .map(Grid)
}
