//! Experiment files: one TOML document per run.
//!
//! ```toml
//! name = "heaviside_xnet64"
//! kind = "fit"
//! seed = 0
//!
//! [fit]
//! target = "heaviside"
//! ...
//!
//! [[check]]
//! value = "mse"
//! max = 9e-7
//! ```
//!
//! Exactly one of the `fit`, `pinn`, `ts` and `gradcheck` sections must be
//! present, matching `kind`. Unknown keys anywhere are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xnet_core::fit::FitConfig;
use xnet_core::pinn::PinnConfig;
use xnet_core::targets::{SeriesSpec, Split};
use xnet_core::timeseries::ForecastConfig;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Fit,
    Pinn,
    Ts,
    Gradcheck,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Fit => "fit",
            Kind::Pinn => "pinn",
            Kind::Ts => "ts",
            Kind::Gradcheck => "gradcheck",
        }
    }
}

/// Threshold on a report value. `value` is a metric name understood by
/// `RunReport::lookup`, or `a / b` for the ratio of two such names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub value: String,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub min: Option<f64>,
}

/// The recurrence series; its seed is the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSeries {
    pub coeffs: [f64; 3],
    pub noise: f64,
    pub length: usize,
    pub init_range: (f64, f64),
    pub initial: Option<[f64; 5]>,
}

impl Default for SyntheticSeries {
    fn default() -> Self {
        let s = SeriesSpec::default();
        Self {
            coeffs: s.coeffs,
            noise: s.noise,
            length: s.length,
            init_range: s.init_range,
            initial: s.initial,
        }
    }
}

impl SyntheticSeries {
    pub fn spec(&self, seed: u64) -> SeriesSpec {
        SeriesSpec {
            coeffs: self.coeffs,
            noise: self.noise,
            length: self.length,
            seed,
            init_range: self.init_range,
            initial: self.initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeriesSource {
    Synthetic(SyntheticSeries),
    /// Relative paths are resolved against the config file's directory.
    Csv {
        path: PathBuf,
        column: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsConfig {
    pub series: SeriesSource,
    pub split: Split,
    /// Published rows to attach, e.g. `"series_noise_0"`.
    #[serde(default)]
    pub reference: Option<String>,
    pub models: Vec<ForecastConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Number of random instances per check.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
}

fn default_seeds() -> u64 {
    5
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub pinn: Option<PinnConfig>,
    #[serde(default)]
    pub ts: Option<TsConfig>,
    #[serde(default)]
    pub gradcheck: Option<GradcheckConfig>,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckSpec>,
    /// Directory of the file this was read from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn section_err(section: &str, e: xnet_core::Error) -> CliError {
    CliError::Usage(format!("[{section}] {e}"))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Usage(format!(
                "name: {:?} is not a usable file stem",
                self.name
            )));
        }
        let present: Vec<&str> = [
            ("fit", self.fit.is_some()),
            ("pinn", self.pinn.is_some()),
            ("ts", self.ts.is_some()),
            ("gradcheck", self.gradcheck.is_some()),
        ]
        .iter()
        .filter(|(_, p)| *p)
        .map(|(n, _)| *n)
        .collect();
        let kind = self.kind.as_str();
        let extra: Vec<&&str> = present.iter().filter(|n| **n != kind).collect();
        if !extra.is_empty() {
            return Err(CliError::Usage(format!(
                "kind = \"{kind}\" but config also has sections {extra:?}"
            )));
        }
        match self.kind {
            Kind::Fit => self
                .fit
                .as_ref()
                .ok_or_else(|| missing("fit"))?
                .validate()
                .map_err(|e| section_err("fit", e))?,
            Kind::Pinn => self
                .pinn
                .as_ref()
                .ok_or_else(|| missing("pinn"))?
                .validate()
                .map_err(|e| section_err("pinn", e))?,
            Kind::Ts => {
                let ts = self.ts.as_ref().ok_or_else(|| missing("ts"))?;
                if ts.models.len() < 2 {
                    return Err(CliError::Usage(
                        "[ts] models: a comparison needs at least two entries".into(),
                    ));
                }
                for (i, m) in ts.models.iter().enumerate() {
                    m.validate()
                        .map_err(|e| section_err(&format!("ts.models[{i}]"), e))?;
                }
                if let SeriesSource::Synthetic(s) = &ts.series {
                    xnet_core::targets::generate_series(&SeriesSpec {
                        length: 6,
                        ..s.spec(0)
                    })
                    .map_err(|e| section_err("ts.series", e))?;
                }
            }
            Kind::Gradcheck => {
                if self.gradcheck.as_ref().is_some_and(|g| g.seeds == 0) {
                    return Err(CliError::Usage("[gradcheck] seeds must be positive".into()));
                }
            }
        }
        for (i, c) in self.checks.iter().enumerate() {
            if c.max.is_none() && c.min.is_none() {
                return Err(CliError::Usage(format!(
                    "check[{i}] ({}): needs `max` or `min`",
                    c.value
                )));
            }
        }
        Ok(())
    }

    /// `--seed` wins over the file; having neither is an error.
    pub fn resolve_seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.seed).ok_or_else(|| {
            CliError::Usage("no seed: pass --seed or set `seed` in the config".into())
        })
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn missing(section: &str) -> CliError {
    CliError::Usage(format!("missing [{section}] section"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIT: &str = r#"
name = "t"
kind = "fit"
seed = 3

[fit]
target = "xy"
n_train = 100
n_test = 50
ridge = 1e-12

[fit.model]
kind = "xnet"
units = 20

[[check]]
value = "mse"
max = 1e-3
"#;

    #[test]
    fn parses_fit_config() {
        let c = ExperimentConfig::parse(FIT).unwrap();
        assert_eq!(c.kind, Kind::Fit);
        assert_eq!(c.checks.len(), 1);
        assert_eq!(c.resolve_seed(None).unwrap(), 3);
        assert_eq!(c.resolve_seed(Some(9)).unwrap(), 9);
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let bad = FIT.replace("n_test = 50", "n_test = 50\nn_tset = 1");
        let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("n_tset"), "{err}");
        let bad = FIT.replace("units = 20", "units = 20\nwidth = 2");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn missing_seed_is_an_error() {
        let c = ExperimentConfig::parse(&FIT.replace("seed = 3\n", "")).unwrap();
        assert!(c.resolve_seed(None).is_err());
    }

    #[test]
    fn section_must_match_kind() {
        assert!(
            ExperimentConfig::parse(&FIT.replace("kind = \"fit\"", "kind = \"pinn\"")).is_err()
        );
        let err =
            ExperimentConfig::parse(&FIT.replace("n_train = 100", "n_train = 0")).unwrap_err();
        assert!(err.to_string().contains("[fit]"), "{err}");
    }

    #[test]
    fn parses_ts_config() {
        let text = r#"
name = "s"
kind = "ts"

[ts]
split = { fraction = 0.8 }
series = { source = "synthetic", noise = 0.05 }

[[ts.models]]
label = "LSTM"
window = 5
head = { kind = "affine" }
train = { iterations = 10 }

[[ts.models]]
label = "XLSTM"
window = 5
head = { kind = "xnet", units = 8 }
head_ridge = 1e-10
train = { iterations = 10, refit_every = 5 }
"#;
        let c = ExperimentConfig::parse(text).unwrap();
        let ts = c.ts.unwrap();
        assert_eq!(ts.models.len(), 2);
        assert!(
            matches!(ts.series, SeriesSource::Synthetic(SyntheticSeries { noise, .. }) if noise == 0.05)
        );
        assert!(
            ExperimentConfig::parse(&text.replace("noise = 0.05", "noise = 0.05, seed = 1"))
                .is_err()
        );
    }
}
