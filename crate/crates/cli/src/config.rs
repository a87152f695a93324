use crate::CliError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use sweuler::harness::Reference;
use sweuler::model::{ModelSpec, Preset, PresetParams};
use sweuler::TestFunction;

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either a named preset with optional overrides, or a full model spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    /// Explicit ladder; `horizon * 2^-k` for k in `ladder_exponents` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    pub ladder_exponents: [i32; 2],
    pub n_paths: usize,
    pub seed: u64,
    pub reference: Reference,
    /// `cos(x_1)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_function: Option<TestFunction>,
    /// Start points of the one-step check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<Vec<f64>>>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            deltas: None,
            ladder_exponents: [3, 8],
            n_paths: 100_000,
            seed: 1,
            reference: Reference::default(),
            test_function: None,
            probes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Semigroup applied to the test function on a periodic grid.
    #[default]
    Grid,
    /// Closed-form expectation at listed start points.
    Points,
    /// Closed form against a Monte Carlo estimate, with z-scores.
    CrossCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub mode: OracleMode,
    /// Model horizon when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub grid_n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// `cos(x_1)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<TestFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    pub cross_check_paths: usize,
    pub cross_check_steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mode: OracleMode::Grid,
            t: None,
            grid_n: 128,
            half_width: None,
            function: None,
            points: None,
            cross_check_paths: 100_000,
            cross_check_steps: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<ReportFormat>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![ReportFormat::Csv, ReportFormat::Json],
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: ReportFormat) -> bool {
        self.formats.contains(&f)
    }
}

pub fn parse_toml(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner().message()))
    })
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_toml(&text)
}

fn config_err(key: &str) -> impl Fn(sweuler::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("at `{key}`: {e}"))
}

impl ModelConfig {
    pub fn resolve(&self) -> Result<ModelSpec, CliError> {
        let spec = match (&self.preset, &self.spec) {
            (Some(name), None) => {
                let preset = Preset::from_name(name).ok_or_else(|| {
                    let known: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                    CliError::Config(format!(
                        "at `model.preset`: unknown preset `{name}` (known: {})",
                        known.join(", ")
                    ))
                })?;
                let params = PresetParams {
                    alpha: self.alpha,
                    dim: self.dim,
                    beta: self.beta,
                    horizon: self.horizon,
                    x0: self.x0.clone(),
                    levels: self.levels,
                };
                ModelSpec::preset(preset, &params).map_err(config_err("model"))?
            }
            (None, Some(spec)) => {
                if self.alpha.is_some()
                    || self.dim.is_some()
                    || self.beta.is_some()
                    || self.horizon.is_some()
                    || self.x0.is_some()
                    || self.levels.is_some()
                {
                    return Err(CliError::Config(
                        "at `model`: overrides only apply to presets; edit `model.spec` instead".into(),
                    ));
                }
                spec.clone()
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "at `model`: give either `preset` or `spec`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config("at `model`: missing field `preset` or `spec`".into()))
            }
        };
        spec.check().map_err(config_err("model"))?;
        Ok(spec)
    }
}

impl ExperimentConfig {
    /// Same experiment with every default written out and the model given as
    /// a full spec.
    pub fn resolved(&self) -> Result<(ExperimentConfig, ModelSpec), CliError> {
        let spec = self.model.resolve()?;
        let mut out = self.clone();
        out.model = ModelConfig {
            spec: Some(spec.clone()),
            ..Default::default()
        };
        let deltas = match &self.study.deltas {
            Some(d) => d.clone(),
            None => {
                let [lo, hi] = self.study.ladder_exponents;
                if lo > hi {
                    return Err(CliError::Config(
                        "at `study.ladder_exponents`: first exponent exceeds the second".into(),
                    ));
                }
                (lo..=hi).map(|k| spec.horizon * 2f64.powi(-k)).collect()
            }
        };
        out.study.deltas = Some(deltas);
        let mut e1 = vec![0.0; spec.dim];
        e1[0] = 1.0;
        let g = self
            .study
            .test_function
            .clone()
            .unwrap_or_else(|| TestFunction::cosine(&e1));
        g.check(spec.dim).map_err(config_err("study.test_function"))?;
        out.study.test_function = Some(g);
        if out.study.probes.is_none() {
            out.study.probes = Some(sweuler::harness::default_probes(&spec));
        }
        if self.study.n_paths == 0 {
            return Err(CliError::Config("at `study.n_paths`: must be >= 1".into()));
        }
        let f = self.oracle.function.clone().unwrap_or_else(|| TestFunction::cosine(&e1));
        f.check(spec.dim).map_err(config_err("oracle.function"))?;
        out.oracle.function = Some(f);
        out.oracle.t = Some(self.oracle.t.unwrap_or(spec.horizon));
        if out.oracle.points.is_none() {
            out.oracle.points = Some(vec![spec.x0.clone()]);
        }
        Ok((out, spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
            [model]
            preset = "weierstrass-c"
            beta = 0.75

            [study]
            n_paths = 1000
            reference = { kind = "fine-grid", refinement = 16 }
            test_function = { kind = "cosine", freq = [2.0] }
        "#;
        let cfg = parse_toml(text).unwrap();
        let (resolved, _) = cfg.resolved().unwrap();
        for c in [cfg, resolved] {
            let back = parse_toml(&toml::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_toml("[study]\nn_paths = 10\n").unwrap_err().to_string();
        assert!(e.contains("model"), "{e}");
        let e = parse_toml("[model]\npreset = 'brownian-smooth'\n[study]\nn_paths = 'x'\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("study.n_paths"), "{e}");
        let cfg = parse_toml("[model]\npreset = 'nope'\n").unwrap();
        assert!(cfg.resolved().unwrap_err().to_string().contains("model.preset"));
    }
}
