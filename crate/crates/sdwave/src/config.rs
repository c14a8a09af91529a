//! JSON run configuration and its translation into core objects.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use sdwave_core::diagnostics::DiagParams;
use sdwave_core::dynamics::Problem;
use sdwave_core::ensemble::{self, EnsembleSpec, Load};
use sdwave_core::nonlinearity::{NonlinearPair, Polynomial};
use sdwave_core::{Basis, SpectralField, State};

use crate::error::CliError;
use crate::io::config_hash;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub modes: usize,
    pub gamma: f64,
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub initial: InitialConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub diag: DiagConfig,
    #[serde(default)]
    pub attractor: Option<AttractorConfig>,
    #[serde(default)]
    pub fhn: Option<FhnConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dim: usize,
    /// Side lengths; each defaults to pi.
    #[serde(default)]
    pub lengths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NonlinearityConfig {
    Preset(String),
    Coefficients(CoefficientPair),
}

/// Ascending polynomial coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientPair {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForcingConfig {
    /// `"zero"` or `"sine1"`.
    Named(String),
    Coefficients(Vec<f64>),
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig::Named("zero".into())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    #[serde(default)]
    pub ut: Option<Vec<f64>>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub seed: u64,
    pub scales: Vec<f64>,
    #[serde(default = "one")]
    pub per_scale: usize,
    #[serde(default = "three")]
    pub exponent: f64,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(default)]
    pub normalize_e1: bool,
}

fn one() -> usize {
    1
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadConfig {
    #[default]
    Displacement,
    Velocity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagConfig {
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(rename = "L", default = "one_f")]
    pub l: f64,
}

fn default_kappa() -> f64 {
    0.1
}

fn one_f() -> f64 {
    1.0
}

impl Default for DiagConfig {
    fn default() -> Self {
        DiagConfig { kappa: default_kappa(), l: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorConfig {
    #[serde(rename = "T_transient")]
    pub t_transient: f64,
    #[serde(rename = "T_sample")]
    pub t_sample: f64,
    pub stride: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhnConfig {
    pub phi: Vec<f64>,
    pub u0: Vec<f64>,
    #[serde(default)]
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub run_id: Option<String>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: None, formats: all_formats(), run_id: None }
    }
}

/// A validated configuration with everything built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub path: PathBuf,
    pub config: RunConfig,
    pub hash: String,
    pub run_id: String,
    pub problem: Problem,
    pub initial: Vec<State>,
    pub params: DiagParams,
}

impl Setup {
    pub fn load(path: &Path) -> Result<Setup, CliError> {
        let text = std::fs::read(path).map_err(|e| CliError::config(path, "<file>", e.to_string()))?;
        Setup::from_bytes(path, &text)
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Setup, CliError> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            CliError::config(path, if key == "." { "<root>" } else { &key }, e.into_inner().to_string())
        })?;
        let hash = config_hash(bytes);
        build(path, config, hash)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.problem.basis()
    }

    pub fn wants(&self, f: Format) -> bool {
        self.config.output.formats.contains(&f)
    }
}

fn build(path: &Path, config: RunConfig, hash: String) -> Result<Setup, CliError> {
    let err = |key: &str, msg: String| CliError::config(path, key, msg);
    let positive = |key: &str, v: f64| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(err(key, format!("must be positive, got {v}")))
        }
    };

    let dim = config.domain.dim;
    if !(1..=2).contains(&dim) {
        return Err(err("domain.dim", format!("must be 1 or 2, got {dim}")));
    }
    let lengths = config.domain.lengths.clone().unwrap_or_else(|| vec![PI; dim]);
    if lengths.len() != dim {
        return Err(err("domain.lengths", format!("expected {dim} lengths, got {}", lengths.len())));
    }
    if config.modes == 0 {
        return Err(err("modes", "must be at least 1".into()));
    }
    let basis = Basis::new(&lengths, config.modes).map_err(|e| err("domain.lengths", e.to_string()))?;
    positive("gamma", config.gamma)?;
    positive("time.T", config.time.t_end)?;
    positive("time.dt", config.time.dt)?;
    if config.time.record_every == 0 {
        return Err(err("time.record_every", "must be at least 1".into()));
    }
    positive("diag.kappa", config.diag.kappa)?;
    positive("diag.L", config.diag.l)?;
    if let Some(a) = &config.attractor {
        if !(a.t_transient.is_finite() && a.t_transient >= 0.0) {
            return Err(err("attractor.T_transient", "must be non-negative".into()));
        }
        positive("attractor.T_sample", a.t_sample)?;
        if a.stride == 0 {
            return Err(err("attractor.stride", "must be at least 1".into()));
        }
    }

    let pair = match &config.nonlinearity {
        NonlinearityConfig::Preset(name) => NonlinearPair::preset(name)
            .ok_or_else(|| err("nonlinearity", format!("unknown preset `{name}` (van_der_pol, fhn_cubic)")))?,
        NonlinearityConfig::Coefficients(c) => {
            finite(path, "nonlinearity.f", &c.f)?;
            finite(path, "nonlinearity.g", &c.g)?;
            NonlinearPair::new(&c.f, &c.g).map_err(|v| CliError::hypothesis(path, "nonlinearity", v))?
        }
    };

    let forcing = match &config.forcing {
        ForcingConfig::Named(n) if n == "zero" => SpectralField::zeros(&basis),
        ForcingConfig::Named(n) if n == "sine1" => SpectralField::mode(&basis, &vec![1; dim]),
        ForcingConfig::Named(n) => return Err(err("forcing", format!("unknown forcing `{n}` (zero, sine1)"))),
        ForcingConfig::Coefficients(c) => field(path, "forcing", &basis, c)?,
    };
    let problem = Problem::new(pair, config.gamma, forcing).map_err(|e| err("forcing", e.to_string()))?;

    let initial = initial_states(path, &basis, &config.initial)?;

    if let Some(f) = &config.fhn {
        finite(path, "fhn.phi", &f.phi)?;
        field(path, "fhn.u0", &basis, &f.u0)?;
        field(path, "fhn.v0", &basis, &f.v0)?;
    }

    let run_id = match &config.output.run_id {
        Some(id) if !id.is_empty() && !id.contains(['/', '\\']) => id.clone(),
        Some(_) => return Err(err("output.run_id", "must be a non-empty file name".into())),
        None => path.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string(),
    };
    if config.output.formats.is_empty() {
        return Err(err("output.formats", "at least one format required".into()));
    }

    Ok(Setup {
        path: path.to_path_buf(),
        params: DiagParams { kappa: config.diag.kappa, l: config.diag.l },
        config,
        hash,
        run_id,
        problem,
        initial,
    })
}

fn finite(path: &Path, key: &str, c: &[f64]) -> Result<(), CliError> {
    if c.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CliError::config(path, key, "coefficients must be finite".into()))
    }
}

/// Coefficient list padded with zeros to the basis size.
pub fn field(path: &Path, key: &str, basis: &Arc<Basis>, c: &[f64]) -> Result<SpectralField, CliError> {
    finite(path, key, c)?;
    if c.len() > basis.len() {
        return Err(CliError::config(path, key, format!("{} coefficients for a basis of size {}", c.len(), basis.len())));
    }
    let mut coeffs = c.to_vec();
    coeffs.resize(basis.len(), 0.0);
    SpectralField::from_coeffs(basis, coeffs).map_err(|e| CliError::config(path, key, e.to_string()))
}

fn initial_states(path: &Path, basis: &Arc<Basis>, init: &InitialConfig) -> Result<Vec<State>, CliError> {
    let explicit = init.u.is_some() || init.ut.is_some();
    match (&init.ensemble, explicit) {
        (Some(_), true) => {
            Err(CliError::config(path, "initial", "give either coefficient lists or an ensemble, not both".into()))
        }
        (None, false) => Err(CliError::config(path, "initial", "no initial data (u/ut or ensemble)".into())),
        (None, true) => {
            let u = field(path, "initial.u", basis, init.u.as_deref().unwrap_or(&[]))?;
            let ut = field(path, "initial.ut", basis, init.ut.as_deref().unwrap_or(&[]))?;
            Ok(vec![State { u, ut }])
        }
        (Some(e), false) => {
            if e.scales.is_empty() || e.per_scale == 0 {
                return Err(CliError::config(path, "initial.ensemble", "ensemble has no members".into()));
            }
            let spec = EnsembleSpec {
                seed: e.seed,
                exponent: e.exponent,
                scales: e.scales.clone(),
                per_scale: e.per_scale,
                load: match e.load {
                    LoadConfig::Displacement => Load::Displacement,
                    LoadConfig::Velocity => Load::Velocity,
                },
                normalize_e1: e.normalize_e1,
            };
            ensemble::generate(basis, &spec).map_err(|err| CliError::config(path, "initial.ensemble", err.to_string()))
        }
    }
}

/// FHN data from the `fhn` section.
pub fn fhn_data(setup: &Setup) -> Result<(Polynomial, sdwave_core::fhn::FhnState), CliError> {
    let path = &setup.path;
    let f = setup.config.fhn.as_ref().ok_or_else(|| CliError::config(path, "fhn", "section required".into()))?;
    let b = setup.basis();
    let state = sdwave_core::fhn::FhnState {
        u: field(path, "fhn.u0", b, &f.u0)?,
        v: field(path, "fhn.v0", b, &f.v0)?,
    };
    Ok((Polynomial::new(&f.phi), state))
}
