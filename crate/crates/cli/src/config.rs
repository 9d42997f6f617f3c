//! Run configurations: JSON documents naming a command, an optional spectral
//! measure, command parameters, a seed and an output target.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pam_core::asymptotics::GrowthRegime;
use pam_core::fk::InitialData;
use pam_core::spectral::{PowerBand, SpectralMeasure};
use pam_core::variational::reduce::MAX_REDUCED_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    SolveEn,
    SolveEh,
    McMoment,
    ChaosMoment,
    GrowthIndex,
    PhaseDiagram,
    LdevCheck,
    Diagnostics,
}

impl CommandName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SolveEn => "solve-en",
            Self::SolveEh => "solve-eh",
            Self::McMoment => "mc-moment",
            Self::ChaosMoment => "chaos-moment",
            Self::GrowthIndex => "growth-index",
            Self::PhaseDiagram => "phase-diagram",
            Self::LdevCheck => "ldev-check",
            Self::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

/// Catalog spectral measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    WhiteNoise,
    Riesz {
        eta: f64,
        dim: usize,
    },
    Fractional {
        hurst: f64,
    },
    PowerBand {
        dim: usize,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        exponent: f64,
        #[serde(default)]
        lower: f64,
        /// Absent for an unbounded band.
        #[serde(default)]
        upper: Option<f64>,
        /// Declares that the inverse transform is a nonnegative function.
        #[serde(default)]
        nonnegative_covariance: bool,
    },
}

fn one() -> f64 {
    1.0
}

impl MeasureSpec {
    pub fn build(&self) -> pam_core::Result<SpectralMeasure> {
        match *self {
            Self::WhiteNoise => Ok(SpectralMeasure::white_noise()),
            Self::Riesz { eta, dim } => SpectralMeasure::riesz(eta, dim),
            Self::Fractional { hurst } => SpectralMeasure::fractional(hurst),
            Self::PowerBand { dim, coefficient, exponent, lower, upper, nonnegative_covariance } => {
                let band = PowerBand { coefficient, exponent, lower, upper: upper.unwrap_or(f64::INFINITY) };
                Ok(SpectralMeasure::power_band(dim, band)?
                    .with_nonnegative_covariance_attestation(nonnegative_covariance))
            }
        }
    }

    /// The measure with its shape parameter replaced by `v` (`η`, `H` or the
    /// band exponent); `None` for white noise.
    pub fn with_shape(&self, v: f64) -> Option<Self> {
        let mut s = self.clone();
        match &mut s {
            Self::WhiteNoise => return None,
            Self::Riesz { eta, .. } => *eta = v,
            Self::Fractional { hurst } => *hurst = v,
            Self::PowerBand { exponent, .. } => *exponent = v,
        }
        Some(s)
    }

    pub fn dim(&self) -> usize {
        match *self {
            Self::WhiteNoise | Self::Fractional { .. } => 1,
            Self::Riesz { dim, .. } | Self::PowerBand { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveEnParams {
    pub n: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    pub eps: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub points: Vec<usize>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    200_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveEhParams {
    #[serde(default = "one")]
    pub lambda: f64,
    pub eps: f64,
    pub half_width: f64,
    pub points: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eh_iter")]
    pub max_iter: usize,
}

fn default_eh_iter() -> usize {
    20_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    ConstantOne,
    CompactIndicator {
        radius: f64,
    },
    Exponential {
        beta: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl InitialSpec {
    pub fn build(&self) -> InitialData {
        match *self {
            Self::ConstantOne => InitialData::ConstantOne,
            Self::CompactIndicator { radius } => InitialData::CompactIndicator { radius },
            Self::Exponential { beta, scale } => InitialData::Exponential { beta, scale },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Brownian bridges with Gaussian terminal offsets; any initial data.
    #[default]
    Bridge,
    /// Brownian motions started at the given points; constant initial data.
    Motion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McMomentParams {
    pub t: f64,
    pub eps: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "two")]
    pub n: usize,
    /// Evaluation points `x^j`; all at the origin when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "constant_one")]
    pub initial: InitialSpec,
    pub samples: usize,
    pub steps: usize,
    #[serde(default)]
    pub representation: Representation,
}

fn two() -> usize {
    2
}

fn constant_one() -> InitialSpec {
    InitialSpec::ConstantOne
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChaosModeSpec {
    Quadrature {
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    MonteCarlo {
        samples: usize,
    },
}

fn default_nodes() -> usize {
    24
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosParams {
    pub t: f64,
    pub eps: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub d_max: usize,
    pub mode: ChaosModeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    pub n: usize,
    pub en: f64,
    #[serde(default)]
    pub en_err: f64,
    pub regime: GrowthRegime,
    /// Grid for the `(β, β/2 + E_n/(nβ))` table.
    #[serde(default)]
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    /// Values of the measure's shape parameter to sweep.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdevCase {
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdevParams {
    pub n: usize,
    pub cases: Vec<LdevCase>,
    #[serde(default = "one")]
    pub strip: f64,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsParams {
    #[serde(default = "two")]
    pub n: usize,
    pub eps: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub times: Vec<f64>,
    pub samples: usize,
    pub steps: usize,
    /// Variational value to test against and its error bar.
    pub en: f64,
    #[serde(default)]
    pub en_err: f64,
    /// Strip width for the lower diagnostic; skipped when absent.
    #[serde(default)]
    pub strip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    SolveEn(SolveEnParams),
    SolveEh(SolveEhParams),
    McMoment(McMomentParams),
    ChaosMoment(ChaosParams),
    GrowthIndex(GrowthParams),
    PhaseDiagram(PhaseParams),
    LdevCheck(LdevParams),
    Diagnostics(DiagnosticsParams),
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub measure: Option<MeasureSpec>,
    pub params: Params,
    pub seed: Option<u64>,
    pub output: OutputSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: CommandName,
    #[serde(default)]
    measure: Option<MeasureSpec>,
    #[serde(default = "empty_params")]
    params: serde_json::Value,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<OutputSpec>,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    /// Malformed JSON or a value of the wrong shape.
    Parse { line: usize, column: usize, message: String },
    /// Field-level problems, each with its path.
    Validation(Vec<FieldError>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            Self::Validation(errs) => {
                for (i, e) in errs.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "validation error at {}: {}", e.path, e.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn field(path: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError { path: path.into(), message: message.into() }
}

/// Values supplied on the command line, applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

fn parse_params<T: DeserializeOwned>(v: serde_json::Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "params".to_string() } else { format!("params.{path}") };
        ConfigError::Validation(vec![field(path, e.into_inner().to_string())])
    })
}

pub fn parse_config_with(text: &str, o: &Overrides) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() || path == "." {
            ConfigError::Parse { line: inner.line(), column: inner.column(), message: inner.to_string() }
        } else {
            ConfigError::Validation(vec![field(path, inner.to_string())])
        }
    })?;
    let params = match raw.command {
        CommandName::SolveEn => Params::SolveEn(parse_params(raw.params)?),
        CommandName::SolveEh => Params::SolveEh(parse_params(raw.params)?),
        CommandName::McMoment => Params::McMoment(parse_params(raw.params)?),
        CommandName::ChaosMoment => Params::ChaosMoment(parse_params(raw.params)?),
        CommandName::GrowthIndex => Params::GrowthIndex(parse_params(raw.params)?),
        CommandName::PhaseDiagram => Params::PhaseDiagram(parse_params(raw.params)?),
        CommandName::LdevCheck => Params::LdevCheck(parse_params(raw.params)?),
        CommandName::Diagnostics => Params::Diagnostics(parse_params(raw.params)?),
    };
    let mut output = raw.output.unwrap_or(OutputSpec { path: None, format: Format::Json });
    if let Some(p) = &o.out {
        output.path = Some(p.clone());
    }
    if let Some(f) = o.format {
        output.format = f;
    }
    let cfg = RunConfig { command: raw.command, measure: raw.measure, params, seed: o.seed.or(raw.seed), output };
    let errs = validate(&cfg);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(errs))
    }
}

fn positive(errs: &mut Vec<FieldError>, path: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(field(path, format!("must be positive and finite, got {v}")));
    }
}

fn nonnegative(errs: &mut Vec<FieldError>, path: &str, v: f64) {
    if !(v >= 0.0 && v.is_finite()) {
        errs.push(field(path, format!("must be nonnegative and finite, got {v}")));
    }
}

fn nonempty<T>(errs: &mut Vec<FieldError>, path: &str, v: &[T]) {
    if v.is_empty() {
        errs.push(field(path, "must not be empty"));
    }
}

fn validate(cfg: &RunConfig) -> Vec<FieldError> {
    let mut errs = Vec::new();
    let needs_measure = !matches!(cfg.command, CommandName::GrowthIndex | CommandName::LdevCheck);
    let measure = match &cfg.measure {
        Some(spec) => match spec.build() {
            Ok(m) => Some(m),
            Err(e) => {
                errs.push(field("measure", e.to_string()));
                None
            }
        },
        None => {
            if needs_measure {
                errs.push(field("measure", "required for this command"));
            }
            None
        }
    };
    let white = measure.as_ref().is_some_and(|m| m.is_white_noise());
    let dim = measure.as_ref().map(|m| m.dim());
    let stochastic = match &cfg.params {
        Params::McMoment(_) | Params::Diagnostics(_) => true,
        Params::ChaosMoment(p) => matches!(p.mode, ChaosModeSpec::MonteCarlo { .. }),
        _ => false,
    };
    if stochastic && cfg.seed.is_none() {
        errs.push(field("seed", "seed required"));
    }
    match &cfg.params {
        Params::SolveEn(p) => {
            if p.n < 2 {
                errs.push(field("params.n", "need at least 2 particles"));
            }
            if let Some(l) = dim {
                if p.n >= 2 && (p.n - 1) * l > MAX_REDUCED_DIM {
                    errs.push(field(
                        "params.n",
                        format!("instance-too-large: reduced dimension {} exceeds {MAX_REDUCED_DIM}", (p.n - 1) * l),
                    ));
                }
            }
            nonnegative(&mut errs, "params.lambda", p.lambda);
            nonempty(&mut errs, "params.eps", &p.eps);
            if p.eps.len() == 2 {
                errs.push(field("params.eps", "give one value, or at least three for the limit"));
            }
            nonempty(&mut errs, "params.half_widths", &p.half_widths);
            nonempty(&mut errs, "params.points", &p.points);
            for (i, e) in p.eps.iter().enumerate() {
                if !(*e > 0.0 || (*e == 0.0 && white)) {
                    errs.push(field(format!("params.eps[{i}]"), format!("invalid regularization {e}")));
                }
            }
            for (i, h) in p.half_widths.iter().enumerate() {
                positive(&mut errs, &format!("params.half_widths[{i}]"), *h);
            }
            positive(&mut errs, "params.tol", p.tol);
        }
        Params::SolveEh(p) => {
            if dim.is_some_and(|l| l != 1) {
                errs.push(field("measure", "solve-eh needs a one-dimensional measure"));
            }
            nonnegative(&mut errs, "params.lambda", p.lambda);
            if !(p.eps > 0.0 || (p.eps == 0.0 && white)) {
                errs.push(field("params.eps", format!("invalid regularization {}", p.eps)));
            }
            positive(&mut errs, "params.half_width", p.half_width);
            positive(&mut errs, "params.tol", p.tol);
        }
        Params::McMoment(p) => {
            positive(&mut errs, "params.t", p.t);
            positive(&mut errs, "params.eps", p.eps);
            nonnegative(&mut errs, "params.lambda", p.lambda);
            if p.n < 1 {
                errs.push(field("params.n", "need at least one point"));
            }
            if let (Some(pts), Some(l)) = (&p.points, dim) {
                if pts.len() != p.n {
                    errs.push(field("params.points", format!("expected {} points, got {}", p.n, pts.len())));
                }
                for (i, x) in pts.iter().enumerate() {
                    if x.len() != l {
                        errs.push(field(format!("params.points[{i}]"), format!("expected {l} coordinates")));
                    }
                }
            }
            if let Err(e) = p.initial.build().validate() {
                errs.push(field("params.initial", e.to_string()));
            }
            if p.representation == Representation::Motion && p.initial != InitialSpec::ConstantOne {
                errs.push(field("params.initial", "the motion representation needs constant_one"));
            }
        }
        Params::ChaosMoment(p) => {
            positive(&mut errs, "params.t", p.t);
            if !(p.eps > 0.0 || (p.eps == 0.0 && white)) {
                errs.push(field("params.eps", format!("invalid regularization {}", p.eps)));
            }
            nonnegative(&mut errs, "params.lambda", p.lambda);
            if p.d_max < 1 {
                errs.push(field("params.d_max", "must be at least 1"));
            }
        }
        Params::GrowthIndex(p) => {
            if p.n < 1 {
                errs.push(field("params.n", "must be at least 1"));
            }
            nonnegative(&mut errs, "params.en", p.en);
            nonnegative(&mut errs, "params.en_err", p.en_err);
            for (i, b) in p.betas.iter().enumerate() {
                positive(&mut errs, &format!("params.betas[{i}]"), *b);
            }
        }
        Params::PhaseDiagram(p) => {
            if let (Some(values), Some(spec)) = (&p.values, &cfg.measure) {
                for (i, v) in values.iter().enumerate() {
                    match spec.with_shape(*v) {
                        None => {
                            errs.push(field("params.values", "white noise has no shape parameter"));
                            break;
                        }
                        Some(s) => {
                            if let Err(e) = s.build() {
                                errs.push(field(format!("params.values[{i}]"), e.to_string()));
                            }
                        }
                    }
                }
            }
        }
        Params::LdevCheck(p) => {
            if !(1..=3).contains(&p.n) {
                errs.push(field("params.n", "strip integral supports 1 <= n <= 3"));
            }
            nonempty(&mut errs, "params.cases", &p.cases);
            nonempty(&mut errs, "params.times", &p.times);
            for (i, c) in p.cases.iter().enumerate() {
                positive(&mut errs, &format!("params.cases[{i}].alpha"), c.alpha);
                positive(&mut errs, &format!("params.cases[{i}].beta"), c.beta);
            }
            for (i, t) in p.times.iter().enumerate() {
                positive(&mut errs, &format!("params.times[{i}]"), *t);
            }
            positive(&mut errs, "params.strip", p.strip);
        }
        Params::Diagnostics(p) => {
            positive(&mut errs, "params.eps", p.eps);
            nonnegative(&mut errs, "params.lambda", p.lambda);
            nonnegative(&mut errs, "params.en", p.en);
            nonnegative(&mut errs, "params.en_err", p.en_err);
            if p.times.len() < 2 {
                errs.push(field("params.times", "need at least two times"));
            }
            for (i, t) in p.times.iter().enumerate() {
                positive(&mut errs, &format!("params.times[{i}]"), *t);
            }
            if let Some(s) = p.strip {
                positive(&mut errs, "params.strip", s);
            }
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "command": "solve-en",
        "measure": {"kind": "white_noise"},
        "params": {"n": 2, "eps": [0], "half_widths": [8, 10], "points": [401, 801]}
    }"#;

    #[test]
    fn minimal_solve_en() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.command, CommandName::SolveEn);
        let Params::SolveEn(p) = &c.params else { panic!() };
        assert_eq!(p.lambda, 1.0);
        assert_eq!(c.output.format, Format::Json);
    }

    #[test]
    fn seed_required_for_monte_carlo() {
        let text = r#"{"command": "mc-moment", "measure": {"kind": "white_noise"},
            "params": {"t": 1, "eps": 0.1, "samples": 1000, "steps": 64}}"#;
        let ConfigError::Validation(errs) = parse_config(text).unwrap_err() else { panic!() };
        assert_eq!(errs[0].path, "seed");
        assert_eq!(errs[0].message, "seed required");
        let with = parse_config_with(text, &Overrides { seed: Some(3), ..Default::default() }).unwrap();
        assert_eq!(with.seed, Some(3));
    }

    #[test]
    fn too_many_particles() {
        let text = MINIMAL.replace("\"n\": 2", "\"n\": 5");
        let ConfigError::Validation(errs) = parse_config(&text).unwrap_err() else { panic!() };
        assert_eq!(errs[0].path, "params.n");
        assert!(errs[0].message.starts_with("instance-too-large"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("\"n\": 2", "\"n\": 2, \"colour\": 1");
        let ConfigError::Validation(errs) = parse_config(&text).unwrap_err() else { panic!() };
        assert!(errs[0].message.contains("colour"), "{errs:?}");
        let top = MINIMAL.replacen('{', "{\"extra\": true,", 1);
        assert!(parse_config(&top).is_err());
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_config("{\n  \"command\": \"solve-en\",\n  oops\n}").unwrap_err();
        let ConfigError::Parse { line, .. } = err else { panic!("{err:?}") };
        assert_eq!(line, 3);
    }

    #[test]
    fn nested_field_paths() {
        let text = r#"{"command": "solve-en", "measure": {"kind": "white_noise"},
            "params": {"n": 2, "eps": [0.1, -1, 0.05], "half_widths": [8], "points": [401]}}"#;
        let ConfigError::Validation(errs) = parse_config(text).unwrap_err() else { panic!() };
        assert_eq!(errs[0].path, "params.eps[1]");
        let bad_type = r#"{"command": "solve-en", "measure": {"kind": "white_noise"},
            "params": {"n": 2, "eps": [0.1], "half_widths": [8], "points": ["x"]}}"#;
        let ConfigError::Validation(errs) = parse_config(bad_type).unwrap_err() else { panic!() };
        assert_eq!(errs[0].path, "params.points[0]");
    }

    #[test]
    fn measure_validation() {
        let text = r#"{"command": "phase-diagram", "measure": {"kind": "riesz", "eta": 2.5, "dim": 2}}"#;
        let ConfigError::Validation(errs) = parse_config(text).unwrap_err() else { panic!() };
        assert_eq!(errs[0].path, "measure");
    }
}
