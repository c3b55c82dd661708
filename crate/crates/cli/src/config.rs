//! Experiment configuration.
//!
//! A run is described by an [`ExperimentConfig`] (read from JSON) plus flag
//! [`Overrides`]. Both are folded into a [`Resolved`] configuration, which
//! is validated once and then recorded verbatim in the run manifest.

use std::f64::consts::PI;
use std::path::PathBuf;

use nhdeco::dynamics::Method;
use nhdeco::operator::DEFAULT_DENSE_CAP;
use nhdeco::{ModelKind, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::presets;
use crate::CliError;

/// Largest spin chain the presets treat as desk scale.
pub const DESK_SPINS: usize = 12;
/// Largest Fermi lattice the presets treat as desk scale.
pub const DESK_FERMI_SITES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// `C(t)` traces from the two-branch propagation.
    Coherence,
    /// Ground-state susceptibility maps over `(h_x, h_y)`.
    Susceptibility,
    /// Two-site circuit protocol with a dense reference.
    Circuit,
}

/// Scan axes. An empty axis means "use the model's own value".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanAxes {
    #[serde(default)]
    pub hy: Vec<f64>,
    /// Coupling angles in radians, `(δ_x, δ_y) = |δ|(sin θ, cos θ)`.
    #[serde(default)]
    pub theta: Vec<f64>,
    /// `|δ|` used with `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_magnitude: Option<f64>,
    /// Explicit `(δ_x, δ_y)` pairs; exclusive with `theta`.
    #[serde(default)]
    pub delta: Vec<(f64, f64)>,
    /// `h_x` grid of susceptibility maps.
    #[serde(default)]
    pub map_hx: Vec<f64>,
    /// `h_y` grid of susceptibility maps.
    #[serde(default)]
    pub map_hy: Vec<f64>,
}

/// The on-disk configuration. Exactly one of `preset` and `model` is set,
/// unless the model kind comes from `--model`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub scan: Option<ScanAxes>,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Local step tolerance of the circuit schedule.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Replaces `n` of every model.
    #[serde(default)]
    pub n: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }
}

/// Values given on the command line; each replaces the configured one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<String>,
    pub model: Option<ModelKind>,
    pub experiment: Option<Experiment>,
    pub n: Option<usize>,
    pub j: Option<f64>,
    pub u: Option<f64>,
    pub hx: Option<f64>,
    pub hy: Option<Vec<f64>>,
    pub dx: Option<f64>,
    pub dy: Option<f64>,
    pub theta: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub steps: Option<usize>,
    pub method: Option<Method>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub out: Option<PathBuf>,
}

/// A fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    /// Preset name, or `custom`.
    pub name: String,
    pub experiment: Experiment,
    pub models: Vec<ModelSpec>,
    pub t_max: f64,
    pub steps: usize,
    pub scan: ScanAxes,
    pub method: Method,
    pub shots: u64,
    pub seed: u64,
    pub tolerance: f64,
    pub out: PathBuf,
    pub warnings: Vec<String>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_DELTA_MAGNITUDE: f64 = 0.1;

impl Resolved {
    /// Defaults for a single explicit model.
    pub fn custom(model: ModelSpec) -> Self {
        Self {
            name: "custom".into(),
            experiment: Experiment::Coherence,
            models: vec![model],
            t_max: 3.0,
            steps: 30,
            scan: ScanAxes::default(),
            method: Method::Krylov,
            shots: 0,
            seed: DEFAULT_SEED,
            tolerance: 1e-2,
            out: PathBuf::from("out"),
            warnings: Vec::new(),
        }
    }

    /// The `|δ|` that turns `theta` into couplings.
    pub fn delta_magnitude(&self) -> f64 {
        self.scan.delta_magnitude.unwrap_or(DEFAULT_DELTA_MAGNITUDE)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|i| self.t_max * i as f64 / self.steps as f64)
            .collect()
    }
}

/// Desk-scale parameters for a model kind when only `--model` is given.
pub fn default_model(kind: ModelKind) -> ModelSpec {
    let d = DEFAULT_DELTA_MAGNITUDE * std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        ModelKind::Ising => ModelSpec::ising(8, 0.5, (1.0, 0.0), (d, d)),
        ModelKind::Heisenberg => ModelSpec::heisenberg(8, 0.5, (1.0, 0.0), (d, d)),
        ModelKind::Fermi => ModelSpec::fermi(4, 0.1, 0.4, (1.0, 0.0), (d, d)),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Folds the file configuration and the flags into one validated run.
pub fn resolve(config: &ExperimentConfig, ov: &Overrides) -> Result<Resolved, CliError> {
    let preset = ov.preset.as_ref().or(config.preset.as_ref());
    if preset.is_some() && config.model.is_some() {
        return Err(invalid(
            "give either a preset or an explicit model, not both",
        ));
    }
    if preset.is_some() && ov.model.is_some() {
        return Err(invalid("--model cannot be combined with a preset"));
    }
    let mut r = match (preset, config.model) {
        (Some(name), _) => presets::preset(name)?,
        (None, Some(mut m)) => {
            if let Some(kind) = ov.model {
                if kind != m.kind {
                    m = ModelSpec { kind, ..m };
                }
            }
            Resolved::custom(m)
        }
        (None, None) => match ov.model {
            Some(kind) => Resolved::custom(default_model(kind)),
            None => return Err(invalid("need a preset (--preset) or a model (--model)")),
        },
    };

    if let Some(e) = ov.experiment.or(config.experiment) {
        r.experiment = e;
    }
    if let Some(scan) = &config.scan {
        r.scan = scan.clone();
    }
    let pick = |a: Option<f64>, b: Option<f64>| a.or(b);
    if let Some(t) = pick(ov.t_max, config.t_max) {
        r.t_max = t;
    }
    if let Some(s) = ov.steps.or(config.steps) {
        r.steps = s;
    }
    if let Some(m) = ov.method.or(config.method) {
        r.method = m;
    }
    if let Some(s) = ov.shots.or(config.shots) {
        r.shots = s;
    }
    if let Some(s) = ov.seed.or(config.seed) {
        r.seed = s;
    }
    if let Some(t) = pick(ov.tolerance, config.tolerance) {
        r.tolerance = t;
    }
    if let Some(o) = ov.out.as_ref().or(config.out.as_ref()) {
        r.out = o.clone();
    }
    for m in &mut r.models {
        if let Some(n) = ov.n.or(config.n) {
            m.n = n;
        }
        if let Some(j) = ov.j {
            m.j = j;
        }
        if let Some(u) = ov.u {
            m.u = u;
        }
        if let Some(hx) = ov.hx {
            m.h.0 = hx;
        }
    }
    if let Some(hy) = &ov.hy {
        r.scan.hy = hy.clone();
    }
    if ov.dx.is_some() || ov.dy.is_some() {
        let base = r.models[0].delta;
        r.scan.theta.clear();
        r.scan.delta = vec![(ov.dx.unwrap_or(base.0), ov.dy.unwrap_or(base.1))];
    }
    if let Some(theta) = &ov.theta {
        r.scan.delta.clear();
        r.scan.theta = theta.clone();
    }
    validate(&mut r)?;
    Ok(r)
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

fn validate(r: &mut Resolved) -> Result<(), CliError> {
    if !(r.t_max > 0.0 && r.t_max.is_finite()) {
        return Err(invalid(format!("t_max must be positive, got {}", r.t_max)));
    }
    if r.steps == 0 {
        return Err(invalid("steps must be at least 1"));
    }
    let s = &r.scan;
    if !s.theta.is_empty() && !s.delta.is_empty() {
        return Err(invalid("scan.theta and scan.delta are exclusive"));
    }
    let deltas: Vec<f64> = s.delta.iter().flat_map(|d| [d.0, d.1]).collect();
    if !all_finite(&s.hy) || !all_finite(&s.theta) || !all_finite(&deltas) {
        return Err(invalid("scan axes must be finite"));
    }
    if !all_finite(&s.map_hx) || !all_finite(&s.map_hy) {
        return Err(invalid("map axes must be finite"));
    }
    if r.delta_magnitude() < 0.0 || !r.delta_magnitude().is_finite() {
        return Err(invalid("delta_magnitude must be a non-negative number"));
    }
    if r.models.is_empty() {
        return Err(invalid("no model to run"));
    }
    for m in &r.models {
        m.validate()
            .map_err(|e| invalid(format!("{}: {e}", m.kind)))?;
        if r.method == Method::Dense {
            let dim = m.basis().map_err(|e| invalid(e.to_string()))?.dim();
            if dim > DEFAULT_DENSE_CAP {
                return Err(invalid(format!(
                    "{} with N = {} has dimension {dim}, above the dense cap {DEFAULT_DENSE_CAP}; use --method krylov",
                    m.kind, m.n
                )));
            }
        }
    }
    match r.experiment {
        Experiment::Susceptibility => {
            if s.map_hx.is_empty() || s.map_hy.is_empty() {
                return Err(invalid(
                    "susceptibility maps need scan.map_hx and scan.map_hy",
                ));
            }
        }
        Experiment::Circuit => {
            if r.models
                .iter()
                .any(|m| m.kind != ModelKind::Ising || m.n != 2)
            {
                return Err(invalid(
                    "circuit mode runs the two-site Ising model only (N = 2)",
                ));
            }
            if !(r.tolerance > 0.0) {
                return Err(invalid("tolerance must be positive"));
            }
        }
        Experiment::Coherence => {}
    }
    r.warnings = scale_warnings(r);
    Ok(())
}

fn scale_warnings(r: &Resolved) -> Vec<String> {
    let mut out = Vec::new();
    for m in &r.models {
        let cap = match m.kind {
            ModelKind::Fermi => DESK_FERMI_SITES,
            _ => DESK_SPINS,
        };
        if m.n > cap {
            out.push(format!(
                "full scale: {} with N = {} exceeds the desk-scale cap of {cap}; memory and runtime grow as 2^N",
                m.kind, m.n
            ));
        }
    }
    out
}

/// Parses an angle in radians: `0.7`, `pi/4`, `0.25pi`, or `45pi/200`.
pub fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim().replace('π', "pi");
    let Some(pos) = t.find("pi") else {
        return t
            .parse::<f64>()
            .map_err(|e| format!("bad angle `{s}`: {e}"));
    };
    let (num, rest) = t.split_at(pos);
    let factor = match num.trim() {
        "" => 1.0,
        "-" => -1.0,
        x => x
            .trim_end_matches('*')
            .parse::<f64>()
            .map_err(|e| format!("bad angle `{s}`: {e}"))?,
    };
    let rest = rest[2..].trim();
    let denom = if rest.is_empty() {
        1.0
    } else {
        rest.strip_prefix('/')
            .ok_or_else(|| format!("bad angle `{s}`"))?
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad angle `{s}`: {e}"))?
    };
    if denom == 0.0 {
        return Err(format!("bad angle `{s}`: zero denominator"));
    }
    Ok(factor * PI / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_forms() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_angle("45pi/200").unwrap(), 45.0 * PI / 200.0);
        assert_eq!(parse_angle("0.25π").unwrap(), 0.25 * PI);
        assert_eq!(parse_angle("-pi/2").unwrap(), -PI / 2.0);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("twopi").is_err());
    }

    #[test]
    fn preset_and_model_are_exclusive() {
        let cfg = ExperimentConfig {
            preset: Some("fig1b1".into()),
            model: Some(default_model(ModelKind::Ising)),
            ..Default::default()
        };
        assert!(resolve(&cfg, &Overrides::default()).is_err());
        let ov = Overrides {
            preset: Some("fig1b1".into()),
            model: Some(ModelKind::Ising),
            ..Default::default()
        };
        assert!(resolve(&ExperimentConfig::default(), &ov).is_err());
        assert!(resolve(&ExperimentConfig::default(), &Overrides::default()).is_err());
    }

    #[test]
    fn flags_override_the_preset() {
        let ov = Overrides {
            preset: Some("fig1b1".into()),
            n: Some(6),
            hy: Some(vec![0.3]),
            theta: Some(vec![PI / 4.0]),
            ..Default::default()
        };
        let r = resolve(&ExperimentConfig::default(), &ov).unwrap();
        assert_eq!(r.models[0].n, 6);
        assert_eq!(r.scan.hy, vec![0.3]);
        assert!(r.scan.delta.is_empty());
        assert_eq!(r.scan.theta, vec![PI / 4.0]);
    }

    #[test]
    fn dense_cap_applies_to_n_override() {
        let ov = Overrides {
            model: Some(ModelKind::Ising),
            n: Some(16),
            method: Some(Method::Dense),
            ..Default::default()
        };
        let err = resolve(&ExperimentConfig::default(), &ov).unwrap_err();
        assert!(err.to_string().contains("dense cap"), "{err}");
    }

    #[test]
    fn large_n_is_flagged_as_full_scale() {
        let ov = Overrides {
            model: Some(ModelKind::Ising),
            n: Some(14),
            ..Default::default()
        };
        let r = resolve(&ExperimentConfig::default(), &ov).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].starts_with("full scale"));
    }

    #[test]
    fn circuit_mode_needs_two_sites() {
        let ov = Overrides {
            preset: Some("fig3b".into()),
            n: Some(3),
            ..Default::default()
        };
        assert!(resolve(&ExperimentConfig::default(), &ov).is_err());
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"preset": "fig1b1", "nn": 3}"#).is_err());
        let cfg = ExperimentConfig::from_json(
            r#"{"model": {"kind": "heisenberg", "n": 4, "j": 0.5, "h": [1.0, 0.2]},
                "scan": {"hy": [0.1, 0.2]}, "steps": 5}"#,
        )
        .unwrap();
        let r = resolve(&cfg, &Overrides::default()).unwrap();
        assert_eq!(r.models[0].kind, ModelKind::Heisenberg);
        assert_eq!(r.steps, 5);
    }
}
