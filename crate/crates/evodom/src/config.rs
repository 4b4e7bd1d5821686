//! Run configuration: a single JSON document.
//!
//! ```json
//! {
//!   "preset": "example5_2",
//!   "model": {},
//!   "grid": { "nodes": 199 },
//!   "stepper": { "dt": 0.001, "t_end": 60, "scheme": "imex_be", "record_every": 100 },
//!   "ic": { "kind": "sine_bump", "amplitude": 5 },
//!   "quadrature_nodes": 4096,
//!   "monotone": { "tol": 1e-6, "max_iter": 5000 },
//!   "attractor": { "tol": 1e-8, "max_periods": 500 },
//!   "verify": { "rel_tol": 1e-6, "intervals": 200 },
//!   "out": "out"
//! }
//! ```
//!
//! Without a preset the model block is required:
//!
//! ```json
//! "model": {
//!   "species1": { "d": 0.2, "a": 1.2, "b": 0.013, "c": 0.012 },
//!   "species2": { "d": 0.1, "a": 1.2, "b": 0.013, "c": 0.012 },
//!   "rho": { "affine_abs_sin": { "base": 1, "amplitude": 0.5, "omega": 1 } },
//!   "period": 3.141592653589793,
//!   "dimension": 1,
//!   "domain": [0, 1]
//! }
//! ```
//!
//! A coefficient is either a number or one of `{"constant": v}`,
//! `{"affine_sin": {"base", "amplitude", "omega", "phase"}}`,
//! `{"affine_abs_sin": {"base", "amplitude", "omega"}}` or
//! `{"sampled": [[t, v], ...]}`. A preset replaces the whole model block.

use std::fmt;
use std::path::Path;

use evodom_core::dynamics::{InitialCondition, Scheme, StepperConfig};
use evodom_core::presets::Preset;
use evodom_core::quadrature::DEFAULT_NODES;
use evodom_core::{EvolutionLaw, Field, Grid, Interval, ModelParams, PeriodicFn, Profile, SpeciesParams};
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// A fully resolved configuration: every default is filled in and a preset
/// has been expanded into the model block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub stepper: StepperSpec,
    #[serde(default)]
    pub ic: IcSpec,
    #[serde(default = "default_quadrature")]
    pub quadrature_nodes: usize,
    #[serde(default)]
    pub monotone: MonotoneSpec,
    #[serde(default)]
    pub attractor: AttractorSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default = "default_out")]
    pub out: String,
}

fn default_quadrature() -> usize {
    DEFAULT_NODES
}

fn default_out() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species1: Option<SpeciesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species2: Option<SpeciesSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Coef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
}

impl ModelSpec {
    fn is_empty(&self) -> bool {
        *self == ModelSpec::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    pub d: f64,
    pub a: Coef,
    pub b: Coef,
    pub c: Coef,
}

/// A periodic coefficient; plain numbers are constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Coef(pub Profile);

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ProfileSpec {
    Constant(f64),
    AffineSin {
        base: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    AffineAbsSin {
        base: f64,
        amplitude: f64,
        omega: f64,
    },
    Sampled(Vec<(f64, f64)>),
}

impl From<ProfileSpec> for Profile {
    fn from(p: ProfileSpec) -> Self {
        match p {
            ProfileSpec::Constant(v) => Profile::Constant(v),
            ProfileSpec::AffineSin {
                base,
                amplitude,
                omega,
                phase,
            } => Profile::AffineSin {
                base,
                amplitude,
                omega,
                phase,
            },
            ProfileSpec::AffineAbsSin { base, amplitude, omega } => Profile::AffineAbsSin { base, amplitude, omega },
            ProfileSpec::Sampled(t) => Profile::Sampled(t),
        }
    }
}

impl Serialize for Coef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let profile = match &self.0 {
            Profile::Constant(v) => return s.serialize_f64(*v),
            Profile::AffineSin {
                base,
                amplitude,
                omega,
                phase,
            } => ProfileSpec::AffineSin {
                base: *base,
                amplitude: *amplitude,
                omega: *omega,
                phase: *phase,
            },
            Profile::AffineAbsSin { base, amplitude, omega } => ProfileSpec::AffineAbsSin {
                base: *base,
                amplitude: *amplitude,
                omega: *omega,
            },
            Profile::Sampled(t) => ProfileSpec::Sampled(t.clone()),
        };
        profile.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct CoefVisitor;

        impl<'de> Visitor<'de> for CoefVisitor {
            type Value = Coef;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a profile object such as {\"affine_sin\": {...}}")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Coef, E> {
                Ok(Coef(Profile::Constant(v)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Coef, E> {
                Ok(Coef(Profile::Constant(v as f64)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Coef, E> {
                Ok(Coef(Profile::Constant(v as f64)))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Coef, A::Error> {
                let profile = ProfileSpec::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(Coef(profile.into()))
            }
        }

        d.deserialize_any(CoefVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nodes: 199 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    #[default]
    ImexBe,
    ImexCn,
}

impl From<SchemeSpec> for Scheme {
    fn from(s: SchemeSpec) -> Self {
        match s {
            SchemeSpec::ImexBe => Scheme::ImexBe,
            SchemeSpec::ImexCn => Scheme::ImexCn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperSpec {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeSpec,
    pub record_every: usize,
}

impl Default for StepperSpec {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 60.0,
            scheme: SchemeSpec::ImexBe,
            record_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSpec {
    SineBump {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    ConstantClipped {
        value: f64,
    },
    /// Interior values, one per grid node.
    Sampled {
        v1: Vec<f64>,
        v2: Vec<f64>,
    },
}

fn default_amplitude() -> f64 {
    5.0
}

impl Default for IcSpec {
    fn default() -> Self {
        IcSpec::SineBump { amplitude: 5.0 }
    }
}

impl IcSpec {
    pub fn initial_condition(&self) -> InitialCondition {
        match self {
            IcSpec::SineBump { amplitude } => InitialCondition::SineBump { amplitude: *amplitude },
            IcSpec::ConstantClipped { value } => InitialCondition::ConstantClipped { value: *value },
            IcSpec::Sampled { v1, v2 } => InitialCondition::Sampled {
                v1: Field(v1.clone()),
                v2: Field(v2.clone()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonotoneSpec {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MonotoneSpec {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttractorSpec {
    pub tol: f64,
    pub max_periods: usize,
}

impl Default for AttractorSpec {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_periods: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub rel_tol: f64,
    /// Time intervals per period of generated candidates.
    pub intervals: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            intervals: 200,
        }
    }
}

/// A validated configuration together with the objects built from it.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub params: ModelParams,
    pub grid: Grid,
}

impl Resolved {
    pub fn stepper(&self) -> StepperConfig {
        let s = &self.config.stepper;
        StepperConfig {
            dt: s.dt,
            t_end: s.t_end,
            scheme: s.scheme.into(),
            record_every: s.record_every,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, None).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates `text`. `preset` overrides the document's preset.
pub fn parse_config_str(text: &str, preset: Option<&str>) -> Result<Resolved, CliError> {
    let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(p) = preset {
        cfg.preset = Some(p.to_string());
    }
    resolve(cfg, text)
}

/// Configuration for a preset alone, all defaults.
pub fn preset_config(preset: &str) -> Result<Resolved, CliError> {
    parse_config_str("{}", Some(preset))
}

fn resolve(mut cfg: RunConfig, text: &str) -> Result<Resolved, CliError> {
    let fail = |path: &[&str], msg: String| -> CliError { located(text, path, msg) };

    if let Some(name) = cfg.preset.clone() {
        let preset = Preset::from_name(&name).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            fail(&["preset"], format!("unknown preset `{name}`, expected one of {}", names.join(", ")))
        })?;
        if !cfg.model.is_empty() {
            eprintln!("warning: preset `{name}` replaces the model block");
        }
        let params = preset.params().map_err(|e| CliError::Config(e.to_string()))?;
        cfg.model = model_spec(&params);
    }

    let m = &mut cfg.model;
    let s1 = m.species1.clone().ok_or_else(|| fail(&["model"], "missing key `model.species1`".into()))?;
    let s2 = m.species2.clone().ok_or_else(|| fail(&["model"], "missing key `model.species2`".into()))?;
    let period = m.period.ok_or_else(|| fail(&["model"], "missing key `model.period`".into()))?;
    let rho = m.rho.get_or_insert(Coef(Profile::Constant(1.0))).clone();
    let dimension = *m.dimension.get_or_insert(1);
    let [left, right] = *m.domain.get_or_insert([0.0, 1.0]);

    let model_err = |e: evodom_core::Error| -> CliError {
        let msg = e.to_string();
        fail(&model_path(&msg), msg)
    };
    if !(period.is_finite() && period > 0.0) {
        return Err(fail(&["model", "period"], format!("period must be positive, got {period}")));
    }
    let interval = Interval::new(left, right).map_err(|e| fail(&["model", "domain"], e.to_string()))?;
    let rho_fn = PeriodicFn::new(rho.0, period).map_err(|e| fail(&["model", "rho"], e.to_string()))?;
    let law = EvolutionLaw::new(rho_fn, dimension).map_err(|e| fail(&["model", "rho"], e.to_string()))?;
    let species = |s: &SpeciesSpec, key: &str| -> Result<SpeciesParams, CliError> {
        let coef = |c: &Coef, name: &str| {
            PeriodicFn::new(c.0.clone(), period).map_err(|e| fail(&["model", key, name], e.to_string()))
        };
        Ok(SpeciesParams {
            diffusion: s.d,
            growth: coef(&s.a, "a")?,
            competition: coef(&s.b, "b")?,
            crowding: coef(&s.c, "c")?,
        })
    };
    let params = ModelParams::new(species(&s1, "species1")?, species(&s2, "species2")?, law, interval)
        .map_err(model_err)?;

    let st = &cfg.stepper;
    if !(st.dt.is_finite() && st.dt > 0.0) {
        return Err(fail(&["stepper", "dt"], format!("dt must be positive, got {}", st.dt)));
    }
    if !(st.t_end.is_finite() && st.t_end > 0.0) {
        return Err(fail(&["stepper", "t_end"], format!("t_end must be positive, got {}", st.t_end)));
    }
    if st.record_every == 0 {
        return Err(fail(&["stepper", "record_every"], "record_every must be at least 1".into()));
    }
    let grid = Grid::new(interval, cfg.grid.nodes).map_err(|e| fail(&["grid", "nodes"], e.to_string()))?;
    if cfg.quadrature_nodes < 2 {
        return Err(fail(&["quadrature_nodes"], "quadrature_nodes must be at least 2".into()));
    }
    for (path, v) in [
        (["monotone", "tol"], cfg.monotone.tol),
        (["attractor", "tol"], cfg.attractor.tol),
        (["verify", "rel_tol"], cfg.verify.rel_tol),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(fail(&path, format!("{} must be positive, got {v}", path.join("."))));
        }
    }
    for (path, v) in [
        (["monotone", "max_iter"], cfg.monotone.max_iter),
        (["attractor", "max_periods"], cfg.attractor.max_periods),
        (["verify", "intervals"], cfg.verify.intervals),
    ] {
        if v == 0 {
            return Err(fail(&path, format!("{} must be at least 1", path.join("."))));
        }
    }
    cfg.ic
        .initial_condition()
        .fields(&grid)
        .map_err(|e| fail(&["ic"], e.to_string()))?;
    Ok(Resolved {
        config: cfg,
        params,
        grid,
    })
}

/// Model block equivalent to `params`.
pub fn model_spec(params: &ModelParams) -> ModelSpec {
    use evodom_core::Species;
    let species = |s: Species| {
        let sp = params.species(s);
        SpeciesSpec {
            d: sp.diffusion,
            a: Coef(sp.growth.profile().clone()),
            b: Coef(sp.competition.profile().clone()),
            c: Coef(sp.crowding.profile().clone()),
        }
    };
    let iv = params.interval();
    ModelSpec {
        species1: Some(species(Species::One)),
        species2: Some(species(Species::Two)),
        rho: Some(Coef(params.law().rho_fn().profile().clone())),
        period: Some(params.period()),
        dimension: Some(params.law().dimension()),
        domain: Some([iv.left, iv.right]),
    }
}

/// Key path of a model validation message such as `c1 must be positive`.
fn model_path(msg: &str) -> Vec<&'static str> {
    let word = msg
        .trim_start_matches("configuration error: ")
        .split_whitespace()
        .next()
        .unwrap_or("");
    let mut chars = word.chars();
    let (name, idx) = (chars.next(), chars.next());
    let species = match idx {
        Some('1') => "species1",
        Some('2') => "species2",
        _ => return vec!["model"],
    };
    let key = match name {
        Some('a') => "a",
        Some('b') => "b",
        Some('c') => "c",
        Some('d') => "d",
        _ => return vec!["model", species],
    };
    vec!["model", species, key]
}

fn located(text: &str, path: &[&str], msg: String) -> CliError {
    match locate(text, path) {
        Some(line) => CliError::Config(format!("{msg} (`{}` at line {line})", path.join("."))),
        None => CliError::Config(format!("{msg} (`{}`)", path.join("."))),
    }
}

/// 1-based line of the deepest key of `path` found in `text`, searching
/// each key after the previous one.
pub fn locate(text: &str, path: &[&str]) -> Option<usize> {
    let mut pos = 0;
    let mut found = None;
    for key in path {
        let needle = format!("\"{key}\"");
        let mut from = pos;
        let hit = loop {
            let Some(off) = text[from..].find(&needle) else { break None };
            let at = from + off;
            let rest = text[at + needle.len()..].trim_start();
            if rest.starts_with(':') {
                break Some(at);
            }
            from = at + needle.len();
        };
        match hit {
            Some(at) => {
                pos = at + needle.len();
                found = Some(at);
            }
            None => break,
        }
    }
    found.map(|at| text[..at].matches('\n').count() + 1)
}
