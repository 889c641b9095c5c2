//! Run configuration: one JSON document, with dotted-path overrides applied
//! to the raw JSON before it is typed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use toeplitz_core::sphere::QuadraturePolicy;
use toeplitz_core::symbols::CutoffKind;

pub const CONFIG_SCHEMA: &str = "toeplitz-lab/config/v1";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad override '{0}': expected a.b.c=value")]
    Override(String),
    #[error("override '{path}': {reason}")]
    OverridePath { path: String, reason: String },
    #[error("unknown preset '{0}' (available: {1})")]
    UnknownPreset(String, String),
    #[error("schema '{0}' is not supported (expected {CONFIG_SCHEMA})")]
    Schema(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    pub seed: u64,
    pub sphere: SphereConfig,
    pub fock: FockConfig,
    pub corpus: CorpusConfig,
    pub axioms: AxiomsConfig,
    pub measurement: MeasurementConfig,
    pub joint_noise: JointNoiseSection,
    pub localization: LocalizationSection,
    pub rigidity: RigiditySection,
    pub bargmann: BargmannSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.into(),
            seed: 0,
            sphere: SphereConfig::default(),
            fock: FockConfig::default(),
            corpus: CorpusConfig::default(),
            axioms: AxiomsConfig::default(),
            measurement: MeasurementConfig::default(),
            joint_noise: JointNoiseSection::default(),
            localization: LocalizationSection::default(),
            rigidity: RigiditySection::default(),
            bargmann: BargmannSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SphereConfig {
    pub ks: Vec<usize>,
    pub quadrature: QuadraturePolicy,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            ks: vec![16, 32, 64, 128, 256],
            quadrature: QuadraturePolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockConfig {
    pub hbars: Vec<f64>,
    /// truncation D; absent means the default rule for compact supports
    pub dim: Option<usize>,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self {
            hbars: vec![0.125, 0.0625, 0.03125, 0.015625],
            dim: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionMembers {
    pub radius: f64,
    pub members: Vec<usize>,
}

impl Default for PartitionMembers {
    fn default() -> Self {
        Self {
            radius: 0.5,
            members: vec![0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub sphere: Vec<String>,
    pub plane: Vec<String>,
    /// members of the bump partition of unity appended to the sphere corpus
    pub partition: Option<PartitionMembers>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            sphere: ["x1", "x2", "x3", "x3^2", "x1*x2", "cutoff(sign, x1, 0.5)", "cutoff(sign, x2, 0.5)"]
                .map(String::from)
                .to_vec(),
            plane: ["1", "x", "y", "x^2", "x^2 + y^2", "cutoff(sign, x, 0.5)", "cutoff(sign, y, 0.5)"]
                .map(String::from)
                .to_vec(),
            partition: Some(PartitionMembers::default()),
        }
    }
}

/// Slope bands; a missing band means the slope is reported, not asserted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeBands {
    pub p1_gap: Option<f64>,
    pub p2_rem: Option<f64>,
    pub p2c_rem: Option<f64>,
    pub p3_rem: Option<f64>,
    /// bound on |slope| of the trace error
    pub p4_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectedConfig {
    pub ks: Vec<usize>,
    pub pair: [String; 2],
    /// reported next to the designated pair, never asserted
    pub companion: Option<[String; 2]>,
}

impl Default for CorrectedConfig {
    fn default() -> Self {
        Self {
            ks: vec![32, 64, 128, 256],
            pair: ["x1".into(), "x2".into()],
            companion: Some(["x1*x3".into(), "x2^2".into()]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxiomsConfig {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub p4: bool,
    /// symbols whose P1 gap slope is checked against the band
    pub p1_slope_symbols: Vec<String>,
    pub slopes: SlopeBands,
    pub corrected: Option<CorrectedConfig>,
}

impl Default for AxiomsConfig {
    fn default() -> Self {
        Self {
            p1: true,
            p2: true,
            p3: true,
            p4: true,
            p1_slope_symbols: vec!["x3".into()],
            slopes: SlopeBands::default(),
            corrected: Some(CorrectedConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChebyshevConfig {
    pub k: usize,
    pub radii: Vec<f64>,
}

impl Default for ChebyshevConfig {
    fn default() -> Self {
        Self {
            k: 32,
            radii: vec![0.25, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementConfig {
    pub enabled: bool,
    pub ks: Vec<usize>,
    pub hbars: Vec<f64>,
    pub chebyshev: Option<ChebyshevConfig>,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            ks: vec![16, 32, 64],
            hbars: vec![0.25, 0.0625],
            chebyshev: Some(ChebyshevConfig::default()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointNoiseSection {
    pub regimes: Vec<Regime>,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub profile: CutoffKind,
    pub f: String,
    pub g: String,
    pub ks: Vec<usize>,
    pub slope_tolerance: f64,
    /// max/min band of both proxies in the quantum-box regime p = q = 1/2
    pub box_band: f64,
}

impl Default for JointNoiseSection {
    fn default() -> Self {
        Self {
            regimes: vec![Regime { p: 0.0, q: 0.0 }, Regime { p: 0.5, q: 0.0 }, Regime { p: 0.5, q: 0.5 }],
            r: 6.0,
            big_r: 6.0,
            profile: CutoffKind::Sign,
            f: "x1".into(),
            g: "x2".into(),
            ks: vec![32, 64, 128, 256],
            slope_tolerance: 0.2,
            box_band: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationSection {
    pub k: usize,
    pub radii: Vec<f64>,
    pub samples: usize,
    pub vertex_pairs: usize,
    pub structured_pairs: usize,
    pub kappa: f64,
    pub r0: f64,
    pub slope_tolerance: f64,
}

impl Default for LocalizationSection {
    fn default() -> Self {
        Self {
            k: 128,
            radii: vec![0.5, 0.25, 0.125],
            samples: 8,
            vertex_pairs: 16,
            structured_pairs: 8,
            kappa: 6.0,
            r0: 0.5,
            slope_tolerance: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaConfig {
    /// plane symbol; absent means the bump of height 1 on the unit disk
    pub symbol: Option<String>,
    pub half: f64,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self { symbol: None, half: 1.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaConfig {
    /// F; absent means the α test symbol
    pub f: Option<String>,
    pub g: String,
    pub points: usize,
    pub half: f64,
    /// tolerance on |sampled max − v(z₀)| / v(z₀)
    pub tolerance: f64,
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self {
            f: None,
            g: "x".into(),
            points: 16,
            half: 1.2,
            tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub pairs: Vec<[String; 2]>,
    pub ks: Vec<usize>,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            pairs: vec![
                ["x1".into(), "x2".into()],
                ["x1".into(), "x1*x2".into()],
                ["x3^2".into(), "x1*x2".into()],
            ],
            ks: vec![16, 32, 64, 128, 256],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionConfig {
    pub ks: Vec<usize>,
    pub c3: f64,
    pub sample: usize,
    /// sphere symbols whose P1 constants give the α̂ used here
    pub alpha_symbols: Vec<String>,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            ks: vec![16, 32, 64],
            c3: 2.0,
            sample: 4,
            alpha_symbols: vec!["x3".into(), "x1*x2".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigiditySection {
    pub alpha: AlphaConfig,
    pub beta: BetaConfig,
    pub gamma: GammaConfig,
    pub dimension: Option<DimensionConfig>,
}

impl Default for RigiditySection {
    fn default() -> Self {
        Self {
            alpha: AlphaConfig::default(),
            beta: BetaConfig::default(),
            gamma: GammaConfig::default(),
            dimension: Some(DimensionConfig::default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    pub hbars: Vec<f64>,
    pub dim: usize,
    pub pairs: usize,
    pub max_degree: u32,
    pub tolerance: f64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            hbars: vec![1.0, 0.25, 0.0625],
            dim: 256,
            pairs: 10,
            max_degree: 3,
            tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositionConfig {
    pub hbars: Vec<f64>,
    /// plane symbols for the order-one remainder
    pub n1: [String; 2],
    /// complex polynomials (z, zbar) for the order-two remainder
    pub n2: [String; 2],
    pub slope_tolerance: f64,
}

impl Default for CompositionConfig {
    fn default() -> Self {
        Self {
            hbars: vec![0.125, 0.0625, 0.03125, 0.015625],
            n1: ["cutoff(sign, x, 0.5)".into(), "cutoff(sign, y, 0.5)".into()],
            n2: ["z^2".into(), "zbar^2".into()],
            slope_tolerance: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RescalingConfig {
    pub polys: Vec<String>,
    /// Plane symbols checked through quadrature on both sides.
    pub symbols: Vec<String>,
    pub hbars: Vec<f64>,
    pub dim: usize,
    pub tolerance: f64,
}

impl Default for RescalingConfig {
    fn default() -> Self {
        Self {
            polys: ["z*zbar", "z^2*zbar", "z^3 + 2*zbar", "z^2*zbar^2"].map(String::from).to_vec(),
            symbols: ["x^2 + y^2", "cos(x)*sin(y)"].map(String::from).to_vec(),
            hbars: vec![1.0, 0.3, 0.0625],
            dim: 128,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiIndexConfig {
    pub pairs: usize,
    pub max_order: u32,
    pub vars: usize,
    pub degree: u32,
}

impl Default for MultiIndexConfig {
    fn default() -> Self {
        Self {
            pairs: 20,
            max_order: 3,
            vars: 2,
            degree: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BargmannSection {
    pub exact: Option<ExactConfig>,
    pub composition: Option<CompositionConfig>,
    pub rescaling: Option<RescalingConfig>,
    pub multiindex: Option<MultiIndexConfig>,
}

impl Default for BargmannSection {
    fn default() -> Self {
        Self {
            exact: Some(ExactConfig::default()),
            composition: Some(CompositionConfig::default()),
            rescaling: Some(RescalingConfig::default()),
            multiindex: Some(MultiIndexConfig::default()),
        }
    }
}

const PRESETS: &[(&str, &str)] = &[
    ("axioms", include_str!("../presets/axioms.json")),
    ("minimal", include_str!("../presets/minimal.json")),
    ("quantum-box", include_str!("../presets/quantum-box.json")),
    ("polynomial-exact", include_str!("../presets/polynomial-exact.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn preset(name: &str) -> Result<Value, ConfigError> {
    let text = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .map(|p| p.1)
        .ok_or_else(|| ConfigError::UnknownPreset(name.into(), preset_names().join(", ")))?;
    Ok(serde_json::from_str(text)?)
}

pub fn read_value(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Parse `a.b.c=v`; v is read as JSON when it parses, else as a string.
pub fn parse_override(s: &str) -> Result<(Vec<String>, Value), ConfigError> {
    let (path, raw) = s.split_once('=').ok_or_else(|| ConfigError::Override(s.into()))?;
    let keys: Vec<String> = path.trim().split('.').map(str::to_string).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(s.into()));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
    Ok((keys, value))
}

/// Set a dotted path inside a JSON object, creating objects on the way.
/// Numeric keys index into existing arrays.
pub fn apply_override(root: &mut Value, keys: &[String], value: Value) -> Result<(), ConfigError> {
    let dotted = keys.join(".");
    let mut cur = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        if let Value::Array(items) = cur {
            let idx: usize = key.parse().map_err(|_| ConfigError::OverridePath {
                path: dotted.clone(),
                reason: format!("'{key}' indexes an array"),
            })?;
            let len = items.len();
            let slot = items.get_mut(idx).ok_or_else(|| ConfigError::OverridePath {
                path: dotted.clone(),
                reason: format!("index {idx} out of range (length {len})"),
            })?;
            if last {
                *slot = value;
                return Ok(());
            }
            cur = slot;
            continue;
        }
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur.as_object_mut().ok_or_else(|| ConfigError::OverridePath {
            path: dotted.clone(),
            reason: format!("'{key}' is below a non-object value"),
        })?;
        if last {
            obj.insert(key.clone(), value);
            return Ok(());
        }
        cur = obj.entry(key.clone()).or_insert(Value::Null);
    }
    Ok(())
}

/// Fill in every default so that the resolved document is explicit.
pub fn resolve(mut value: Value, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, ConfigError> {
    if value.is_null() {
        value = Value::Object(Default::default());
    }
    for o in overrides {
        let (keys, v) = parse_override(o)?;
        apply_override(&mut value, &keys, v)?;
    }
    if let Some(s) = seed {
        apply_override(&mut value, &["seed".into()], Value::from(s))?;
    }
    let cfg: RunConfig = serde_json::from_value(value)?;
    if cfg.schema != CONFIG_SCHEMA {
        return Err(ConfigError::Schema(cfg.schema));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_overrides_reach_nested_keys() {
        let mut v = json!({"sphere": {"ks": [16, 32, 64]}});
        let (k, x) = parse_override("sphere.ks.1=48").unwrap();
        apply_override(&mut v, &k, x).unwrap();
        let (k, x) = parse_override("joint_noise.f=x3").unwrap();
        apply_override(&mut v, &k, x).unwrap();
        assert_eq!(v["sphere"]["ks"], json!([16, 48, 64]));
        assert_eq!(v["joint_noise"]["f"], json!("x3"));
    }

    #[test]
    fn malformed_overrides_are_rejected() {
        assert!(matches!(parse_override("sphere.ks"), Err(ConfigError::Override(_))));
        assert!(matches!(parse_override("a..b=1"), Err(ConfigError::Override(_))));
        let mut v = json!({"seed": 3});
        let (k, x) = parse_override("seed.inner=1").unwrap();
        assert!(apply_override(&mut v, &k, x).is_err());
    }

    #[test]
    fn unknown_keys_fail() {
        assert!(resolve(json!({"sphere": {"kz": [1]}}), &[], None).is_err());
        assert!(resolve(json!({"schema": "other"}), &[], None).is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = resolve(Value::Null, &[], Some(7)).unwrap();
        assert_eq!(cfg.seed, 7);
        let back: RunConfig = serde_json::from_value(serde_json::to_value(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn presets_parse() {
        for name in preset_names() {
            resolve(preset(name).unwrap(), &[], None).unwrap();
        }
    }

    fn schema_keys(schema: &Value, value: &Value, path: &str, missing: &mut Vec<String>) {
        let Value::Object(map) = value else { return };
        let props = schema
            .get("properties")
            .or_else(|| schema.get("anyOf").and_then(|a| a[0].get("properties")));
        for (k, v) in map {
            let p = format!("{path}.{k}");
            match props.and_then(|pr| pr.get(k)) {
                Some(sub) => schema_keys(sub, v, &p, missing),
                None => missing.push(p),
            }
        }
    }

    #[test]
    fn published_schema_covers_every_key() {
        let schema: Value = serde_json::from_str(include_str!("../config.schema.json")).unwrap();
        let mut cfg = serde_json::to_value(RunConfig::default()).unwrap();
        // optional sections that default to absent
        cfg["axioms"]["slopes"] = json!({"p1_gap": 0.1, "p2_rem": 0.1, "p2c_rem": 0.1, "p3_rem": 0.1, "p4_err": 0.1});
        let mut missing = vec![];
        schema_keys(&schema, &cfg, "", &mut missing);
        assert!(missing.is_empty(), "schema lacks {missing:?}");
    }
}
