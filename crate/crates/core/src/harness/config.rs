//! Experiment configuration: a versioned JSON document, optionally with a
//! matrix of overrides that expands into several experiments.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::acquisition::OuterFunction;
use crate::domain::{DensityKind, Domain, MeanFunction, SyntheticIntegrand};
use crate::engine::SelectionPolicy;
use crate::error::{AbqError, Result};
use crate::kernels::KernelSpec;
use crate::real::Precision;
use crate::transforms::Branch;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    #[serde(default = "default_precision")]
    pub precision: String,
    pub domain: Domain,
    pub kernel: KernelSpec,
    /// Prior transform; defaults to the synthetic integrand's transform, or
    /// identity for builtin functions.
    #[serde(default)]
    pub transform: Option<TransformConfig>,
    /// Prior mean; defaults to the synthetic integrand's mean, or zero.
    #[serde(default)]
    pub mean: Option<MeanFunction>,
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub selector: SelectorSection,
    pub integrand: IntegrandConfig,
    /// Integration density; uniform when absent.
    #[serde(default)]
    pub pi: Option<DensityKind>,
    pub budget: usize,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub matrix: Vec<MatrixAxis>,
}

fn default_precision() -> String {
    "f64".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    Identity,
    /// `alpha` defaults to 0.8 times the smallest integrand value seen on a
    /// pilot scan of the certificate grid.
    Square {
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        branch: Branch,
    },
    Exponential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    #[serde(default = "OuterFunction::identity")]
    pub outer: OuterFunction,
    /// Weight `q`; constant 1 when absent.
    #[serde(default)]
    pub q: Option<DensityKind>,
    pub rule: RuleConfig,
    #[serde(default = "one")]
    pub gamma_tilde: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    Constant {
        #[serde(default = "one")]
        c: f64,
    },
    WsabiL,
    WsabiM,
    Mmlt,
    Vbmc {
        delta2: f64,
        delta3: f64,
        densities: Vec<DensityKind>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    UniformGrid,
    LowDiscrepancy,
    /// Seeded from the experiment seed.
    UniformRandom,
    #[default]
    CertificateGrid,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorSection {
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Defaults to the certificate grid size.
    #[serde(default)]
    pub candidate_count: Option<usize>,
    #[serde(default)]
    pub local_refinement_steps: usize,
    #[serde(default)]
    pub policy: SelectionPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegrandConfig {
    Builtin(String),
    Synthetic(SyntheticIntegrand),
}

/// Grid sizes; unset entries take per-dimension defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points in the certificate grid (all suprema over the domain).
    #[serde(default)]
    pub certificate: Option<usize>,
    /// Nodes per axis of the estimator rule.
    #[serde(default)]
    pub oracle: Option<usize>,
    /// Nodes per axis of the ground-truth rule; 0 disables ground truth.
    #[serde(default)]
    pub reference: Option<usize>,
    /// Points per axis of the fill-distance grid.
    #[serde(default)]
    pub fill: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "yes")]
    pub certificate: bool,
    #[serde(default = "yes")]
    pub bound_check: bool,
    #[serde(default = "yes")]
    pub surrogates: bool,
    #[serde(default = "default_n_min")]
    pub rate_n_min: usize,
    #[serde(default)]
    pub rate_n_max: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            certificate: true,
            bound_check: true,
            surrogates: true,
            rate_n_min: default_n_min(),
            rate_n_max: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_n_min() -> usize {
    crate::analysis::DEFAULT_N_MIN
}

/// One matrix dimension: a dotted path into the config and the values it
/// takes. Axes expand as a cartesian product, first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixAxis {
    pub path: String,
    pub values: Vec<Value>,
}

/// Command-line overrides applied after expansion.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn precision(&self) -> Result<Precision> {
        Precision::parse(&self.precision).ok_or_else(|| {
            AbqError::Config(format!(
                "precision must be one of f64, mp256, mp512, got {:?}",
                self.precision
            ))
        })
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| "experiment".into())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(g) = o.grid {
            self.grids.certificate = Some(g);
        }
        if let Some(out) = &o.output {
            self.output = Some(out.clone());
        }
    }

    /// Structural checks that do not need the integrand.
    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err((
                "schema_version",
                format!(
                    "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if Precision::parse(&self.precision).is_none() {
            return Err((
                "precision",
                format!("unknown precision {:?}", self.precision),
            ));
        }
        let d = self.domain.dim();
        self.kernel
            .validate(d)
            .map_err(|e| ("kernel", e.to_string()))?;
        if let Some(m) = &self.mean {
            m.validate(d).map_err(|e| ("mean", e.to_string()))?;
        }
        self.acquisition
            .outer
            .validate()
            .map_err(|e| ("outer", e.to_string()))?;
        let gt = self.acquisition.gamma_tilde;
        if !(gt > 0.0 && gt <= 1.0) {
            return Err((
                "gamma_tilde",
                format!("gamma_tilde must lie in (0, 1], got {gt}"),
            ));
        }
        if let IntegrandConfig::Synthetic(s) = &self.integrand {
            s.validate(d).map_err(|e| ("synthetic", e.to_string()))?;
        }
        if self.selector.candidate_count.is_some_and(|c| c < 2) {
            return Err((
                "candidate_count",
                "candidate_count must be at least 2".into(),
            ));
        }
        if self.grids.certificate == Some(0) {
            return Err(("certificate", "certificate grid must be nonempty".into()));
        }
        Ok(())
    }
}

/// `file:line:col: message`, the line found from the offending key when the
/// error comes from semantic validation rather than the parser.
fn located(origin: &str, text: &str, key: &str, msg: &str) -> AbqError {
    let needle = format!("\"{key}\"");
    match text.lines().position(|l| l.contains(&needle)) {
        Some(i) => {
            let col = text
                .lines()
                .nth(i)
                .and_then(|l| l.find(&needle))
                .unwrap_or(0)
                + 1;
            AbqError::Config(format!("{origin}:{}:{col}: {msg}", i + 1))
        }
        None => AbqError::Config(format!("{origin}: {msg}")),
    }
}

fn set_path(v: &mut Value, path: &str, value: Value) -> std::result::Result<(), String> {
    let mut cur = v;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| {
            format!("matrix path {path:?}: segment {p:?} is not inside an object")
        })?;
        if i + 1 == parts.len() {
            obj.insert((*p).to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(*p)
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Err(format!("empty matrix path {path:?}"))
}

fn value_label(v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        Value::Object(m) => {
            let head = ["kind", "family"]
                .iter()
                .find_map(|k| m.get(*k).and_then(|x| x.as_str()));
            let mut parts: Vec<String> = head.map(str::to_string).into_iter().collect();
            for (k, x) in m {
                if head.is_some() && (k == "kind" || k == "family") {
                    continue;
                }
                match x {
                    Value::Number(_) | Value::Bool(_) => parts.push(x.to_string()),
                    Value::String(s) => parts.push(s.clone()),
                    _ => {}
                }
            }
            if parts.is_empty() {
                v.to_string()
            } else {
                parts.join("-")
            }
        }
        other => other.to_string(),
    };
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Parses a config document and expands its matrix. `origin` names the
/// source in error messages.
pub fn parse_str(text: &str, origin: &str) -> Result<Vec<ExperimentConfig>> {
    let raw: Value = serde_json::from_str(text)
        .map_err(|e| AbqError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    let base: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| AbqError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))?;
    base.check()
        .map_err(|(key, msg)| located(origin, text, key, &msg))?;

    let mut template = raw;
    template
        .as_object_mut()
        .expect("config is an object")
        .remove("matrix");
    let axes = &base.matrix;
    if axes.iter().any(|a| a.values.is_empty()) {
        return Err(located(
            origin,
            text,
            "matrix",
            "matrix axes need at least one value",
        ));
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let base_name = base.label();
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut v = template.clone();
        let mut rem = idx;
        let mut labels = Vec::with_capacity(axes.len());
        let mut picks = vec![0; axes.len()];
        for (a, axis) in axes.iter().enumerate().rev() {
            picks[a] = rem % axis.values.len();
            rem /= axis.values.len();
        }
        for (axis, &k) in axes.iter().zip(&picks) {
            let value = axis.values[k].clone();
            let last = axis.path.rsplit('.').next().unwrap_or(&axis.path);
            labels.push(format!("{last}-{}", value_label(&value)));
            set_path(&mut v, &axis.path, value).map_err(|m| located(origin, text, "matrix", &m))?;
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| {
            located(
                origin,
                text,
                "matrix",
                &format!("matrix entry {idx} ({}): {e}", labels.join(", ")),
            )
        })?;
        cfg.check().map_err(|(key, msg)| {
            located(
                origin,
                text,
                key,
                &format!("matrix entry {idx} ({}): {msg}", labels.join(", ")),
            )
        })?;
        if !axes.is_empty() {
            cfg.name = Some(format!("{base_name}__{}", labels.join("__")));
        }
        out.push(cfg);
    }
    let mut seen = std::collections::HashSet::new();
    let clash = out.iter().any(|c| !seen.insert(c.name.clone()));
    if clash {
        for (i, c) in out.iter_mut().enumerate() {
            c.name = c.name.take().map(|n| format!("{n}__{i:03}"));
        }
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<Vec<ExperimentConfig>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AbqError::Config(format!("{}: {e}", path.display())))?;
    let mut cfgs = parse_str(&text, &path.display().to_string())?;
    if cfgs.len() == 1 && cfgs[0].name.is_none() {
        cfgs[0].name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(cfgs)
}
