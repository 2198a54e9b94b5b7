//! Run configuration: presets, layering, schema validation and the
//! translation into core objects.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use genflow_core::association::{ClosedLimit, HierarchyWitnesses, LimitingFlowOptions};
use genflow_core::flow::{closed_form_marsden_limit, closed_form_torus_limit, IvpConfig};
use genflow_core::{
    build_bump, marsden_field, torus_field, AssocConfig, BumpCase, EpsilonNet, Notion, SampleGrid, ScalingLaw, Space,
    VectorFieldNet,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{CliError, Context, Result};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "GENFLOW_OUT";

/// The published schema every resolved config must satisfy.
pub const SCHEMA: &str = include_str!("../../../docs/config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Marsden,
    Torus,
    Hierarchy,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Marsden, Scenario::Torus, Scenario::Hierarchy, Scenario::Custom];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Marsden => "marsden",
            Scenario::Torus => "torus",
            Scenario::Hierarchy => "hierarchy",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario {s:?}; expected marsden, torus, hierarchy or custom")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Marsden,
    Torus,
    Zero,
    Linear,
    Monomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceKind {
    Circle,
    Torus2,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    One,
    Pi,
}

impl Unit {
    pub fn factor(self) -> f64 {
        match self {
            Unit::One => 1.0,
            Unit::Pi => PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    ClosedForm,
    Extracted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    pub case: BumpCase,
    pub space: SpaceKind,
    /// dimension of a euclidean space; 1 for the circle, 2 for the torus
    pub dim: usize,
    /// linear fields: F(x) = scale·x
    pub scale: f64,
    /// monomial fields: F(x)_i = x_i^degree
    pub degree: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub max: f64,
    pub min: f64,
    pub count: usize,
    pub scaling: ScalingLaw,
}

fn linspace(start: f64, stop: f64, count: usize, unit: Unit) -> Vec<f64> {
    let n = count.max(2);
    let span = stop - start;
    (0..n)
        .map(|k| {
            let u = start + span * k as f64 / (n - 1) as f64;
            if u.abs() <= 1e-12 * span.abs() {
                0.0
            } else {
                u * unit.factor()
            }
        })
        .collect()
}

/// `count` evenly spaced values from `start` to `stop`, in units of `unit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub unit: Unit,
}

impl Range {
    /// The values, with near-zero nodes snapped to 0 and 0 inserted if the
    /// range straddles it without hitting it.
    pub fn times(&self) -> Vec<f64> {
        let mut out = linspace(self.start, self.stop, self.count, self.unit);
        if self.start < 0.0 && self.stop > 0.0 && !out.contains(&0.0) {
            out.push(0.0);
            out.sort_by(|a, b| a.total_cmp(b));
        }
        out
    }
}

/// `per_axis` evenly spaced values on [-radius, radius] for every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    pub per_axis: usize,
    pub radius: f64,
    pub unit: Unit,
}

impl Axes {
    pub fn axis(&self) -> Vec<f64> {
        linspace(-self.radius, self.radius, self.per_axis, self.unit)
    }

    /// Product nodes, first coordinate slowest.
    pub fn nodes(&self, dim: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        let mut nodes = vec![Vec::new()];
        for _ in 0..dim {
            nodes = nodes
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        nodes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub enabled: bool,
    pub t: Range,
    pub p: Axes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub enabled: bool,
    pub initial: Vec<Vec<f64>>,
    pub t: Range,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitingSpec {
    pub enabled: bool,
    pub unit: Unit,
    pub t_sample: Vec<f64>,
    /// (s, t) pairs for Ψ(s + t) against Ψ(s) ∘ Ψ(t)
    pub pairs: Vec<[f64; 2]>,
    /// also use every grid pair (s, t) with s + t on the grid
    pub all_pairs: bool,
    pub reference: Reference,
    pub flow_tol: f64,
    pub snap_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociateSpec {
    pub notion: Notion,
    pub t: f64,
    pub unit: Unit,
    pub reference: Reference,
}

/// Association thresholds; the noise floor is always 10·tol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociationSpec {
    pub tol_zero: f64,
    pub slack: f64,
    pub m_probe: f64,
    pub fast_residual: f64,
    pub null_threshold: Option<f64>,
    pub quad_abs_tol: f64,
    pub quad_rel_tol: f64,
    pub quad_max_intervals: usize,
}

impl Default for AssociationSpec {
    fn default() -> Self {
        let d = AssocConfig::default();
        Self {
            tol_zero: d.tol_zero,
            slack: d.slack,
            m_probe: d.m_probe,
            fast_residual: d.fast_residual,
            null_threshold: d.null_threshold,
            quad_abs_tol: d.quad_abs_tol,
            quad_rel_tol: d.quad_rel_tol,
            quad_max_intervals: d.quad_max_intervals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub enabled: bool,
    pub grid: Axes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub scenario: Scenario,
    pub field: FieldSpec,
    pub epsilon: NetSpec,
    pub tol: f64,
    pub table: TableSpec,
    pub trajectories: TrajectorySpec,
    pub limiting: LimitingSpec,
    pub associate: AssociateSpec,
    pub association: AssociationSpec,
    pub witnesses: HierarchyWitnesses,
    pub conditions: ConditionSpec,
    pub out: String,
}

/// Command-line overrides, applied after the config file and environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub epsilon_min: Option<f64>,
    pub epsilon_max: Option<f64>,
    pub epsilon_count: Option<usize>,
    pub tol: Option<f64>,
    /// "START,STOP,COUNT[,pi]"
    pub grid_t: Option<String>,
    /// "N[,RADIUS[,pi]]"
    pub grid_p: Option<String>,
    pub case: Option<String>,
    pub field: Option<String>,
    pub out: Option<String>,
    /// trajectory time grid, same format as `grid_t`
    pub traj_t: Option<String>,
    /// trajectory starting points, comma-separated coordinates each
    pub p0: Vec<String>,
    pub notion: Option<String>,
    /// association time, in units of the associate section
    pub at: Option<f64>,
    pub reference: Option<String>,
}

pub fn preset(s: Scenario) -> RunConfig {
    let marsden = RunConfig {
        version: CONFIG_VERSION,
        scenario: Scenario::Marsden,
        field: FieldSpec {
            kind: FieldKind::Marsden,
            case: BumpCase::SymmetricA,
            space: SpaceKind::Circle,
            dim: 1,
            scale: 1.0,
            degree: 1,
        },
        epsilon: NetSpec { max: 1e-2, min: 1e-8, count: 7, scaling: ScalingLaw::InverseLog },
        tol: 1e-9,
        table: TableSpec {
            enabled: true,
            t: Range { start: -1.0, stop: 1.0, count: 41, unit: Unit::Pi },
            p: Axes { per_axis: 101, radius: 1.0, unit: Unit::Pi },
        },
        trajectories: TrajectorySpec {
            enabled: true,
            initial: vec![vec![-1.2], vec![-0.6], vec![0.0], vec![0.3], vec![0.9]],
            t: Range { start: -5.0, stop: 5.0, count: 201, unit: Unit::One },
        },
        limiting: LimitingSpec {
            enabled: true,
            unit: Unit::Pi,
            t_sample: vec![1.0],
            pairs: vec![[1.0, -1.0], [-1.0, 1.0], [0.5, -0.5]],
            all_pairs: false,
            reference: Reference::ClosedForm,
            flow_tol: 1e-6,
            snap_width: 2.0,
        },
        associate: AssociateSpec { notion: Notion::Pw, t: 1.0, unit: Unit::Pi, reference: Reference::ClosedForm },
        association: AssociationSpec::default(),
        witnesses: HierarchyWitnesses::default(),
        conditions: ConditionSpec { enabled: true, grid: Axes { per_axis: 64, radius: 1.0, unit: Unit::Pi } },
        out: "out/marsden".into(),
    };
    match s {
        Scenario::Marsden => marsden,
        Scenario::Torus => RunConfig {
            scenario: Scenario::Torus,
            field: FieldSpec { kind: FieldKind::Torus, space: SpaceKind::Torus2, dim: 2, ..marsden.field },
            table: TableSpec {
                enabled: true,
                t: Range { start: -1.0, stop: 1.0, count: 21, unit: Unit::Pi },
                p: Axes { per_axis: 21, radius: 1.0, unit: Unit::Pi },
            },
            trajectories: TrajectorySpec {
                enabled: true,
                initial: vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-2.0, 0.5]],
                t: Range { start: -1.0, stop: 1.0, count: 41, unit: Unit::Pi },
            },
            limiting: LimitingSpec {
                t_sample: vec![-0.5, 0.5, 1.0],
                pairs: Vec::new(),
                all_pairs: true,
                ..marsden.limiting
            },
            associate: AssociateSpec { notion: Notion::Fast, t: 0.5, ..marsden.associate },
            conditions: ConditionSpec { enabled: true, grid: Axes { per_axis: 32, radius: 1.0, unit: Unit::Pi } },
            out: "out/torus".into(),
            ..marsden
        },
        Scenario::Hierarchy => RunConfig {
            scenario: Scenario::Hierarchy,
            epsilon: NetSpec { max: 1e-1, min: 1e-4, count: 7, scaling: ScalingLaw::InverseLog },
            table: TableSpec { enabled: false, ..marsden.table },
            trajectories: TrajectorySpec { enabled: false, ..marsden.trajectories },
            limiting: LimitingSpec { enabled: false, ..marsden.limiting },
            conditions: ConditionSpec { enabled: false, ..marsden.conditions },
            out: "out/hierarchy".into(),
            ..marsden
        },
        Scenario::Custom => RunConfig {
            scenario: Scenario::Custom,
            field: FieldSpec { kind: FieldKind::Zero, ..marsden.field },
            limiting: LimitingSpec { reference: Reference::Extracted, ..marsden.limiting },
            associate: AssociateSpec { reference: Reference::Extracted, ..marsden.associate },
            out: "out/custom".into(),
            ..marsden
        },
    }
}

/// Recursive merge: objects merge key by key, anything else is replaced.
pub fn deep_merge(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Checks a resolved config document against the published schema.
pub fn validate_schema(doc: &Value) -> Result<()> {
    let errors: Vec<String> = validator()
        .iter_errors(doc)
        .map(|e| {
            let at = e.instance_path().to_string();
            format!("  at {}: {e}", if at.is_empty() { "/" } else { &at })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Schema(errors))
    }
}

/// Reads a config file; a report.json is accepted and its embedded config
/// is used.
pub fn read_config_file(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: not valid JSON: {e}", path.display())))?;
    if !doc.is_object() {
        return Err(CliError::Config(format!("{}: the config must be a JSON object", path.display())));
    }
    match (doc.get("report_version"), doc.get("config")) {
        (Some(_), Some(cfg)) => Ok(cfg.clone()),
        _ => Ok(doc),
    }
}

fn parse_unit(s: &str) -> Result<Unit> {
    match s.trim() {
        "pi" => Ok(Unit::Pi),
        "one" | "1" => Ok(Unit::One),
        other => Err(CliError::Config(format!("unknown unit {other:?}; expected pi or one"))),
    }
}

fn parse_num<T: FromStr>(flag: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| CliError::Config(format!("{flag}: cannot parse {s:?}")))
}

fn parse_range(flag: &str, s: &str) -> Result<Range> {
    let parts: Vec<&str> = s.split(',').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(CliError::Config(format!("{flag} expects START,STOP,COUNT[,pi], got {s:?}")));
    }
    Ok(Range {
        start: parse_num(flag, parts[0])?,
        stop: parse_num(flag, parts[1])?,
        count: parse_num(flag, parts[2])?,
        unit: parts.get(3).map(|u| parse_unit(u)).transpose()?.unwrap_or(Unit::One),
    })
}

fn set(doc: &mut Value, path: &[&str], v: Value) {
    let mut cur = doc;
    for key in &path[..path.len() - 1] {
        if !cur.get(*key).map(Value::is_object).unwrap_or(false) {
            cur[*key] = json!({});
        }
        cur = cur.get_mut(*key).expect("just inserted");
    }
    cur[path[path.len() - 1]] = v;
}

impl Overrides {
    fn apply(&self, doc: &mut Value) -> Result<()> {
        if let Some(v) = self.epsilon_min {
            set(doc, &["epsilon", "min"], json!(v));
        }
        if let Some(v) = self.epsilon_max {
            set(doc, &["epsilon", "max"], json!(v));
        }
        if let Some(v) = self.epsilon_count {
            set(doc, &["epsilon", "count"], json!(v));
        }
        if let Some(v) = self.tol {
            set(doc, &["tol"], json!(v));
        }
        if let Some(s) = &self.grid_t {
            set(doc, &["table", "t"], serde_json::to_value(parse_range("--grid-t", s)?).expect("plain data"));
        }
        if let Some(s) = &self.traj_t {
            set(doc, &["trajectories", "t"], serde_json::to_value(parse_range("--grid-t", s)?).expect("plain data"));
        }
        if !self.p0.is_empty() {
            let pts = self
                .p0
                .iter()
                .map(|p| p.split(',').map(|c| parse_num::<f64>("--p0", c)).collect::<Result<Vec<f64>>>())
                .collect::<Result<Vec<_>>>()?;
            set(doc, &["trajectories", "initial"], json!(pts));
        }
        if let Some(n) = &self.notion {
            set(doc, &["associate", "notion"], json!(n));
        }
        if let Some(t) = self.at {
            set(doc, &["associate", "t"], json!(t));
        }
        if let Some(r) = &self.reference {
            set(doc, &["associate", "reference"], json!(r));
        }
        if let Some(s) = &self.grid_p {
            let parts: Vec<&str> = s.split(',').collect();
            if !(1..=3).contains(&parts.len()) {
                return Err(CliError::Config(format!("--grid-p expects N[,RADIUS[,pi]], got {s:?}")));
            }
            set(doc, &["table", "p", "per_axis"], json!(parse_num::<usize>("--grid-p", parts[0])?));
            if let Some(r) = parts.get(1) {
                set(doc, &["table", "p", "radius"], json!(parse_num::<f64>("--grid-p", r)?));
                let unit = parts.get(2).map(|u| parse_unit(u)).transpose()?.unwrap_or(Unit::One);
                set(doc, &["table", "p", "unit"], serde_json::to_value(unit).expect("plain data"));
            }
        }
        if let Some(c) = &self.case {
            let case = BumpCase::parse(c).ctx("cli", || "--case".into())?;
            set(doc, &["field", "case"], serde_json::to_value(case).expect("plain data"));
        }
        if let Some(k) = &self.field {
            set(doc, &["field", "kind"], json!(k));
        }
        if let Some(o) = &self.out {
            set(doc, &["out"], json!(o));
        }
        Ok(())
    }
}

/// preset ← config file ← $GENFLOW_OUT ← flags, then schema and semantic
/// checks. Without an explicit scenario the file's scenario (or custom)
/// picks the preset.
pub fn resolve(
    scenario: Option<Scenario>,
    file: Option<&Value>,
    env_out: Option<&str>,
    overrides: &Overrides,
) -> Result<RunConfig> {
    let from_file = match file.and_then(|f| f.get("scenario")) {
        Some(Value::String(s)) => Some(s.parse::<Scenario>()?),
        Some(other) => return Err(CliError::Config(format!("scenario must be a string, got {other}"))),
        None => None,
    };
    let chosen = match (scenario, from_file) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!("the command asks for scenario {a} but the config file says {b}")))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => Scenario::Custom,
    };
    layer(preset(chosen), file, env_out, overrides, None)
}

/// Single-module commands: a preset supplies the defaults, the file's own
/// scenario is ignored and no scenario assertions apply.
pub fn resolve_module(
    base: Scenario,
    file: Option<&Value>,
    env_out: Option<&str>,
    overrides: &Overrides,
) -> Result<RunConfig> {
    layer(preset(base), file, env_out, overrides, Some(Scenario::Custom))
}

fn layer(
    base: RunConfig,
    file: Option<&Value>,
    env_out: Option<&str>,
    overrides: &Overrides,
    force: Option<Scenario>,
) -> Result<RunConfig> {
    let mut doc = serde_json::to_value(base).expect("presets serialize");
    if let Some(f) = file {
        deep_merge(&mut doc, f);
    }
    if let Some(o) = env_out.filter(|o| !o.is_empty()) {
        set(&mut doc, &["out"], json!(o));
    }
    overrides.apply(&mut doc)?;
    if let Some(s) = force {
        set(&mut doc, &["scenario"], json!(s.name()));
    }
    validate_schema(&doc)?;
    let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        match (self.scenario, self.field.kind) {
            (Scenario::Marsden, k) if k != FieldKind::Marsden => {
                return bad("the marsden scenario needs the marsden field".into())
            }
            (Scenario::Torus, k) if k != FieldKind::Torus => return bad("the torus scenario needs the torus field".into()),
            _ => {}
        }
        let f = &self.field;
        match (f.kind, f.space) {
            (FieldKind::Marsden, s) if s != SpaceKind::Circle => return bad("the marsden field lives on the circle".into()),
            (FieldKind::Torus, s) if s != SpaceKind::Torus2 => return bad("the torus field lives on torus2".into()),
            (FieldKind::Linear | FieldKind::Monomial, s) if s != SpaceKind::Euclidean => {
                return bad("linear and monomial fields need a euclidean space".into())
            }
            _ => {}
        }
        let want_dim = match f.space {
            SpaceKind::Circle => Some(1),
            SpaceKind::Torus2 => Some(2),
            SpaceKind::Euclidean => None,
        };
        if want_dim.is_some_and(|d| d != f.dim) {
            return bad(format!("field.dim must be {} on {:?}", want_dim.unwrap_or(0), f.space));
        }
        if !(self.epsilon.max > self.epsilon.min) {
            return bad("epsilon.max must exceed epsilon.min".into());
        }
        let dim = self.space()?.dim();
        for r in [&self.table.t, &self.trajectories.t] {
            if !(r.stop > r.start) || !r.start.is_finite() || !r.stop.is_finite() {
                return bad("time ranges need a finite start below stop".into());
            }
        }
        if let Some(p) = self.trajectories.initial.iter().find(|p| p.len() != dim) {
            return bad(format!("initial point {p:?} needs {dim} coordinates"));
        }
        if self.limiting.enabled && !self.table.enabled {
            return bad("the limiting-flow report needs the flow table (table.enabled)".into());
        }
        let nodes = self.table.p.per_axis.saturating_pow(dim as u32);
        if nodes > 200_000 {
            return bad(format!("the p-grid has {nodes} nodes; the limit is 200000"));
        }
        self.assoc_config().validate().ctx("association", || "thresholds".into())?;
        self.witnesses.validate().ctx("association", || "witness families".into())?;
        Ok(())
    }

    pub fn space(&self) -> Result<Space> {
        Ok(match self.field.space {
            SpaceKind::Circle => Space::Circle,
            SpaceKind::Torus2 => Space::Torus2,
            SpaceKind::Euclidean => Space::euclidean(self.field.dim).ctx("manifold", || "field.dim".into())?,
        })
    }

    pub fn net(&self) -> Result<EpsilonNet> {
        let e = &self.epsilon;
        EpsilonNet::geometric(e.max, e.min, e.count, e.scaling.clone()).ctx("epsilon-lab", || "epsilon net".into())
    }

    pub fn build_field(&self) -> Result<VectorFieldNet> {
        let net = self.net()?;
        let f = &self.field;
        let built = match f.kind {
            FieldKind::Marsden => marsden_field(f.case, &net),
            FieldKind::Torus => build_bump(f.case, false).and_then(|b| torus_field(&b, &net)),
            FieldKind::Zero => Ok(VectorFieldNet::zero(self.space()?, &net)),
            FieldKind::Linear => VectorFieldNet::linear(f.dim, f.scale, &net),
            FieldKind::Monomial => VectorFieldNet::monomial(f.dim, f.degree, &net),
        };
        built.ctx("fields", || format!("building the {:?} field", f.kind))
    }

    pub fn assoc_config(&self) -> AssocConfig {
        let a = &self.association;
        AssocConfig {
            tol_zero: a.tol_zero,
            slack: a.slack,
            noise_floor: 10.0 * self.tol,
            m_probe: a.m_probe,
            fast_residual: a.fast_residual,
            null_threshold: a.null_threshold,
            quad_abs_tol: a.quad_abs_tol,
            quad_rel_tol: a.quad_rel_tol,
            quad_max_intervals: a.quad_max_intervals,
        }
    }

    pub fn table_ivp(&self) -> Result<IvpConfig> {
        IvpConfig::new(0.0, self.table.t.times(), self.tol).ctx("flow-engine", || "table time grid".into())
    }

    pub fn trajectory_ivp(&self) -> Result<IvpConfig> {
        IvpConfig::new(0.0, self.trajectories.t.times(), self.tol).ctx("flow-engine", || "trajectory time grid".into())
    }

    pub fn p_nodes(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self.table.p.nodes(self.space()?.dim()))
    }

    pub fn condition_grid(&self) -> Result<SampleGrid> {
        let space = self.space()?;
        let axis = self.conditions.grid.axis();
        SampleGrid::product(space, vec![axis; space.dim()]).ctx("fields", || "condition grid".into())
    }

    /// The ε → 0 limit Ψ(t, p) in closed form, where one is known.
    pub fn closed_limit(&self) -> Option<ClosedLimit> {
        let case = self.field.case;
        match self.field.kind {
            FieldKind::Marsden => Some(ClosedLimit::new("closed form", move |t, p| {
                vec![closed_form_marsden_limit(case, p[0], t)]
            })),
            FieldKind::Torus => Some(ClosedLimit::new("closed form", move |t, p| {
                closed_form_torus_limit(case, t, p[0], p[1]).to_vec()
            })),
            FieldKind::Zero => Some(ClosedLimit::new("identity", |_, p| p.to_vec())),
            FieldKind::Linear => {
                let a = self.field.scale;
                Some(ClosedLimit::new("exponential", move |t, p| p.iter().map(|x| x * (a * t).exp()).collect()))
            }
            FieldKind::Monomial => match self.field.degree {
                0 => Some(ClosedLimit::new("translation", |t, p| p.iter().map(|x| x + t).collect())),
                1 => Some(ClosedLimit::new("exponential", |t, p| p.iter().map(|x| x * t.exp()).collect())),
                _ => None,
            },
        }
    }

    fn reference(&self, which: Reference) -> Result<Option<ClosedLimit>> {
        match which {
            Reference::Extracted => Ok(None),
            Reference::ClosedForm => self
                .closed_limit()
                .map(Some)
                .ok_or_else(|| CliError::Config(format!("no closed-form limit is known for the {:?} field", self.field.kind))),
        }
    }

    pub fn associate_reference(&self) -> Result<Option<ClosedLimit>> {
        self.reference(self.associate.reference)
    }

    /// Places `t` on the table grid, failing if it is not (nearly) a node.
    pub fn on_grid(&self, t: f64, grid: &[f64]) -> Result<f64> {
        grid.iter()
            .copied()
            .find(|g| (g - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| CliError::Config(format!("time {t} is not on the table grid")))
    }

    pub fn limiting_options(&self) -> Result<LimitingFlowOptions> {
        let l = &self.limiting;
        let grid = self.table.t.times();
        let u = l.unit.factor();
        let t_sample = l.t_sample.iter().map(|t| self.on_grid(t * u, &grid)).collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::new();
        for [s, t] in &l.pairs {
            let (s, t) = (self.on_grid(s * u, &grid)?, self.on_grid(t * u, &grid)?);
            self.on_grid(s + t, &grid)?;
            pairs.push((s, t));
        }
        if l.all_pairs {
            for &s in &grid {
                for &t in &grid {
                    if self.on_grid(s + t, &grid).is_ok() && !pairs.contains(&(s, t)) {
                        pairs.push((s, t));
                    }
                }
            }
        }
        let mut opts = LimitingFlowOptions::new(t_sample, pairs, self.tol);
        opts.assoc = self.assoc_config();
        opts.flow_tol = l.flow_tol;
        opts.snap_width = l.snap_width;
        if let Some(r) = self.reference(l.reference)? {
            opts = opts.with_reference(r);
        }
        Ok(opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_pass_the_schema() {
        for s in Scenario::ALL {
            let doc = serde_json::to_value(preset(s)).unwrap();
            validate_schema(&doc).unwrap();
            preset(s).validate().unwrap();
        }
    }

    #[test]
    fn ranges_hit_zero_and_the_ends() {
        let r = Range { start: -1.0, stop: 1.0, count: 41, unit: Unit::Pi };
        let t = r.times();
        assert_eq!(t.len(), 41);
        assert_eq!(t[20], 0.0);
        assert_eq!(t[40], PI);
        assert_eq!(t[0], -PI);
        // 0 is inserted when the nodes miss it
        let r = Range { start: -1.0, stop: 2.0, count: 3, unit: Unit::One };
        assert_eq!(r.times(), vec![-1.0, 0.0, 0.5, 2.0]);
    }

    #[test]
    fn product_nodes_vary_the_last_coordinate_fastest() {
        let a = Axes { per_axis: 3, radius: 1.0, unit: Unit::One };
        assert_eq!(a.nodes(2)[..3], [vec![-1.0, -1.0], vec![-1.0, 0.0], vec![-1.0, 1.0]]);
        assert_eq!(a.nodes(2).len(), 9);
    }

    #[test]
    fn layering_order() {
        let file = json!({"tol": 1e-8, "out": "from-file", "epsilon": {"count": 5}});
        let o = Overrides { tol: Some(1e-10), ..Default::default() };
        let c = resolve(Some(Scenario::Marsden), Some(&file), Some("from-env"), &o).unwrap();
        assert_eq!(c.tol, 1e-10);
        assert_eq!(c.out, "from-env");
        assert_eq!(c.epsilon.count, 5);
        assert_eq!(c.epsilon.max, 1e-2);
        let o = Overrides { out: Some("flag".into()), ..Default::default() };
        assert_eq!(resolve(Some(Scenario::Marsden), None, Some("env"), &o).unwrap().out, "flag");
    }

    #[test]
    fn schema_rejects_unknown_keys_and_bad_values() {
        for patch in [json!({"tolerance": 1e-9}), json!({"tol": -1.0}), json!({"field": {"case": "d"}})] {
            let e = resolve(Some(Scenario::Marsden), Some(&patch), None, &Overrides::default()).unwrap_err();
            assert!(matches!(e, CliError::Schema(_)), "{patch}: {e}");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn semantic_checks() {
        let patch = json!({"field": {"kind": "zero"}});
        assert!(resolve(Some(Scenario::Marsden), Some(&patch), None, &Overrides::default()).is_err());
        let patch = json!({"scenario": "torus"});
        assert!(resolve(Some(Scenario::Marsden), Some(&patch), None, &Overrides::default()).is_err());
        let o = Overrides { epsilon_min: Some(0.5), ..Default::default() };
        assert!(resolve(Some(Scenario::Marsden), None, None, &o).is_err());
    }

    #[test]
    fn grid_flags() {
        let o = Overrides { grid_t: Some("-2,2,9".into()), grid_p: Some("11,1,pi".into()), ..Default::default() };
        let c = resolve(Some(Scenario::Custom), None, None, &o).unwrap();
        assert_eq!(c.table.t.times(), vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(c.table.p.per_axis, 11);
        assert_eq!(c.table.p.unit, Unit::Pi);
        let bad = Overrides { grid_t: Some("1,2".into()), ..Default::default() };
        assert!(resolve(Some(Scenario::Custom), None, None, &bad).is_err());
    }

    #[test]
    fn round_trip_through_json() {
        for s in Scenario::ALL {
            let c = preset(s);
            let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }
}
