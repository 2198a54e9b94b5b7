//! Associations between a flow table and its limit candidate, the measured
//! flow property of the limit, and what the limiting-flow theorems predict.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hierarchy::HierarchyWitnesses;
use super::notions::{assoc_rn, conjunction, fast_assoc, model_assoc, pw_assoc, pwae_assoc, trend_verdict, zero_assoc};
use super::witnesses::Density;
use super::{AssocConfig, AssociationVerdict, NetFunction, Notion};
use crate::epsilon::{classify_growth, EpsilonNet, GrowthClass, GrowthKind};
use crate::error::{Error, Result};
use crate::fields::{Layer, SampleGrid, VectorFieldNet};
use crate::flow::table::NOISE_FLOOR;
use crate::flow::{flow_to, variational_derivative, FlowTable, IvpConfig};
use crate::manifold::{wrap, Point};
use crate::verdict::Verdict;

pub const FLOW_FAILED_HEADLINE: &str = "pw-association held, flow property failed";
pub const PW_NOT_ENOUGH: &str = "pw-association alone did NOT guarantee the flow property";
pub const TORUS_HEADLINE: &str = "limit discontinuous, flow property holds";

/// Residual lists are kept per node only below this many entries.
const KEEP_PER_NODE: usize = 20_000;
/// Half-width of the oscillation probe around a singular point, in σ.
const PROBE_HALF_WIDTH: i64 = 16;
const PROBE_STEP: f64 = 0.125;

type LimitMap = dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync;

/// A known ε → 0 limit Ψ(t, p), in cover coordinates.
#[derive(Clone)]
pub struct ClosedLimit {
    pub label: String,
    map: Arc<LimitMap>,
}

impl fmt::Debug for ClosedLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedLimit").field("label", &self.label).finish_non_exhaustive()
    }
}

impl ClosedLimit {
    pub fn new(label: impl Into<String>, map: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { label: label.into(), map: Arc::new(map) }
    }

    pub fn eval(&self, t: f64, p: &[f64]) -> Vec<f64> {
        (self.map)(t, p)
    }
}

#[derive(Debug, Clone)]
pub struct LimitingFlowOptions {
    /// times (on the table grid) at which associations and derivatives are
    /// examined
    pub t_sample: Vec<f64>,
    /// (s, t) pairs for Ψ(s + t, p) versus Ψ(s, Ψ(t, p))
    pub pairs: Vec<(f64, f64)>,
    /// compare against this limit instead of the extracted one
    pub reference: Option<ClosedLimit>,
    pub assoc: AssocConfig,
    /// largest residual for which the flow property is judged to hold
    pub flow_tol: f64,
    /// composed points this close to a layer centre, in σ(ε_min), are
    /// placed on it before Ψ is evaluated there; only points Ψ(t, ·)
    /// actually moved are snapped
    pub snap_width: f64,
}

impl LimitingFlowOptions {
    pub fn new(t_sample: Vec<f64>, pairs: Vec<(f64, f64)>, tol: f64) -> Self {
        Self {
            t_sample,
            pairs,
            reference: None,
            assoc: AssocConfig::for_tolerance(tol),
            flow_tol: 1e-6,
            snap_width: 2.0,
        }
    }

    pub fn with_reference(mut self, reference: ClosedLimit) -> Self {
        self.reference = Some(reference);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeNotions {
    pub t: f64,
    pub zero: AssociationVerdict,
    pub pw: AssociationVerdict,
    pub fast: AssociationVerdict,
    /// fast association restricted to nodes off the singular set
    pub fast_off_singular: Option<AssociationVerdict>,
    pub singular_set: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    /// (ε, max over nodes and sampled t of ‖DΦ^ε(t, p)‖)
    pub series: Vec<(f64, f64)>,
    pub growth: Option<GrowthClass>,
    pub verdict: Verdict,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResidual {
    pub s: f64,
    pub t: f64,
    pub max: f64,
    /// max over nodes whose path avoids the singular sets
    pub max_off_singular: Option<f64>,
    /// node achieving the max
    pub worst_node: Vec<f64>,
    /// composed points moved onto a layer centre
    pub snapped: usize,
    /// composed points evaluated by a fresh solve rather than a table node
    pub fresh: usize,
    /// per table node, in p_grid order (omitted for large tables)
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_node: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_singular: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub t: f64,
    pub coord: usize,
    pub center: f64,
    /// (ε, oscillation of Φ^ε(t, ·) over centre ± 2σ(ε))
    pub oscillation: Vec<(f64, f64)>,
    /// verdict of "oscillation → 0"
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub basis: Vec<String>,
    /// None when no theorem applies
    pub flow_property: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitingFlowReport {
    pub field: String,
    pub reference: String,
    pub eps_compared: Vec<f64>,
    pub notions: Vec<TimeNotions>,
    pub summary: BTreeMap<Notion, Verdict>,
    pub derivative: DerivativeReport,
    pub residuals: Vec<FlowResidual>,
    pub max_residual: f64,
    pub max_residual_off_singular: Option<f64>,
    pub flow_property: Verdict,
    pub flow_tol: f64,
    pub discontinuities: Vec<Discontinuity>,
    pub limit_discontinuous: bool,
    pub prediction: Prediction,
    pub agrees: bool,
    pub findings: Vec<String>,
    pub rule: String,
}

impl LimitingFlowReport {
    pub fn has_finding(&self, text: &str) -> bool {
        self.findings.iter().any(|f| f == text)
    }
}

/// One verdict between Φ^ε(t, ·) read from a table and the limit at time t:
/// the closed form when given, else Ψ = Φ^{ε_min}. The nodal notions use the
/// table's p-grid; the weak ones use the witness families and need ℝ.
#[allow(clippy::too_many_arguments)]
pub fn associate_table(
    table: &FlowTable,
    field: &VectorFieldNet,
    cfg: &IvpConfig,
    t: f64,
    notion: Notion,
    reference: Option<&ClosedLimit>,
    assoc: &AssocConfig,
    witnesses: &HierarchyWitnesses,
) -> Result<AssociationVerdict> {
    assoc.validate()?;
    check_table(table, field, &[t])?;
    let n = table.eps.len();
    let net = compared_net(table, field, reference.is_some())?;
    let sing = singular_set(field, t, table.eps[n - 1], cfg)?;
    let reference = reference.cloned();
    let u = flow_net(table, field, &net, t, cfg, sing.clone());
    let v = limit_net(table, field, &net, t, cfg, &reference, sing);
    let nodes = || -> Vec<Point> { table.p_grid.iter().map(|p| Point { space: table.space, coords: p.clone() }).collect() };
    let densities = || -> Vec<Density> { witnesses.density_centers.iter().map(|c| Density::bump_at(*c)).collect() };
    match notion {
        Notion::Zero => zero_assoc(&u, &v, &table_grid(table)?, assoc),
        Notion::Pw => pw_assoc(&u, &v, &nodes(), assoc),
        Notion::Pwae => pwae_assoc(&u, &v, &table_grid(table)?, assoc),
        Notion::Fast => fast_assoc(&u, &v, &nodes(), assoc),
        Notion::Model => model_assoc(&u, &v, &witnesses.test_functions()?, &densities(), assoc),
        Notion::AssocRn => assoc_rn(&u, &v, &densities(), assoc),
    }
}

/// Ψ(t, p): table value at a node, or a fresh solve at ε_min elsewhere.
struct Limit<'a> {
    table: &'a FlowTable,
    field: &'a VectorFieldNet,
    cfg: &'a IvpConfig,
    eps_min: f64,
}

impl Limit<'_> {
    fn node(&self, p: &[f64]) -> Option<usize> {
        self.table.p_grid.iter().position(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-12))
    }

    /// (value, whether a fresh solve was needed)
    fn eval(&self, t: f64, p: &[f64]) -> Result<(Vec<f64>, bool)> {
        if let (Some(ti), Some(pi)) = (self.table.t_index(t), self.node(p)) {
            return Ok((self.table.psi(ti, pi).to_vec(), false));
        }
        let at = self.field.at(self.eps_min)?;
        Ok((flow_to(&at, p, t, self.cfg)?, true))
    }
}

/// Layer centres of the field plus their preimages under the time-t flow at
/// ε_min: the places where Ψ(t, ·) can jump.
fn singular_set(field: &VectorFieldNet, t: f64, eps_min: f64, cfg: &IvpConfig) -> Result<Vec<Layer>> {
    let layers = field.layers();
    let mut out = layers.clone();
    if t == 0.0 {
        return Ok(out);
    }
    let at = field.at(eps_min)?;
    let dim = field.space().dim();
    for layer in &layers {
        let mut y = vec![0.0; dim];
        y[layer.coord] = layer.center;
        let back = flow_to(&at, &y, -t, cfg)?;
        let c = if layer.periodic { wrap(back[layer.coord]) } else { back[layer.coord] };
        let known = out.iter().any(|l| l.coord == layer.coord && (l.center - c).abs() <= 1e-12);
        if !known {
            out.push(Layer { coord: layer.coord, center: c, periodic: layer.periodic });
        }
    }
    Ok(out)
}

fn off(set: &[Layer], p: &[f64], width: f64) -> bool {
    set.iter().all(|l| l.offset(p) > width)
}

fn check_table(table: &FlowTable, field: &VectorFieldNet, times: &[f64]) -> Result<()> {
    if table.t0 != 0.0 {
        return Err(Error::Usage("limiting-flow reports need tables started at t0 = 0".into()));
    }
    if table.space != field.space() || table.eps.as_slice() != field.net().values() {
        return Err(Error::Usage("table and field do not match".into()));
    }
    for &t in times {
        if table.t_index(t).is_none() {
            return Err(Error::Config(format!("sample time {t} is not on the table grid")));
        }
    }
    Ok(())
}

/// With an extracted limit, ε_min itself is the reference and is left out.
fn compared_net(table: &FlowTable, field: &VectorFieldNet, closed: bool) -> Result<EpsilonNet> {
    let n = table.eps.len();
    let compared = if closed { table.eps.clone() } else { table.eps[..n - 1].to_vec() };
    EpsilonNet::new(compared, field.net().scaling().clone())
}

/// The product grid behind a table's p-grid.
fn table_grid(table: &FlowTable) -> Result<SampleGrid> {
    let d = table.dim();
    let mut axes = vec![Vec::new(); d];
    for p in &table.p_grid {
        for (k, v) in p.iter().enumerate() {
            if !axes[k].contains(v) {
                axes[k].push(*v);
            }
        }
    }
    // periodic endpoints may repeat a node, so only coverage is checked
    let size: usize = axes.iter().map(Vec::len).product();
    if size > table.p_grid.len() {
        return Err(Error::Usage("limiting-flow reports need a product p-grid".into()));
    }
    SampleGrid::product(table.space, axes)
}

fn flow_net(table: &FlowTable, field: &VectorFieldNet, net: &EpsilonNet, t: f64, cfg: &IvpConfig, layers: Vec<Layer>) -> NetFunction {
    let f = field.clone();
    let c = cfg.clone();
    let tb = table.clone();
    let ti = table.t_index(t);
    NetFunction::new(format!("Phi^eps({t}, .)"), field.space(), field.space(), net, move |eps, p| {
        if let (Some(ti), Some(e)) = (ti, tb.eps.iter().position(|x| *x == eps)) {
            if let Some(pi) = tb.p_grid.iter().position(|q| q.as_slice() == p) {
                return Ok(tb.value(e, ti, pi).to_vec());
            }
        }
        flow_to(&f.at(eps)?, p, t, &c)
    })
    .with_layers(layers)
}

fn limit_net(
    table: &FlowTable,
    field: &VectorFieldNet,
    net: &EpsilonNet,
    t: f64,
    cfg: &IvpConfig,
    reference: &Option<ClosedLimit>,
    layers: Vec<Layer>,
) -> NetFunction {
    let sigma_min = table.sigmas[table.sigmas.len() - 1];
    let space = field.space();
    let refine = move |_eps: f64, grid: &SampleGrid| grid.layer_points(&layers, sigma_min);
    match reference {
        Some(r) => {
            let r = r.clone();
            NetFunction::new(format!("{}({t}, .)", r.label), space, space, net, move |_, p| Ok(r.eval(t, p)))
                .with_refinement(refine)
        }
        None => {
            let f = field.clone();
            let c = cfg.clone();
            let tb = table.clone();
            let eps_min = tb.eps[tb.eps.len() - 1];
            let ti = tb.t_index(t);
            NetFunction::new(format!("Psi({t}, .)"), space, space, net, move |_, p| {
                if let Some(ti) = ti {
                    if let Some(pi) = tb.p_grid.iter().position(|q| q.as_slice() == p) {
                        return Ok(tb.psi(ti, pi).to_vec());
                    }
                }
                flow_to(&f.at(eps_min)?, p, t, &c)
            })
            .with_refinement(refine)
        }
    }
}

fn derivative_report(
    table: &FlowTable,
    field: &VectorFieldNet,
    grid: &SampleGrid,
    samples: &[(f64, Vec<Layer>)],
    cfg: &IvpConfig,
) -> Result<DerivativeReport> {
    // grid nodes plus the layers of the singular set, where DΦ grows fastest
    let mut tasks: Vec<(usize, f64, Vec<f64>)> = Vec::new();
    for (e, &sigma) in table.sigmas.iter().enumerate() {
        for (t, sing) in samples {
            for p in table.p_grid.iter().cloned().chain(grid.layer_points(sing, sigma)) {
                tasks.push((e, *t, p));
            }
        }
    }
    let norms: Vec<(usize, f64)> = tasks
        .into_par_iter()
        .map(|(e, t, p)| {
            let p = Point { space: table.space, coords: p };
            let v = variational_derivative(field, table.eps[e], t, &p, cfg)?;
            Ok((e, v.operator_norm))
        })
        .collect::<Result<_>>()?;
    let mut max = vec![0.0f64; table.eps.len()];
    for (e, n) in norms {
        max[e] = max[e].max(n);
    }
    let series: Vec<(f64, f64)> = table.eps.iter().copied().zip(max).collect();
    let growth = classify_growth(&series).ok();
    let verdict = growth
        .as_ref()
        .map(|g| Verdict::from_growth(g, |k| matches!(k, GrowthKind::Bounded | GrowthKind::NegligibleLike)))
        .unwrap_or(Verdict::Ambiguous);
    Ok(DerivativeReport {
        series,
        growth,
        verdict,
        rule: "sup over table nodes and singular-set layers of the operator norm of the variational solution at \
               each sampled t; locally bounded derivative holds iff the eps-series classifies as bounded"
            .into(),
    })
}

fn oscillation(field: &VectorFieldNet, table: &FlowTable, t: f64, layer: &Layer, cfg: &IvpConfig, acfg: &AssocConfig) -> Result<Discontinuity> {
    let dim = table.dim();
    let series: Vec<(f64, f64)> = table
        .eps
        .par_iter()
        .map(|&eps| {
            let at = field.at(eps)?;
            let sigma = at.sigma();
            let images: Vec<Vec<f64>> = (-PROBE_HALF_WIDTH..=PROBE_HALF_WIDTH)
                .map(|k| {
                    let mut y = vec![0.0; dim];
                    y[layer.coord] = layer.center + k as f64 * PROBE_STEP * sigma;
                    flow_to(&at, &y, t, cfg)
                })
                .collect::<Result<_>>()?;
            let mut osc = 0.0f64;
            for i in 0..images.len() {
                for j in i + 1..images.len() {
                    osc = osc.max(table.space.dist(&images[i], &images[j]));
                }
            }
            Ok((eps, osc))
        })
        .collect::<Result<_>>()?;
    let verdict = trend_verdict(&series, table.sigmas[0], table.sigmas[table.sigmas.len() - 1], acfg);
    Ok(Discontinuity { t, coord: layer.coord, center: layer.center, oscillation: series, verdict })
}

/// Moves a composed point onto a layer centre it lies within `width` of.
fn snap(layers: &[Layer], q: &mut [f64], width: f64) -> bool {
    let mut moved = false;
    for l in layers {
        let d = if l.periodic { wrap(q[l.coord] - l.center) } else { q[l.coord] - l.center };
        if d != 0.0 && d.abs() <= width {
            q[l.coord] -= d;
            moved = true;
        }
    }
    moved
}

fn residuals(
    limit: &Limit<'_>,
    field: &VectorFieldNet,
    pairs: &[(f64, f64)],
    opts: &LimitingFlowOptions,
    sigma_min: f64,
) -> Result<Vec<FlowResidual>> {
    let table = limit.table;
    let space = table.space;
    let layers = field.layers();
    let keep = pairs.len() * table.p_grid.len() <= KEEP_PER_NODE;
    pairs
        .iter()
        .map(|&(s, t)| {
            // s + t may miss a grid time by rounding
            let st = table.t_index(s + t).map_or(s + t, |k| table.t_grid[k]);
            let sing_t = singular_set(field, t, limit.eps_min, limit.cfg)?;
            let sing_s = singular_set(field, s, limit.eps_min, limit.cfg)?;
            let sing_st = singular_set(field, st, limit.eps_min, limit.cfg)?;
            let per: Vec<(f64, bool, bool, bool)> = table
                .p_grid
                .par_iter()
                .map(|p| {
                    let (direct, f1) = limit.eval(st, p)?;
                    let (mut mid, _) = limit.eval(t, p)?;
                    let clean = off(&sing_t, p, sigma_min) && off(&sing_st, p, sigma_min) && off(&sing_s, &mid, sigma_min);
                    // a node at rest is not a smoothing artefact of the ε_min flow
                    let moved = space.dist(&mid, p) > NOISE_FLOOR * table.tol;
                    let snapped = moved && snap(&layers, &mut mid, opts.snap_width * sigma_min);
                    let (composed, f2) = limit.eval(s, &mid)?;
                    Ok((space.dist(&direct, &composed), clean, snapped, f1 || f2))
                })
                .collect::<Result<_>>()?;
            let (mut max, mut worst) = (0.0f64, 0usize);
            for (k, r) in per.iter().enumerate() {
                if r.0 > max {
                    max = r.0;
                    worst = k;
                }
            }
            let clean: Vec<f64> = per.iter().filter(|r| r.1).map(|r| r.0).collect();
            Ok(FlowResidual {
                s,
                t,
                max,
                max_off_singular: (!clean.is_empty()).then(|| clean.iter().copied().fold(0.0, f64::max)),
                worst_node: table.p_grid[worst].clone(),
                snapped: per.iter().filter(|r| r.2).count(),
                fresh: per.iter().filter(|r| r.3).count(),
                per_node: keep.then(|| per.iter().map(|r| r.0).collect()),
                off_singular: keep.then(|| per.iter().map(|r| r.1).collect()),
            })
        })
        .collect()
}

/// Which associations hold between Φ(t, ·) and Ψ(t, ·), whether Φ has a
/// locally bounded derivative, the measured flow property of Ψ, and
/// whether the limiting-flow theorems predicted it.
pub fn limiting_flow_report(
    table: &FlowTable,
    field: &VectorFieldNet,
    cfg: &IvpConfig,
    opts: &LimitingFlowOptions,
) -> Result<LimitingFlowReport> {
    opts.assoc.validate()?;
    check_table(table, field, &opts.t_sample)?;
    if opts.t_sample.is_empty() {
        return Err(Error::Config("limiting-flow reports need at least one sample time".into()));
    }
    let n = table.eps.len();
    let eps_min = table.eps[n - 1];
    let sigma_min = table.sigmas[n - 1];
    let net = compared_net(table, field, opts.reference.is_some())?;
    let compared = net.values().to_vec();
    let grid = table_grid(table)?;
    let nodes: Vec<Point> = table.p_grid.iter().map(|p| Point { space: table.space, coords: p.clone() }).collect();

    let mut notions = Vec::new();
    let mut discontinuities = Vec::new();
    for &t in &opts.t_sample {
        let sing = singular_set(field, t, eps_min, cfg)?;
        let u = flow_net(table, field, &net, t, cfg, sing.clone());
        let v = limit_net(table, field, &net, t, cfg, &opts.reference, sing.clone());
        let zero = zero_assoc(&u, &v, &grid, &opts.assoc)?;
        let pw = pw_assoc(&u, &v, &nodes, &opts.assoc)?;
        let fast = fast_assoc(&u, &v, &nodes, &opts.assoc)?;
        let clean: Vec<Point> = nodes.iter().filter(|p| off(&sing, &p.coords, sigma_min)).cloned().collect();
        let fast_off_singular = if clean.is_empty() { None } else { Some(fast_assoc(&u, &v, &clean, &opts.assoc)?) };
        if t != 0.0 {
            for layer in &sing {
                discontinuities.push(oscillation(field, table, t, layer, cfg, &opts.assoc)?);
            }
        }
        notions.push(TimeNotions { t, zero, pw, fast, fast_off_singular, singular_set: sing });
    }
    let mut summary = BTreeMap::new();
    summary.insert(Notion::Zero, conjunction(notions.iter().map(|n| &n.zero.verdict)));
    summary.insert(Notion::Pw, conjunction(notions.iter().map(|n| &n.pw.verdict)));
    summary.insert(Notion::Fast, conjunction(notions.iter().map(|n| &n.fast.verdict)));

    let samples: Vec<(f64, Vec<Layer>)> = notions.iter().map(|n| (n.t, n.singular_set.clone())).collect();
    let derivative = derivative_report(table, field, &grid, &samples, cfg)?;

    let limit = Limit { table, field, cfg, eps_min };
    let residuals = residuals(&limit, field, &opts.pairs, opts, sigma_min)?;
    let max_residual = residuals.iter().map(|r| r.max).fold(0.0, f64::max);
    let max_residual_off_singular = residuals.iter().filter_map(|r| r.max_off_singular).reduce(f64::max);
    let flow_property = if opts.pairs.is_empty() {
        Verdict::Ambiguous
    } else {
        Verdict::from_bool(max_residual <= opts.flow_tol)
    };
    let limit_discontinuous = discontinuities.iter().any(|d| d.verdict == Verdict::Fails);

    let mut basis = Vec::new();
    let mut predicted = None;
    if summary[&Notion::Fast].holds() {
        basis.push("fast association of Phi(t,.) with Psi(t,.) implies the flow property".to_string());
        predicted = Some(true);
    }
    if summary[&Notion::Zero].holds() {
        basis.push("zero association of Phi(t,.) with Psi(t,.) implies the flow property".to_string());
        predicted = Some(true);
    }
    if summary[&Notion::Pw].holds() && derivative.verdict.holds() {
        basis.push("pw association plus a locally bounded derivative implies a continuous limit with the flow property".to_string());
        predicted = Some(true);
    }
    if basis.is_empty() {
        basis.push("no limiting-flow theorem applies; no prediction".to_string());
    }
    let measured = match flow_property {
        Verdict::Holds => Some(true),
        Verdict::Fails => Some(false),
        Verdict::Ambiguous => None,
    };
    let agrees = match (predicted, measured) {
        (Some(p), Some(m)) => p == m,
        _ => true,
    };
    let prediction = Prediction { basis, flow_property: predicted };

    let mut findings = Vec::new();
    if summary[&Notion::Pw].holds() && flow_property == Verdict::Fails {
        findings.push(FLOW_FAILED_HEADLINE.to_string());
        findings.push(PW_NOT_ENOUGH.to_string());
    }
    if limit_discontinuous && flow_property.holds() {
        findings.push(TORUS_HEADLINE.to_string());
    }
    if !agrees {
        findings.push("theorem prediction disagrees with the measured flow property".to_string());
    }

    let reference = match &opts.reference {
        Some(r) => r.label.clone(),
        None => format!("Phi at eps_min = {eps_min:e} (excluded from the compared series)"),
    };
    Ok(LimitingFlowReport {
        field: field.label().to_string(),
        reference,
        eps_compared: compared,
        notions,
        summary,
        derivative,
        residuals,
        max_residual,
        max_residual_off_singular,
        flow_property,
        flow_tol: opts.flow_tol,
        discontinuities,
        limit_discontinuous,
        prediction,
        agrees,
        findings,
        rule: format!(
            "Psi(s+t,p) versus Psi(s,Psi(t,p)), Psi read from the table at nodes and re-extracted at eps_min by a \
             fresh solve elsewhere; composed points within {} sigma(eps_min) of a layer centre are placed on it; \
             flow property holds iff every residual <= {:e}; a limit is discontinuous where the oscillation of \
             Phi^eps(t,.) over centre +- 2 sigma(eps) fails to tend to zero",
            opts.snap_width, opts.flow_tol
        ),
    })
}

