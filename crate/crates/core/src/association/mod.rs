//! Finite-sample verdicts for the association notions between nets of maps,
//! the hierarchy counterexamples and limiting-flow diagnostics.
//!
//! Every "→ 0" statement is judged by one trend rule on an ε-series; the
//! universal quantifiers over points, compacta and test functions are
//! replaced by declared finite witness families, which each verdict records.

mod hierarchy;
mod limiting;
mod notions;
mod witnesses;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::epsilon::{classify_growth, EpsilonNet, GrowthClass};
use crate::error::{Error, Result};
use crate::fields::{Layer, SampleGrid};
use crate::manifold::Space;
use crate::quadrature::QuadConfig;
use crate::verdict::Verdict;

pub use hierarchy::{hierarchy_report, hierarchy_report_with, BoundCheck, HierarchyWitnesses, HalfMassCheck, HierarchyCheck, HierarchyReport, NetVerdicts};
pub use limiting::{
    associate_table, limiting_flow_report, ClosedLimit, DerivativeReport, Discontinuity, FlowResidual, LimitingFlowOptions, LimitingFlowReport,
    Prediction, TimeNotions, FLOW_FAILED_HEADLINE, PW_NOT_ENOUGH, TORUS_HEADLINE,
};
pub use notions::{
    assoc_rn, fast_assoc, fast_assoc_on, model_assoc, pw_assoc, pw_assoc_on, pwae_assoc, pwae_assoc_on, trend_verdict,
    zero_assoc,
};
pub use witnesses::{Density, TestFunction};

type EvalFn = dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync;
type RefineFn = dyn Fn(f64, &SampleGrid) -> Vec<Vec<f64>> + Send + Sync;
type BreaksFn = dyn Fn(f64, f64, f64) -> Vec<f64> + Send + Sync;

/// A net of maps X → Y on a shared ε-net, evaluated pointwise.
#[derive(Clone)]
pub struct NetFunction {
    label: String,
    x_space: Space,
    y_space: Space,
    net: EpsilonNet,
    eval: Arc<EvalFn>,
    refine: Option<Arc<RefineFn>>,
    breaks: Option<Arc<BreaksFn>>,
    fine_scale: bool,
}

impl fmt::Debug for NetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NetFunction")
            .field("label", &self.label)
            .field("x_space", &self.x_space)
            .field("y_space", &self.y_space)
            .finish_non_exhaustive()
    }
}

impl NetFunction {
    pub fn new(
        label: impl Into<String>,
        x_space: Space,
        y_space: Space,
        net: &EpsilonNet,
        eval: impl Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            x_space,
            y_space,
            net: net.clone(),
            eval: Arc::new(eval),
            refine: None,
            breaks: None,
            fine_scale: false,
        }
    }

    /// An infallible net of maps.
    pub fn from_fn(
        label: impl Into<String>,
        x_space: Space,
        y_space: Space,
        net: &EpsilonNet,
        eval: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, x_space, y_space, net, move |e, x| Ok(eval(e, x)))
    }

    /// A map that does not depend on ε.
    pub fn fixed(
        label: impl Into<String>,
        x_space: Space,
        y_space: Space,
        net: &EpsilonNet,
        map: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self::new(label, x_space, y_space, net, move |_, x| Ok(map(x)))
    }

    /// The zero map into ℝⁿ.
    pub fn zero(x_space: Space, dim: usize, net: &EpsilonNet) -> Result<Self> {
        Ok(Self::fixed("0", x_space, Space::euclidean(dim)?, net, move |_| vec![0.0; dim]))
    }

    /// Extra sample points per ε, added to any grid the net is compared on.
    pub fn with_refinement(mut self, refine: impl Fn(f64, &SampleGrid) -> Vec<Vec<f64>> + Send + Sync + 'static) -> Self {
        self.refine = Some(Arc::new(refine));
        self
    }

    /// Refinement around layers, at the σ(ε) of each net element.
    pub fn with_layers(self, layers: Vec<Layer>) -> Self {
        let net = self.net.clone();
        self.with_refinement(move |eps, grid| {
            let sigma = net.scaling().sigma(eps).unwrap_or_else(|_| net.sigma_min());
            grid.layer_points(&layers, sigma)
        })
    }

    /// Quadrature breakpoints in [a, b] at a given ε, for nets with
    /// structure finer than adaptive refinement would find on its own.
    pub fn with_breakpoints(mut self, breaks: impl Fn(f64, f64, f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.breaks = Some(Arc::new(breaks));
        self
    }

    /// Marks the net as varying on the σ(ε) scale everywhere, so sup-norm
    /// grids must resolve σ(ε_min) unless a refinement is declared.
    pub fn varying_on_sigma_scale(mut self) -> Self {
        self.fine_scale = true;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn x_space(&self) -> Space {
        self.x_space
    }

    pub fn y_space(&self) -> Space {
        self.y_space
    }

    pub fn net(&self) -> &EpsilonNet {
        &self.net
    }

    /// u_ε(x). ε need not belong to the net (subnets are allowed).
    pub fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        (self.eval)(eps, x)
    }

    pub(crate) fn refinement(&self, eps: f64, grid: &SampleGrid) -> Vec<Vec<f64>> {
        self.refine.as_ref().map(|r| r(eps, grid)).unwrap_or_default()
    }

    pub(crate) fn breakpoints(&self, eps: f64, a: f64, b: f64) -> Vec<f64> {
        self.breaks.as_ref().map(|r| r(eps, a, b)).unwrap_or_default()
    }

    pub(crate) fn needs_fine_grid(&self) -> bool {
        self.fine_scale && self.refine.is_none()
    }

    pub(crate) fn sigma_at(&self, eps: f64) -> Result<f64> {
        match self.net.find(eps) {
            Some(e) => Ok(self.net.sigma(e)),
            None => self.net.scaling().sigma(eps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Notion {
    Zero,
    Pw,
    Pwae,
    Model,
    AssocRn,
    Fast,
}

impl Notion {
    pub fn label(self) -> &'static str {
        match self {
            Notion::Zero => "zero",
            Notion::Pw => "pw",
            Notion::Pwae => "pwae",
            Notion::Model => "model",
            Notion::AssocRn => "assoc-Rn",
            Notion::Fast => "fast",
        }
    }

    pub const ALL: [Notion; 6] = [Notion::Zero, Notion::Pw, Notion::Pwae, Notion::Model, Notion::AssocRn, Notion::Fast];
}

/// Thresholds shared by the decision rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssocConfig {
    /// "→ 0" threshold at the first net element
    pub tol_zero: f64,
    /// relative increase tolerated between successive values in the last
    /// half of the net
    pub slack: f64,
    /// absolute noise floor (10·tol for integrator data)
    pub noise_floor: f64,
    /// slope a series must exceed for fast association
    pub m_probe: f64,
    /// log-log residual below which the slope fit counts
    pub fast_residual: f64,
    /// pwae exceptional-fraction threshold; None means 2/(grid size)
    pub null_threshold: Option<f64>,
    pub quad_abs_tol: f64,
    pub quad_rel_tol: f64,
    pub quad_max_intervals: usize,
}

impl Default for AssocConfig {
    fn default() -> Self {
        let q = QuadConfig::default();
        Self {
            tol_zero: 0.1,
            slack: 0.1,
            noise_floor: 1e-8,
            m_probe: 6.0,
            fast_residual: 0.05,
            null_threshold: None,
            quad_abs_tol: q.abs_tol,
            quad_rel_tol: q.rel_tol,
            quad_max_intervals: q.max_intervals,
        }
    }
}

impl AssocConfig {
    /// Default thresholds with the noise floor at 10·tol.
    pub fn for_tolerance(tol: f64) -> Self {
        Self { noise_floor: 10.0 * tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_zero, self.noise_floor, self.m_probe, self.fast_residual, self.quad_abs_tol, self.quad_rel_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || !(self.slack >= 0.0) || self.quad_max_intervals == 0 {
            return Err(Error::Config("association thresholds must be positive".into()));
        }
        if let Some(t) = self.null_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("null threshold must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn quad(&self) -> QuadConfig {
        QuadConfig { abs_tol: self.quad_abs_tol, rel_tol: self.quad_rel_tol, max_intervals: self.quad_max_intervals }
    }
}

/// One ε-series behind a verdict: per point, per witness pair, or a sup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// (ε, value), largest ε first
    pub series: Vec<(f64, f64)>,
    pub verdict: Verdict,
    /// where the sup was attained, per ε (sup-norm series only)
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub locations: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationVerdict {
    pub notion: Notion,
    pub verdict: Verdict,
    pub lhs: String,
    pub rhs: String,
    pub witnesses: Vec<String>,
    pub evidence: Vec<Evidence>,
    /// decay rate of the pointwise max s(ε) over the evidence series, as
    /// the growth class of 1/s(ε): log-type means s ~ 1/|ln ε|, power N
    /// means s ~ ε^N, bounded means no decay. None when s vanishes somewhere.
    pub rate: Option<GrowthClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exceptional_fraction: Option<f64>,
    pub rule: String,
}

impl AssociationVerdict {
    pub fn holds(&self) -> bool {
        self.verdict.holds()
    }

    /// Evidence entries whose own verdict is not "holds".
    pub fn exceptions(&self) -> impl Iterator<Item = &Evidence> {
        self.evidence.iter().filter(|e| !e.verdict.holds())
    }
}

/// Max over evidence series sharing the same ε values; its reciprocal is
/// fitted for a decay rate.
pub(crate) fn aggregate_rate(evidence: &[Evidence]) -> Option<GrowthClass> {
    let first = evidence.first()?;
    let eps: Vec<f64> = first.series.iter().map(|p| p.0).collect();
    let mut max = vec![0.0f64; eps.len()];
    for e in evidence {
        if e.series.len() != eps.len() || e.series.iter().zip(&eps).any(|(p, q)| p.0 != *q) {
            return None;
        }
        for (m, p) in max.iter_mut().zip(&e.series) {
            *m = m.max(p.1);
        }
    }
    if max.iter().any(|m| !(*m > 0.0)) {
        return None;
    }
    let samples: Vec<(f64, f64)> = eps.into_iter().zip(max).map(|(e, m)| (e, 1.0 / m)).collect();
    classify_growth(&samples).ok()
}

pub(crate) fn check_compatible(u: &NetFunction, v: &NetFunction) -> Result<()> {
    if u.x_space != v.x_space || u.y_space != v.y_space {
        return Err(Error::Usage(format!(
            "cannot compare {} ({} -> {}) with {} ({} -> {})",
            u.label,
            u.x_space.label(),
            u.y_space.label(),
            v.label,
            v.x_space.label(),
            v.y_space.label()
        )));
    }
    if u.net.values() != v.net.values() {
        return Err(Error::Usage(format!("{} and {} are defined on different eps-nets", u.label, v.label)));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
