//! Regularization parameters: ε-nets, scaling laws σ(ε), and growth
//! classification of ε-indexed scalar diagnostics.
//!
//! Every asymptotic statement about a net `(u_ε)` is checked here on a finite
//! net. The classifier fits a scalar series against four growth models and
//! picks the weakest one that explains the data, which is the finite-sample
//! stand-in for moderate / negligible / log-type estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of net points. Rate fitting needs at least four.
pub const MIN_NET_POINTS: usize = 4;

/// A stronger growth model must beat a weaker one by this much relative
/// residual before it is preferred.
pub const DOMINANCE_MARGIN: f64 = 0.05;

/// Above this relative residual no model is considered to describe the series.
pub const AMBIGUITY_RESIDUAL: f64 = 0.2;

/// Exponent reported for series that vanish identically below some net
/// element: they decay faster than any probe power.
pub const ZERO_TAIL_EXPONENT: f64 = 64.0;

/// Width law of the mollification layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalingLaw {
    /// σ(ε) = 1/|ln ε|
    InverseLog,
    /// σ(ε) = ε^q
    Power { q: f64 },
    /// Tabulated (ε, σ) pairs, interpolated linearly in ln ε.
    Tabulated { points: Vec<(f64, f64)> },
}

impl ScalingLaw {
    pub fn sigma(&self, eps: f64) -> Result<f64> {
        sigma(self, eps)
    }

    /// Short human-readable tag used in reports.
    pub fn describe(&self) -> String {
        match self {
            ScalingLaw::InverseLog => "1/|ln eps|".to_string(),
            ScalingLaw::Power { q } => format!("eps^{q}"),
            ScalingLaw::Tabulated { points } => format!("tabulated ({} points)", points.len()),
        }
    }
}

/// Evaluates the scaling law at `eps`.
pub fn sigma(law: &ScalingLaw, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("sigma needs eps > 0, got {eps}")));
    }
    match law {
        ScalingLaw::InverseLog => {
            if eps >= 1.0 {
                return Err(Error::Domain(format!(
                    "inverse-log scaling needs eps < 1, got {eps}"
                )));
            }
            Ok(1.0 / eps.ln().abs())
        }
        ScalingLaw::Power { q } => {
            if eps > 1.0 {
                return Err(Error::Domain(format!("power scaling needs eps <= 1, got {eps}")));
            }
            Ok(eps.powf(*q))
        }
        ScalingLaw::Tabulated { points } => tabulated_sigma(points, eps),
    }
}

fn tabulated_sigma(points: &[(f64, f64)], eps: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Config("tabulated scaling needs at least two points".into()));
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if eps < lo * (1.0 - 1e-12) || eps > hi * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "eps={eps} outside tabulated range [{lo}, {hi}]"
        )));
    }
    let x = eps.ln();
    for w in pts.windows(2) {
        let (e0, s0) = w[0];
        let (e1, s1) = w[1];
        if eps <= e1 * (1.0 + 1e-12) {
            let (x0, x1) = (e0.ln(), e1.ln());
            let lam = if x1 > x0 { ((x - x0) / (x1 - x0)).clamp(0.0, 1.0) } else { 0.0 };
            return Ok(s0 + lam * (s1 - s0));
        }
    }
    Ok(pts[pts.len() - 1].1)
}

/// A finite, strictly decreasing family of regularization parameters in (0, 1]
/// together with the scaling law evaluated on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonNet {
    values: Vec<f64>,
    scaling: ScalingLaw,
}

impl EpsilonNet {
    /// Builds a net from explicit values (used for subnets such as ε_n = x/n).
    pub fn new(values: Vec<f64>, scaling: ScalingLaw) -> Result<Self> {
        if values.len() < MIN_NET_POINTS {
            return Err(Error::Config(format!(
                "an eps-net needs at least {MIN_NET_POINTS} values, got {}",
                values.len()
            )));
        }
        for &e in &values {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Config(format!("eps values must lie in (0, 1], got {e}")));
            }
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("eps values must be strictly decreasing".into()));
        }
        let sigmas = values
            .iter()
            .map(|&e| sigma(&scaling, e))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        if sigmas.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Config("sigma must be positive on the net".into()));
        }
        if sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("sigma must be nonincreasing along the net".into()));
        }
        if !(sigmas[sigmas.len() - 1] < sigmas[0]) {
            return Err(Error::Config("sigma must decrease along the net".into()));
        }
        Ok(Self { values, scaling })
    }

    /// Geometric net from `eps_max` down to `eps_min` (both included).
    pub fn geometric(eps_max: f64, eps_min: f64, count: usize, scaling: ScalingLaw) -> Result<Self> {
        if !(eps_min > 0.0 && eps_min < eps_max && eps_max <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < eps_min < eps_max <= 1, got eps_min={eps_min}, eps_max={eps_max}"
            )));
        }
        if count < MIN_NET_POINTS {
            return Err(Error::Config(format!(
                "an eps-net needs at least {MIN_NET_POINTS} values, got {count}"
            )));
        }
        let ratio = eps_min / eps_max;
        let last = (count - 1) as f64;
        let values = (0..count)
            .map(|k| match k {
                0 => eps_max,
                k if k == count - 1 => eps_min,
                k => {
                    // round to 13 significant digits so that decimal nets such
                    // as 1e-2 ... 1e-8 come out exact
                    let v = eps_max * ratio.powf(k as f64 / last);
                    format!("{v:.12e}").parse().unwrap_or(v)
                }
            })
            .collect();
        Self::new(values, scaling)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaling(&self) -> &ScalingLaw {
        &self.scaling
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn eps_max(&self) -> f64 {
        self.values[0]
    }

    pub fn eps_min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// σ at a net value. Cannot fail for values of the net.
    pub fn sigma(&self, eps: f64) -> f64 {
        sigma(&self.scaling, eps).expect("sigma validated at construction")
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.values.iter().map(|&e| self.sigma(e)).collect()
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma(self.eps_max())
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma(self.eps_min())
    }

    pub fn contains(&self, eps: f64) -> bool {
        self.find(eps).is_some()
    }

    /// The net element equal to `eps` up to a relative 1e-12.
    pub fn find(&self, eps: f64) -> Option<f64> {
        self.values.iter().copied().find(|&e| (e - eps).abs() <= 1e-12 * e)
    }

    /// Same values under a different scaling law.
    pub fn with_scaling(&self, scaling: ScalingLaw) -> Result<Self> {
        Self::new(self.values.clone(), scaling)
    }
}

/// Convenience wrapper matching the operation name used in configs.
pub fn make_epsilon_net(
    eps_max: f64,
    eps_min: f64,
    count: usize,
    scaling: ScalingLaw,
) -> Result<EpsilonNet> {
    EpsilonNet::geometric(eps_max, eps_min, count, scaling)
}

/// Growth classes, ordered from weakest claim to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthKind {
    /// value ≈ ε^m with m > 0
    NegligibleLike,
    /// value ≤ C
    Bounded,
    /// value ≈ a + c·|ln ε| with c > 0
    LogType,
    /// value ≈ K·ε^{-N}
    Power,
}

impl GrowthKind {
    pub fn label(self) -> &'static str {
        match self {
            GrowthKind::NegligibleLike => "negligible-like",
            GrowthKind::Bounded => "bounded",
            GrowthKind::LogType => "log-type",
            GrowthKind::Power => "power",
        }
    }
}

/// One fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub class: GrowthKind,
    pub constant: f64,
    pub exponent: Option<f64>,
    pub residual: f64,
    /// Parsimony rank used for tie-breaking (lower is preferred).
    #[serde(skip)]
    rank: u8,
}

/// Outcome of [`classify_growth`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthClass {
    pub class: GrowthKind,
    /// bounded: the sup of the samples; log-type: slope c; power/negligible:
    /// prefactor K.
    pub constant: f64,
    /// N for power, m_max for negligible-like.
    pub exponent: Option<f64>,
    pub residual: f64,
    pub evidence: Vec<(f64, f64)>,
    pub ambiguous: bool,
    pub runner_up: Option<Candidate>,
    pub candidates: Vec<Candidate>,
    pub margin: f64,
}

impl GrowthClass {
    /// Bounded or decaying.
    pub fn is_bounded(&self) -> bool {
        matches!(self.class, GrowthKind::Bounded | GrowthKind::NegligibleLike)
    }

    /// At most logarithmic growth.
    pub fn is_at_most_log(&self) -> bool {
        self.is_bounded() || self.class == GrowthKind::LogType
    }

    fn exact(class: GrowthKind, constant: f64, exponent: Option<f64>, evidence: Vec<(f64, f64)>) -> Self {
        Self {
            class,
            constant,
            exponent,
            residual: 0.0,
            evidence,
            ambiguous: false,
            runner_up: None,
            candidates: Vec::new(),
            margin: DOMINANCE_MARGIN,
        }
    }
}

fn relative_residual(values: &[f64], fitted: impl Fn(usize) -> f64) -> f64 {
    let n = values.len() as f64;
    let ss: f64 = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let r = (v - fitted(i)) / v;
            r * r
        })
        .sum();
    (ss / n).sqrt()
}

fn fit_bounded(values: &[f64]) -> Candidate {
    // weighted least squares with weights 1/v^2, i.e. relative errors
    let s1: f64 = values.iter().map(|v| 1.0 / v).sum();
    let s2: f64 = values.iter().map(|v| 1.0 / (v * v)).sum();
    let c = s1 / s2;
    Candidate {
        class: GrowthKind::Bounded,
        constant: values.iter().cloned().fold(0.0, f64::max),
        exponent: None,
        residual: relative_residual(values, |_| c),
        rank: 0,
    }
}

fn fit_log(logs: &[f64], values: &[f64]) -> Option<Candidate> {
    // minimise sum ((v - a - c L)/v)^2
    let (mut sw, mut swl, mut swll, mut swv, mut swlv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&l, &v) in logs.iter().zip(values) {
        let w = 1.0 / (v * v);
        sw += w;
        swl += w * l;
        swll += w * l * l;
        swv += w * v;
        swlv += w * l * v;
    }
    let det = sw * swll - swl * swl;
    if det.abs() <= f64::EPSILON * sw * swll {
        return None;
    }
    let c = (sw * swlv - swl * swv) / det;
    let a = (swv - c * swl) / sw;
    if !(c > 0.0) {
        return None;
    }
    Some(Candidate {
        class: GrowthKind::LogType,
        constant: c,
        exponent: None,
        residual: relative_residual(values, |i| a + c * logs[i]),
        rank: 1,
    })
}

fn fit_power(eps: &[f64], values: &[f64]) -> Candidate {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let k = intercept.exp();
    let residual = relative_residual(values, |i| k * eps[i].powf(slope));
    let (class, exponent) = if slope > 0.0 {
        (GrowthKind::NegligibleLike, slope)
    } else {
        (GrowthKind::Power, -slope)
    };
    Candidate { class, constant: k, exponent: Some(exponent), residual, rank: 2 }
}

/// Classifies the growth of `samples = [(ε, value)]` as ε → 0.
///
/// Fits a constant, an affine function of |ln ε|, and a power law; the model
/// with the smallest relative residual wins unless a weaker (more
/// parsimonious) model is within [`DOMINANCE_MARGIN`] of it.
pub fn classify_growth(samples: &[(f64, f64)]) -> Result<GrowthClass> {
    if samples.len() < MIN_NET_POINTS {
        return Err(Error::Input(format!(
            "classify_growth needs at least {MIN_NET_POINTS} samples, got {}",
            samples.len()
        )));
    }
    let mut evidence = samples.to_vec();
    for &(e, v) in &evidence {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Input(format!("sample eps must lie in (0, 1], got {e}")));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Input(format!("sample values must be finite and >= 0, got {v}")));
        }
    }
    evidence.sort_by(|a, b| b.0.total_cmp(&a.0));
    if evidence.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Input("sample eps values must be distinct".into()));
    }

    let values: Vec<f64> = evidence.iter().map(|s| s.1).collect();
    let vmax = values.iter().cloned().fold(0.0, f64::max);
    if vmax == 0.0 {
        return Ok(GrowthClass::exact(GrowthKind::Bounded, 0.0, None, evidence));
    }
    if let Some(first_zero) = values.iter().position(|&v| v == 0.0) {
        if values[first_zero..].iter().all(|&v| v == 0.0) {
            // vanishes identically below some net element
            return Ok(GrowthClass::exact(
                GrowthKind::NegligibleLike,
                vmax,
                Some(ZERO_TAIL_EXPONENT),
                evidence,
            ));
        }
        let mut out = GrowthClass::exact(GrowthKind::Bounded, vmax, None, evidence);
        out.residual = 1.0;
        out.ambiguous = true;
        return Ok(out);
    }

    let eps: Vec<f64> = evidence.iter().map(|s| s.0).collect();
    let logs: Vec<f64> = eps.iter().map(|e| e.ln().abs()).collect();

    let mut candidates = vec![fit_bounded(&values)];
    candidates.extend(fit_log(&logs, &values));
    candidates.push(fit_power(&eps, &values));

    let best = candidates
        .iter()
        .map(|c| c.residual)
        .fold(f64::INFINITY, f64::min);
    let chosen = candidates
        .iter()
        .filter(|c| c.residual <= best + DOMINANCE_MARGIN)
        .min_by_key(|c| c.rank)
        .cloned()
        .expect("at least one candidate");
    let runner_up = candidates
        .iter()
        .filter(|c| c.rank != chosen.rank)
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .cloned();

    Ok(GrowthClass {
        class: chosen.class,
        constant: chosen.constant,
        exponent: chosen.exponent,
        residual: chosen.residual,
        evidence,
        ambiguous: chosen.residual > AMBIGUITY_RESIDUAL,
        runner_up,
        candidates,
        margin: DOMINANCE_MARGIN,
    })
}
