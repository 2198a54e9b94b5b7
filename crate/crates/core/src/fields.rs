//! ε-indexed smooth vector fields, the two scenario fields, sampling grids
//! and the hypothesis checkers run on them.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epsilon::{classify_growth, EpsilonNet, GrowthClass, GrowthKind};
use crate::error::{Error, Result};
use crate::manifold::{arc, wrap, Point, Space};
use crate::mollifier::{build_bump, Bump, BumpCase, BumpShape, SmoothedStep};
use crate::verdict::Verdict;

/// Half-width of a transition layer, in units of σ.
pub const LAYER_HALF_WIDTH: f64 = 2.0;

/// Grid refinement inside a layer, in units of σ.
pub const LAYER_REFINEMENT: f64 = 0.125;

/// Coarsest admissible uniform grid spacing, in units of σ(ε_min).
pub const MAX_GRID_SPACING: f64 = 0.25;

/// A hyperplane {x[coord] = center} around which the field varies on the
/// scale σ(ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub coord: usize,
    pub center: f64,
    /// angular coordinates repeat with period 2π
    pub periodic: bool,
}

impl Layer {
    pub fn offset(&self, x: &[f64]) -> f64 {
        if self.periodic {
            arc(x[self.coord], self.center)
        } else {
            (x[self.coord] - self.center).abs()
        }
    }
}

/// ε and the matching σ(ε), handed to custom field closures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldCtx {
    pub eps: f64,
    pub sigma: f64,
}

type MapFn = dyn Fn(&FieldCtx, &[f64], &mut [f64]) + Send + Sync;

/// A programmatic field: value and Jacobian closures plus the layer layout.
pub struct CustomField {
    pub field: Box<MapFn>,
    /// row-major d×d matrix of first partials
    pub jacobian: Box<MapFn>,
    pub layers: Vec<Layer>,
    /// true if the field varies on the σ scale away from declared layers,
    /// which forces uniform sampling grids to resolve σ(ε_min)
    pub sigma_scale: bool,
    /// sup-norm of the field over the space, if known (for t-grid checks)
    pub speed_bound: Option<f64>,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField")
            .field("layers", &self.layers)
            .field("sigma_scale", &self.sigma_scale)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Zero,
    Marsden { bump: Bump },
    Torus { bump: Bump },
    Custom(Arc<CustomField>),
}

/// Serializable description of a field, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDescription {
    pub label: String,
    pub space: Space,
    pub kind: String,
    pub bump: Option<BumpShape>,
    pub scaling: String,
}

/// A net (F_ε) of smooth vector fields on one of the supported spaces.
#[derive(Debug, Clone)]
pub struct VectorFieldNet {
    space: Space,
    net: EpsilonNet,
    label: String,
    kind: Kind,
}

/// Field `(e^{iα}) ↦ H_ε(α + π/2) - H_ε(α - π/2)` on the circle.
pub fn marsden_field(case: BumpCase, net: &EpsilonNet) -> Result<VectorFieldNet> {
    VectorFieldNet::marsden(build_bump(case, false)?, net)
}

/// Field `(α, β) ↦ (1, 1 - ρ_σ(α))` on the torus.
pub fn torus_field(bump: &Bump, net: &EpsilonNet) -> Result<VectorFieldNet> {
    VectorFieldNet::torus(bump.clone(), net)
}

impl VectorFieldNet {
    pub fn marsden(bump: Bump, net: &EpsilonNet) -> Result<Self> {
        if !(net.sigma_max() < FRAC_PI_2) {
            return Err(Error::Config(format!(
                "the two smoothed steps overlap: sigma(eps_max) = {} must be below pi/2",
                net.sigma_max()
            )));
        }
        if bump.is_plateau() {
            return Err(Error::Config("the circle field uses a standard bump".into()));
        }
        let label = format!("marsden-{}", bump.case().tag());
        Ok(Self { space: Space::Circle, net: net.clone(), label, kind: Kind::Marsden { bump } })
    }

    pub fn torus(bump: Bump, net: &EpsilonNet) -> Result<Self> {
        if !(net.sigma_max() < PI) {
            return Err(Error::Config(format!(
                "sigma(eps_max) = {} must be below pi for the torus field",
                net.sigma_max()
            )));
        }
        let label = format!("torus-{}", bump.case().tag());
        Ok(Self { space: Space::Torus2, net: net.clone(), label, kind: Kind::Torus { bump } })
    }

    pub fn zero(space: Space, net: &EpsilonNet) -> Self {
        Self { space, net: net.clone(), label: "zero".into(), kind: Kind::Zero }
    }

    pub fn custom(space: Space, net: &EpsilonNet, label: impl Into<String>, field: CustomField) -> Result<Self> {
        if field.layers.iter().any(|l| l.coord >= space.dim()) {
            return Err(Error::Config("layer coordinate out of range".into()));
        }
        Ok(Self { space, net: net.clone(), label: label.into(), kind: Kind::Custom(Arc::new(field)) })
    }

    /// F_ε(x) = scale·x on ℝⁿ.
    pub fn linear(dim: usize, scale: f64, net: &EpsilonNet) -> Result<Self> {
        let space = Space::euclidean(dim)?;
        let field = CustomField {
            field: Box::new(move |_, x, out| {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = scale * xi;
                }
            }),
            jacobian: Box::new(move |_, x, out| {
                let d = x.len();
                out.fill(0.0);
                for i in 0..d {
                    out[i * d + i] = scale;
                }
            }),
            layers: Vec::new(),
            sigma_scale: false,
            speed_bound: None,
        };
        Self::custom(space, net, format!("linear({scale})"), field)
    }

    /// F_ε(x)_i = x_i^degree on ℝⁿ, independent of ε.
    pub fn monomial(dim: usize, degree: i32, net: &EpsilonNet) -> Result<Self> {
        if degree < 0 {
            return Err(Error::Config("monomial degree must be >= 0".into()));
        }
        let space = Space::euclidean(dim)?;
        let field = CustomField {
            field: Box::new(move |_, x, out| {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = xi.powi(degree);
                }
            }),
            jacobian: Box::new(move |_, x, out| {
                let d = x.len();
                out.fill(0.0);
                if degree > 0 {
                    for i in 0..d {
                        out[i * d + i] = degree as f64 * x[i].powi(degree - 1);
                    }
                }
            }),
            layers: Vec::new(),
            sigma_scale: false,
            speed_bound: None,
        };
        Self::custom(space, net, format!("monomial({degree})"), field)
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn net(&self) -> &EpsilonNet {
        &self.net
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn bump(&self) -> Option<&Bump> {
        match &self.kind {
            Kind::Marsden { bump } | Kind::Torus { bump } => Some(bump),
            _ => None,
        }
    }

    /// Same field on a different ε-net (e.g. another scaling law).
    pub fn with_net(&self, net: &EpsilonNet) -> Result<Self> {
        match &self.kind {
            Kind::Marsden { bump } => Self::marsden(bump.clone(), net),
            Kind::Torus { bump } => Self::torus(bump.clone(), net),
            _ => Ok(Self { net: net.clone(), ..self.clone() }),
        }
    }

    pub fn describe(&self) -> FieldDescription {
        let kind = match &self.kind {
            Kind::Zero => "zero",
            Kind::Marsden { .. } => "marsden",
            Kind::Torus { .. } => "torus",
            Kind::Custom(_) => "custom",
        };
        FieldDescription {
            label: self.label.clone(),
            space: self.space,
            kind: kind.into(),
            bump: self.bump().map(|b| b.shape()),
            scaling: self.net.scaling().describe(),
        }
    }

    /// Singular set of the limiting field: the layers the net concentrates on.
    pub fn layers(&self) -> Vec<Layer> {
        match &self.kind {
            Kind::Zero => Vec::new(),
            Kind::Marsden { .. } => vec![
                Layer { coord: 0, center: -FRAC_PI_2, periodic: true },
                Layer { coord: 0, center: FRAC_PI_2, periodic: true },
            ],
            Kind::Torus { .. } => vec![Layer { coord: 0, center: 0.0, periodic: true }],
            Kind::Custom(c) => c.layers.clone(),
        }
    }

    /// Whether uniform grids must resolve σ(ε_min) everywhere.
    pub fn needs_fine_grid(&self) -> bool {
        match &self.kind {
            Kind::Custom(c) => c.sigma_scale && c.layers.is_empty(),
            _ => false,
        }
    }

    /// sup_x ‖F_ε(x)‖ over the whole net, when known in closed form.
    pub fn speed_bound(&self) -> Option<f64> {
        match &self.kind {
            Kind::Zero => Some(0.0),
            Kind::Marsden { .. } => Some(1.0),
            Kind::Torus { bump } => {
                let peak = bump.peak() / self.net.sigma_min();
                Some((1.0 + (peak - 1.0).max(1.0).powi(2)).sqrt())
            }
            Kind::Custom(c) => c.speed_bound,
        }
    }

    /// Specializes to one ε of the net.
    pub fn at(&self, eps: f64) -> Result<FieldAt<'_>> {
        match self.net.find(eps) {
            Some(e) => self.at_unchecked(e),
            None => Err(Error::Config(format!("eps = {eps:e} is not an element of the field's net"))),
        }
    }

    /// Specializes to any ε in (0, 1) for which σ is defined.
    pub fn at_unchecked(&self, eps: f64) -> Result<FieldAt<'_>> {
        let sigma = self.net.scaling().sigma(eps)?;
        let step = match &self.kind {
            Kind::Marsden { bump } | Kind::Torus { bump } => Some(SmoothedStep::new(bump.clone(), sigma)?),
            _ => None,
        };
        Ok(FieldAt { field: self, ctx: FieldCtx { eps, sigma }, step })
    }

    /// Angles at which the circle field vanishes, as closed arcs [from, to]
    /// in (-π, π]: the equilibria flanking the two layers.
    pub fn zero_set(&self, eps: f64) -> Result<Vec<(f64, f64)>> {
        let Kind::Marsden { bump } = &self.kind else {
            return Err(Error::Usage("zero sets are exposed for the circle field only".into()));
        };
        let sigma = self.net.scaling().sigma(eps)?;
        let (lo, hi) = bump.support();
        // H_ε = 0 below lo·σ and 1 above hi·σ
        Ok(vec![(FRAC_PI_2 + hi * sigma, PI), (-PI, -FRAC_PI_2 + lo * sigma)])
    }

    /// Largest relative deviation between the Jacobian and a fourth-order
    /// central difference of the field at step σ/100, over `samples`.
    /// Entries where both vanish are skipped.
    pub fn derivative_mismatch(&self, samples: &[(f64, Vec<f64>)]) -> Result<f64> {
        let d = self.space.dim();
        let mut worst = 0.0f64;
        for (eps, x) in samples {
            let at = self.at_unchecked(*eps)?;
            let h = at.sigma() / 100.0;
            let mut jac = vec![0.0; d * d];
            at.jacobian(x, &mut jac);
            let scale = jac.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut col = vec![0.0; d];
            let mut fd = vec![0.0; d * d];
            for j in 0..d {
                let mut acc = vec![0.0; d];
                for (k, w) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
                    let mut y = x.clone();
                    y[j] += k * h;
                    at.eval(&y, &mut col);
                    for i in 0..d {
                        acc[i] += w * col[i];
                    }
                }
                for i in 0..d {
                    fd[i * d + j] = acc[i] / (12.0 * h);
                }
            }
            let err = fd.iter().zip(&jac).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if scale == 0.0 && err == 0.0 {
                continue;
            }
            worst = worst.max(err / scale.max(f64::MIN_POSITIVE));
        }
        Ok(worst)
    }
}

/// A field net frozen at one ε.
#[derive(Debug, Clone)]
pub struct FieldAt<'a> {
    field: &'a VectorFieldNet,
    ctx: FieldCtx,
    step: Option<SmoothedStep>,
}

impl<'a> FieldAt<'a> {
    pub fn eps(&self) -> f64 {
        self.ctx.eps
    }

    pub fn sigma(&self) -> f64 {
        self.ctx.sigma
    }

    pub fn dim(&self) -> usize {
        self.field.space.dim()
    }

    pub fn net(&self) -> &'a VectorFieldNet {
        self.field
    }

    /// F_ε(x), x in cover coordinates.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.field.kind {
            Kind::Zero => out.fill(0.0),
            Kind::Marsden { bump } => {
                let h = self.step.as_ref().expect("step");
                let mut a = wrap(x[0]);
                if bump.case() == BumpCase::SymmetricA {
                    // the field is even; evaluating at |α| keeps that exact
                    a = a.abs();
                }
                out[0] = h.value(a + FRAC_PI_2) - h.value(a - FRAC_PI_2);
            }
            Kind::Torus { .. } => {
                let h = self.step.as_ref().expect("step");
                out[0] = 1.0;
                out[1] = 1.0 - h.derivative(wrap(x[0]));
            }
            Kind::Custom(c) => (c.field)(&self.ctx, x, out),
        }
    }

    /// Row-major Jacobian of F_ε at x.
    pub fn jacobian(&self, x: &[f64], out: &mut [f64]) {
        match &self.field.kind {
            Kind::Zero => out.fill(0.0),
            Kind::Marsden { .. } => {
                let h = self.step.as_ref().expect("step");
                let a = wrap(x[0]);
                out[0] = h.derivative(a + FRAC_PI_2) - h.derivative(a - FRAC_PI_2);
            }
            Kind::Torus { .. } => {
                let h = self.step.as_ref().expect("step");
                out[0] = 0.0;
                out[1] = 0.0;
                out[2] = -h.second_derivative(wrap(x[0]));
                out[3] = 0.0;
            }
            Kind::Custom(c) => (c.jacobian)(&self.ctx, x, out),
        }
    }

    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, &mut out);
        out
    }

    /// Whether x lies within `LAYER_HALF_WIDTH`·σ of a declared layer.
    pub fn in_layer(&self, x: &[f64]) -> bool {
        let band = LAYER_HALF_WIDTH * self.ctx.sigma;
        self.field.layers().iter().any(|l| l.offset(x) < band)
    }
}

/// A product sampling grid standing in for a compact set; refined around
/// declared layers at each ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub space: Space,
    pub axes: Vec<Vec<f64>>,
}

impl SampleGrid {
    pub fn product(space: Space, mut axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.len() != space.dim() {
            return Err(Error::Config(format!("{} needs {} grid axes", space.label(), space.dim())));
        }
        for axis in axes.iter_mut() {
            if axis.is_empty() || axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("grid axes must be non-empty and finite".into()));
            }
            if space.is_angular() {
                for v in axis.iter_mut() {
                    *v = wrap(*v);
                }
            }
            axis.sort_by(|a, b| a.total_cmp(b));
            axis.dedup();
        }
        Ok(Self { space, axes })
    }

    /// n equally spaced angles per axis, covering the circle.
    pub fn angular(space: Space, n: usize) -> Result<Self> {
        if !space.is_angular() || n == 0 {
            return Err(Error::Config("angular grids need an angular space and n >= 1".into()));
        }
        let axis: Vec<f64> = (1..=n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect();
        Self::product(space, vec![axis; space.dim()])
    }

    /// n points per axis on [-r, r]ⁿ.
    pub fn cube(dim: usize, r: f64, n: usize) -> Result<Self> {
        if n < 2 || !(r > 0.0) {
            return Err(Error::Config("cube grids need n >= 2 and r > 0".into()));
        }
        let axis: Vec<f64> = (0..n).map(|k| -r + 2.0 * r * k as f64 / (n - 1) as f64).collect();
        Self::product(Space::euclidean(dim)?, vec![axis; dim])
    }

    /// Largest gap between neighbouring nodes along any axis.
    pub fn max_spacing(&self) -> f64 {
        let mut worst = 0.0f64;
        for axis in &self.axes {
            for w in axis.windows(2) {
                worst = worst.max(w[1] - w[0]);
            }
            if self.space.is_angular() {
                let wrapgap = axis[0] + 2.0 * PI - axis[axis.len() - 1];
                worst = worst.max(wrapgap);
            }
        }
        worst
    }

    pub fn base_points(&self) -> Vec<Vec<f64>> {
        let mut pts = vec![Vec::new()];
        for axis in &self.axes {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        pts
    }

    /// Rejects grids too coarse to see the field's σ-scale structure.
    pub fn validate_for(&self, field: &VectorFieldNet) -> Result<()> {
        if self.space != field.space() {
            return Err(Error::Usage("grid and field live on different spaces".into()));
        }
        let limit = MAX_GRID_SPACING * field.net().sigma_min();
        if field.needs_fine_grid() && self.max_spacing() > limit {
            return Err(Error::Config(format!(
                "grid too coarse: spacing {} exceeds sigma(eps_min)/4 = {limit}",
                self.max_spacing()
            )));
        }
        Ok(())
    }

    /// Base nodes plus, for every declared layer, nodes at spacing σ/8 on
    /// [center - 2σ, center + 2σ] crossed with the other axes.
    pub fn points_for(&self, at: &FieldAt<'_>) -> Vec<Vec<f64>> {
        let mut pts = self.base_points();
        pts.extend(self.layer_points(&at.net().layers(), at.sigma()));
        pts
    }

    /// The refinement nodes alone: spacing σ/8 over [center - 2σ, center + 2σ]
    /// for each layer, crossed with the other axes.
    pub fn layer_points(&self, layers: &[Layer], sigma: f64) -> Vec<Vec<f64>> {
        let steps = (LAYER_HALF_WIDTH / LAYER_REFINEMENT).round() as i64;
        let mut pts = Vec::new();
        for layer in layers {
            let values: Vec<f64> = (-steps..=steps)
                .map(|k| {
                    let v = layer.center + k as f64 * LAYER_REFINEMENT * sigma;
                    if layer.periodic {
                        wrap(v)
                    } else {
                        v
                    }
                })
                .collect();
            let mut axes = self.axes.clone();
            axes[layer.coord] = values;
            let refined = SampleGrid { space: self.space, axes };
            pts.extend(refined.base_points());
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    LinearGrowth,
    GlobalBoundH,
    LogtypeDerivative,
    BoundedDerivative,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::LinearGrowth => "linear-growth",
            Condition::GlobalBoundH => "global-bound-h",
            Condition::LogtypeDerivative => "logtype-derivative",
            Condition::BoundedDerivative => "bounded-derivative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub eps: f64,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub growth: GrowthClass,
    pub witness: Witness,
    /// sampled points at the smallest ε, including layer refinement
    pub grid_points: usize,
    pub grid_spacing: f64,
    pub rule: String,
}

/// Per-ε supremum of `metric` over the layer-refined grid, with its argmax.
fn sup_series<M>(field: &VectorFieldNet, grid: &SampleGrid, metric: M) -> Result<(Vec<Witness>, usize)>
where
    M: Fn(&FieldAt<'_>, &[f64]) -> f64 + Sync,
{
    grid.validate_for(field)?;
    let per_eps: Vec<Result<(Witness, usize)>> = field
        .net()
        .values()
        .par_iter()
        .map(|&eps| {
            let at = field.at(eps)?;
            let pts = grid.points_for(&at);
            let mut best = Witness { eps, point: pts[0].clone(), value: f64::NEG_INFINITY };
            for p in &pts {
                let v = metric(&at, p);
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite field value at eps={eps:e}, x={p:?}")));
                }
                if v > best.value {
                    best = Witness { eps, point: grid.space.canonical(p), value: v };
                }
            }
            Ok((best, pts.len()))
        })
        .collect();
    let mut out = Vec::with_capacity(per_eps.len());
    let mut count = 0;
    for r in per_eps {
        let (w, n) = r?;
        count = n;
        out.push(w);
    }
    Ok((out, count))
}

fn report(
    condition: Condition,
    series: Vec<Witness>,
    grid_points: usize,
    grid: &SampleGrid,
    admissible: fn(GrowthKind) -> bool,
    rule: &str,
) -> Result<ConditionReport> {
    let samples: Vec<(f64, f64)> = series.iter().map(|w| (w.eps, w.value)).collect();
    let growth = classify_growth(&samples)?;
    let verdict = Verdict::from_growth(&growth, admissible);
    let witness = series
        .into_iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("non-empty net");
    Ok(ConditionReport {
        condition,
        verdict,
        growth,
        witness,
        grid_points,
        grid_spacing: grid.max_spacing(),
        rule: rule.into(),
    })
}

fn bounded_class(k: GrowthKind) -> bool {
    matches!(k, GrowthKind::Bounded | GrowthKind::NegligibleLike)
}

fn at_most_log_class(k: GrowthKind) -> bool {
    bounded_class(k) || k == GrowthKind::LogType
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Octave slope of the radial ratio profile above which growth in |x| is
/// judged superlinear.
pub const RADIAL_SLOPE_LIMIT: f64 = 0.5;

/// |F_ε(x)| ≤ C(1 + |x|) on ℝⁿ: the ε-series of sup ratios must be bounded
/// and the ratio must not keep growing towards the edge of the grid.
pub fn check_linear_growth(field: &VectorFieldNet, grid: &SampleGrid) -> Result<ConditionReport> {
    if field.space().is_angular() {
        return Err(Error::Usage("linear growth is checked on euclidean spaces".into()));
    }
    let ratio = |at: &FieldAt<'_>, x: &[f64]| {
        let v = at.value(x);
        let nv = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let nx = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        nv / (1.0 + nx)
    };
    let (series, n) = sup_series(field, grid, ratio)?;

    // radial profile R(r) = max over ε and |x| ≤ r of the ratio
    let pts = grid.base_points();
    let radius = |x: &[f64]| x.iter().map(|c| c * c).sum::<f64>().sqrt();
    let r_max = pts.iter().map(|p| radius(p)).fold(0.0, f64::max);
    let mut outer = 0.0f64;
    let mut inner = 0.0f64;
    for &eps in field.net().values() {
        let at = field.at(eps)?;
        for p in &pts {
            let v = ratio(&at, p);
            outer = outer.max(v);
            if radius(p) <= 0.5 * r_max {
                inner = inner.max(v);
            }
        }
    }
    let slope = if outer == 0.0 {
        0.0
    } else if inner == 0.0 {
        f64::INFINITY
    } else {
        (outer / inner).log2()
    };
    let mut rep = report(
        Condition::LinearGrowth,
        series,
        n,
        grid,
        bounded_class,
        "",
    )?;
    if rep.verdict == Verdict::Holds && !(slope < RADIAL_SLOPE_LIMIT) {
        rep.verdict = Verdict::Fails;
    }
    rep.rule = format!(
        "holds iff sup_x |F(x)|/(1+|x|) is bounded in eps and its radial profile grows by less than \
         2^{RADIAL_SLOPE_LIMIT} over the outer octave (measured log2 ratio {slope:.4})"
    );
    Ok(rep)
}

/// Global bound sup_x ‖F_ε(x)‖ = O(1).
pub fn check_global_bound(field: &VectorFieldNet, grid: &SampleGrid) -> Result<ConditionReport> {
    let (series, n) = sup_series(field, grid, |at, x| {
        at.value(x).iter().map(|c| c * c).sum::<f64>().sqrt()
    })?;
    report(
        Condition::GlobalBoundH,
        series,
        n,
        grid,
        bounded_class,
        "holds iff sup over the grid of the field norm classifies as bounded",
    )
}

/// sup_x |∂F_ε(x)| = O(|ln ε|), with |·| the largest coordinate partial.
pub fn check_logtype_derivative(field: &VectorFieldNet, grid: &SampleGrid) -> Result<ConditionReport> {
    let d = field.space().dim();
    let (series, n) = sup_series(field, grid, |at, x| {
        let mut jac = vec![0.0; d * d];
        at.jacobian(x, &mut jac);
        max_abs(&jac)
    })?;
    report(
        Condition::LogtypeDerivative,
        series,
        n,
        grid,
        at_most_log_class,
        "holds iff sup over the grid of max |coordinate partial| classifies as bounded or log-type",
    )
}

/// sup_x |∂F_ε(x)| = O(1).
pub fn check_bounded_derivative(field: &VectorFieldNet, grid: &SampleGrid) -> Result<ConditionReport> {
    let d = field.space().dim();
    let (series, n) = sup_series(field, grid, |at, x| {
        let mut jac = vec![0.0; d * d];
        at.jacobian(x, &mut jac);
        max_abs(&jac)
    })?;
    report(
        Condition::BoundedDerivative,
        series,
        n,
        grid,
        bounded_class,
        "holds iff sup over the grid of max |coordinate partial| classifies as bounded",
    )
}

/// The field as a point-to-tangent map, for callers that want typed values.
pub fn field_tangent(at: &FieldAt<'_>, p: &Point) -> Result<crate::manifold::Tangent> {
    if p.space != at.net().space() {
        return Err(Error::Usage("point and field live on different spaces".into()));
    }
    crate::manifold::Tangent::new(p.clone(), at.value(&p.coords))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epsilon::ScalingLaw;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net() -> EpsilonNet {
        EpsilonNet::geometric(1e-2, 1e-8, 7, ScalingLaw::InverseLog).unwrap()
    }

    #[test]
    fn marsden_values() {
        let f = marsden_field(BumpCase::SymmetricA, &net()).unwrap();
        let at = f.at(1e-8).unwrap();
        assert_eq!(at.value(&[0.0])[0], 1.0);
        assert_eq!(at.value(&[PI])[0], 0.0);
        assert_eq!(at.value(&[FRAC_PI_2])[0], 0.5);
        // cover coordinates wrap before evaluation
        assert_eq!(at.value(&[2.0 * PI])[0], 1.0);
    }

    #[test]
    fn marsden_support_structure() {
        for case in [BumpCase::SymmetricA, BumpCase::RightB, BumpCase::LeftC] {
            let f = marsden_field(case, &net()).unwrap();
            for &eps in f.net().values() {
                let at = f.at(eps).unwrap();
                let s = at.sigma();
                for k in 0..=4000 {
                    let a = -PI + 2.0 * PI * k as f64 / 4000.0;
                    let v = at.value(&[a])[0];
                    assert!((0.0..=1.0).contains(&v));
                    if a.abs() <= FRAC_PI_2 - s {
                        assert_eq!(v, 1.0);
                    }
                    if a.abs() >= FRAC_PI_2 + s {
                        assert_eq!(v, 0.0);
                    }
                }
                for (from, to) in f.zero_set(eps).unwrap() {
                    for a in [from, 0.5 * (from + to), to] {
                        assert_eq!(at.value(&[a])[0], 0.0, "{case:?} {a}");
                    }
                }
            }
        }
    }

    #[test]
    fn marsden_is_even_for_the_symmetric_bump() {
        let f = marsden_field(BumpCase::SymmetricA, &net()).unwrap();
        let at = f.at(1e-4).unwrap();
        for k in 0..=2000 {
            let a = PI * k as f64 / 2000.0;
            assert_eq!(at.value(&[a])[0], at.value(&[-a])[0]);
        }
    }

    #[test]
    fn overlap_is_rejected() {
        let wide = EpsilonNet::geometric(0.6, 0.1, 4, ScalingLaw::InverseLog).unwrap();
        assert!(matches!(marsden_field(BumpCase::SymmetricA, &wide), Err(Error::Config(_))));
    }

    #[test]
    fn torus_values() {
        let bump = build_bump(BumpCase::SymmetricA, false).unwrap();
        let f = torus_field(&bump, &net()).unwrap();
        let at = f.at(1e-4).unwrap();
        let s = at.sigma();
        assert_eq!(at.value(&[s, 0.3]), vec![1.0, 1.0]);
        assert_eq!(at.value(&[-2.0, 0.3]), vec![1.0, 1.0]);
        assert_eq!(at.value(&[0.0, 0.0])[1], 1.0 - bump.value(0.0) / s);
        for b in [-3.0, 0.0, 1.0, 2.5] {
            assert_eq!(at.value(&[0.01, b]), at.value(&[0.01, 0.0]));
        }
    }

    #[test]
    fn derivative_map_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bump = build_bump(BumpCase::SymmetricA, false).unwrap();
        let fields = [
            marsden_field(BumpCase::SymmetricA, &net()).unwrap(),
            marsden_field(BumpCase::RightB, &net()).unwrap(),
            torus_field(&bump, &net()).unwrap(),
        ];
        for f in &fields {
            let mut samples = Vec::new();
            while samples.len() < 1000 {
                let eps = f.net().values()[rng.gen_range(0..7)];
                let s = f.net().sigma(eps);
                let layer = f.layers()[rng.gen_range(0..f.layers().len())];
                let (lo, hi) = f.bump().unwrap().support();
                // inner 70% of the support: towards the edges the profile's
                // local scale shrinks far below σ and no fixed-step stencil
                // resolves it
                let y = lo + (hi - lo) * rng.gen_range(0.15..0.85);
                let mut x = vec![layer.center + y * s; f.space().dim()];
                if x.len() == 2 {
                    x[1] = rng.gen_range(-PI..PI);
                }
                samples.push((eps, x));
            }
            let err = f.derivative_mismatch(&samples).unwrap();
            assert!(err <= 1e-5, "{}: {err}", f.label());
        }
    }

    #[test]
    fn grids() {
        let g = SampleGrid::angular(Space::Circle, 8).unwrap();
        assert!((g.max_spacing() - PI / 4.0).abs() < 1e-12);
        let g = SampleGrid::cube(1, 10.0, 101).unwrap();
        assert!((g.max_spacing() - 0.2).abs() < 1e-12);
        let g = SampleGrid::angular(Space::Torus2, 4).unwrap();
        assert_eq!(g.base_points().len(), 16);
        let f = marsden_field(BumpCase::SymmetricA, &net()).unwrap();
        let g = SampleGrid::angular(Space::Circle, 8).unwrap();
        let pts = g.points_for(&f.at(1e-8).unwrap());
        assert_eq!(pts.len(), 8 + 2 * 33);
        assert!(pts.iter().any(|p| p[0] == -FRAC_PI_2));
    }

    #[test]
    fn coarse_grids_are_rejected_for_sigma_scale_fields() {
        let field = CustomField {
            field: Box::new(|c, x, out| out[0] = (x[0] / c.sigma).sin()),
            jacobian: Box::new(|c, x, out| out[0] = (x[0] / c.sigma).cos() / c.sigma),
            layers: Vec::new(),
            sigma_scale: true,
            speed_bound: Some(1.0),
        };
        let f = VectorFieldNet::custom(Space::euclidean(1).unwrap(), &net(), "osc", field).unwrap();
        let coarse = SampleGrid::cube(1, 1.0, 11).unwrap();
        assert!(matches!(check_global_bound(&f, &coarse), Err(Error::Config(_))));
        let fine = SampleGrid::cube(1, 1.0, 201).unwrap();
        assert!(check_global_bound(&f, &fine).is_ok());
    }

    #[test]
    fn linear_growth_examples() {
        let g = SampleGrid::cube(1, 10.0, 201).unwrap();
        let lin = VectorFieldNet::linear(1, 1.0, &net()).unwrap();
        let r = check_linear_growth(&lin, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.growth.constant <= 1.0);
        let sq = VectorFieldNet::monomial(1, 2, &net()).unwrap();
        assert_eq!(check_linear_growth(&sq, &g).unwrap().verdict, Verdict::Fails);
        let z = VectorFieldNet::zero(Space::euclidean(1).unwrap(), &net());
        let r = check_linear_growth(&z, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.growth.constant, 0.0);
    }

    #[test]
    fn global_bound_examples() {
        let g = SampleGrid::angular(Space::Circle, 256).unwrap();
        let f = marsden_field(BumpCase::SymmetricA, &net()).unwrap();
        let r = check_global_bound(&f, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.growth.constant <= 1.0 + 1e-9 && r.growth.constant >= 1.0 - 1e-12);

        let bump = build_bump(BumpCase::SymmetricA, false).unwrap();
        let t = torus_field(&bump, &net()).unwrap();
        let r = check_global_bound(&t, &SampleGrid::angular(Space::Torus2, 16).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert_eq!(r.growth.class, GrowthKind::LogType);

        let z = VectorFieldNet::zero(Space::Circle, &net());
        let r = check_global_bound(&z, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert_eq!(r.growth.constant, 0.0);
    }

    #[test]
    fn logtype_derivative_examples() {
        let g = SampleGrid::angular(Space::Circle, 256).unwrap();
        for case in [BumpCase::SymmetricA, BumpCase::RightB, BumpCase::LeftC] {
            let f = marsden_field(case, &net()).unwrap();
            let r = check_logtype_derivative(&f, &g).unwrap();
            assert_eq!(r.verdict, Verdict::Holds);
            assert_eq!(r.growth.class, GrowthKind::LogType);
            let peak = f.bump().unwrap().peak();
            assert!((r.growth.constant - peak).abs() < 0.05 * peak, "{case:?} {}", r.growth.constant);
            assert!(r.growth.residual < 0.05);
        }
        let f = marsden_field(BumpCase::SymmetricA, &net()).unwrap();
        let power = f.with_net(&net().with_scaling(ScalingLaw::Power { q: 1.0 }).unwrap()).unwrap();
        let r = check_logtype_derivative(&power, &g).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert_eq!(r.growth.class, GrowthKind::Power);
        assert!((r.growth.exponent.unwrap() - 1.0).abs() < 0.05);

        let z = VectorFieldNet::zero(Space::Circle, &net());
        assert_eq!(check_logtype_derivative(&z, &g).unwrap().verdict, Verdict::Holds);
        assert_eq!(check_bounded_derivative(&f, &g).unwrap().verdict, Verdict::Fails);
    }
}
