//! Per-ε initial value problems, variational equations and group-law
//! residuals.

use serde::{Deserialize, Serialize};

use super::integrator::{integrate, StepStats, Tolerance};
use crate::error::{Error, Result};
use crate::fields::{FieldAt, VectorFieldNet};
use crate::manifold::{Point, Space};

/// Jacobian-norm threshold (in units of 1/σ) marking a transition layer for
/// fields that declare none.
const PROBE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvpConfig {
    pub t0: f64,
    /// increasing output times, containing t0
    pub t_grid: Vec<f64>,
    pub atol: f64,
    pub rtol: f64,
    /// step cap inside transition layers, in units of σ(ε)
    pub max_step_factor: f64,
    /// step cap elsewhere for fields with layers, in units of σ(ε)
    pub outside_step_factor: f64,
}

impl IvpConfig {
    pub const DEFAULT_LAYER_STEP: f64 = 0.025;
    pub const DEFAULT_OUTSIDE_STEP: f64 = 1.0;

    pub fn new(t0: f64, t_grid: Vec<f64>, tol: f64) -> Result<Self> {
        let cfg = Self {
            t0,
            t_grid,
            atol: tol,
            rtol: tol,
            max_step_factor: Self::DEFAULT_LAYER_STEP,
            outside_step_factor: Self::DEFAULT_OUTSIDE_STEP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Grid t_min, t_min + step, … up to t_max (inclusive up to rounding).
    /// t0 is inserted if it is not a node.
    pub fn uniform(t0: f64, t_min: f64, t_max: f64, step: f64, tol: f64) -> Result<Self> {
        if !(step > 0.0 && t_max > t_min) {
            return Err(Error::Config("uniform t-grids need t_max > t_min and step > 0".into()));
        }
        let n = ((t_max - t_min) / step + 1e-9).floor() as usize;
        let mut grid: Vec<f64> = (0..=n).map(|k| t_min + k as f64 * step).collect();
        // snap near-hits of t0 onto it so it is not duplicated
        for t in grid.iter_mut() {
            if (*t - t0).abs() < 1e-9 * step {
                *t = t0;
            }
        }
        if !grid.contains(&t0) {
            grid.push(t0);
            grid.sort_by(|a, b| a.total_cmp(b));
        }
        Self::new(t0, grid, tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.max_step_factor > 0.0 && self.outside_step_factor > 0.0) {
            return Err(Error::Config("step factors must be positive".into()));
        }
        if self.t_grid.windows(2).any(|w| !(w[1] > w[0])) || self.t_grid.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("t_grid must be finite and strictly increasing".into()));
        }
        if !self.t_grid.contains(&self.t0) {
            return Err(Error::Config(format!("t_grid must contain t0 = {}", self.t0)));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance { atol: self.atol, rtol: self.rtol }
    }

    /// Same tolerances and caps, different output times.
    pub fn with_grid(&self, t0: f64, t_grid: Vec<f64>) -> Result<Self> {
        let cfg = Self { t0, t_grid, ..self.clone() };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Larger of the two tolerances; noise floors are quoted in this unit.
    pub fn tol(&self) -> f64 {
        self.atol.max(self.rtol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub eps: f64,
    pub initial: Vec<f64>,
    pub times: Vec<f64>,
    /// cover coordinates at each time
    pub states: Vec<Vec<f64>>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalResult {
    pub eps: f64,
    pub t: f64,
    pub p: Vec<f64>,
    /// DΦ^ε(t, p), row-major rows
    pub matrix: Vec<Vec<f64>>,
    pub operator_norm: f64,
}

/// Step cap at state x for the field frozen at one ε.
pub(crate) fn step_cap<'a>(at: &'a FieldAt<'a>, cfg: &IvpConfig) -> impl Fn(&[f64]) -> f64 + 'a {
    let sigma = at.sigma();
    let inside = cfg.max_step_factor * sigma;
    let outside = cfg.outside_step_factor * sigma;
    let declared = !at.net().layers().is_empty();
    let probe = at.net().needs_fine_grid();
    let d = at.dim();
    move |y: &[f64]| {
        let x = &y[..d];
        if declared {
            if at.in_layer(x) {
                inside
            } else {
                outside
            }
        } else if probe {
            let mut jac = vec![0.0; d * d];
            at.jacobian(x, &mut jac);
            let norm = jac.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if norm * sigma >= PROBE_THRESHOLD {
                inside
            } else {
                outside
            }
        } else {
            f64::INFINITY
        }
    }
}

fn tag_point(err: Error, p: &[f64]) -> Error {
    match err {
        Error::Integration { eps, t, reason } => Error::Integration { eps, t, reason: format!("from p = {p:?}: {reason}") },
        other => other,
    }
}

/// States at the (sorted) `times`, integrating forwards and backwards from
/// `t0`. `times` may or may not contain `t0`.
pub(crate) fn integrate_field(
    at: &FieldAt<'_>,
    x0: &[f64],
    t0: f64,
    times: &[f64],
    cfg: &IvpConfig,
) -> Result<(Vec<Vec<f64>>, StepStats)> {
    let cap = step_cap(at, cfg);
    let tol = cfg.tolerance();
    let eps = at.eps();
    let rhs = |y: &[f64], dy: &mut [f64]| at.eval(y, dy);
    let fwd: Vec<f64> = times.iter().copied().filter(|&t| t > t0).collect();
    let mut bwd: Vec<f64> = times.iter().copied().filter(|&t| t < t0).collect();
    bwd.reverse();
    let (f_states, f_stats) = integrate(rhs, &cap, t0, x0, &fwd, tol, eps).map_err(|e| tag_point(e, x0))?;
    let (b_states, b_stats) = integrate(rhs, &cap, t0, x0, &bwd, tol, eps).map_err(|e| tag_point(e, x0))?;
    let mut stats = f_stats;
    stats.merge(b_stats);
    let mut out = Vec::with_capacity(times.len());
    let mut bi = b_states.into_iter().rev();
    let mut fi = f_states.into_iter();
    for &t in times {
        let s = if t < t0 {
            bi.next()
        } else if t > t0 {
            fi.next()
        } else {
            Some(x0.to_vec())
        };
        out.push(s.expect("one state per time"));
    }
    Ok((out, stats))
}

/// Φ^ε(t, x0) in cover coordinates.
pub fn flow_to(at: &FieldAt<'_>, x0: &[f64], t: f64, cfg: &IvpConfig) -> Result<Vec<f64>> {
    if t == 0.0 {
        return Ok(x0.to_vec());
    }
    let (mut s, _) = integrate_field(at, x0, 0.0, &[t], cfg)?;
    Ok(s.pop().expect("one state"))
}

fn check_point(f: &VectorFieldNet, p: &Point) -> Result<()> {
    if p.space != f.space() {
        return Err(Error::Usage(format!(
            "initial point on {} for a field on {}",
            p.space.label(),
            f.space().label()
        )));
    }
    Ok(())
}

/// Solves x' = F_ε(x), x(t0) = p0 and samples at every time of the grid.
pub fn solve_ivp(f: &VectorFieldNet, eps: f64, p0: &Point, cfg: &IvpConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_point(f, p0)?;
    let at = f.at(eps)?;
    let (states, stats) = integrate_field(&at, &p0.coords, cfg.t0, &cfg.t_grid, cfg)?;
    if f.space().is_angular() {
        check_liftable(&states)?;
    }
    Ok(Trajectory { eps: at.eps(), initial: p0.coords.clone(), times: cfg.t_grid.clone(), states, stats })
}

/// Successive samples must move less than half a turn per angle so wrapped
/// output can be unwound again.
pub(crate) fn check_liftable(states: &[Vec<f64>]) -> Result<()> {
    for (k, w) in states.windows(2).enumerate() {
        for (a, b) in w[0].iter().zip(&w[1]) {
            let step = b - a;
            if step.abs() >= std::f64::consts::PI {
                return Err(Error::Sampling { index: k + 1, step });
            }
        }
    }
    Ok(())
}

/// d(Φ^ε(t + s, p), Φ^ε(t, Φ^ε(s, p))), the inner flow re-integrated from
/// its endpoint.
pub fn flow_identity_residual(
    f: &VectorFieldNet,
    eps: f64,
    s: f64,
    t: f64,
    p: &Point,
    cfg: &IvpConfig,
) -> Result<f64> {
    check_point(f, p)?;
    let at = f.at(eps)?;
    let direct = flow_to(&at, &p.coords, t + s, cfg)?;
    let mid = flow_to(&at, &p.coords, s, cfg)?;
    let composed = flow_to(&at, &mid, t, cfg)?;
    Ok(f.space().dist(&direct, &composed))
}

/// Largest singular value of a square matrix.
pub fn operator_norm(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    if d == 1 {
        return m[0][0].abs();
    }
    // power iteration on MᵀM
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mv: Vec<f64> = (0..d).map(|i| (0..d).map(|j| m[i][j] * v[j]).sum()).collect();
        let w: Vec<f64> = (0..d).map(|j| (0..d).map(|i| m[i][j] * mv[i]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w.iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-15 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// DΦ^ε(t, p) from the variational equation M' = ∂F(Φ)·M, M(t0) = I.
pub fn variational_derivative(
    f: &VectorFieldNet,
    eps: f64,
    t: f64,
    p: &Point,
    cfg: &IvpConfig,
) -> Result<VariationalResult> {
    check_point(f, p)?;
    let at = f.at(eps)?;
    let d = f.space().dim();
    let mut y0 = p.coords.clone();
    for i in 0..d {
        for j in 0..d {
            y0.push(if i == j { 1.0 } else { 0.0 });
        }
    }
    let state = if t == cfg.t0 {
        y0
    } else {
        let cap = step_cap(&at, cfg);
        let mut jac = vec![0.0; d * d];
        let rhs = |y: &[f64], dy: &mut [f64]| {
            at.eval(&y[..d], &mut dy[..d]);
            at.jacobian(&y[..d], &mut jac);
            let m = &y[d..];
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    for k in 0..d {
                        acc += jac[i * d + k] * m[k * d + j];
                    }
                    dy[d + i * d + j] = acc;
                }
            }
        };
        let (mut s, _) = integrate(rhs, &cap, cfg.t0, &y0, &[t], cfg.tolerance(), at.eps())
            .map_err(|e| tag_point(e, &p.coords))?;
        s.pop().expect("one state")
    };
    let matrix: Vec<Vec<f64>> = (0..d).map(|i| state[d + i * d..d + (i + 1) * d].to_vec()).collect();
    let operator_norm = operator_norm(&matrix);
    Ok(VariationalResult { eps: at.eps(), t, p: p.coords.clone(), matrix, operator_norm })
}

/// Initial point helper for euclidean spaces.
pub fn euclidean_point(coords: Vec<f64>) -> Result<Point> {
    Point::new(Space::euclidean(coords.len())?, coords)
}
