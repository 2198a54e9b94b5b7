//! Flow tables Φ^ε(t, p) over (ε, t-grid, p-grid) and limit extraction.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::StepStats;
use super::ivp::{check_liftable, integrate_field, IvpConfig};
use crate::epsilon::classify_growth;
use crate::error::{Error, Result};
use crate::fields::VectorFieldNet;
use crate::manifold::Space;

/// Multiple of the tolerance below which Cauchy differences count as noise.
pub const NOISE_FLOOR: f64 = 10.0;

/// Ψ := Φ at the smallest ε, plus Cauchy diagnostics across the net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCandidate {
    /// [t][p] → coordinates, flattened
    pub psi: Vec<f64>,
    /// [t][p] → d(Φ^{ε_k}, Φ^{ε_{k+1}}) for k = 0..n_eps-1, flattened
    pub cauchy: Vec<f64>,
    /// nodes whose Cauchy differences do not decrease at all
    pub non_cauchy: Vec<(usize, usize)>,
    /// growth class of the Cauchy series by node count ("at-noise-floor"
    /// for series that never leave the integrator noise)
    pub cauchy_classes: BTreeMap<String, usize>,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTable {
    pub label: String,
    pub space: Space,
    pub eps: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub t0: f64,
    pub t_grid: Vec<f64>,
    pub p_grid: Vec<Vec<f64>>,
    /// [ε][t][p] → cover coordinates, flattened
    pub values: Vec<f64>,
    pub limit: LimitCandidate,
    pub stats: StepStats,
    pub tol: f64,
}

impl FlowTable {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn offset(&self, e: usize, ti: usize, pi: usize) -> usize {
        ((e * self.t_grid.len() + ti) * self.p_grid.len() + pi) * self.dim()
    }

    /// Φ^{ε_e}(t_ti, p_pi)
    pub fn value(&self, e: usize, ti: usize, pi: usize) -> &[f64] {
        let o = self.offset(e, ti, pi);
        &self.values[o..o + self.dim()]
    }

    /// Ψ(t_ti, p_pi)
    pub fn psi(&self, ti: usize, pi: usize) -> &[f64] {
        let o = (ti * self.p_grid.len() + pi) * self.dim();
        &self.limit.psi[o..o + self.dim()]
    }

    /// Cauchy differences at node (ti, pi), from the largest ε down.
    pub fn cauchy(&self, ti: usize, pi: usize) -> &[f64] {
        let m = self.eps.len() - 1;
        let o = (ti * self.p_grid.len() + pi) * m;
        &self.limit.cauchy[o..o + m]
    }

    /// Index of grid time t (exact up to 1e-12).
    pub fn t_index(&self, t: f64) -> Option<usize> {
        self.t_grid.iter().position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Grid node nearest to p in the space's metric.
    pub fn nearest_p(&self, p: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.p_grid.iter().enumerate() {
            let d = self.space.dist(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Fills Φ^ε(t, p) for every ε of the field's net, every grid time and every
/// grid point by independent solves, then extracts the limit candidate.
pub fn flow_table(f: &VectorFieldNet, cfg: &IvpConfig, p_grid: &[Vec<f64>]) -> Result<FlowTable> {
    cfg.validate()?;
    let d = f.space().dim();
    if p_grid.is_empty() || p_grid.iter().any(|p| p.len() != d) {
        return Err(Error::Config(format!("p-grid must be non-empty with {d} coordinates per point")));
    }
    let p_grid: Vec<Vec<f64>> = p_grid.iter().map(|p| f.space().canonical(p)).collect();
    let eps = f.net().values().to_vec();
    let tasks: Vec<(usize, usize)> = (0..eps.len()).flat_map(|e| (0..p_grid.len()).map(move |p| (e, p))).collect();
    let solved: Vec<Result<(Vec<Vec<f64>>, StepStats)>> = tasks
        .par_iter()
        .map(|&(e, pi)| {
            let at = f.at(eps[e])?;
            let (states, stats) = integrate_field(&at, &p_grid[pi], cfg.t0, &cfg.t_grid, cfg)?;
            if f.space().is_angular() {
                check_liftable(&states)?;
            }
            Ok((states, stats))
        })
        .collect();
    let (nt, np) = (cfg.t_grid.len(), p_grid.len());
    let mut values = vec![0.0; eps.len() * nt * np * d];
    let mut stats = StepStats::default();
    for (&(e, pi), r) in tasks.iter().zip(solved) {
        let (states, s) = r?;
        stats.merge(s);
        for (ti, x) in states.iter().enumerate() {
            let o = ((e * nt + ti) * np + pi) * d;
            values[o..o + d].copy_from_slice(x);
        }
    }
    let mut table = FlowTable {
        label: f.label().to_string(),
        space: f.space(),
        sigmas: eps.iter().map(|&e| f.net().sigma(e)).collect(),
        eps,
        t0: cfg.t0,
        t_grid: cfg.t_grid.clone(),
        p_grid,
        values,
        limit: LimitCandidate {
            psi: Vec::new(),
            cauchy: Vec::new(),
            non_cauchy: Vec::new(),
            cauchy_classes: BTreeMap::new(),
            rule: String::new(),
        },
        stats,
        tol: cfg.tol(),
    };
    table.limit = extract_limit(&table)?;
    Ok(table)
}

/// Ψ(t, p) := Φ^{ε_min}(t, p); Cauchy series d(Φ^{ε_k}, Φ^{ε_{k+1}}) with
/// their growth classes. A node is flagged non-Cauchy when its last
/// difference is above the noise floor and no smaller than every earlier one.
pub fn extract_limit(table: &FlowTable) -> Result<LimitCandidate> {
    let (ne, nt, np, d) = (table.eps.len(), table.t_grid.len(), table.p_grid.len(), table.dim());
    if table.values.len() != ne * nt * np * d {
        return Err(Error::Input("flow table is incomplete".into()));
    }
    let floor = NOISE_FLOOR * table.tol;
    let mut psi = Vec::with_capacity(nt * np * d);
    let mut cauchy = Vec::with_capacity(nt * np * (ne.saturating_sub(1)));
    let mut non_cauchy = Vec::new();
    let mut classes: BTreeMap<String, usize> = BTreeMap::new();
    for ti in 0..nt {
        for pi in 0..np {
            psi.extend_from_slice(table.value(ne - 1, ti, pi));
            let series: Vec<f64> = (0..ne.saturating_sub(1))
                .map(|e| table.space.dist(table.value(e, ti, pi), table.value(e + 1, ti, pi)))
                .collect();
            if let Some(&last) = series.last() {
                let earlier = series[..series.len() - 1].iter().cloned().fold(0.0, f64::max);
                if last > floor && last >= earlier {
                    non_cauchy.push((ti, pi));
                }
            }
            let label = if series.iter().all(|&v| v <= floor) {
                "at-noise-floor".to_string()
            } else if series.len() >= crate::epsilon::MIN_NET_POINTS {
                let samples: Vec<(f64, f64)> = series.iter().enumerate().map(|(k, &v)| (table.eps[k + 1], v)).collect();
                classify_growth(&samples)?.class.label().to_string()
            } else {
                "unclassified".to_string()
            };
            *classes.entry(label).or_default() += 1;
            cauchy.extend(series);
        }
    }
    Ok(LimitCandidate {
        psi,
        cauchy,
        non_cauchy,
        cauchy_classes: classes,
        rule: format!(
            "psi = value at the smallest eps; node flagged non-Cauchy when its last difference exceeds \
             {NOISE_FLOOR}*tol and is no smaller than every earlier difference"
        ),
    })
}
