//! The six association notions as decision rules on ε-series.

use std::cell::RefCell;

use rayon::prelude::*;

use super::witnesses::{Density, TestFunction};
use super::{aggregate_rate, check_compatible, AssocConfig, AssociationVerdict, Evidence, NetFunction, Notion};
use crate::error::{Error, Result};
use crate::fields::{SampleGrid, MAX_GRID_SPACING};
use crate::manifold::Point;
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::verdict::Verdict;

/// "s(ε) → 0" on a finite net. Holds iff the last value is below
/// tol_zero·(1 + σ_last/σ_first) and the last half of the series is
/// nonincreasing up to the slack and the noise floor. Fails iff the whole
/// last half stays at or above that threshold. Otherwise ambiguous.
pub fn trend_verdict(series: &[(f64, f64)], sigma_first: f64, sigma_last: f64, cfg: &AssocConfig) -> Verdict {
    let n = series.len();
    if n == 0 {
        return Verdict::Ambiguous;
    }
    let threshold = cfg.tol_zero * (1.0 + sigma_last / sigma_first);
    let tail = &series[n / 2..];
    let monotone = tail.windows(2).all(|w| w[1].1 <= (1.0 + cfg.slack) * w[0].1 + cfg.noise_floor);
    let last = series[n - 1].1;
    if last < threshold && monotone {
        Verdict::Holds
    } else if tail.iter().all(|p| p.1 >= threshold) {
        Verdict::Fails
    } else {
        Verdict::Ambiguous
    }
}

fn trend_rule(cfg: &AssocConfig) -> String {
    format!(
        "s(eps) -> 0: holds iff s(eps_last) < {tz}*(1 + sigma(eps_last)/sigma(eps_first)) and s is nonincreasing \
         over the last half of the net (slack {sl}, noise floor {nf:e}); fails iff the last half stays at or above \
         that threshold; otherwise ambiguous",
        tz = cfg.tol_zero,
        sl = cfg.slack,
        nf = cfg.noise_floor
    )
}

/// All hold → holds; any fails → fails; otherwise ambiguous.
pub(crate) fn conjunction<'a>(verdicts: impl IntoIterator<Item = &'a Verdict>) -> Verdict {
    let mut out = Verdict::Holds;
    for v in verdicts {
        match v {
            Verdict::Fails => return Verdict::Fails,
            Verdict::Ambiguous => out = Verdict::Ambiguous,
            Verdict::Holds => {}
        }
    }
    out
}

fn sorted_desc(mut eps: Vec<f64>) -> Result<Vec<f64>> {
    if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Input("an eps sequence needs at least two positive values".into()));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    Ok(eps)
}

fn sigma_span(u: &NetFunction, eps: &[f64]) -> Result<(f64, f64)> {
    Ok((u.sigma_at(eps[0])?, u.sigma_at(eps[eps.len() - 1])?))
}

fn check_points<'a>(u: &NetFunction, points: impl IntoIterator<Item = &'a Point>) -> Result<()> {
    for p in points {
        if p.space != u.x_space() {
            return Err(Error::Usage(format!(
                "sample point on {} for a net on {}",
                p.space.label(),
                u.x_space().label()
            )));
        }
    }
    Ok(())
}

/// d(u_ε(p), v_ε(p)) along each point's ε sequence.
fn point_series(u: &NetFunction, v: &NetFunction, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<Vec<(f64, f64)>>> {
    let y = u.y_space();
    samples
        .par_iter()
        .map(|(p, eps)| {
            eps.iter()
                .map(|&e| Ok((e, y.dist(&u.eval(e, p)?, &v.eval(e, p)?))))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn net_samples(u: &NetFunction, points: &[Vec<f64>]) -> Vec<(Vec<f64>, Vec<f64>)> {
    points.iter().map(|p| (p.clone(), u.net().values().to_vec())).collect()
}

fn subnet_samples(samples: &[(Point, Vec<f64>)]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    samples.iter().map(|(p, e)| Ok((p.coords.clone(), sorted_desc(e.clone())?))).collect()
}

fn pointwise_evidence(
    u: &NetFunction,
    v: &NetFunction,
    samples: &[(Vec<f64>, Vec<f64>)],
    judge: impl Fn(&[(f64, f64)], f64, f64) -> Verdict + Sync,
) -> Result<Vec<Evidence>> {
    let series = point_series(u, v, samples)?;
    samples
        .iter()
        .zip(series)
        .map(|((p, eps), s)| {
            let (first, last) = sigma_span(u, eps)?;
            let verdict = judge(&s, first, last);
            Ok(Evidence { label: format!("p = {p:?}"), point: Some(p.clone()), series: s, verdict, locations: Vec::new() })
        })
        .collect()
}

fn verdict(
    notion: Notion,
    u: &NetFunction,
    v: &NetFunction,
    verdict: Verdict,
    witnesses: Vec<String>,
    evidence: Vec<Evidence>,
    exceptional_fraction: Option<f64>,
    rule: String,
) -> AssociationVerdict {
    let rate = aggregate_rate(&evidence);
    AssociationVerdict {
        notion,
        verdict,
        lhs: u.label().to_string(),
        rhs: v.label().to_string(),
        witnesses,
        evidence,
        rate,
        exceptional_fraction,
        rule,
    }
}

fn point_labels(samples: &[(Vec<f64>, Vec<f64>)]) -> Vec<String> {
    samples.iter().map(|(p, _)| format!("{p:?}")).collect()
}

/// Uniform convergence on a compact set sampled by `grid`: the sup over the
/// grid (plus each net's declared refinement) must tend to zero.
pub fn zero_assoc(u: &NetFunction, v: &NetFunction, grid: &SampleGrid, cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    cfg.validate()?;
    if grid.space != u.x_space() {
        return Err(Error::Usage("grid and nets live on different spaces".into()));
    }
    let limit = MAX_GRID_SPACING * u.net().sigma_min();
    if (u.needs_fine_grid() || v.needs_fine_grid()) && grid.max_spacing() > limit {
        return Err(Error::Config(format!(
            "grid too coarse: spacing {} exceeds sigma(eps_min)/4 = {limit}",
            grid.max_spacing()
        )));
    }
    let base = grid.base_points();
    let y = u.y_space();
    let per_eps: Vec<(f64, f64, Vec<f64>)> = u
        .net()
        .values()
        .par_iter()
        .map(|&eps| {
            let mut pts = base.clone();
            pts.extend(u.refinement(eps, grid));
            pts.extend(v.refinement(eps, grid));
            let mut best = (0.0f64, pts[0].clone());
            for p in pts {
                let d = y.dist(&u.eval(eps, &p)?, &v.eval(eps, &p)?);
                if d > best.0 {
                    best = (d, p);
                }
            }
            Ok((eps, best.0, best.1))
        })
        .collect::<Result<_>>()?;
    let series: Vec<(f64, f64)> = per_eps.iter().map(|(e, d, _)| (*e, *d)).collect();
    let locations = per_eps.into_iter().map(|(_, _, p)| p).collect();
    let net = u.net();
    let result = trend_verdict(&series, net.sigma_max(), net.sigma_min(), cfg);
    let evidence = vec![Evidence { label: "sup over K".into(), point: None, series, verdict: result, locations }];
    let rule = format!("{} (sup over {} grid nodes plus refinements)", trend_rule(cfg), base.len());
    Ok(verdict(Notion::Zero, u, v, result, vec![format!("K grid, {} nodes", base.len())], evidence, None, rule))
}

/// Pointwise convergence at each sampled point, along the net.
pub fn pw_assoc(u: &NetFunction, v: &NetFunction, points: &[Point], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    check_points(u, points)?;
    let pts: Vec<Vec<f64>> = points.iter().map(|p| p.coords.clone()).collect();
    pw_inner(u, v, &net_samples(u, &pts), cfg)
}

/// Pointwise convergence along per-point ε sequences (subnets).
pub fn pw_assoc_on(u: &NetFunction, v: &NetFunction, samples: &[(Point, Vec<f64>)], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    check_points(u, samples.iter().map(|s| &s.0))?;
    pw_inner(u, v, &subnet_samples(samples)?, cfg)
}

fn pw_inner(u: &NetFunction, v: &NetFunction, samples: &[(Vec<f64>, Vec<f64>)], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("pointwise association needs at least one point".into()));
    }
    let evidence = pointwise_evidence(u, v, samples, |s, a, b| trend_verdict(s, a, b, cfg))?;
    let result = conjunction(evidence.iter().map(|e| &e.verdict));
    let rule = format!("per point: {}; holds iff every sampled point holds", trend_rule(cfg));
    Ok(verdict(Notion::Pw, u, v, result, point_labels(samples), evidence, None, rule))
}

/// Pointwise convergence at all grid nodes but an exceptional fraction.
pub fn pwae_assoc(u: &NetFunction, v: &NetFunction, grid: &SampleGrid, cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    if grid.space != u.x_space() {
        return Err(Error::Usage("grid and nets live on different spaces".into()));
    }
    pwae_inner(u, v, &net_samples(u, &grid.base_points()), cfg)
}

pub fn pwae_assoc_on(u: &NetFunction, v: &NetFunction, samples: &[(Point, Vec<f64>)], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    check_points(u, samples.iter().map(|s| &s.0))?;
    pwae_inner(u, v, &subnet_samples(samples)?, cfg)
}

fn pwae_inner(u: &NetFunction, v: &NetFunction, samples: &[(Vec<f64>, Vec<f64>)], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("pwae association needs at least one grid node".into()));
    }
    let evidence = pointwise_evidence(u, v, samples, |s, a, b| trend_verdict(s, a, b, cfg))?;
    let n = evidence.len() as f64;
    let failing = evidence.iter().filter(|e| e.verdict == Verdict::Fails).count() as f64;
    let not_holding = evidence.iter().filter(|e| !e.verdict.holds()).count() as f64;
    let threshold = cfg.null_threshold.unwrap_or(2.0 / n);
    let fraction = not_holding / n;
    let result = if fraction <= threshold {
        Verdict::Holds
    } else if failing / n > threshold {
        Verdict::Fails
    } else {
        Verdict::Ambiguous
    };
    let rule = format!(
        "per node: {}; exceptional fraction = non-holding nodes / {} nodes; holds iff fraction <= {threshold:e} \
         (null-set surrogate{}), fails iff failing nodes alone exceed it",
        trend_rule(cfg),
        samples.len(),
        if cfg.null_threshold.is_none() { " 2/(grid size)" } else { ", declared" }
    );
    // keep the evidence compact: only nodes that did not hold
    let exceptions: Vec<Evidence> = evidence.iter().filter(|e| !e.verdict.holds()).cloned().collect();
    let mut out = verdict(Notion::Pwae, u, v, result, point_labels(samples), evidence, Some(fraction), rule);
    if out.evidence.len() > 64 && exceptions.len() < out.evidence.len() {
        out.evidence = exceptions;
    }
    Ok(out)
}

/// ∫ (f∘u_ε - f∘v_ε)·φ → 0 for every declared (f, φ).
pub fn model_assoc(
    u: &NetFunction,
    v: &NetFunction,
    tests: &[TestFunction],
    densities: &[Density],
    cfg: &AssocConfig,
) -> Result<AssociationVerdict> {
    weak_inner(Notion::Model, u, v, tests, densities, cfg)
}

/// Weak convergence of u_ε - v_ε: model association with f ranging over
/// the coordinate functions of the target.
pub fn assoc_rn(u: &NetFunction, v: &NetFunction, densities: &[Density], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    if u.y_space().is_angular() {
        return Err(Error::Usage("assoc_Rn needs euclidean targets".into()));
    }
    let tests: Vec<TestFunction> = (0..u.y_space().dim()).map(TestFunction::component).collect();
    weak_inner(Notion::AssocRn, u, v, &tests, densities, cfg)
}

fn weak_inner(
    notion: Notion,
    u: &NetFunction,
    v: &NetFunction,
    tests: &[TestFunction],
    densities: &[Density],
    cfg: &AssocConfig,
) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    cfg.validate()?;
    if u.x_space().dim() != 1 || u.x_space().is_angular() {
        return Err(Error::Usage("weak association is integrated over R^1".into()));
    }
    if tests.is_empty() || densities.is_empty() {
        return Err(Error::Input("weak association needs at least one f and one phi".into()));
    }
    let eps_list = u.net().values().to_vec();
    let mut tasks: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..tests.len() {
        for j in 0..densities.len() {
            tasks.extend(eps_list.iter().map(|&e| (i, j, e)));
        }
    }
    let base = cfg.quad();
    let values: Vec<f64> = tasks
        .par_iter()
        .map(|&(i, j, eps)| weak_integral(u, v, &tests[i], &densities[j], eps, base))
        .collect::<Result<_>>()?;
    let (first, last) = (u.net().sigma_max(), u.net().sigma_min());
    let n_eps = u.net().len();
    let mut evidence = Vec::new();
    for (i, f) in tests.iter().enumerate() {
        for (j, phi) in densities.iter().enumerate() {
            let k0 = (i * densities.len() + j) * n_eps;
            let series: Vec<(f64, f64)> = (0..n_eps).map(|k| (tasks[k0 + k].2, values[k0 + k].abs())).collect();
            let verdict = trend_verdict(&series, first, last, cfg);
            evidence.push(Evidence {
                label: format!("f = {}, phi = {}", f.label, phi.label),
                point: None,
                series,
                verdict,
                locations: Vec::new(),
            });
        }
    }
    let result = conjunction(evidence.iter().map(|e| &e.verdict));
    let witnesses = tests.iter().map(|f| format!("f = {}", f.label)).chain(densities.iter().map(|d| format!("phi = {}", d.label))).collect();
    let rule = format!(
        "per (f, phi): I(eps) = integral of (f(u) - f(v))*phi by adaptive Gauss-Kronrod; {}; holds iff every \
         declared pair holds (finite witness family)",
        trend_rule(cfg)
    );
    Ok(verdict(notion, u, v, result, witnesses, evidence, None, rule))
}

/// ∫ (f(u_ε(x)) - f(v_ε(x)))·φ(x) dx over the support of φ.
pub(crate) fn weak_integral(
    u: &NetFunction,
    v: &NetFunction,
    f: &TestFunction,
    phi: &Density,
    eps: f64,
    base: QuadConfig,
) -> Result<f64> {
    let (a, b) = phi.support;
    let mut pts = vec![a, b];
    pts.extend(u.breakpoints(eps, a, b));
    pts.extend(v.breakpoints(eps, a, b));
    pts.retain(|x| *x >= a && *x <= b);
    pts.sort_by(|p, q| p.total_cmp(q));
    pts.dedup();
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |x: f64| {
        let w = phi.eval(x);
        if w == 0.0 {
            return 0.0;
        }
        match (u.eval(eps, &[x]), v.eval(eps, &[x])) {
            (Ok(uu), Ok(vv)) => (f.eval(&uu) - f.eval(&vv)) * w,
            (Err(e), _) | (_, Err(e)) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let cfg = QuadConfig { max_intervals: base.max_intervals + 4 * pts.len(), ..base };
    let q = integrate_with_breaks(integrand, &pts, cfg).map_err(|e| {
        Error::Numerical(format!("quadrature for f = {}, phi = {}, eps = {eps}: {e}", f.label, phi.label))
    })?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(q.value)
}

/// Faster than every power of ε, per sampled point.
pub fn fast_assoc(u: &NetFunction, v: &NetFunction, points: &[Point], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    check_points(u, points)?;
    let pts: Vec<Vec<f64>> = points.iter().map(|p| p.coords.clone()).collect();
    fast_inner(u, v, &net_samples(u, &pts), cfg)
}

pub fn fast_assoc_on(u: &NetFunction, v: &NetFunction, samples: &[(Point, Vec<f64>)], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    check_compatible(u, v)?;
    check_points(u, samples.iter().map(|s| &s.0))?;
    fast_inner(u, v, &subnet_samples(samples)?, cfg)
}

/// The series must pass the pointwise trend rule, so fast implies pw. On
/// top of that, clause (i): it sits at the noise floor from some net
/// element on (at least the last two values), or clause (ii): a log-log
/// slope above m_probe with a small residual.
pub(crate) fn fast_series_verdict(series: &[(f64, f64)], sigma_first: f64, sigma_last: f64, cfg: &AssocConfig) -> Verdict {
    if !trend_verdict(series, sigma_first, sigma_last, cfg).holds() {
        return Verdict::Fails;
    }
    let n = series.len();
    let tail = series.iter().rev().take_while(|p| p.1 <= cfg.noise_floor).count();
    if tail >= 2.min(n) && tail > 0 {
        return Verdict::Holds;
    }
    let pts: Vec<(f64, f64)> = series.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 3 {
        return Verdict::Fails;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Verdict::Fails;
    }
    let slope = sxy / sxx;
    let rms = (pts.iter().map(|p| (p.1 - (my + slope * (p.0 - mx))).powi(2)).sum::<f64>() / m).sqrt();
    Verdict::from_bool(slope > cfg.m_probe && rms < cfg.fast_residual)
}

fn fast_inner(u: &NetFunction, v: &NetFunction, samples: &[(Vec<f64>, Vec<f64>)], cfg: &AssocConfig) -> Result<AssociationVerdict> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("fast association needs at least one point".into()));
    }
    let evidence = pointwise_evidence(u, v, samples, |s, a, b| fast_series_verdict(s, a, b, cfg))?;
    let result = conjunction(evidence.iter().map(|e| &e.verdict));
    let rule = format!(
        "per point: holds iff d passes the pointwise trend rule and (i) d(eps) <= {nf:e} for the last two or more net elements, or (ii) the log-log slope \
         of d against eps exceeds m_probe = {m} with RMS log residual < {r}; holds iff every sampled point holds. \
         O(eps^m) for all m is certified only up to m_probe",
        nf = cfg.noise_floor,
        m = cfg.m_probe,
        r = cfg.fast_residual
    );
    Ok(verdict(Notion::Fast, u, v, result, point_labels(samples), evidence, None, rule))
}
