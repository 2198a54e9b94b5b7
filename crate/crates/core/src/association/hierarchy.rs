//! The two counterexample nets separating the association notions:
//! sin(x/ε) (weakly null but not model-null) and the comb ρ(x/ε)
//! (model-null but nowhere pointwise null).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::notions::{assoc_rn, fast_assoc, fast_assoc_on, model_assoc, pw_assoc, pw_assoc_on, pwae_assoc, pwae_assoc_on, weak_integral, zero_assoc};
use super::witnesses::{Density, TestFunction};
use super::{AssocConfig, AssociationVerdict, NetFunction, Notion};
use crate::epsilon::EpsilonNet;
use crate::error::{Error, Result};
use crate::fields::SampleGrid;
use crate::manifold::{Point, Space};
use crate::mollifier::{build_bump, BumpCase, Comb};
use crate::quadrature::integrate;
use crate::verdict::Verdict;

/// Radius of the L¹ measurement of the comb; the truncated mass is 2·2^{-40}.
const COMB_L1_RADIUS: f64 = 40.5;
const COMB_L1_TOL: f64 = 1e-6;
const HALF_MASS_TOL: f64 = 0.01;

/// The finite families standing in for "every f, φ, p and K".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierarchyWitnesses {
    /// names from {x, x^2, sin}
    pub tests: Vec<String>,
    /// centres of unit bump densities
    pub density_centers: Vec<f64>,
    /// points where pointwise behaviour is examined
    pub points: Vec<f64>,
    /// K = [-radius, radius]
    pub k_radius: f64,
    pub k_nodes: usize,
}

impl Default for HierarchyWitnesses {
    fn default() -> Self {
        Self {
            tests: vec!["x".into(), "x^2".into(), "sin".into()],
            density_centers: vec![0.0, 0.3],
            points: vec![0.5, 1.0, 2.0],
            k_radius: 1.0,
            k_nodes: 41,
        }
    }
}

impl HierarchyWitnesses {
    pub fn test_functions(&self) -> Result<Vec<TestFunction>> {
        self.tests
            .iter()
            .map(|name| match name.as_str() {
                "x" => Ok(TestFunction::identity()),
                "x^2" => Ok(TestFunction::square()),
                "sin" => Ok(TestFunction::sine()),
                other => Err(Error::Config(format!("unknown test function {other:?}; expected x, x^2 or sin"))),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.test_functions()?;
        if self.tests.is_empty() || self.density_centers.is_empty() || self.points.is_empty() {
            return Err(Error::Config("witness families must be nonempty".into()));
        }
        if !(self.k_radius > 0.0) || self.k_nodes < 2 {
            return Err(Error::Config("K needs a positive radius and at least two nodes".into()));
        }
        if self.density_centers.iter().chain(&self.points).any(|v| !v.is_finite()) {
            return Err(Error::Config("witness points must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetVerdicts {
    pub label: String,
    pub verdicts: Vec<AssociationVerdict>,
}

impl NetVerdicts {
    pub fn get(&self, notion: Notion) -> Option<&AssociationVerdict> {
        self.verdicts.iter().find(|v| v.notion == notion)
    }

    pub fn verdict(&self, notion: Notion) -> Verdict {
        self.get(notion).map(|v| v.verdict).unwrap_or(Verdict::Ambiguous)
    }
}

/// |I(ε)| ≤ ε·Lip(f)·‖φ‖∞·‖ρ‖₁ for the comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub f: String,
    pub phi: String,
    pub eps: f64,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

/// I(ε) for f = x² against sin(x/ε) at the smallest ε, versus ½∫φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfMassCheck {
    pub phi: String,
    pub eps: f64,
    pub value: f64,
    pub oracle: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyCheck {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub eps: Vec<f64>,
    pub scaling: String,
    pub witnesses: Vec<String>,
    pub sine: NetVerdicts,
    pub comb: NetVerdicts,
    pub comb_l1: f64,
    pub comb_max: f64,
    pub comb_bounds: Vec<BoundCheck>,
    pub half_mass: Vec<HalfMassCheck>,
    pub checks: Vec<HierarchyCheck>,
    pub passed: bool,
}

fn r1() -> Space {
    Space::Euclidean { dim: 1 }
}

fn sine_net(net: &EpsilonNet) -> NetFunction {
    NetFunction::from_fn("sin(x/eps)", r1(), r1(), net, |e, x| vec![(x[0] / e).sin()])
        .with_refinement(|eps, grid| {
            // crests (k + 1/2)πε inside the grid's range
            let (a, b) = axis_range(grid);
            let lo = (a / (PI * eps) - 0.5).ceil() as i64;
            let hi = (b / (PI * eps) - 0.5).floor() as i64;
            (lo..=hi).map(|k| vec![(k as f64 + 0.5) * PI * eps]).collect()
        })
        .with_breakpoints(|eps, a, b| {
            let lo = (a / (PI * eps)).ceil() as i64;
            let hi = (b / (PI * eps)).floor() as i64;
            (lo..=hi).map(|k| k as f64 * PI * eps).collect()
        })
}

fn comb_net(comb: &Comb, net: &EpsilonNet) -> NetFunction {
    let c = comb.clone();
    let breaks = comb.clone();
    NetFunction::from_fn("comb(x/eps)", r1(), r1(), net, move |e, x| vec![c.scaled(e, x[0])])
        .with_refinement(move |eps, grid| {
            // plateau centres nε inside the grid's range
            let (a, b) = axis_range(grid);
            let lo = (a / eps).ceil() as i64;
            let hi = (b / eps).floor() as i64;
            (lo..=hi).map(|n| vec![n as f64 * eps]).collect()
        })
        .with_breakpoints(move |eps, a, b| breaks.breakpoints(eps, a, b))
}

fn axis_range(grid: &SampleGrid) -> (f64, f64) {
    let axis = &grid.axes[0];
    let lo = axis.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = axis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// ε_n = |x|/n for n = 4·2^k, one value per net element; the origin, where
/// the comb is 1 for every ε, keeps the net itself.
fn comb_subnets(points: &[f64], net: &EpsilonNet) -> Vec<(Point, Vec<f64>)> {
    points
        .iter()
        .map(|&x| {
            let eps = if x == 0.0 {
                net.values().to_vec()
            } else {
                (0..net.len()).map(|k| x.abs() / (4.0 * 2f64.powi(k as i32))).collect()
            };
            (Point { space: r1(), coords: vec![x] }, eps)
        })
        .collect()
}

fn all_verdicts(
    u: &NetFunction,
    zero: &NetFunction,
    grid: &SampleGrid,
    points: &[Point],
    subnets: Option<(&[(Point, Vec<f64>)], &[(Point, Vec<f64>)])>,
    tests: &[TestFunction],
    densities: &[Density],
    cfg: &AssocConfig,
) -> Result<Vec<AssociationVerdict>> {
    let mut out = vec![zero_assoc(u, zero, grid, cfg)?];
    match subnets {
        Some((pw_points, grid_points)) => {
            out.push(pw_assoc_on(u, zero, pw_points, cfg)?);
            out.push(pwae_assoc_on(u, zero, grid_points, cfg)?);
        }
        None => {
            out.push(pw_assoc(u, zero, points, cfg)?);
            out.push(pwae_assoc(u, zero, grid, cfg)?);
        }
    }
    out.push(model_assoc(u, zero, tests, densities, cfg)?);
    out.push(assoc_rn(u, zero, densities, cfg)?);
    out.push(match subnets {
        Some((pw_points, _)) => fast_assoc_on(u, zero, pw_points, cfg)?,
        None => fast_assoc(u, zero, points, cfg)?,
    });
    Ok(out)
}

fn check(name: &str, expected: Verdict, observed: Verdict) -> HierarchyCheck {
    HierarchyCheck {
        name: name.into(),
        expected: expected.label().into(),
        observed: observed.label().into(),
        passed: expected == observed,
    }
}

/// Runs every notion on both counterexample nets and checks the two
/// strictness witnesses: for sin(x/ε) weak association holds while model
/// association fails; for the comb model association holds while pointwise
/// association fails.
pub fn hierarchy_report(net: &EpsilonNet, cfg: &AssocConfig) -> Result<HierarchyReport> {
    hierarchy_report_with(net, cfg, &HierarchyWitnesses::default())
}

pub fn hierarchy_report_with(net: &EpsilonNet, cfg: &AssocConfig, w: &HierarchyWitnesses) -> Result<HierarchyReport> {
    cfg.validate()?;
    w.validate()?;
    let grid = SampleGrid::cube(1, w.k_radius, w.k_nodes)?;
    let zero = NetFunction::zero(r1(), 1, net)?;
    let tests = w.test_functions()?;
    let densities: Vec<Density> = w.density_centers.iter().map(|&c| Density::bump_at(c)).collect();
    let points: Vec<Point> = w.points.iter().map(|&x| Point { space: r1(), coords: vec![x] }).collect();

    let sine = sine_net(net);
    let sine_verdicts = all_verdicts(&sine, &zero, &grid, &points, None, &tests, &densities, cfg)?;

    let comb = Comb::new(build_bump(BumpCase::SymmetricA, true)?)?;
    let comb_u = comb_net(&comb, net);
    let pw_sub = comb_subnets(&w.points, net);
    let grid_sub = comb_subnets(&grid.axes[0], net);
    let comb_verdicts =
        all_verdicts(&comb_u, &zero, &grid, &points, Some((&pw_sub, &grid_sub)), &tests, &densities, cfg)?;

    let sine = NetVerdicts { label: sine.label().into(), verdicts: sine_verdicts };
    let comb_v = NetVerdicts { label: comb_u.label().into(), verdicts: comb_verdicts };

    // measured constants for the comb bound
    let comb_l1 = comb.l1_norm_on(COMB_L1_RADIUS)?;
    let comb_max = (0..=60_000).map(|k| comb.value(-3.0 + k as f64 * 1e-4)).fold(0.0f64, f64::max);
    let mut comb_bounds = Vec::new();
    for f in &tests {
        let lip = match f.label.as_str() {
            // Lipschitz constant of y² on the comb's range [0, max]
            "x^2" => 2.0 * comb_max.max(1.0),
            _ => f.lipschitz.ok_or_else(|| Error::Config(format!("test function {} has no Lipschitz bound", f.label)))?,
        };
        for phi in &densities {
            for &eps in net.values() {
                let value = weak_integral(&comb_u, &zero, f, phi, eps, cfg.quad())?;
                let bound = eps * lip * phi.sup_norm * comb_l1;
                comb_bounds.push(BoundCheck {
                    f: f.label.clone(),
                    phi: phi.label.clone(),
                    eps,
                    value,
                    bound,
                    passed: value.abs() <= bound,
                });
            }
        }
    }

    // f = x² against sin(x/ε) tends to ½∫φ
    let eps_min = net.eps_min();
    let mut half_mass = Vec::new();
    for phi in &densities {
        let value = weak_integral(&sine_net(net), &zero, &TestFunction::square(), phi, eps_min, cfg.quad())?;
        let mass = integrate(|x| phi.eval(x), phi.support.0, phi.support.1, cfg.quad())?.value;
        let oracle = 0.5 * mass;
        let relative_error = (value - oracle).abs() / oracle;
        half_mass.push(HalfMassCheck {
            phi: phi.label.clone(),
            eps: eps_min,
            value,
            oracle,
            relative_error,
            passed: relative_error <= HALF_MASS_TOL,
        });
    }

    let mut checks = vec![
        check("sin(x/eps): assoc-Rn", Verdict::Holds, sine.verdict(Notion::AssocRn)),
        check("sin(x/eps): model", Verdict::Fails, sine.verdict(Notion::Model)),
        check("sin(x/eps): zero", Verdict::Fails, sine.verdict(Notion::Zero)),
        check("comb: model", Verdict::Holds, comb_v.verdict(Notion::Model)),
        check("comb: pwae", Verdict::Fails, comb_v.verdict(Notion::Pwae)),
        check("comb: pw", Verdict::Fails, comb_v.verdict(Notion::Pw)),
        check("comb: zero", Verdict::Fails, comb_v.verdict(Notion::Zero)),
    ];
    let decreasing = sine.get(Notion::AssocRn).is_some_and(|v| {
        v.evidence.iter().all(|e| e.series.windows(2).all(|w| w[1].1 <= w[0].1 + cfg.noise_floor))
    });
    checks.push(HierarchyCheck {
        name: "sin(x/eps): |integral of sin(x/eps)*phi| decreasing".into(),
        expected: "nonincreasing above the noise floor".into(),
        observed: if decreasing { "nonincreasing".into() } else { "increases somewhere".into() },
        passed: decreasing,
    });
    checks.push(HierarchyCheck {
        name: "sin(x/eps): I(eps_min) for f = x^2 versus half the mass of phi".into(),
        expected: format!("relative error <= {HALF_MASS_TOL}"),
        observed: half_mass.iter().map(|h| format!("{}: {:.3e}", h.phi, h.relative_error)).collect::<Vec<_>>().join(", "),
        passed: half_mass.iter().all(|h| h.passed),
    });
    checks.push(HierarchyCheck {
        name: "comb: measured L1 norm".into(),
        expected: format!("3 +- {COMB_L1_TOL:e}"),
        observed: format!("{comb_l1:.12}"),
        passed: (comb_l1 - 3.0).abs() <= COMB_L1_TOL,
    });
    let worst = comb_bounds.iter().map(|b| b.value.abs() / b.bound).fold(0.0f64, f64::max);
    checks.push(HierarchyCheck {
        name: "comb: |I(eps)| <= eps*Lip(f)*sup(phi)*L1(comb)".into(),
        expected: "every (f, phi, eps)".into(),
        observed: format!("worst ratio {worst:.3e}"),
        passed: comb_bounds.iter().all(|b| b.passed),
    });
    let passed = checks.iter().all(|c| c.passed);

    let mut witnesses: Vec<String> = tests.iter().map(|f| format!("f = {}", f.label)).collect();
    witnesses.extend(densities.iter().map(|d| format!("phi = {} on {:?}", d.label, d.support)));
    witnesses.push(format!("K = [-{r}, {r}], {n} nodes", r = w.k_radius, n = w.k_nodes));
    witnesses.push(format!("pw points {:?}; comb subnets eps_n = x/n, n = 4*2^k", w.points));

    Ok(HierarchyReport {
        eps: net.values().to_vec(),
        scaling: net.scaling().describe(),
        witnesses,
        sine,
        comb: comb_v,
        comb_l1,
        comb_max,
        comb_bounds,
        half_mass,
        checks,
        passed,
    })
}
