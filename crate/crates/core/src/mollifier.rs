//! Smoothing kernels: compactly supported bumps, smoothed Heaviside steps
//! H_ε(x) = ∫_{-∞}^x ρ_σ, and the plateau comb Σ_n ρ_0(2^{|n|}(x - n)).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gk15, integrate_with_breaks, QuadConfig};

/// Number of cells in the cached antiderivative table.
const TABLE_CELLS: usize = 2048;

/// Ramp width of the plateau bump used for the comb.
pub const DEFAULT_PLATEAU_RAMP: f64 = 0.5;

/// Where the bump sits relative to the origin, which fixes H_ε(0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BumpCase {
    /// support [-1, 1], even; H_ε(0) = 1/2
    #[serde(rename = "a")]
    SymmetricA,
    /// support [0, 1]; H_ε(0) = 0
    #[serde(rename = "b")]
    RightB,
    /// support [-1, 0]; H_ε(0) = 1
    #[serde(rename = "c")]
    LeftC,
}

impl BumpCase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(BumpCase::SymmetricA),
            "b" | "B" => Ok(BumpCase::RightB),
            "c" | "C" => Ok(BumpCase::LeftC),
            other => Err(Error::Config(format!("unknown bump case {other:?}, expected a, b or c"))),
        }
    }

    /// Value of the limiting Heaviside at 0 for this case.
    pub fn heaviside_at_zero(self) -> f64 {
        match self {
            BumpCase::SymmetricA => 0.5,
            BumpCase::RightB => 0.0,
            BumpCase::LeftC => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            BumpCase::SymmetricA => "a",
            BumpCase::RightB => "b",
            BumpCase::LeftC => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    /// c·exp(-1/(1-y²)) with y an affine image of x
    Exponential { scale: f64, shift: f64 },
    /// 1 on [-a, a], smooth ramps of width w down to 0 at ±(a + w)
    Plateau { half_width: f64, ramp: f64 },
}

/// Shape parameters echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpShape {
    pub profile: String,
    pub case: BumpCase,
    pub support: (f64, f64),
    pub peak: f64,
    pub integral: f64,
    pub plateau_half_width: Option<f64>,
    pub plateau_ramp: Option<f64>,
}

#[derive(Debug)]
struct Inner {
    case: BumpCase,
    profile: Profile,
    lo: f64,
    hi: f64,
    norm: f64,
    peak: f64,
    integral: f64,
    table: Table,
}

/// A smooth, nonnegative, compactly supported kernel with unit integral.
#[derive(Debug, Clone)]
pub struct Bump(Arc<Inner>);

fn psi(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - y * y)).exp()
    }
}

fn dpsi(y: f64) -> f64 {
    if y.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - y * y;
        psi(y) * (-2.0 * y / (d * d))
    }
}

fn tight() -> QuadConfig {
    QuadConfig { abs_tol: 1e-15, rel_tol: 1e-14, max_intervals: 10_000 }
}

/// Builds the bump for `case`; `plateau` selects the flat-topped variant
/// (values in [0, 1], ρ(0) = 1) used for the comb.
pub fn build_bump(case: BumpCase, plateau: bool) -> Result<Bump> {
    if plateau {
        if case != BumpCase::SymmetricA {
            return Err(Error::Config("the plateau bump is symmetric (case a) only".into()));
        }
        Bump::plateau(DEFAULT_PLATEAU_RAMP)
    } else {
        Bump::standard(case)
    }
}

impl Bump {
    /// Normalized exponential bump exp(-1/(1-y²)) placed according to `case`.
    pub fn standard(case: BumpCase) -> Result<Self> {
        let (scale, shift, lo, hi) = match case {
            BumpCase::SymmetricA => (1.0, 0.0, -1.0, 1.0),
            BumpCase::RightB => (2.0, -1.0, 0.0, 1.0),
            BumpCase::LeftC => (2.0, 1.0, -1.0, 0.0),
        };
        let z = integrate_with_breaks(psi, &[-1.0, 0.0, 1.0], tight())?.value;
        // ρ(x) = scale·ψ(scale·x + shift)/Z integrates to 1
        let norm = scale / z;
        let profile = Profile::Exponential { scale, shift };
        Self::finish(case, profile, lo, hi, norm)
    }

    /// Flat-topped bump with ramps of width `ramp`; the plateau half-width is
    /// found by bisection so that the integral is 1.
    pub fn plateau(ramp: f64) -> Result<Self> {
        if !(ramp > 0.0 && ramp <= 1.0) {
            return Err(Error::Config(format!("plateau ramp width must lie in (0, 1], got {ramp}")));
        }
        let step = Bump::standard(BumpCase::SymmetricA)?;
        let integral_for = |a: f64| -> Result<f64> {
            let f = |x: f64| plateau_value(&step, a, ramp, x);
            let e = a + ramp;
            Ok(integrate_with_breaks(f, &[-e, -a, a, e], tight())?.value)
        };
        let (mut lo, mut hi) = (0.0, 1.0 - ramp);
        let (f_lo, f_hi) = (integral_for(lo)? - 1.0, integral_for(hi)? - 1.0);
        if f_lo > 0.0 || f_hi < 0.0 {
            let achieved = if f_lo > 0.0 { f_lo + 1.0 } else { f_hi + 1.0 };
            return Err(Error::Construction {
                msg: format!("cannot bracket unit integral with ramp width {ramp}"),
                achieved,
            });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if integral_for(mid)? > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let a = 0.5 * (lo + hi);
        let profile = Profile::Plateau { half_width: a, ramp };
        let bump = Self::finish_with(BumpCase::SymmetricA, profile, -(a + ramp), a + ramp, 1.0, Some(step))?;
        Ok(bump)
    }

    fn finish(case: BumpCase, profile: Profile, lo: f64, hi: f64, norm: f64) -> Result<Self> {
        Self::finish_with(case, profile, lo, hi, norm, None)
    }

    fn finish_with(
        case: BumpCase,
        profile: Profile,
        lo: f64,
        hi: f64,
        norm: f64,
        step: Option<Bump>,
    ) -> Result<Self> {
        let eval = |x: f64| raw_value(profile, norm, step.as_ref(), lo, hi, x);
        let deriv = |x: f64| raw_derivative(profile, norm, step.as_ref(), lo, hi, x);
        let peak = match profile {
            Profile::Exponential { .. } => norm * (-1.0f64).exp(),
            Profile::Plateau { .. } => 1.0,
        };
        let mut breaks = vec![lo, hi];
        if let Profile::Plateau { half_width, .. } = profile {
            breaks = vec![lo, -half_width, half_width, hi];
        }
        let integral = integrate_with_breaks(eval, &breaks, tight())?.value;
        if (integral - 1.0).abs() > 1e-10 {
            return Err(Error::Construction { msg: "bump does not integrate to one".into(), achieved: integral });
        }
        let (rise_end, fall_start) = match profile {
            Profile::Exponential { scale, shift } => (-shift / scale, -shift / scale),
            Profile::Plateau { half_width, .. } => (-half_width, half_width),
        };
        let table = Table::build(&eval, &deriv, lo, hi, rise_end, fall_start);
        Ok(Bump(Arc::new(Inner {
            case,
            profile,
            lo,
            hi,
            norm,
            peak,
            integral,
            table,
        })))
    }

    pub fn case(&self) -> BumpCase {
        self.0.case
    }

    pub fn support(&self) -> (f64, f64) {
        (self.0.lo, self.0.hi)
    }

    pub fn is_plateau(&self) -> bool {
        matches!(self.0.profile, Profile::Plateau { .. })
    }

    /// ‖ρ‖_∞
    pub fn peak(&self) -> f64 {
        self.0.peak
    }

    /// ∫ρ as measured by adaptive quadrature at construction.
    pub fn integral(&self) -> f64 {
        self.0.integral
    }

    pub fn plateau_half_width(&self) -> Option<f64> {
        match self.0.profile {
            Profile::Plateau { half_width, .. } => Some(half_width),
            _ => None,
        }
    }

    /// ρ(x)
    pub fn value(&self, x: f64) -> f64 {
        let i = &self.0;
        match i.profile {
            Profile::Exponential { .. } => raw_value(i.profile, i.norm, None, i.lo, i.hi, x),
            Profile::Plateau { half_width, ramp } => {
                let ax = x.abs();
                if ax <= half_width {
                    1.0
                } else if ax >= half_width + ramp {
                    0.0
                } else {
                    // S(u) for u = (a + w - |x|)/w, read off the table of the
                    // symmetric step: S(u) = F_std(2u - 1)
                    let u = (half_width + ramp - ax) / ramp;
                    standard_step().cdf(2.0 * u - 1.0)
                }
            }
        }
    }

    /// ρ′(x)
    pub fn derivative(&self, x: f64) -> f64 {
        let i = &self.0;
        match i.profile {
            Profile::Exponential { .. } => raw_derivative(i.profile, i.norm, None, i.lo, i.hi, x),
            Profile::Plateau { half_width, ramp } => {
                let ax = x.abs();
                if ax <= half_width || ax >= half_width + ramp {
                    0.0
                } else {
                    let u = (half_width + ramp - ax) / ramp;
                    let ds = 2.0 * standard_step().value(2.0 * u - 1.0);
                    -x.signum() * ds / ramp
                }
            }
        }
    }

    /// ∫_{-∞}^x ρ from the cached table.
    pub fn cdf(&self, x: f64) -> f64 {
        let i = &self.0;
        if x <= i.lo {
            return 0.0;
        }
        if x >= i.hi {
            return 1.0;
        }
        if i.case == BumpCase::SymmetricA {
            if x == 0.0 {
                return 0.5;
            }
            if x > 0.0 {
                return 1.0 - i.table.eval(&|s| self.value(s), -x);
            }
        }
        i.table.eval(&|s| self.value(s), x)
    }

    pub fn shape(&self) -> BumpShape {
        let i = &self.0;
        let (profile, a, w) = match i.profile {
            Profile::Exponential { .. } => ("exp(-1/(1-y^2)), normalized".to_string(), None, None),
            Profile::Plateau { half_width, ramp } => (
                "plateau with smooth-step ramps".to_string(),
                Some(half_width),
                Some(ramp),
            ),
        };
        BumpShape {
            profile,
            case: i.case,
            support: (i.lo, i.hi),
            peak: i.peak,
            integral: i.integral,
            plateau_half_width: a,
            plateau_ramp: w,
        }
    }
}

fn standard_step() -> &'static Bump {
    use std::sync::OnceLock;
    static STEP: OnceLock<Bump> = OnceLock::new();
    STEP.get_or_init(|| Bump::standard(BumpCase::SymmetricA).expect("standard bump"))
}

fn plateau_value(step: &Bump, a: f64, w: f64, x: f64) -> f64 {
    let ax = x.abs();
    if ax <= a {
        1.0
    } else if ax >= a + w {
        0.0
    } else {
        step.cdf(2.0 * (a + w - ax) / w - 1.0)
    }
}

fn raw_value(profile: Profile, norm: f64, step: Option<&Bump>, lo: f64, hi: f64, x: f64) -> f64 {
    if x <= lo || x >= hi {
        return 0.0;
    }
    match profile {
        Profile::Exponential { scale, shift } => norm * psi(scale * x + shift),
        Profile::Plateau { half_width, ramp } => {
            plateau_value(step.unwrap_or_else(|| standard_step()), half_width, ramp, x)
        }
    }
}

fn raw_derivative(profile: Profile, norm: f64, step: Option<&Bump>, lo: f64, hi: f64, x: f64) -> f64 {
    if x <= lo || x >= hi {
        return 0.0;
    }
    match profile {
        Profile::Exponential { scale, shift } => norm * scale * dpsi(scale * x + shift),
        Profile::Plateau { half_width, ramp } => {
            let ax = x.abs();
            if ax <= half_width {
                return 0.0;
            }
            let step = step.unwrap_or_else(|| standard_step());
            let u = (half_width + ramp - ax) / ramp;
            -x.signum() * 2.0 * step.value(2.0 * u - 1.0) / ramp
        }
    }
}

/// Cells whose complementary mass is below this use the monotone tail rule.
const TAIL_MASS: f64 = 1e-6;

/// 8-point Gauss–Legendre nodes and weights on [0, 1].
const GL_NODES: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

/// Antiderivative table: cumulative integral plus first and second
/// derivatives at the nodes, interpolated by quintic Hermite polynomials.
///
/// In the tails the mass spans hundreds of orders of magnitude per cell and
/// polynomial interpolation loses monotonicity, so tail cells instead rescale
/// a fixed Gauss–Legendre partial integral anchored at the monotone end of
/// the cell. That partial integral is monotone because the kernel is
/// monotone there.
#[derive(Debug)]
struct Table {
    lo: f64,
    h: f64,
    /// F at the nodes
    f: Vec<f64>,
    /// 1 - F at the nodes, accumulated from the right
    g: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    /// ρ nondecreasing on [lo, rise_end], nonincreasing on [fall_start, hi]
    rise_end: f64,
    fall_start: f64,
}

impl Table {
    fn build(
        eval: &dyn Fn(f64) -> f64,
        deriv: &dyn Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        rise_end: f64,
        fall_start: f64,
    ) -> Self {
        let h = (hi - lo) / TABLE_CELLS as f64;
        let cells: Vec<f64> = (0..TABLE_CELLS)
            .map(|k| {
                let a = lo + k as f64 * h;
                gk15(&eval, a, a + h).0
            })
            .collect();
        let total: f64 = cells.iter().sum();
        let mut f = vec![0.0; TABLE_CELLS + 1];
        let mut g = vec![0.0; TABLE_CELLS + 1];
        for k in 0..TABLE_CELLS {
            f[k + 1] = f[k] + cells[k] / total;
        }
        for k in (0..TABLE_CELLS).rev() {
            g[k] = g[k + 1] + cells[k] / total;
        }
        f[TABLE_CELLS] = 1.0;
        g[0] = 1.0;
        // use the complement where it is the accurate quantity, so both
        // regimes read the same node values
        for k in 0..=TABLE_CELLS {
            if g[k] < 0.5 {
                f[k] = 1.0 - g[k];
            }
        }
        let nodes = (0..=TABLE_CELLS).map(|k| lo + k as f64 * h);
        let d1 = nodes.clone().map(|x| eval(x) / total).collect();
        let d2 = nodes.map(|x| deriv(x) / total).collect();
        Self {
            lo,
            h,
            f,
            g,
            d1,
            d2,
            rise_end,
            fall_start,
        }
    }

    fn eval(&self, kernel: &dyn Fn(f64) -> f64, x: f64) -> f64 {
        let s = (x - self.lo) / self.h;
        let k = (s.floor().max(0.0) as usize).min(TABLE_CELLS - 1);
        let x0 = self.lo + k as f64 * self.h;
        let x1 = x0 + self.h;
        if self.f[k + 1] <= TAIL_MASS && x1 <= self.rise_end {
            // F(x) = f_k + (f_{k+1} - f_k)·P(x)/P(x1), P(x) = ∫_{x0}^x ρ
            let partial = |b: f64| {
                let w = b - x0;
                w * GL_NODES
                    .iter()
                    .zip(GL_WEIGHTS)
                    .map(|(s, wt)| wt * kernel(x0 + w * s))
                    .sum::<f64>()
            };
            let full = partial(x1);
            if full > 0.0 {
                return self.f[k] + (self.f[k + 1] - self.f[k]) * (partial(x) / full).clamp(0.0, 1.0);
            }
            return self.f[k];
        }
        if self.g[k] <= TAIL_MASS && x0 >= self.fall_start {
            let partial = |a: f64| {
                let w = x1 - a;
                w * GL_NODES
                    .iter()
                    .zip(GL_WEIGHTS)
                    .map(|(s, wt)| wt * kernel(x1 - w * s))
                    .sum::<f64>()
            };
            let full = partial(x0);
            let frac = if full > 0.0 { (partial(x) / full).clamp(0.0, 1.0) } else { 0.0 };
            return 1.0 - (self.g[k + 1] + (self.g[k] - self.g[k + 1]) * frac);
        }
        let t = s - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        let h = self.h;
        let p = self.f[k] * h0
            + h * self.d1[k] * h1
            + h * h * self.d2[k] * h2
            + self.f[k + 1] * h3
            + h * self.d1[k + 1] * h4
            + h * h * self.d2[k + 1] * h5;
        p.clamp(self.f[k], self.f[k + 1])
    }
}

/// H_ε for a fixed layer width σ.
#[derive(Debug, Clone)]
pub struct SmoothedStep {
    bump: Bump,
    sigma: f64,
}

impl SmoothedStep {
    pub fn new(bump: Bump, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { bump, sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    /// H_ε(x)
    pub fn value(&self, x: f64) -> f64 {
        self.bump.cdf(x / self.sigma)
    }

    /// ρ_σ(x) = ρ(x/σ)/σ
    pub fn derivative(&self, x: f64) -> f64 {
        self.bump.value(x / self.sigma) / self.sigma
    }

    /// ρ_σ′(x)
    pub fn second_derivative(&self, x: f64) -> f64 {
        self.bump.derivative(x / self.sigma) / (self.sigma * self.sigma)
    }
}

pub fn smoothed_heaviside(step: &SmoothedStep, x: f64) -> f64 {
    step.value(x)
}

/// ρ(x) = Σ_n ρ_0(2^{|n|}(x - n)) built from a plateau bump.
#[derive(Debug, Clone)]
pub struct Comb {
    rho0: Bump,
}

impl Comb {
    pub fn new(rho0: Bump) -> Result<Self> {
        if !rho0.is_plateau() {
            return Err(Error::Config("the comb needs a plateau bump".into()));
        }
        Ok(Self { rho0 })
    }

    pub fn rho0(&self) -> &Bump {
        &self.rho0
    }

    fn term(&self, n: i64, x: f64) -> f64 {
        let nf = n as f64;
        if x == nf {
            return self.rho0.value(0.0);
        }
        let e = n.unsigned_abs().min(i32::MAX as u64) as i32;
        let scale = 2f64.powi(e);
        if !scale.is_finite() {
            return 0.0;
        }
        self.rho0.value(scale * (x - nf))
    }

    /// Exact finite sum: only the summands whose support can contain x.
    pub fn value(&self, x: f64) -> f64 {
        if !x.is_finite() {
            return 0.0;
        }
        let n0 = x.round() as i64;
        (n0 - 1..=n0 + 1).map(|n| self.term(n, x)).sum()
    }

    /// ρ_ε(x) = ρ(x/ε)
    ///
    /// A quotient within a few ulps of an integer n is taken to be n: the
    /// summand around n magnifies the rounding error of x/ε by 2^{|n|}, so
    /// without this ε = x/n would miss the plateau it was chosen to hit.
    pub fn scaled(&self, eps: f64, x: f64) -> f64 {
        let y = x / eps;
        let n = y.round();
        if (y - n).abs() <= 4.0 * f64::EPSILON * n.abs().max(1.0) {
            self.value(n)
        } else {
            self.value(y)
        }
    }

    /// Support endpoints and plateau edges of all summands meeting [a, b],
    /// in scaled coordinates x = ε·y. Used as quadrature breakpoints.
    pub fn breakpoints(&self, eps: f64, a: f64, b: f64) -> Vec<f64> {
        let (_, reach) = self.rho0.support();
        let flat = self.rho0.plateau_half_width().unwrap_or(0.0);
        let (ya, yb) = (a / eps, b / eps);
        let mut pts = vec![a, b];
        let first = (ya.floor() as i64) - 1;
        let last = (yb.ceil() as i64) + 1;
        for n in first..=last {
            let w = 2f64.powi(-(n.unsigned_abs().min(1100) as i32));
            for off in [-reach, -flat, flat, reach] {
                let y = n as f64 + off * w;
                let x = eps * y;
                if x > a && x < b {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(|p, q| p.total_cmp(q));
        pts.dedup();
        pts
    }

    /// ∫_{-r}^{r} ρ by adaptive quadrature over the summand supports.
    pub fn l1_norm_on(&self, r: f64) -> Result<f64> {
        let pts = self.breakpoints(1.0, -r, r);
        Ok(integrate_with_breaks(|x| self.value(x), &pts, tight())?.value)
    }
}

/// comb evaluation with an explicit plateau bump.
pub fn comb(rho0: &Bump, x: f64) -> Result<f64> {
    Ok(Comb::new(rho0.clone())?.value(x))
}

pub fn comb_scaled(rho0: &Bump, eps: f64, x: f64) -> Result<f64> {
    Ok(Comb::new(rho0.clone())?.scaled(eps, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_bumps_meet_invariants() {
        for case in [BumpCase::SymmetricA, BumpCase::RightB, BumpCase::LeftC] {
            let b = build_bump(case, false).unwrap();
            let (lo, hi) = b.support();
            let q = integrate(|x| b.value(x), lo, hi, QuadConfig { abs_tol: 1e-15, rel_tol: 1e-14, max_intervals: 5000 })
                .unwrap();
            assert!((q.value - 1.0).abs() < 1e-10, "{case:?}: {}", q.value);
            assert_eq!(b.value(lo), 0.0);
            assert_eq!(b.value(hi), 0.0);
            for k in 0..=200 {
                let x = -1.5 + 3.0 * k as f64 / 200.0;
                assert!(b.value(x) >= 0.0);
                assert!(b.value(x) <= b.peak() * (1.0 + 1e-12));
            }
        }
        let a = build_bump(BumpCase::SymmetricA, false).unwrap();
        assert_eq!(a.value(1.0), 0.0);
        assert_eq!(a.value(-1.0), 0.0);
        for k in 0..100 {
            let x = k as f64 / 100.0;
            assert_eq!(a.value(x), a.value(-x));
        }
        assert_eq!(build_bump(BumpCase::RightB, false).unwrap().support(), (0.0, 1.0));
        assert_eq!(build_bump(BumpCase::LeftC, false).unwrap().support(), (-1.0, 0.0));
    }

    #[test]
    fn half_mass_left_of_zero() {
        let a = build_bump(BumpCase::SymmetricA, false).unwrap();
        let q = integrate(|x| a.value(x), -1.0, 0.0, QuadConfig::default()).unwrap();
        assert!((q.value - 0.5).abs() < 1e-10);
        assert_eq!(a.cdf(0.0), 0.5);
    }

    #[test]
    fn table_matches_quadrature() {
        let b = build_bump(BumpCase::RightB, false).unwrap();
        for k in 1..50 {
            let x = k as f64 / 50.0;
            let q = integrate(|s| b.value(s), 0.0, x, QuadConfig { abs_tol: 1e-15, rel_tol: 1e-14, max_intervals: 5000 })
                .unwrap();
            assert!((b.cdf(x) - q.value).abs() < 1e-12, "x={x}: {} vs {}", b.cdf(x), q.value);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for case in [BumpCase::SymmetricA, BumpCase::RightB] {
            let b = build_bump(case, false).unwrap();
            let h = 1e-6;
            for k in 1..40 {
                let (lo, hi) = b.support();
                let x = lo + (hi - lo) * k as f64 / 40.0;
                let fd = (b.value(x + h) - b.value(x - h)) / (2.0 * h);
                assert!((fd - b.derivative(x)).abs() < 1e-6 * (1.0 + b.derivative(x).abs()));
            }
        }
    }

    #[test]
    fn smoothed_steps() {
        for (sigma, case) in [0.5, 0.1, 0.0434, 0.01]
            .into_iter()
            .flat_map(|s| [BumpCase::SymmetricA, BumpCase::RightB, BumpCase::LeftC].map(|c| (s, c)))
        {
            let s = SmoothedStep::new(build_bump(case, false).unwrap(), sigma).unwrap();
            assert_eq!(smoothed_heaviside(&s, -2.0 * sigma), 0.0);
            assert_eq!(smoothed_heaviside(&s, 2.0 * sigma), 1.0);
            let mut prev = 0.0;
            for k in 0..=10_000 {
                let x = -1.5 * sigma + 3.0 * sigma * k as f64 / 10_000.0;
                let v = s.value(x);
                assert!(v >= prev && (0.0..=1.0).contains(&v));
                prev = v;
            }
            let h0 = s.value(0.0);
            match case {
                BumpCase::SymmetricA => assert_eq!(h0, 0.5),
                BumpCase::RightB => assert_eq!(h0, 0.0),
                BumpCase::LeftC => assert_eq!(h0, 1.0),
            }
            assert_eq!(s.value(sigma + 1e-12), 1.0);
        }
        assert!(SmoothedStep::new(build_bump(BumpCase::SymmetricA, false).unwrap(), 0.0).is_err());
    }

    #[test]
    fn sup_of_step_derivative_scales_like_one_over_sigma() {
        let b = build_bump(BumpCase::SymmetricA, false).unwrap();
        for sigma in [0.3, 0.1, 0.01] {
            let s = SmoothedStep::new(b.clone(), sigma).unwrap();
            assert_eq!(s.derivative(0.0), b.peak() / sigma);
        }
    }

    #[test]
    fn plateau_bump() {
        let p = build_bump(BumpCase::SymmetricA, true).unwrap();
        // ∫ = 2a + w for a symmetric smooth step, so a = (1 - w)/2
        let a = p.plateau_half_width().unwrap();
        assert!((a - (1.0 - DEFAULT_PLATEAU_RAMP) / 2.0).abs() < 1e-10, "{a}");
        assert_eq!(p.value(0.0), 1.0);
        assert!((p.integral() - 1.0).abs() < 1e-10);
        for k in 0..=400 {
            let x = -1.0 + 2.0 * k as f64 / 400.0;
            assert!((0.0..=1.0).contains(&p.value(x)));
        }
        assert!(build_bump(BumpCase::RightB, true).is_err());
        assert!(matches!(Bump::plateau(1.5), Err(Error::Config(_))));
    }

    #[test]
    fn comb_values() {
        let p = build_bump(BumpCase::SymmetricA, true).unwrap();
        let c = Comb::new(p.clone()).unwrap();
        for n in -40..=40 {
            assert_eq!(c.value(n as f64), 1.0, "n={n}");
        }
        for n in 1..60 {
            for x in [0.5, 1.0, 2.0, 3.7] {
                let eps = x / n as f64;
                assert_eq!(comb_scaled(&p, eps, x).unwrap(), 1.0, "x={x} n={n}");
            }
        }
        assert!(Comb::new(build_bump(BumpCase::SymmetricA, false).unwrap()).is_err());
    }

    #[test]
    fn comb_agrees_with_brute_force() {
        let p = build_bump(BumpCase::SymmetricA, true).unwrap();
        let c = Comb::new(p.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-28.0..28.0);
            let brute: f64 = (-30..=30)
                .map(|n: i32| p.value(2f64.powi(n.abs()) * (x - n as f64)))
                .sum();
            assert_eq!(c.value(x), brute, "x={x}");
        }
    }

    #[test]
    fn comb_l1_norm() {
        let c = Comb::new(build_bump(BumpCase::SymmetricA, true).unwrap()).unwrap();
        // Σ_{|n|≤20} 2^{-|n|} = 3 - 2^{-19}
        let truncated = 3.0 - 2f64.powi(-19);
        assert!((c.l1_norm_on(20.5).unwrap() - truncated).abs() < 1e-8);
        assert!((c.l1_norm_on(40.5).unwrap() - 3.0).abs() < 1e-8);
    }
}
