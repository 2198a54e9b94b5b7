//! Exact solutions for the two scenario fields and their ε → 0 limits.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::manifold::wrap;
use crate::mollifier::{BumpCase, SmoothedStep};

/// Pointwise limit of the circle flow started at α0, at time t (canonical
/// angle).
///
/// Inside [-π/2, π/2] the solution moves with unit speed until it reaches
/// ±π/2 and stays there; outside it is frozen. At the endpoints the value of
/// H_ε(0) decides: with H_ε(0) = 0 the start -π/2 is trapped, with
/// H_ε(0) = 1 the start π/2 is.
pub fn closed_form_marsden_limit(case: BumpCase, alpha0: f64, t: f64) -> f64 {
    let a = wrap(alpha0);
    let trapped = match case {
        BumpCase::SymmetricA => false,
        BumpCase::RightB => a == -FRAC_PI_2,
        BumpCase::LeftC => a == FRAC_PI_2,
    };
    if a.abs() > FRAC_PI_2 || trapped {
        return a;
    }
    if t <= -a - FRAC_PI_2 {
        -FRAC_PI_2
    } else if t >= -a + FRAC_PI_2 {
        FRAC_PI_2
    } else {
        a + t
    }
}

/// ∫_{-∞}^{x} of the 2π-periodized kernel, from its one-period antiderivative.
fn periodic_cumulative(step: &SmoothedStep, x: f64) -> f64 {
    let r = wrap(x);
    let m = ((x - r) / (2.0 * PI)).round();
    m + step.value(r)
}

/// Φ^ε(t; α, β) for the torus field, in cover coordinates:
/// (α + t, β + t - ∫_α^{α+t} ρ_σ).
pub fn closed_form_torus(step: &SmoothedStep, t: f64, alpha: f64, beta: f64) -> [f64; 2] {
    let end = alpha + t;
    let swept = periodic_cumulative(step, end) - periodic_cumulative(step, alpha);
    [end, beta + t - swept]
}

/// Heaviside with the bump case's value at 0.
pub fn heaviside(case: BumpCase, x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        case.heaviside_at_zero()
    }
}

fn periodic_heaviside(case: BumpCase, x: f64) -> f64 {
    let r = wrap(x);
    let m = ((x - r) / (2.0 * PI)).round();
    m + heaviside(case, r)
}

/// ε → 0 limit of the torus flow: (α + t, β + t - H(α + t) + H(α)).
pub fn closed_form_torus_limit(case: BumpCase, t: f64, alpha: f64, beta: f64) -> [f64; 2] {
    let end = alpha + t;
    [end, beta + t - periodic_heaviside(case, end) + periodic_heaviside(case, alpha)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::arc;
    use crate::mollifier::build_bump;

    #[test]
    fn marsden_limit_examples() {
        let a = BumpCase::SymmetricA;
        assert_eq!(closed_form_marsden_limit(a, 0.0, -PI), -FRAC_PI_2);
        assert_eq!(closed_form_marsden_limit(a, 0.0, 0.2), 0.2);
        for t in [-5.0, 0.0, 3.0] {
            assert_eq!(closed_form_marsden_limit(a, 0.6 * PI, t), 0.6 * PI);
        }
        assert_eq!(closed_form_marsden_limit(a, 0.0, PI), FRAC_PI_2);
        // endpoints follow the generic formula in case (a)
        assert_eq!(closed_form_marsden_limit(a, FRAC_PI_2, -PI), -FRAC_PI_2);
        assert_eq!(closed_form_marsden_limit(a, -FRAC_PI_2, PI), FRAC_PI_2);
        assert_eq!(closed_form_marsden_limit(BumpCase::RightB, -FRAC_PI_2, PI), -FRAC_PI_2);
        assert_eq!(closed_form_marsden_limit(BumpCase::RightB, FRAC_PI_2, -1.0), FRAC_PI_2 - 1.0);
        assert_eq!(closed_form_marsden_limit(BumpCase::LeftC, FRAC_PI_2, -1.0), FRAC_PI_2);
        assert_eq!(closed_form_marsden_limit(BumpCase::LeftC, -FRAC_PI_2, 1.0), -FRAC_PI_2 + 1.0);
    }

    #[test]
    fn torus_examples() {
        let step = SmoothedStep::new(build_bump(BumpCase::SymmetricA, false).unwrap(), 0.05).unwrap();
        assert_eq!(closed_form_torus(&step, 1.0, 1.0, 0.0), [2.0, 1.0]);
        assert_eq!(closed_form_torus(&step, 0.0, 0.3, -1.2), [0.3, -1.2]);
        assert_eq!(closed_form_torus(&step, 0.0, 0.0, 2.0), [0.0, 2.0]);
        let lim = closed_form_torus_limit(BumpCase::SymmetricA, 1.0, -0.5, 0.0);
        assert_eq!(lim, [0.5, 0.0]);
        // a full turn sweeps the whole kernel once
        let full = closed_form_torus(&step, 2.0 * PI, 1.0, 0.0);
        assert!(arc(full[1], 2.0 * PI - 1.0) < 1e-12);
    }

    #[test]
    fn torus_limit_case_values_on_the_singular_line() {
        for (case, h0) in [(BumpCase::SymmetricA, 0.5), (BumpCase::RightB, 0.0), (BumpCase::LeftC, 1.0)] {
            let lim = closed_form_torus_limit(case, 1.0, 0.0, 0.0);
            assert_eq!(lim[1], 1.0 - 1.0 + h0);
        }
    }
}
