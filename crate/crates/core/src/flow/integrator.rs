//! Dormand–Prince 5(4) with FSAL, a state-dependent step cap, and steps that
//! land exactly on the requested output times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[cfg(test)]
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// fifth-order weights equal the last row of A (first same as last)
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];

// difference between fifth- and fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const MAX_STEPS: usize = 5_000_000;

/// Step counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl StepStats {
    pub fn merge(&mut self, other: StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.evaluations += other.evaluations;
    }
}

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

/// Integrates the autonomous system y' = f(y) from `t0` through `targets`,
/// which must be strictly monotone in one direction away from `t0`. Returns
/// the state at each target. `cap(y)` bounds the step length at y; `eps` only
/// labels errors.
pub fn integrate<F, G>(
    mut rhs: F,
    cap: G,
    t0: f64,
    y0: &[f64],
    targets: &[f64],
    tol: Tolerance,
    eps: f64,
) -> Result<(Vec<Vec<f64>>, StepStats)>
where
    F: FnMut(&[f64], &mut [f64]),
    G: Fn(&[f64]) -> f64,
{
    let n = y0.len();
    let mut stats = StepStats::default();
    let mut out = Vec::with_capacity(targets.len());
    if targets.is_empty() {
        return Ok((out, stats));
    }
    let dir = (targets[0] - t0).signum();
    if dir == 0.0 {
        return Err(Error::Config("integration targets must differ from t0".into()));
    }
    let fail = |t: f64, reason: String| Error::Integration { eps, t, reason };

    let mut k = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut t = t0;
    rhs(&y, &mut k[0]);
    stats.evaluations += 1;
    if k[0].iter().any(|v| !v.is_finite()) {
        return Err(fail(t, "non-finite right-hand side at the initial state".into()));
    }
    let mut h = cap(&y).min(1e-2).min((targets[0] - t0).abs());
    let mut steps = 0usize;

    for &target in targets {
        if (target - t) * dir <= 0.0 {
            return Err(Error::Config("integration targets must be strictly monotone".into()));
        }
        loop {
            let remaining = (target - t).abs();
            if remaining == 0.0 {
                break;
            }
            steps += 1;
            if steps > MAX_STEPS {
                return Err(fail(t, format!("step budget of {MAX_STEPS} exhausted")));
            }
            let limit = cap(&y);
            h = h.min(limit);
            let landing = h >= remaining;
            if landing {
                h = remaining;
            }
            if !landing && h < 1e-13 * t.abs().max(1.0) {
                return Err(fail(t, format!("step size underflow (h = {h:e})")));
            }
            let hs = dir * h;

            for s in 1..6 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..s {
                        acc += A[s][j] * k[j][i];
                    }
                    stage[i] = y[i] + hs * acc;
                }
                rhs(&stage, &mut k[s]);
            }
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..6 {
                    acc += B[j] * k[j][i];
                }
                y_new[i] = y[i] + hs * acc;
            }
            rhs(&y_new, &mut k[6]);
            stats.evaluations += 6;

            let mut acc = 0.0;
            let mut finite = true;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += E[s] * k[s][i];
                }
                e *= hs;
                let scale = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
                let r = e / scale;
                acc += r * r;
                finite &= y_new[i].is_finite() && k[6][i].is_finite();
            }
            if !finite {
                return Err(fail(t, "non-finite state".into()));
            }
            let err = (acc / n as f64).sqrt();

            if err <= 1.0 {
                stats.accepted += 1;
                t = if landing { target } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let fac = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a landing step may have been shortened; grow from the
                // controller's proposal, not from the truncated length
                h *= fac;
            } else {
                stats.rejected += 1;
                h *= (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerance = Tolerance { atol: 1e-12, rtol: 1e-12 };

    #[test]
    fn tableau_is_consistent() {
        for s in 1..7 {
            let row: f64 = A[s].iter().sum();
            assert!((row - C[s]).abs() < 1e-14, "row {s}");
        }
        assert!((B.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(E.iter().sum::<f64>().abs() < 1e-15);
        for j in 0..6 {
            assert_eq!(A[6][j], B[j]);
        }
    }

    #[test]
    fn exponential_decay_forward_and_backward() {
        let targets: Vec<f64> = (1..=10).map(|k| k as f64 * 0.5).collect();
        let (ys, stats) =
            integrate(|y, dy| dy[0] = -y[0], |_| f64::INFINITY, 0.0, &[1.0], &targets, TOL, 0.1).unwrap();
        for (t, y) in targets.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-11, "t={t}");
        }
        assert!(stats.accepted > 0);
        let back: Vec<f64> = targets.iter().map(|t| -t).collect();
        let (ys, _) = integrate(|y, dy| dy[0] = -y[0], |_| f64::INFINITY, 0.0, &[1.0], &back, TOL, 0.1).unwrap();
        for (t, y) in back.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-10 * (-t).exp());
        }
    }

    #[test]
    fn harmonic_oscillator_lands_on_targets() {
        let targets = [1.0, 2.0, std::f64::consts::PI];
        let (ys, _) = integrate(
            |y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            |_| 0.3,
            0.0,
            &[1.0, 0.0],
            &targets,
            TOL,
            0.1,
        )
        .unwrap();
        for (t, y) in targets.iter().zip(&ys) {
            assert!((y[0] - t.cos()).abs() < 1e-11);
            assert!((y[1] + t.sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(|y, dy| dy[0] = y[0] * y[0], |_| f64::INFINITY, 0.0, &[1.0], &[2.0], TOL, 0.5);
        assert!(matches!(r, Err(Error::Integration { eps, .. }) if eps == 0.5));
    }

    #[test]
    fn non_monotone_targets_are_rejected() {
        let r = integrate(|_, dy| dy[0] = 0.0, |_| 1.0, 0.0, &[0.0], &[1.0, 0.5], TOL, 0.1);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
