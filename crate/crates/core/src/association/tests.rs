use super::notions::{conjunction, fast_series_verdict, weak_integral};
use super::*;
use crate::epsilon::ScalingLaw;
use crate::quadrature::QuadConfig;

fn net() -> EpsilonNet {
    EpsilonNet::geometric(1e-2, 1e-8, 7, ScalingLaw::InverseLog).unwrap()
}

fn series(values: &[f64]) -> Vec<(f64, f64)> {
    net().values().iter().copied().zip(values.iter().copied()).collect()
}

fn trend(values: &[f64]) -> Verdict {
    let n = net();
    trend_verdict(&series(values), n.sigma_max(), n.sigma_min(), &AssocConfig::for_tolerance(1e-9))
}

#[test]
fn trend_rule_cases() {
    let n = net();
    let sig: Vec<f64> = n.values().iter().map(|e| n.sigma(*e)).collect();
    assert_eq!(trend(&sig), Verdict::Holds);
    assert_eq!(trend(&[0.0; 7]), Verdict::Holds);
    assert_eq!(trend(&[1.0; 7]), Verdict::Fails);
    // small but rising over the last half
    assert_eq!(trend(&[0.05, 0.04, 0.03, 0.01, 0.02, 0.03, 0.04]), Verdict::Ambiguous);
    // mixed: last half straddles the threshold
    assert_eq!(trend(&[1.0, 1.0, 1.0, 1.0, 0.05, 0.5, 0.2]), Verdict::Ambiguous);
    // rises within the 10% slack
    assert_eq!(trend(&[0.05, 0.04, 0.03, 0.02, 0.021, 0.022, 0.023]), Verdict::Holds);
    // rises at the noise floor
    assert_eq!(trend(&[1e-3, 1e-5, 1e-9, 0.0, 5e-9, 0.0, 6e-9]), Verdict::Holds);
    assert_eq!(trend_verdict(&[], 0.2, 0.1, &AssocConfig::default()), Verdict::Ambiguous);
}

#[test]
fn trend_threshold_scales_with_sigma_ratio() {
    let cfg = AssocConfig::default();
    let flat = [(1e-2, 0.12), (1e-3, 0.12), (1e-4, 0.12), (1e-5, 0.12)];
    // threshold 0.1·(1 + 1) = 0.2
    assert_eq!(trend_verdict(&flat, 1.0, 1.0, &cfg), Verdict::Holds);
    // threshold 0.1·(1 + 0.1) = 0.11
    assert_eq!(trend_verdict(&flat, 1.0, 0.1, &cfg), Verdict::Fails);
}

#[test]
fn conjunction_table() {
    use Verdict::*;
    assert_eq!(conjunction(&[Holds, Holds]), Holds);
    assert_eq!(conjunction(&[Holds, Ambiguous]), Ambiguous);
    assert_eq!(conjunction(&[Ambiguous, Fails, Holds]), Fails);
    assert_eq!(conjunction(&[]), Holds);
}

fn fast(s: &[(f64, f64)]) -> Verdict {
    let n = net();
    fast_series_verdict(s, n.sigma_max(), n.sigma_min(), &AssocConfig::for_tolerance(1e-9))
}

#[test]
fn fast_clauses() {
    let eps = net().values().to_vec();
    // clause (i): exactly zero from some net element on
    let zeroed = series(&[0.3, 0.1, 1e-3, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(fast(&zeroed), Verdict::Holds);
    // a single trailing zero is not enough
    let one = series(&[0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.0]);
    assert_eq!(fast(&one), Verdict::Fails);
    // clause (ii): ε^7 has slope 7 > 6
    let p7: Vec<(f64, f64)> = eps.iter().map(|e| (*e, 1e-2 * (e / 1e-8).powi(7))).collect();
    assert_eq!(fast(&p7), Verdict::Holds);
    let p5: Vec<(f64, f64)> = eps.iter().map(|e| (*e, 1e-2 * (e / 1e-8).powi(5))).collect();
    assert_eq!(fast(&p5), Verdict::Fails);
    let n = net();
    let log: Vec<(f64, f64)> = eps.iter().map(|e| (*e, n.sigma(*e))).collect();
    assert_eq!(fast(&log), Verdict::Fails);
    // steep but still far from zero at the last element: not even pw
    let big: Vec<(f64, f64)> = eps.iter().map(|e| (*e, (e / 1e-9).powi(7))).collect();
    assert_eq!(fast(&big), Verdict::Fails);
    // at the floor at the end but rising over the last half
    assert_eq!(fast(&series(&[0.1, 0.1, 0.1, 0.01, 0.05, 0.0, 0.0])), Verdict::Fails);
}

#[test]
fn notion_labels_round_trip() {
    for n in Notion::ALL {
        let s = serde_json::to_string(&n).unwrap();
        assert_eq!(s, format!("\"{}\"", n.label().to_lowercase()));
        let back: Notion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, n);
    }
}

#[test]
fn config_validation() {
    assert!(AssocConfig::default().validate().is_ok());
    assert!(AssocConfig { tol_zero: 0.0, ..AssocConfig::default() }.validate().is_err());
    assert!(AssocConfig { slack: -0.1, ..AssocConfig::default() }.validate().is_err());
    assert!(AssocConfig { null_threshold: Some(1.5), ..AssocConfig::default() }.validate().is_err());
    assert_eq!(AssocConfig::for_tolerance(1e-9).noise_floor, 1e-8);
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn weak_integral_matches_composite_simpson() {
    let r1 = Space::euclidean(1).unwrap();
    let n = EpsilonNet::geometric(1e-1, 1e-3, 4, ScalingLaw::InverseLog).unwrap();
    let u = NetFunction::from_fn("sin(x/eps)", r1, r1, &n, |e, x| vec![(x[0] / e).sin()]);
    let zero = NetFunction::zero(r1, 1, &n).unwrap();
    let phi = Density::bump_at(0.3);
    for f in TestFunction::standard_family() {
        for &eps in n.values() {
            let got = weak_integral(&u, &zero, &f, &phi, eps, QuadConfig::default()).unwrap();
            let g = |x: f64| (f.eval(&[(x / eps).sin()]) - f.eval(&[0.0])) * phi.eval(x);
            let want = simpson(g, -0.7, 1.3, 400_000);
            assert!((got - want).abs() <= 1e-9, "{} eps {eps}: {got} vs {want}", f.label);
        }
    }
}

#[test]
fn incompatible_nets_are_rejected() {
    let r1 = Space::euclidean(1).unwrap();
    let a = NetFunction::fixed("a", r1, r1, &net(), |x| x.to_vec());
    let other = EpsilonNet::geometric(1e-2, 1e-6, 5, ScalingLaw::InverseLog).unwrap();
    let b = NetFunction::fixed("b", r1, r1, &other, |x| x.to_vec());
    assert!(check_compatible(&a, &b).is_err());
    let c = NetFunction::fixed("c", Space::Circle, Space::Circle, &net(), |x| x.to_vec());
    assert!(check_compatible(&a, &c).is_err());
}
