use genflow_core::association::*;
use genflow_core::{build_bump, BumpCase, Comb, EpsilonNet, GrowthKind, Point, SampleGrid, ScalingLaw, Space, Verdict};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn net() -> EpsilonNet {
    EpsilonNet::geometric(1e-2, 1e-8, 7, ScalingLaw::InverseLog).unwrap()
}

fn r1() -> Space {
    Space::euclidean(1).unwrap()
}

fn cfg() -> AssocConfig {
    AssocConfig::for_tolerance(TOL)
}

fn identity() -> NetFunction {
    NetFunction::fixed("x", r1(), r1(), &net(), |x| x.to_vec())
}

fn shifted() -> NetFunction {
    let n = net();
    NetFunction::from_fn("x + sigma", r1(), r1(), &n.clone(), move |e, x| vec![x[0] + n.sigma(e)])
}

fn points(xs: &[f64]) -> Vec<Point> {
    xs.iter().map(|x| Point::new(r1(), vec![*x]).unwrap()).collect()
}

fn comb_net(n: &EpsilonNet) -> NetFunction {
    let c = Comb::new(build_bump(BumpCase::SymmetricA, true).unwrap()).unwrap();
    let b = c.clone();
    NetFunction::from_fn("comb(x/eps)", r1(), r1(), n, move |e, x| vec![c.scaled(e, x[0])])
        .with_breakpoints(move |e, lo, hi| b.breakpoints(e, lo, hi))
}

fn sine_net(n: &EpsilonNet) -> NetFunction {
    NetFunction::from_fn("sin(x/eps)", r1(), r1(), n, |e, x| vec![(x[0] / e).sin()])
}

fn weak_net() -> EpsilonNet {
    EpsilonNet::geometric(1e-1, 1e-4, 7, ScalingLaw::InverseLog).unwrap()
}

#[test]
fn reflexivity_for_every_notion() {
    let u = identity();
    let grid = SampleGrid::cube(1, 1.0, 41).unwrap();
    let pts = points(&[-1.0, 0.0, 0.5]);
    let z = zero_assoc(&u, &u, &grid, &cfg()).unwrap();
    assert_eq!(z.verdict, Verdict::Holds);
    assert!(z.evidence[0].series.iter().all(|p| p.1 == 0.0));
    assert!(pw_assoc(&u, &u, &pts, &cfg()).unwrap().holds());
    let e = pwae_assoc(&u, &u, &grid, &cfg()).unwrap();
    assert!(e.holds());
    assert_eq!(e.exceptional_fraction, Some(0.0));
    assert!(fast_assoc(&u, &u, &pts, &cfg()).unwrap().holds());
    let wn = weak_net();
    let w = NetFunction::fixed("x", r1(), r1(), &wn, |x| x.to_vec());
    assert!(model_assoc(&w, &w, &TestFunction::standard_family(), &[Density::bump()], &cfg()).unwrap().holds());
    assert!(assoc_rn(&w, &w, &[Density::bump()], &cfg()).unwrap().holds());
}

#[test]
fn shift_by_sigma_is_zero_associated_at_a_log_rate() {
    let grid = SampleGrid::cube(1, 2.0, 81).unwrap();
    let v = zero_assoc(&shifted(), &identity(), &grid, &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Holds);
    // s(ε) = σ(ε) exactly
    for (e, s) in &v.evidence[0].series {
        assert!((s - net().sigma(*e)).abs() <= 1e-15);
    }
    // 1/s = |ln ε|
    assert_eq!(v.rate.as_ref().unwrap().class, GrowthKind::LogType);
    assert!(v.rule.contains("nonincreasing"));
}

#[test]
fn shift_by_sigma_is_not_fast() {
    let v = fast_assoc(&shifted(), &identity(), &points(&[-1.0, 0.0, 1.0]), &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Fails);
}

#[test]
fn comb_fails_pointwise_on_the_plateau_subnet() {
    // ε_n = 1/n puts x = 1 on the n-th plateau, where the comb is 1
    let eps: Vec<f64> = (2..=13).map(|n| 1.0 / n as f64).collect();
    let zero = NetFunction::zero(r1(), 1, &net()).unwrap();
    let u = comb_net(&net());
    let v = pw_assoc_on(&u, &zero, &[(Point::new(r1(), vec![1.0]).unwrap(), eps.clone())], &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Fails);
    assert!(v.evidence[0].series.iter().all(|p| p.1 == 1.0));
    // pwae with the per-point bad subnets: every node fails
    let samples: Vec<(Point, Vec<f64>)> = [0.5, 1.0, 1.5, 2.0]
        .iter()
        .map(|&x| (Point::new(r1(), vec![x]).unwrap(), (3..=14).map(|n| x / n as f64).collect()))
        .collect();
    let e = pwae_assoc_on(&u, &zero, &samples, &cfg()).unwrap();
    assert_eq!(e.verdict, Verdict::Fails);
    assert_eq!(e.exceptional_fraction, Some(1.0));
}

#[test]
fn comb_is_model_associated_to_zero_within_the_lipschitz_bound() {
    let wn = weak_net();
    let zero = NetFunction::zero(r1(), 1, &wn).unwrap();
    let u = comb_net(&wn);
    let v = model_assoc(&u, &zero, &TestFunction::standard_family(), &[Density::bump()], &cfg()).unwrap();
    assert_eq!(v.verdict, Verdict::Holds);
    let phi = Density::bump();
    // the comb stays in [0, 1], where x² has Lipschitz constant 2
    for ev in &v.evidence {
        let lip = if ev.label.contains("x^2") { 2.0 } else { 1.0 };
        for (e, i) in &ev.series {
            assert!(*i <= e * lip * phi.sup_norm * 3.0 * (1.0 + 1e-6), "{}: {i} at {e}", ev.label);
        }
    }
}

#[test]
fn sine_is_weakly_but_not_model_associated_to_zero() {
    let wn = weak_net();
    let zero = NetFunction::zero(r1(), 1, &wn).unwrap();
    let u = sine_net(&wn);
    assert_eq!(assoc_rn(&u, &zero, &[Density::bump()], &cfg()).unwrap().verdict, Verdict::Holds);
    let m = model_assoc(&u, &zero, &[TestFunction::square()], &[Density::bump()], &cfg()).unwrap();
    assert_eq!(m.verdict, Verdict::Fails);
    // f ∘ u → 1/2 pointwise, so I(ε) → ½∫φ; ∫ bump = 0.443993816168079
    let half = 0.5 * 0.443_993_816_168_079_4;
    let last = m.evidence[0].series.last().unwrap().1;
    assert!((last - half).abs() <= 0.01 * half, "{last}");
}

#[test]
fn constants_under_weak_association() {
    let wn = weak_net();
    let zero = NetFunction::zero(r1(), 1, &wn).unwrap();
    let n = wn.clone();
    let small = NetFunction::from_fn("sigma", r1(), r1(), &wn, move |e, _| vec![n.sigma(e)]);
    let one = NetFunction::fixed("1", r1(), r1(), &wn, |_| vec![1.0]);
    assert_eq!(assoc_rn(&small, &zero, &[Density::bump()], &cfg()).unwrap().verdict, Verdict::Holds);
    assert_eq!(assoc_rn(&one, &zero, &[Density::bump()], &cfg()).unwrap().verdict, Verdict::Fails);
}

#[test]
fn weak_notions_need_the_real_line() {
    let c = NetFunction::fixed("id", Space::Circle, Space::Circle, &net(), |x| x.to_vec());
    assert!(model_assoc(&c, &c, &TestFunction::standard_family(), &[Density::bump()], &cfg()).is_err());
}

#[test]
fn coarse_grids_are_rejected_for_fine_scale_nets() {
    let n = net();
    let u = NetFunction::from_fn("bumpy", r1(), r1(), &n, |_, x| x.to_vec()).varying_on_sigma_scale();
    let coarse = SampleGrid::cube(1, 1.0, 21).unwrap();
    assert!(matches!(zero_assoc(&u, &identity(), &coarse, &cfg()), Err(genflow_core::Error::Config(_))));
}

#[test]
fn verdicts_serialize_with_their_rule() {
    let v = pw_assoc(&shifted(), &identity(), &points(&[0.0]), &cfg()).unwrap();
    let json = serde_json::to_value(&v).unwrap();
    assert_eq!(json["notion"], "pw");
    assert_eq!(json["verdict"], "holds");
    assert!(json["rule"].as_str().unwrap().contains("nonincreasing"));
    assert_eq!(json["evidence"][0]["series"].as_array().unwrap().len(), 7);
}

/// The monotone clause of the trend rule, on the last half of a series.
fn tail_monotone(series: &[(f64, f64)]) -> bool {
    let c = cfg();
    series[series.len() / 2..].windows(2).all(|w| w[1].1 <= (1.0 + c.slack) * w[0].1 + c.noise_floor)
}

/// a·σ²·(1 + b x) and d·ε cancel near ε = 1e-5, so |u - x| dips and rises
/// again at some points while the sup over the grid keeps decreasing.
#[test]
fn zero_does_not_force_monotone_points() {
    let (a, b, d) = (-0.002862061246509727, 0.052541947639266715, 0.9030168686931646);
    let n = net();
    let m = n.clone();
    let u = NetFunction::from_fn("affine", r1(), r1(), &n, move |e, x| {
        vec![x[0] + a * m.sigma(e).powi(2) * (1.0 + b * x[0]) + d * e]
    });
    let grid = SampleGrid::cube(1, 1.0, 17).unwrap();
    let pts: Vec<Point> = grid.base_points().into_iter().map(|c| Point::new(r1(), c).unwrap()).collect();
    let z = zero_assoc(&u, &identity(), &grid, &cfg()).unwrap();
    let p = pw_assoc(&u, &identity(), &pts, &cfg()).unwrap();
    assert_eq!(z.verdict, Verdict::Holds);
    assert_eq!(p.verdict, Verdict::Ambiguous);
    for ev in p.evidence.iter().filter(|ev| ev.verdict != Verdict::Holds) {
        assert_eq!(ev.verdict, Verdict::Ambiguous);
        assert!(!tail_monotone(&ev.series));
    }
}

fn arb_series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-12..1e-6f64, 1e-6..2.0f64], 7)
}

proptest! {
    #[test]
    fn scaling_down_keeps_a_holding_trend(values in arb_series(), c in 0.0..=1.0f64) {
        let n = net();
        let s: Vec<(f64, f64)> = n.values().iter().copied().zip(values.iter().copied()).collect();
        let scaled: Vec<(f64, f64)> = s.iter().map(|(e, v)| (*e, c * v)).collect();
        if trend_verdict(&s, n.sigma_max(), n.sigma_min(), &cfg()).holds() {
            prop_assert!(trend_verdict(&scaled, n.sigma_max(), n.sigma_min(), &cfg()).holds());
        }
    }

    #[test]
    fn trend_verdicts_follow_the_threshold(values in arb_series()) {
        let n = net();
        let s: Vec<(f64, f64)> = n.values().iter().copied().zip(values.iter().copied()).collect();
        let thr = 0.1 * (1.0 + n.sigma_min() / n.sigma_max());
        match trend_verdict(&s, n.sigma_max(), n.sigma_min(), &cfg()) {
            Verdict::Holds => prop_assert!(values[6] < thr),
            Verdict::Fails => prop_assert!(values[3..].iter().all(|v| *v >= thr)),
            Verdict::Ambiguous => {}
        }
    }

    // zero ⇒ pw on the grid's points up to the monotone clause; pw ⇒ pwae;
    // fast ⇒ pw
    #[test]
    fn verdict_monotonicity_on_affine_nets(a in -1.0..1.0f64, k in 0i32..3, b in -0.5..0.5f64, d in 0.0..2.0f64) {
        let n = net();
        let m = n.clone();
        // u_ε(x) = x + a·σ^k·(1 + b x) + d·ε
        let u = NetFunction::from_fn("affine", r1(), r1(), &n, move |e, x| {
            vec![x[0] + a * m.sigma(e).powi(k) * (1.0 + b * x[0]) + d * e]
        });
        let v = identity();
        let grid = SampleGrid::cube(1, 1.0, 17).unwrap();
        let pts: Vec<Point> = grid.base_points().into_iter().map(|c| Point::new(r1(), c).unwrap()).collect();
        let z = zero_assoc(&u, &v, &grid, &cfg()).unwrap();
        let p = pw_assoc(&u, &v, &pts, &cfg()).unwrap();
        let e = pwae_assoc(&u, &v, &grid, &cfg()).unwrap();
        let f = fast_assoc(&u, &v, &pts, &cfg()).unwrap();
        if z.holds() {
            // the sup bounds every point, so none can fail
            for ev in &p.evidence {
                prop_assert!(ev.verdict == Verdict::Holds || (ev.verdict == Verdict::Ambiguous && !tail_monotone(&ev.series)));
            }
        }
        if p.holds() { prop_assert!(e.holds()); }
        if f.holds() { prop_assert!(p.holds()); }
        prop_assert!((0.0..=1.0).contains(&e.exceptional_fraction.unwrap()));
    }
}
