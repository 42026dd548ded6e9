mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use thetanav::chip_io::UnitFit;
use thetanav::harness::{RunConfig, Rig};
use thetanav::theta_core::VelocityVector;
use thetanav::vector_net::*;
use thetanav::Error;

fn fit(unit: usize, f: f64, b: f64) -> UnitFit {
    UnitFit {
        unit,
        f_idle_hat: f,
        beta_hat: b,
        r2: 1.0,
    }
}

/// Minimum total |Δf| over every perfect matching of `f`.
fn best_matching(f: &[f64]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 1..f.len() {
        let rest: Vec<f64> = f[1..].iter().enumerate().filter(|(i, _)| i + 1 != j).map(|(_, v)| *v).collect();
        best = best.min((f[0] - f[j]).abs() + best_matching(&rest));
    }
    best
}

proptest! {
    #[test]
    fn idle_pairing_is_optimal(f in (1usize..=4).prop_flat_map(|n| prop::collection::vec(100.0f64..4000.0, 2 * n))) {
        let units: Vec<UnitFit> = f.iter().enumerate().map(|(i, &x)| fit(i, x, 20.0)).collect();
        let pairs = pair_by_idle(&units, f.len() / 2).unwrap();
        let cost: f64 = pairs.iter().map(|&(a, b)| (f[a] - f[b]).abs()).sum();
        prop_assert!((cost - best_matching(&f)).abs() < 1e-9);
        let mut used: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        used.sort();
        used.dedup();
        prop_assert_eq!(used.len(), f.len());
    }

    #[test]
    fn phase_shift_in_range(r in 0.0f64..8.0, theta in -7.0f64..7.0, beta in 0.0f64..20.0,
                            off in -10.0f64..10.0, tp in 0.0f64..6.3) {
        let cell = SpatialCell { beta_i: beta, f_off_i: off, theta_p: tp };
        let loc = TargetLocation { r, theta };
        let phi = phase_shift(&loc, &cell, 2.0).unwrap();
        prop_assert!((0.0..0.125).contains(&phi));
        let turned = phase_shift(&TargetLocation { r, theta: theta + std::f64::consts::TAU }, &cell, 2.0).unwrap();
        let d = (phi - turned).abs();
        prop_assert!(d < 1e-6 || (0.125 - d) < 1e-6, "{} vs {}", phi, turned);
    }

    #[test]
    fn nearest_tap_is_circularly_nearest(x in 0.0f64..1.0) {
        let k = nearest_tap(x);
        let d = |t: u8| common::circ(x, t as f64 / 8.0).abs();
        for t in 0..8u8 {
            prop_assert!(d(k) <= d(t) + 1e-12);
        }
        prop_assert!(d(k) <= 1.0 / 16.0 + 1e-12);
    }

    #[test]
    fn node_counts_match_structure(blocks in 1usize..5, n in 1u32..4, k in 1usize..5) {
        let m = blocks << n;
        let (shared, total) = structural_node_counts(m, n, k);
        prop_assert_eq!(sharable_nodes(m as u64, n).unwrap(), shared as u64);
        prop_assert_eq!(total_nodes(m as u64, n, k as u64).unwrap(), total as u64);
    }

    #[test]
    fn muxtable_text_round_trips(taps in prop::collection::vec(0u8..8, 20), drops in prop::collection::vec(any::<bool>(), 20),
                                 r in 0.0f64..6.0, theta in -3.2f64..3.2) {
        let slots = (0..80).map(|i| (i * 3 % 128, if i % 4 == 0 { taps[i / 4] } else { 0 })).collect();
        let t = MuxTable { target: TargetLocation { r, theta }, speed: 2.0, tolerance: 0.1875, slots, dropped: drops };
        prop_assert_eq!(MuxTable::from_text(&t.to_text()).unwrap(), t);
    }
}

#[test]
fn pairing_examples() {
    let u = vec![fit(0, 100.0, 1.0), fit(1, 101.0, 1.0), fit(2, 200.0, 1.0), fit(3, 202.0, 1.0)];
    assert_eq!(pair_by_idle(&u, 2).unwrap(), vec![(0, 1), (2, 3)]);
    let same: Vec<UnitFit> = (0..80).map(|i| fit(i, 2000.0, 20.0)).collect();
    let p = pair_layer1(&same).unwrap();
    assert_eq!(p.pairs.len(), 40);
    assert_eq!(p.groups.len(), 20);
    for pair in &p.pairs {
        let (a, b) = (p.code_of(pair.a).unwrap(), p.code_of(pair.b).unwrap());
        assert_eq!([a[0] as i32 - 8, a[1] as i32 - 8], [8 - b[0] as i32, 8 - b[1] as i32]);
    }
    let x = p.pairs.iter().filter(|q| q.axis == Axis::X).count();
    assert_eq!(x, 20);
    for (g, grp) in p.groups.iter().enumerate() {
        assert_eq!(p.pairs[grp[0]].axis, p.pairs[grp[1]].axis);
        assert_eq!(p.pairs[grp[0]].axis, if g < 10 { Axis::X } else { Axis::Y });
    }
    assert!(matches!(pair_layer1(&same[..79]), Err(Error::InsufficientPopulation { .. })));
}

#[test]
fn effective_parameter_examples() {
    let a = CellParams { beta: 3.5, f_off: 10.0, v_pref: VelocityVector::new(4.0, 0.0) };
    let b = CellParams { beta: 4.9, f_off: 13.5, v_pref: VelocityVector::new(-4.0, 0.0) };
    let e = effective_params(&a, &b, [0, 1]).unwrap();
    assert!((e.beta_eff - 8.4).abs() < 1e-12);
    assert!((e.f_off_eff + 3.5).abs() < 1e-12);
    let m = effective_params(&a, &CellParams { v_pref: b.v_pref, ..a }, [0, 1]).unwrap();
    assert_eq!((m.beta_eff, m.f_off_eff), (7.0, 0.0));
    assert!(effective_params(&a, &a, [0, 1]).is_err());
}

#[test]
fn phase_shift_examples() {
    let cell = SpatialCell { beta_i: 8.4, f_off_i: -3.5, theta_p: 0.0 };
    let phi = phase_shift(&TargetLocation { r: 1.0, theta: 0.0 }, &cell, 2.0).unwrap();
    assert!((phi - 0.100).abs() < 1e-9, "{phi}");
    assert_eq!(phase_shift(&TargetLocation { r: 0.0, theta: 1.0 }, &cell, 2.0).unwrap(), 0.0);
    let flat = SpatialCell { f_off_i: 0.0, ..cell };
    for r in [1.0, 2.5, 7.0] {
        let loc = TargetLocation { r, theta: std::f64::consts::FRAC_PI_2 };
        assert!(phase_shift(&loc, &flat, 2.0).unwrap() < 1e-9);
    }
    assert!(phase_shift(&TargetLocation { r: 1.0, theta: 0.0 }, &cell, 0.0).is_err());
}

#[test]
fn fir_coefficients_are_symmetric_unit_gain() {
    for c in [hamming_coefficients(), moving_average_coefficients()] {
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..FIR_TAPS {
            assert!((c[i] - c[FIR_TAPS - 1 - i]).abs() < 1e-15);
        }
        let f = LayerFilter::new(c, 0.5, [0.5, 0.4]);
        assert!((f.fir(0x1ff) - 1.0).abs() < 1e-9);
        assert_eq!(f.fir(0), 0.0);
    }
}

#[test]
fn rc_step_response_is_exact() {
    let mut id = [0.0; FIR_TAPS];
    id[0] = 1.0;
    for alpha in [1.0 / 16.0, 1.0 / 96.0, 0.3] {
        let f = LayerFilter::new(id, alpha, [2.0, 1.0]);
        let mut node = NodeState::default();
        for n in 1..=400 {
            node.step(true, true, &f);
            let expected = 1.0 - (1.0 - alpha).powi(n);
            assert!((node.y - expected).abs() < 1e-12, "n={n} y={} expected {expected}", node.y);
        }
    }
}

#[test]
fn node_rises_within_closed_form_bounds() {
    let cfg = FilterConfig::default();
    for layer in [Layer::One, Layer::Two] {
        let f = LayerFilter::for_layer(&cfg, layer);
        let first = |shift: i32| (1..).find(|&n: &i32| 1.0 - (1.0 - f.alpha).powi(n - shift) >= f.rise).unwrap();
        let (lo, hi) = (first(0), first(FIR_TAPS as i32));
        let mut node = NodeState::default();
        let rise = (1..=2000).find(|_| node.step(true, true, &f)).unwrap();
        assert!(rise >= lo && rise <= hi, "{layer:?}: rose at {rise}, bounds {lo}..{hi}");
        for _ in 0..2000 {
            node.step(false, true, &f);
        }
        assert!(!node.out);
        node.clear();
        assert_eq!(node, NodeState::default());
    }
}

#[test]
fn beat_of_two_square_waves() {
    let f = LayerFilter::for_layer(&FilterConfig::default(), Layer::One);
    let fs = 6.0e6 / 220.0;
    let rate = common::beat_rate(2000.0, 2050.0, fs, 4.0, &f);
    assert!((rate - 50.0).abs() / 50.0 < 0.02, "{rate}");
}

#[test]
fn effective_gain_predicts_beat() {
    let f = LayerFilter::for_layer(&FilterConfig::default(), Layer::One);
    let fs = 6.0e6 / 220.0;
    let e = effective_params(
        &CellParams { beta: 3.5, f_off: 10.0, v_pref: VelocityVector::new(1.0, 0.0) },
        &CellParams { beta: 4.9, f_off: 13.5, v_pref: VelocityVector::new(-1.0, 0.0) },
        [0, 1],
    )
    .unwrap();
    for p in [-12.0, -4.0, 3.0, 9.0, 16.0] {
        let pred = e.beta_eff * p + e.f_off_eff;
        let (fa, fb) = (2023.771 + 10.0 + 3.5 * p, 2023.771 + 13.5 - 4.9 * p);
        let rate = common::beat_rate(fa, fb, fs, 4.0, &f);
        assert!((rate - pred.abs()).abs() / pred.abs() < 0.02, "p={p} pred {pred} measured {rate}");
    }
}

#[test]
fn node_count_examples() {
    assert_eq!(sharable_nodes(80, 2).unwrap(), 20);
    assert_eq!(sharable_nodes(80, 1).unwrap(), 0);
    assert_eq!(sharable_nodes(64, 3).unwrap(), 32);
    assert_eq!(structural_node_counts(64, 3, 2).0, 32);
    assert_eq!(total_nodes(80, 2, 1).unwrap(), 60);
    assert_eq!(total_nodes(80, 2, 4).unwrap(), 180);
    assert!(matches!(sharable_nodes(81, 2), Err(Error::NotDivisible { .. })));
    assert!(total_nodes(80, 2, 0).is_err());
}

/// 80 units at 2000 Hz and gain 20 in a fixed arrangement: pair `i` is
/// units `(2i, 2i+1)`, groups 0..10 on x and 10..20 on y.
fn synthetic(betas: &[(usize, f64)]) -> (Pairing, Vec<UnitFit>) {
    let pairs = (0..40)
        .map(|i| LayerPair { a: 2 * i, b: 2 * i + 1, axis: if i < 20 { Axis::X } else { Axis::Y } })
        .collect();
    let groups = (0..20).map(|g| [2 * g, 2 * g + 1]).collect();
    let mut fits: Vec<UnitFit> = (0..80).map(|i| fit(i, 2000.0, 20.0)).collect();
    for &(u, b) in betas {
        fits[u].beta_hat = b;
    }
    (Pairing { pairs, groups }, fits)
}

#[test]
fn tie_goes_to_lower_tap_and_is_retained() {
    // Group 0's second pair is slower by 15/16 Hz per code unit, so at
    // t = 1/16 s its flexible unit must advance exactly 1/16 cycle.
    let (pairing, fits) = synthetic(&[(2, 19.0625), (3, 19.0625)]);
    let params = CompileParams {
        pitch: 0.125,
        speed: 2.0,
        tolerance: 1.0 / 16.0,
        g_min: 1,
        lag_compensation: false,
        ..CompileParams::default()
    };
    let fs = 6.0e6 / 220.0;
    let (table, plans) = compile_detailed(&pairing, &fits, TargetLocation { r: 1.0, theta: 0.0 }, &params,
                                          &FilterConfig::default(), fs).unwrap();
    assert_eq!(plans[0].required, 1.0 / 16.0);
    assert_eq!(plans[0].tap, 0);
    assert_eq!(plans[0].residual, 1.0 / 16.0);
    assert!(!plans[0].dropped);
    assert!(plans[1..].iter().all(|p| p.tap == 0 && p.residual == 0.0 && !p.dropped));
    assert_eq!(table.active_groups(), 20);
    table.validate().unwrap();
}

#[test]
fn zero_range_and_determinism() {
    let (pairing, fits) = synthetic(&[]);
    let fs = 6.0e6 / 220.0;
    let p = CompileParams::default();
    let f = FilterConfig::default();
    let (t0, _) = compile_detailed(&pairing, &fits, TargetLocation { r: 0.0, theta: 0.3 }, &p, &f, fs).unwrap();
    assert!(t0.slots.iter().all(|s| s.1 == 0));
    assert_eq!(t0.active_groups(), 20);
    let target = TargetLocation::from_grid(2, -3);
    let a = compile_lookup(&pairing, &fits, target, &p, &f, fs).unwrap();
    let b = compile_lookup(&pairing, &fits, target, &p, &f, fs).unwrap();
    assert_eq!(a, b);
    assert_eq!(MuxTable::from_text(&a.to_text()).unwrap(), a);
}

#[test]
fn axis_minimum_is_enforced() {
    let (pairing, mut fits) = synthetic(&[]);
    // Wildly mismatched x groups exceed the layer-2 passband and drop.
    for g in 0..10 {
        fits[4 * g + 2].beta_hat = 5.0;
        fits[4 * g + 3].beta_hat = 5.0;
    }
    let fs = 6.0e6 / 220.0;
    let p = CompileParams { g_min: 1, axis_min: 1, ..CompileParams::default() };
    let r = compile_detailed(&pairing, &fits, TargetLocation::from_grid(1, 0), &p, &FilterConfig::default(), fs);
    assert!(matches!(r, Err(Error::TooFewAxisGroups { axis: 'x', active: 0, min: 1 })), "{r:?}");
    let loose = CompileParams { axis_min: 0, ..p };
    let (t, _) = compile_detailed(&pairing, &fits, TargetLocation::from_grid(1, 0), &loose, &FilterConfig::default(), fs).unwrap();
    assert_eq!(t.active_groups(), 10);
}

#[test]
fn muxtable_rejects_bad_text() {
    assert!(MuxTable::from_text("").is_err());
    assert!(MuxTable::from_text("muxtable,2\n").is_err());
    assert!(MuxTable::from_text("muxtable,1\ntarget,1,0\nspeed,2\ntolerance,0.1\n0,3,9\n1,2,0\n2,1,0\n3,0,0\n").is_err());
    assert!(MuxTable::from_text("muxtable,1\ntarget,1,0\nspeed,2\ntolerance,0.1\n0,3,1\n1,2,1\n2,1,0\n3,0,0\n").is_err());
    assert!(MuxTable::from_text("muxtable,1\ntarget,1,0\nspeed,2\n0,3,1\n1,2,0\n2,1,0\n3,0,0\n").is_err());
}

#[test]
fn network_constant_inputs() {
    let (pairing, fits) = synthetic(&[]);
    let f = FilterConfig::default();
    let table = compile_lookup(&pairing, &fits, TargetLocation { r: 0.0, theta: 0.0 }, &CompileParams::default(), &f,
                               6.0e6 / 220.0).unwrap();
    let mut net = VectorNetwork::new(table, &f);
    assert!((0..3000).all(|_| !net.step(&[false; 80])));
    let l1 = LayerFilter::for_layer(&f, Layer::One);
    let l2 = LayerFilter::for_layer(&f, Layer::Two);
    let first = |a: f64, r: f64, shift: i32| (1..).find(|&n: &i32| 1.0 - (1.0 - a).powi(n - shift) >= r).unwrap();
    let lo = first(l1.alpha, l1.rise, 0) + first(l2.alpha, l2.rise, 0) - 1;
    let hi = first(l1.alpha, l1.rise, 9) + first(l2.alpha, l2.rise, 9) - 1;
    let rise = (1..=5000).find(|_| net.step(&[true; 80])).unwrap();
    assert!(rise >= lo && rise <= hi, "rose at {rise}, bounds {lo}..{hi}");
    net.clear();
    assert!(!net.output());
}

#[test]
fn compiled_phase_matches_simulated_phases() {
    let mut cfg = RunConfig::default();
    cfg.network.g_min = 1;
    let mut rig = Rig::build(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let speed = cfg.network.speed;
    for _ in 0..8 {
        let target = TargetLocation { r: rng.gen_range(0.5..5.0), theta: rng.gen_range(0.0..std::f64::consts::TAU) };
        let (_, plans) = rig.compile_detailed(target).unwrap();
        let d = target.direction();
        let oracle = common::oracle_required(&mut rig, &plans, VelocityVector::new(speed * d.vx, speed * d.vy));
        for (p, o) in plans.iter().zip(&oracle) {
            let e = common::circ(p.required, *o).abs();
            assert!(e <= 1.0 / 16.0, "target {target:?}: compiled {} simulated {o}", p.required);
            let dt = (p.tap as i32 - nearest_tap(*o) as i32).rem_euclid(8);
            assert!(dt == 0 || dt == 1 || dt == 7);
        }
    }
}
