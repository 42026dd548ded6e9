#![allow(dead_code)]

use thetanav::harness::Rig;
use thetanav::theta_core::{OscillatorState, VelocityVector};
use thetanav::vector_net::{GroupPlan, LayerFilter, NodeState};

/// Signed circular difference in cycles, in `[-0.5, 0.5)`.
pub fn circ(a: f64, b: f64) -> f64 {
    (a - b + 0.5).rem_euclid(1.0) - 0.5
}

/// Required flexible-unit phase of every group, read from simulated unit
/// phases at each plan's read times.
pub fn oracle_required(rig: &mut Rig, plans: &[GroupPlan], v: VelocityVector) -> Vec<f64> {
    let fs = rig.fs;
    let t_max = plans.iter().map(|p| p.t_read[0].max(p.t_read[1])).fold(0.0, f64::max);
    let n = (t_max * fs).round() as usize + 1;
    rig.chip.hold();
    rig.chip.release();
    rig.chip.set_velocity(v);
    let mut snaps = Vec::with_capacity(n);
    let mut buf = Vec::new();
    for _ in 0..n {
        snaps.push(rig.chip.osc_states.iter().map(|s| s.phase).collect::<Vec<f64>>());
        buf.clear();
        rig.chip.scan_cycle(&mut buf).unwrap();
    }
    plans
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let u = rig.pairing.group_units(g);
            let at = |i: usize, t: f64| snaps[(t * fs).round() as usize][u[i]];
            let psi1 = at(0, p.t_read[0]) - at(1, p.t_read[0]);
            let psi2 = at(2, p.t_read[1]) - at(3, p.t_read[1]);
            (-(psi1 - psi2)).rem_euclid(1.0)
        })
        .collect()
}

/// Rising-edge rate of a filtered AND of two square waves.
pub fn beat_rate(fa: f64, fb: f64, fs: f64, seconds: f64, filter: &LayerFilter) -> f64 {
    let n = (seconds * fs) as usize;
    let (mut a, mut b) = (OscillatorState::default(), OscillatorState::default());
    let mut node = NodeState::default();
    let mut prev = false;
    let mut edges = 0usize;
    for _ in 0..n {
        let out = node.step(a.tap_output(0), b.tap_output(0), filter);
        if out && !prev {
            edges += 1;
        }
        prev = out;
        a = a.step(fa, 1.0 / fs).unwrap();
        b = b.step(fb, 1.0 / fs).unwrap();
    }
    edges as f64 / (n as f64 / fs)
}
