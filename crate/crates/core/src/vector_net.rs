//! Vector-cell networks: pairing, effective cells, lookup-table compilation,
//! the two-layer interference engine and node accounting.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chip_io::{UnitConfig, UnitFit};
use crate::error::{Error, Result};
use crate::theta_core::{VelocityVector, TAPS};

pub const N_PAIRS: usize = 40;
pub const N_GROUPS: usize = 20;
pub const N_SLOTS: usize = 80;
pub const FIR_TAPS: usize = 9;
/// Group delay of a symmetric 9-tap FIR in samples.
pub const FIR_DELAY: f64 = 4.0;
/// Preferred-velocity magnitude programmed into paired units.
pub const PAIR_CODE: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn unit(&self) -> VelocityVector {
        match self {
            Axis::X => VelocityVector::new(1.0, 0.0),
            Axis::Y => VelocityVector::new(0.0, 1.0),
        }
    }

    /// Codes for a unit preferring `sign * PAIR_CODE` along this axis.
    pub fn code(&self, sign: i32) -> [u8; 2] {
        let c = (8 + sign * PAIR_CODE) as u8;
        match self {
            Axis::X => [c, 8],
            Axis::Y => [8, c],
        }
    }
}

/// First-layer pair: `a` prefers `+axis`, `b` prefers `-axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPair {
    pub a: usize,
    pub b: usize,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub pairs: Vec<LayerPair>,
    /// Second-layer groups as indices into `pairs`.
    pub groups: Vec<[usize; 2]>,
}

impl Pairing {
    /// Units feeding group `g` in slot order `a1, b1, a2, b2`.
    pub fn group_units(&self, g: usize) -> [usize; 4] {
        let [p, q] = self.groups[g];
        let (p, q) = (self.pairs[p], self.pairs[q]);
        [p.a, p.b, q.a, q.b]
    }

    /// The flexible unit of group `g`.
    pub fn flexible_unit(&self, g: usize) -> usize {
        self.group_units(g)[0]
    }

    pub fn code_of(&self, unit: usize) -> Option<[u8; 2]> {
        self.pairs.iter().find_map(|p| {
            if p.a == unit {
                Some(p.axis.code(1))
            } else if p.b == unit {
                Some(p.axis.code(-1))
            } else {
                None
            }
        })
    }

    /// Chip programming: fixed units scan tap 0, flexible units scan all taps.
    pub fn unit_configs(&self) -> Vec<UnitConfig> {
        let flex: HashSet<usize> = (0..self.groups.len()).map(|g| self.flexible_unit(g)).collect();
        let mut out = Vec::with_capacity(2 * self.pairs.len());
        for p in &self.pairs {
            for (u, sign) in [(p.a, 1), (p.b, -1)] {
                out.push(UnitConfig {
                    unit: u,
                    v_pref_code: p.axis.code(sign),
                    bypass: if flex.contains(&u) { 0xff } else { 0x01 },
                });
            }
        }
        out.sort_by_key(|c| c.unit);
        out
    }
}

/// Pairs adjacent entries of `units` after sorting by idle frequency.
pub fn pair_by_idle(units: &[UnitFit], n_pairs: usize) -> Result<Vec<(usize, usize)>> {
    if units.len() < 2 * n_pairs {
        return Err(Error::InsufficientPopulation {
            admitted: units.len(),
            needed: 2 * n_pairs,
        });
    }
    let mut sorted = units.to_vec();
    sorted.sort_by(|a, b| a.f_idle_hat.total_cmp(&b.f_idle_hat).then(a.unit.cmp(&b.unit)));
    Ok((0..n_pairs)
        .map(|i| (sorted[2 * i].unit, sorted[2 * i + 1].unit))
        .collect())
}

/// Builds the 40 first-layer pairs and the 20 second-layer groups.
pub fn pair_layer1(admitted: &[UnitFit]) -> Result<Pairing> {
    let raw = pair_by_idle(admitted, N_PAIRS)?;
    let pairs: Vec<LayerPair> = raw
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| LayerPair {
            a,
            b,
            axis: if i % 2 == 0 { Axis::X } else { Axis::Y },
        })
        .collect();
    let gain = |p: &LayerPair| -> f64 {
        let g = |u: usize| admitted.iter().find(|f| f.unit == u).map_or(0.0, |f| f.beta_hat);
        g(p.a) + g(p.b)
    };
    let mut groups = Vec::with_capacity(N_GROUPS);
    for axis in [Axis::X, Axis::Y] {
        let mut idx: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].axis == axis).collect();
        idx.sort_by(|&i, &j| gain(&pairs[i]).total_cmp(&gain(&pairs[j])).then(i.cmp(&j)));
        groups.extend(stride_groups(&idx));
    }
    Ok(Pairing { pairs, groups })
}

/// Splits a gain-sorted list into blocks of a quarter and pairs entries
/// across the first two and last two blocks.
pub fn stride_groups(sorted: &[usize]) -> Vec<[usize; 2]> {
    let h = sorted.len() / 4;
    (0..h)
        .chain(2 * h..3 * h)
        .map(|i| [sorted[i], sorted[i + h]])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub beta: f64,
    pub f_off: f64,
    pub v_pref: VelocityVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCell {
    pub beta_eff: f64,
    pub f_off_eff: f64,
    pub theta_p: f64,
    pub members: [usize; 2],
}

pub fn effective_params(a: &CellParams, b: &CellParams, members: [usize; 2]) -> Result<EffectiveCell> {
    let s = VelocityVector::new(a.v_pref.vx + b.v_pref.vx, a.v_pref.vy + b.v_pref.vy);
    if a.v_pref.norm() == 0.0 || s.norm() > 1e-12 {
        return Err(Error::NotOpposing);
    }
    Ok(EffectiveCell {
        beta_eff: a.beta + b.beta,
        f_off_eff: a.f_off - b.f_off,
        theta_p: a.v_pref.vy.atan2(a.v_pref.vx),
        members,
    })
}

/// Interference of two same-direction effective cells: gains and offsets subtract.
pub fn layer2_params(c1: &EffectiveCell, c2: &EffectiveCell) -> (f64, f64) {
    (c1.beta_eff - c2.beta_eff, c1.f_off_eff - c2.f_off_eff)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetLocation {
    pub r: f64,
    pub theta: f64,
}

impl TargetLocation {
    pub fn from_grid(x: i32, y: i32) -> Self {
        Self {
            r: (x as f64).hypot(y as f64),
            theta: (y as f64).atan2(x as f64),
        }
    }

    pub fn direction(&self) -> VelocityVector {
        VelocityVector::new(self.theta.cos(), self.theta.sin())
    }
}

/// Effective cell expressed per spatial unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialCell {
    /// Cycles per spatial unit along the preferred direction.
    pub beta_i: f64,
    /// Offset term such that `f_off_i / |V|` is in cycles per spatial unit.
    pub f_off_i: f64,
    pub theta_p: f64,
}

impl SpatialCell {
    /// `vp_mag` is the programmed preferred-velocity magnitude, `pitch` the grid pitch.
    pub fn from_effective(cell: &EffectiveCell, vp_mag: f64, pitch: f64) -> Self {
        Self {
            beta_i: cell.beta_eff * vp_mag * pitch,
            f_off_i: cell.f_off_eff * pitch,
            theta_p: cell.theta_p,
        }
    }
}

fn frac(x: f64) -> f64 {
    x - x.floor()
}

/// Sub-tap phase remainder for a spatial cell reaching `loc`.
pub fn phase_shift(loc: &TargetLocation, cell: &SpatialCell, speed: f64) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::InvalidArgument("speed must be positive".into()));
    }
    let inner = loc.r * ((loc.theta - cell.theta_p).cos() * cell.beta_i + cell.f_off_i / speed);
    let phi = (1.0 - frac(inner)).rem_euclid(0.125);
    Ok(if 0.125 - phi < 1e-9 { 0.0 } else { phi })
}

/// Per-layer filter constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Rise and fall thresholds of the layer-1 Schmitt trigger.
    pub schmitt1: [f64; 2],
    pub schmitt2: [f64; 2],
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0 / 16.0,
            alpha2: 1.0 / 96.0,
            schmitt1: [0.32, 0.18],
            schmitt2: [0.40, 0.24],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    One,
    Two,
}

pub fn hamming_coefficients() -> [f64; FIR_TAPS] {
    let mut c = [0.0; FIR_TAPS];
    for (n, v) in c.iter_mut().enumerate() {
        *v = 0.54 - 0.46 * (TAU * n as f64 / (FIR_TAPS - 1) as f64).cos();
    }
    let s: f64 = c.iter().sum();
    c.iter_mut().for_each(|v| *v /= s);
    c
}

pub fn moving_average_coefficients() -> [f64; FIR_TAPS] {
    [1.0 / FIR_TAPS as f64; FIR_TAPS]
}

/// Filter constants of one layer with the FIR tabulated over all 9-bit histories.
#[derive(Debug, Clone)]
pub struct LayerFilter {
    pub coeffs: [f64; FIR_TAPS],
    pub alpha: f64,
    pub rise: f64,
    pub fall: f64,
    table: Vec<f64>,
}

impl LayerFilter {
    pub fn new(coeffs: [f64; FIR_TAPS], alpha: f64, thresholds: [f64; 2]) -> Self {
        let table = (0..1usize << FIR_TAPS)
            .map(|h| (0..FIR_TAPS).filter(|k| h >> k & 1 == 1).map(|k| coeffs[k]).sum())
            .collect();
        Self {
            coeffs,
            alpha,
            rise: thresholds[0],
            fall: thresholds[1],
            table,
        }
    }

    pub fn for_layer(cfg: &FilterConfig, layer: Layer) -> Self {
        match layer {
            Layer::One => Self::new(hamming_coefficients(), cfg.alpha1, cfg.schmitt1),
            Layer::Two => Self::new(moving_average_coefficients(), cfg.alpha2, cfg.schmitt2),
        }
    }

    pub fn fir(&self, history: u16) -> f64 {
        self.table[(history & 0x1ff) as usize]
    }
}

/// FIR history (bit k is the sample k ticks ago), RC accumulator and Schmitt output.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeState {
    pub history: u16,
    pub y: f64,
    pub out: bool,
}

impl NodeState {
    pub fn step(&mut self, a: bool, b: bool, f: &LayerFilter) -> bool {
        self.history = ((self.history << 1) | (a && b) as u16) & 0x1ff;
        let x = f.fir(self.history);
        self.y += f.alpha * (x - self.y);
        if !self.out && self.y >= f.rise {
            self.out = true;
        } else if self.out && self.y <= f.fall {
            self.out = false;
        }
        self.out
    }

    pub fn clear(&mut self) {
        *self = NodeState::default();
    }
}

pub fn node_step(node: &mut NodeState, a: bool, b: bool, filter: &LayerFilter) -> bool {
    node.step(a, b, filter)
}

/// Phase lag of the RC stage at frequency `f`, in samples.
pub fn rc_delay(alpha: f64, f: f64, fs: f64) -> f64 {
    let w = TAU * f.abs() / fs;
    if w < 1e-9 {
        return (1.0 - alpha) / alpha;
    }
    let lag = ((1.0 - alpha) * w.sin()).atan2(1.0 - (1.0 - alpha) * w.cos());
    lag / w
}

/// -3 dB corner of the RC stage.
pub fn rc_corner(alpha: f64, fs: f64) -> f64 {
    -(1.0 - alpha).ln() * fs / TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileParams {
    /// Grid pitch in velocity-code units times seconds.
    pub pitch: f64,
    pub speed: f64,
    pub tolerance: f64,
    pub g_min: usize,
    /// Minimum active groups on each axis.
    pub axis_min: usize,
    /// Groups whose second-layer beat exceeds this multiple of the layer-2 corner are dropped.
    pub passband_mult: f64,
    /// Pairs slower than this multiple of the layer-2 corner are treated as gating.
    pub slow_mult: f64,
    pub lag_compensation: bool,
}

impl Default for CompileParams {
    fn default() -> Self {
        Self {
            pitch: 0.1,
            speed: 2.0,
            tolerance: 0.1875,
            g_min: 6,
            axis_min: 0,
            passband_mult: 1.5,
            slow_mult: 1.5,
            lag_compensation: true,
        }
    }
}

impl CompileParams {
    pub fn arrival_time(&self, r: f64) -> f64 {
        r * self.pitch / self.speed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuxTable {
    pub target: TargetLocation,
    pub speed: f64,
    pub tolerance: f64,
    /// (unit, tap) per input slot.
    pub slots: Vec<(usize, u8)>,
    pub dropped: Vec<bool>,
}

/// Per-group compilation detail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupPlan {
    pub tap: u8,
    /// Required flexible-unit phase advance.
    pub required: f64,
    pub residual: f64,
    /// Read times of the two pairs in seconds after release.
    pub t_read: [f64; 2],
    /// Beat frequencies of the two pairs.
    pub f_pair: [f64; 2],
    pub dropped: bool,
}

impl MuxTable {
    pub fn active_groups(&self) -> usize {
        self.dropped.iter().filter(|d| !**d).count()
    }

    /// Checks that only the first slot of each group carries a nonzero tap.
    pub fn validate(&self) -> Result<()> {
        if self.slots.len() != 4 * self.dropped.len() {
            return Err(Error::Parse("slot and group counts disagree".into()));
        }
        for (i, &(_, tap)) in self.slots.iter().enumerate() {
            if tap as usize >= TAPS || (i % 4 != 0 && tap != 0) {
                return Err(Error::Parse(format!("slot {i} has invalid tap {tap}")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "muxtable,1");
        let _ = writeln!(s, "target,{},{}", self.target.r, self.target.theta);
        let _ = writeln!(s, "speed,{}", self.speed);
        let _ = writeln!(s, "tolerance,{}", self.tolerance);
        for (i, (u, t)) in self.slots.iter().enumerate() {
            let _ = writeln!(s, "{i},{u},{t}");
        }
        for (g, d) in self.dropped.iter().enumerate() {
            if *d {
                let _ = writeln!(s, "drop,{g}");
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |l: &str| Error::Parse(format!("muxtable line {l:?}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| bad(""))?;
        if head.trim() != "muxtable,1" {
            return Err(bad(head));
        }
        let mut target = None;
        let mut speed = None;
        let mut tolerance = None;
        let mut slots = Vec::new();
        let mut drops = Vec::new();
        for l in lines {
            let f: Vec<&str> = l.trim().split(',').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(l))
            };
            match f[0] {
                "target" => target = Some(TargetLocation { r: num(1)?, theta: num(2)? }),
                "speed" => speed = Some(num(1)?),
                "tolerance" => tolerance = Some(num(1)?),
                "drop" => drops.push(num(1)? as usize),
                _ => {
                    let i = num(0)? as usize;
                    if i != slots.len() || f.len() != 3 {
                        return Err(bad(l));
                    }
                    let tap = num(2)?;
                    if !(0.0..TAPS as f64).contains(&tap) {
                        return Err(bad(l));
                    }
                    slots.push((num(1)? as usize, tap as u8));
                }
            }
        }
        let mut dropped = vec![false; slots.len() / 4];
        for g in drops {
            *dropped.get_mut(g).ok_or_else(|| bad("drop index"))? = true;
        }
        let t = MuxTable {
            target: target.ok_or_else(|| bad("missing target"))?,
            speed: speed.ok_or_else(|| bad("missing speed"))?,
            tolerance: tolerance.ok_or_else(|| bad("missing tolerance"))?,
            slots,
            dropped,
        };
        t.validate()?;
        Ok(t)
    }
}

fn wrap(x: f64) -> f64 {
    x - x.round()
}

/// Nearest tap in circular distance; ties go to the lower index.
pub fn nearest_tap(required: f64) -> u8 {
    let x = frac(required) * TAPS as f64;
    let lo = x.floor();
    let k = if x - lo > 0.5 + 1e-12 { lo + 1.0 } else { lo };
    (k as usize % TAPS) as u8
}

fn fit_lookup(fits: &[UnitFit], unit: usize) -> Result<&UnitFit> {
    fits.get(unit)
        .filter(|f| f.unit == unit)
        .or_else(|| fits.iter().find(|f| f.unit == unit))
        .ok_or(Error::UnitIndex(unit))
}

/// Predicted frequency of `unit` at velocity `v` from its fit and programmed code.
pub fn predicted_frequency(pairing: &Pairing, fits: &[UnitFit], unit: usize, v: VelocityVector) -> Result<f64> {
    let fit = fit_lookup(fits, unit)?;
    let code = pairing.code_of(unit).ok_or(Error::UnitIndex(unit))?;
    let vp = VelocityVector::new(code[0] as f64 - 8.0, code[1] as f64 - 8.0);
    Ok(fit.f_idle_hat + fit.beta_hat * v.dot(&vp))
}

pub fn compile_detailed(
    pairing: &Pairing,
    fits: &[UnitFit],
    target: TargetLocation,
    params: &CompileParams,
    filters: &FilterConfig,
    fs: f64,
) -> Result<(MuxTable, Vec<GroupPlan>)> {
    let n = pairing.groups.len();
    let mut slots = Vec::with_capacity(4 * n);
    for g in 0..n {
        for u in pairing.group_units(g) {
            slots.push((u, 0u8));
        }
    }
    let mut table = MuxTable {
        target,
        speed: params.speed,
        tolerance: params.tolerance,
        slots,
        dropped: vec![false; n],
    };
    if target.r == 0.0 {
        let plan = GroupPlan {
            tap: 0,
            required: 0.0,
            residual: 0.0,
            t_read: [0.0; 2],
            f_pair: [0.0; 2],
            dropped: false,
        };
        return Ok((table, vec![plan; n]));
    }
    if !(params.speed > 0.0) {
        return Err(Error::InvalidArgument("speed must be positive".into()));
    }
    let dir = target.direction();
    let v = VelocityVector::new(params.speed * dir.vx, params.speed * dir.vy);
    let t_arrive = params.arrival_time(target.r);
    let (a1, a2) = (filters.alpha1, filters.alpha2);
    let fc2 = rc_corner(a2, fs);
    let d0 = FIR_DELAY + rc_delay(a1, 0.0, fs) + FIR_DELAY + rc_delay(a2, 0.0, fs);
    let mut plans = Vec::with_capacity(n);
    for g in 0..n {
        let u = pairing.group_units(g);
        let mut f = [0.0; 4];
        for i in 0..4 {
            f[i] = predicted_frequency(pairing, fits, u[i], v)?;
        }
        let f1 = f[0] - f[1];
        let f2 = f[2] - f[3];
        let fp = f1 - f2;
        let read = |fpair: f64| -> f64 {
            if !params.lag_compensation {
                return t_arrive;
            }
            let d2 = FIR_DELAY + rc_delay(a2, fp, fs);
            t_arrive + (d0 - d2 - FIR_DELAY - rc_delay(a1, fpair, fs)) / fs
        };
        let t_read = [read(f1), read(f2)];
        let psi1 = f1 * t_read[0];
        let psi2 = f2 * t_read[1];
        let required = frac(-(psi1 - psi2));
        let tap = nearest_tap(required);
        let k = tap as f64 / TAPS as f64;
        let q = wrap(required - k).abs();
        let mut residual = q;
        if f1.abs() < params.slow_mult * fc2 || f2.abs() < params.slow_mult * fc2 {
            residual = residual.max(wrap(psi2).abs()).max(wrap(psi1 + k).abs());
        }
        let mut dropped = residual > params.tolerance;
        if fp.abs() > params.passband_mult * fc2 {
            dropped = true;
        }
        table.slots[4 * g].1 = tap;
        table.dropped[g] = dropped;
        plans.push(GroupPlan {
            tap,
            required,
            residual,
            t_read,
            f_pair: [f1, f2],
            dropped,
        });
    }
    for axis in [Axis::X, Axis::Y] {
        let active = (0..n)
            .filter(|&g| !table.dropped[g] && pairing.pairs[pairing.groups[g][0]].axis == axis)
            .count();
        if active < params.axis_min {
            return Err(Error::TooFewAxisGroups {
                axis: if axis == Axis::X { 'x' } else { 'y' },
                active,
                min: params.axis_min,
            });
        }
    }
    let active = table.active_groups();
    if active < params.g_min {
        return Err(Error::TooFewGroups {
            active,
            min: params.g_min,
        });
    }
    Ok((table, plans))
}

pub fn compile_lookup(
    pairing: &Pairing,
    fits: &[UnitFit],
    target: TargetLocation,
    params: &CompileParams,
    filters: &FilterConfig,
    fs: f64,
) -> Result<MuxTable> {
    compile_detailed(pairing, fits, target, params, filters, fs).map(|(t, _)| t)
}

/// Runtime two-layer network for one compiled table.
#[derive(Debug, Clone)]
pub struct VectorNetwork {
    pub table: MuxTable,
    pub layer1: Vec<NodeState>,
    pub layer2: Vec<NodeState>,
    f1: LayerFilter,
    f2: LayerFilter,
    output: bool,
}

impl VectorNetwork {
    pub fn new(table: MuxTable, filters: &FilterConfig) -> Self {
        let g = table.dropped.len();
        Self {
            table,
            layer1: vec![NodeState::default(); 2 * g],
            layer2: vec![NodeState::default(); g],
            f1: LayerFilter::for_layer(filters, Layer::One),
            f2: LayerFilter::for_layer(filters, Layer::Two),
            output: false,
        }
    }

    /// Advances one sample; `input` holds one bit per slot.
    pub fn step(&mut self, input: &[bool]) -> bool {
        let mut out = true;
        for g in 0..self.layer2.len() {
            let s = &input[4 * g..4 * g + 4];
            let x1 = self.layer1[2 * g].step(s[0], s[1], &self.f1);
            let x2 = self.layer1[2 * g + 1].step(s[2], s[3], &self.f1);
            let y = self.layer2[g].step(x1, x2, &self.f2);
            if !self.table.dropped[g] {
                out &= y;
            }
        }
        self.output = out;
        out
    }

    pub fn output(&self) -> bool {
        self.output
    }

    pub fn clear(&mut self) {
        self.layer1.iter_mut().for_each(NodeState::clear);
        self.layer2.iter_mut().for_each(NodeState::clear);
        self.output = false;
    }
}

pub fn network_step(net: &mut VectorNetwork, input: &[bool]) -> bool {
    net.step(input)
}

fn check_mn(m: u64, n: u32) -> Result<u64> {
    if n == 0 || n >= 63 {
        return Err(Error::InvalidArgument(format!("layer count {n} out of range")));
    }
    let p = 1u64 << n;
    if m % p != 0 {
        return Err(Error::NotDivisible { m, n });
    }
    Ok(p)
}

/// Nodes that carry no flexible input and can be shared between networks.
pub fn sharable_nodes(m: u64, n: u32) -> Result<u64> {
    let p = check_mn(m, n)?;
    Ok(m / p * (p - 1 - n as u64))
}

/// Total nodes for `k` networks sharing their constant-phase nodes.
pub fn total_nodes(m: u64, n: u32, k: u64) -> Result<u64> {
    let p = check_mn(m, n)?;
    if k == 0 {
        return Err(Error::InvalidArgument("network count must be >= 1".into()));
    }
    Ok(m / p * (p - 1 - n as u64) + k * m / p * n as u64)
}

/// Canonical identity of an interference node: layer, first leaf and leaf taps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeKey {
    pub layer: u32,
    pub first: usize,
    pub taps: Vec<u8>,
}

/// Node set of an `n`-layer binary interference tree over `leaf_taps`.
pub fn node_graph(leaf_taps: &[u8], n: u32) -> HashSet<NodeKey> {
    let mut out = HashSet::new();
    for layer in 1..=n {
        let w = 1usize << layer;
        for first in (0..leaf_taps.len()).step_by(w) {
            out.insert(NodeKey {
                layer,
                first,
                taps: leaf_taps[first..first + w].to_vec(),
            });
        }
    }
    out
}

/// Leaf taps of network `k`: the first leaf of each block carries tap `k + 1`.
pub fn network_leaf_taps(m: usize, n: u32, k: usize) -> Vec<u8> {
    let w = 1usize << n;
    (0..m).map(|i| if i % w == 0 { (k % 255 + 1) as u8 } else { 0 }).collect()
}

/// Structural (sharable, total) counts from explicitly built node graphs.
pub fn structural_node_counts(m: usize, n: u32, k: usize) -> (usize, usize) {
    let graphs: Vec<HashSet<NodeKey>> = (0..k.max(2)).map(|i| node_graph(&network_leaf_taps(m, n, i), n)).collect();
    let shared = graphs[0].intersection(&graphs[1]).count();
    let union: HashSet<&NodeKey> = graphs[..k].iter().flatten().collect();
    (shared, union.len())
}

/// Direction of `theta` folded into `[0, 2pi)`.
pub fn normalize_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(unit: usize, f: f64, b: f64) -> UnitFit {
        UnitFit {
            unit,
            f_idle_hat: f,
            beta_hat: b,
            r2: 1.0,
        }
    }

    #[test]
    fn pair_four_units() {
        let u = vec![fit(0, 200.0, 1.0), fit(1, 101.0, 1.0), fit(2, 202.0, 1.0), fit(3, 100.0, 1.0)];
        let p = pair_by_idle(&u, 2).unwrap();
        assert_eq!(p, vec![(3, 1), (0, 2)]);
    }

    #[test]
    fn pair_layer1_structure() {
        let fits: Vec<UnitFit> = (0..82).map(|i| fit(i, 1000.0 + (i * 7 % 82) as f64, 20.0 + i as f64 * 0.1)).collect();
        let p = pair_layer1(&fits).unwrap();
        assert_eq!(p.pairs.len(), 40);
        assert_eq!(p.pairs.iter().filter(|q| q.axis == Axis::X).count(), 20);
        assert_eq!(p.groups.len(), 20);
        let mut used = HashSet::new();
        for q in &p.pairs {
            assert!(used.insert(q.a) && used.insert(q.b));
            let ca = p.code_of(q.a).unwrap();
            let cb = p.code_of(q.b).unwrap();
            for i in 0..2 {
                assert_eq!(ca[i] as i32 - 8, -(cb[i] as i32 - 8));
            }
        }
        for (g, [i, j]) in p.groups.iter().enumerate() {
            assert_eq!(p.pairs[*i].axis, p.pairs[*j].axis);
            assert_eq!(p.pairs[*i].axis, if g < 10 { Axis::X } else { Axis::Y });
        }
        let cfg = p.unit_configs();
        let phases: u32 = cfg.iter().map(|c| c.bypass.count_ones()).sum();
        assert_eq!(phases, 220);
        assert!(pair_layer1(&fits[..79]).is_err());
    }

    #[test]
    fn effective_examples() {
        let a = CellParams { beta: 3.5, f_off: 10.0, v_pref: VelocityVector::new(1.0, 0.0) };
        let b = CellParams { beta: 4.9, f_off: 13.5, v_pref: VelocityVector::new(-1.0, 0.0) };
        let e = effective_params(&a, &b, [0, 1]).unwrap();
        assert!((e.beta_eff - 8.4).abs() < 1e-12);
        assert!((e.f_off_eff + 3.5).abs() < 1e-12);
        assert!(effective_params(&a, &a, [0, 0]).is_err());
    }

    #[test]
    fn phase_shift_examples() {
        let cell = SpatialCell { beta_i: 8.4, f_off_i: -3.5, theta_p: 0.0 };
        let at = |r: f64, th: f64| TargetLocation { r, theta: th };
        assert_eq!(phase_shift(&at(0.0, 0.3), &cell, 2.0).unwrap(), 0.0);
        let phi = phase_shift(&at(1.0, 0.0), &cell, 2.0).unwrap();
        assert!((phi - 0.1).abs() < 1e-9, "{phi}");
        let c0 = SpatialCell { f_off_i: 0.0, ..cell };
        assert_eq!(phase_shift(&at(3.7, PI / 2.0), &c0, 2.0).unwrap(), 0.0);
        assert!(phase_shift(&at(1.0, 0.0), &cell, 0.0).is_err());
    }

    #[test]
    fn tap_tie_breaks_low() {
        assert_eq!(nearest_tap(1.0 / 16.0), 0);
        assert_eq!(nearest_tap(3.0 / 16.0), 1);
        assert_eq!(nearest_tap(0.99), 0);
        assert_eq!(nearest_tap(0.26), 2);
    }

    #[test]
    fn fir_coefficients() {
        for c in [hamming_coefficients(), moving_average_coefficients()] {
            assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for i in 0..FIR_TAPS {
                assert!((c[i] - c[FIR_TAPS - 1 - i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn node_annihilator() {
        let f = LayerFilter::for_layer(&FilterConfig::default(), Layer::One);
        let mut n = NodeState { history: 0x1ff, y: 0.9, out: true };
        let mut last = true;
        for _ in 0..500 {
            last = n.step(false, true, &f);
        }
        assert!(!last);
    }

    #[test]
    fn node_counts() {
        assert_eq!(sharable_nodes(80, 2).unwrap(), 20);
        assert_eq!(sharable_nodes(64, 3).unwrap(), 32);
        assert_eq!(sharable_nodes(80, 1).unwrap(), 0);
        assert_eq!(total_nodes(80, 2, 1).unwrap(), 60);
        assert_eq!(total_nodes(80, 2, 4).unwrap(), 180);
        assert!(sharable_nodes(81, 2).is_err());
        assert_eq!(structural_node_counts(64, 3, 2), (32, 32 + 2 * 24));
    }

    #[test]
    fn muxtable_round_trip() {
        let t = MuxTable {
            target: TargetLocation { r: 2.0_f64.sqrt(), theta: 0.785 },
            speed: 2.0,
            tolerance: 0.1875,
            slots: (0..80).map(|i| (i * 3 % 128, if i % 4 == 0 { (i % 8) as u8 } else { 0 })).collect(),
            dropped: (0..20).map(|g| g % 6 == 1).collect(),
        };
        let s = t.to_text();
        assert!(s.contains("drop,1\n"));
        assert_eq!(MuxTable::from_text(&s).unwrap(), t);
        assert!(MuxTable::from_text("nonsense").is_err());
    }
}
