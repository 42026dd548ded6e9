//! Host-side emulation of the theta chip: programming, bypass, TDMA scan,
//! re-parallelization, and the calibration pipeline.
//!
//! Programming framing: each configuration word is 23 bits, shifted MSB
//! first: a 7-bit unit address, the 4-bit x code, the 4-bit y code, then 8
//! bypass bits for taps 0..7 (1 = phase is scanned). Words are applied in
//! stream order, so a repeated address overwrites the earlier word.
//!
//! Scan framing: each scan cycle emits one bit per enabled phase, unit-major
//! then tap-minor. Every oscillator then advances by one sample period.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theta_core::{
    frequency_at, release_all, reset_all, OscillatorState, ThetaPopulation, ThetaUnit,
    VelocityVector, TAPS,
};

pub const CHIP_UNITS: usize = 128;
pub const WORD_BITS: usize = 23;
const ADDR_BITS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub clock_hz: f64,
    /// Highest oscillator frequency the sample rate must resolve.
    pub f_max: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            clock_hz: 6_000_000.0,
            f_max: 4000.0,
        }
    }
}

impl ScanConfig {
    pub fn sample_rate(&self, enabled_phases: usize) -> f64 {
        self.clock_hz / enabled_phases as f64
    }

    pub fn check(&self, enabled_phases: usize) -> Result<f64> {
        let fs = self.sample_rate(enabled_phases);
        let need = 2.0 * self.f_max;
        if !(fs > need) {
            return Err(Error::Nyquist { fs, need });
        }
        Ok(fs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitConfig {
    pub unit: usize,
    pub v_pref_code: [u8; 2],
    /// Bit k enables tap k.
    pub bypass: u8,
}

#[derive(Debug, Clone)]
pub struct ChipState {
    pub units: Vec<ThetaUnit>,
    pub bypass: Vec<u8>,
    pub osc_states: Vec<OscillatorState>,
    pub programmed: bool,
    pub clear: bool,
    pub scan_config: ScanConfig,
    velocity: VelocityVector,
    freqs: Vec<f64>,
}

impl ChipState {
    pub fn new(pop: &ThetaPopulation, scan_config: ScanConfig) -> Result<Self> {
        if pop.len() > CHIP_UNITS {
            return Err(Error::InvalidArgument(format!(
                "population of {} exceeds {CHIP_UNITS} slots",
                pop.len()
            )));
        }
        let n = pop.len();
        let mut chip = Self {
            units: pop.units.clone(),
            bypass: vec![0; n],
            osc_states: vec![OscillatorState::default(); n],
            programmed: false,
            clear: true,
            scan_config,
            velocity: VelocityVector::ZERO,
            freqs: vec![0.0; n],
        };
        chip.assert_clear();
        Ok(chip)
    }

    /// Holds Clear: wipes codes and bypass bits and drops the programmed flag.
    pub fn assert_clear(&mut self) {
        for u in &mut self.units {
            u.v_pref_code = [8, 8];
        }
        self.bypass.iter_mut().for_each(|b| *b = 0);
        self.programmed = false;
        self.clear = true;
        reset_all(&mut self.osc_states);
        self.velocity = VelocityVector::ZERO;
        self.refresh_freqs();
    }

    pub fn enabled_phases(&self) -> usize {
        self.bypass.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// (unit, tap) of every enabled phase in scan order.
    pub fn phase_labels(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.enabled_phases());
        for (u, &mask) in self.bypass.iter().enumerate() {
            for k in 0..TAPS {
                if mask >> k & 1 == 1 {
                    out.push((u, k));
                }
            }
        }
        out
    }

    pub fn sample_rate(&self) -> f64 {
        self.scan_config.sample_rate(self.enabled_phases())
    }

    /// Cap_clear: zero all phases and hold them.
    pub fn hold(&mut self) {
        reset_all(&mut self.osc_states);
    }

    pub fn release(&mut self) {
        release_all(&mut self.osc_states);
    }

    pub fn set_velocity(&mut self, v: VelocityVector) {
        if v != self.velocity {
            self.velocity = v;
            self.refresh_freqs();
        }
    }

    pub fn velocity(&self) -> VelocityVector {
        self.velocity
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    fn refresh_freqs(&mut self) {
        let v = self.velocity;
        self.freqs = self
            .units
            .iter()
            .map(|u| u.inner_product(v).map(|p| frequency_at(u, p)).unwrap_or(u.f_idle))
            .collect();
    }

    pub fn program(&mut self, configs: &[UnitConfig]) -> Result<()> {
        if !self.clear {
            return Err(Error::NotInClear);
        }
        let stream = programming_stream(configs, self.units.len())?;
        self.load_stream(&stream)
    }

    /// Applies a serialized programming stream.
    pub fn load_stream(&mut self, stream: &[bool]) -> Result<()> {
        if !self.clear {
            return Err(Error::NotInClear);
        }
        if stream.len() % WORD_BITS != 0 {
            return Err(Error::StreamLength {
                len: stream.len(),
                phases: WORD_BITS,
            });
        }
        let mut pending = Vec::new();
        for word in stream.chunks(WORD_BITS) {
            let field = |lo: usize, n: usize| {
                word[lo..lo + n]
                    .iter()
                    .fold(0u32, |acc, &b| (acc << 1) | b as u32)
            };
            let unit = field(0, ADDR_BITS) as usize;
            let cx = field(ADDR_BITS, 4) as u8;
            let cy = field(ADDR_BITS + 4, 4) as u8;
            let mut mask = 0u8;
            for k in 0..TAPS {
                if word[ADDR_BITS + 8 + k] {
                    mask |= 1 << k;
                }
            }
            if unit >= self.units.len() {
                return Err(Error::UnitIndex(unit));
            }
            for c in [cx, cy] {
                crate::theta_core::decode_velocity_code(c)?;
            }
            pending.push((unit, [cx, cy], mask));
        }
        for (unit, code, mask) in pending {
            self.units[unit].v_pref_code = code;
            self.bypass[unit] = mask;
        }
        self.programmed = true;
        self.clear = false;
        self.refresh_freqs();
        Ok(())
    }

    /// Appends one scan cycle to `out` and advances the oscillators.
    pub fn scan_cycle(&mut self, out: &mut Vec<bool>) -> Result<()> {
        if !self.programmed {
            return Err(Error::NotProgrammed);
        }
        let n = self.enabled_phases();
        if n == 0 {
            return Ok(());
        }
        let fs = self.scan_config.check(n)?;
        for (u, &mask) in self.bypass.iter().enumerate() {
            if mask == 0 {
                continue;
            }
            let st = self.osc_states[u];
            for k in 0..TAPS {
                if mask >> k & 1 == 1 {
                    out.push(st.tap_output(k));
                }
            }
        }
        let dt = 1.0 / fs;
        for (st, &f) in self.osc_states.iter_mut().zip(&self.freqs) {
            *st = st.step(f, dt)?;
        }
        Ok(())
    }

    pub fn scan(&mut self, v: VelocityVector, n_cycles: usize) -> Result<Vec<bool>> {
        if !self.programmed {
            return Err(Error::NotProgrammed);
        }
        self.scan_config.check(self.enabled_phases().max(1))?;
        self.set_velocity(v);
        let mut out = Vec::with_capacity(n_cycles * self.enabled_phases());
        for _ in 0..n_cycles {
            self.scan_cycle(&mut out)?;
        }
        Ok(out)
    }
}

/// Serializes configuration words in the framing described in the module docs.
pub fn programming_stream(configs: &[UnitConfig], n_units: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(configs.len() * WORD_BITS);
    for c in configs {
        if c.unit >= n_units || c.unit >= 1 << ADDR_BITS {
            return Err(Error::UnitIndex(c.unit));
        }
        for code in c.v_pref_code {
            crate::theta_core::decode_velocity_code(code)?;
        }
        let push = |out: &mut Vec<bool>, v: u32, n: usize| {
            for i in (0..n).rev() {
                out.push(v >> i & 1 == 1);
            }
        };
        push(&mut out, c.unit as u32, ADDR_BITS);
        push(&mut out, c.v_pref_code[0] as u32, 4);
        push(&mut out, c.v_pref_code[1] as u32, 4);
        for k in 0..TAPS {
            out.push(c.bypass >> k & 1 == 1);
        }
    }
    Ok(out)
}

pub fn program(chip: &mut ChipState, configs: &[UnitConfig]) -> Result<()> {
    chip.program(configs)
}

pub fn scan(chip: &mut ChipState, v: VelocityVector, n_cycles: usize) -> Result<Vec<bool>> {
    chip.scan(v, n_cycles)
}

/// Splits a serial stream into one row per enabled phase.
pub fn reparallelize(stream: &[bool], enabled_phases: usize) -> Result<Vec<Vec<bool>>> {
    if enabled_phases == 0 {
        if stream.is_empty() {
            return Ok(Vec::new());
        }
        return Err(Error::StreamLength {
            len: stream.len(),
            phases: 0,
        });
    }
    if stream.len() % enabled_phases != 0 {
        return Err(Error::StreamLength {
            len: stream.len(),
            phases: enabled_phases,
        });
    }
    let cycles = stream.len() / enabled_phases;
    let mut rows = vec![Vec::with_capacity(cycles); enabled_phases];
    for frame in stream.chunks(enabled_phases) {
        for (row, &b) in rows.iter_mut().zip(frame) {
            row.push(b);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    pub hz: f64,
    pub flatline: bool,
}

fn rising_edges(trace: &[bool]) -> impl Iterator<Item = usize> + '_ {
    trace
        .windows(2)
        .enumerate()
        .filter(|(_, w)| !w[0] && w[1])
        .map(|(i, _)| i + 1)
}

fn check_window(trace: &[bool], fs: f64) -> Result<()> {
    let need = (fs * 0.1).ceil() as usize;
    if trace.len() < need {
        return Err(Error::TraceTooShort {
            len: trace.len(),
            need,
        });
    }
    Ok(())
}

/// Rising-edge count divided by window duration. A trace that starts high
/// counts its first sample as an edge.
pub fn estimate_frequency(trace: &[bool], fs: f64) -> Result<FrequencyEstimate> {
    check_window(trace, fs)?;
    let flatline = trace.iter().all(|&b| b == trace[0]);
    if flatline {
        return Ok(FrequencyEstimate { hz: 0.0, flatline });
    }
    let count = rising_edges(trace).count() + trace[0] as usize;
    Ok(FrequencyEstimate {
        hz: count as f64 * fs / trace.len() as f64,
        flatline,
    })
}

/// Mean rising-edge interval between the first and last rising edge.
pub fn estimate_frequency_interval(trace: &[bool], fs: f64) -> Result<FrequencyEstimate> {
    check_window(trace, fs)?;
    let edges: Vec<usize> = rising_edges(trace).collect();
    if edges.len() < 2 {
        return estimate_frequency(trace, fs);
    }
    let span = (edges[edges.len() - 1] - edges[0]) as f64;
    Ok(FrequencyEstimate {
        hz: (edges.len() - 1) as f64 * fs / span,
        flatline: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitFit {
    pub unit: usize,
    pub f_idle_hat: f64,
    pub beta_hat: f64,
    pub r2: f64,
}

/// Ordinary least squares for `F = F_idle + beta * p`.
pub fn fit_unit(unit: usize, samples: &[(f64, f64)]) -> Result<UnitFit> {
    let mut ps: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    if ps.len() < 2 {
        return Err(Error::DegenerateDesign);
    }
    if ps.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 distinct inner products".into(),
        ));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let beta = sxy / sxx;
    let f0 = my - beta * mx;
    let ss_res: f64 = samples
        .iter()
        .map(|s| (s.1 - (f0 + beta * s.0)).powi(2))
        .sum();
    let ss_tot: f64 = samples.iter().map(|s| (s.1 - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(UnitFit {
        unit,
        f_idle_hat: f0,
        beta_hat: beta,
        r2,
    })
}

pub const MIN_ADMITTED: usize = 80;

/// Units with `r2 > threshold` and positive gain, sorted by fitted idle frequency.
pub fn select_units(fits: &[UnitFit], r2_threshold: f64) -> Result<Vec<UnitFit>> {
    select_units_min(fits, r2_threshold, MIN_ADMITTED)
}

pub fn select_units_min(fits: &[UnitFit], r2_threshold: f64, min: usize) -> Result<Vec<UnitFit>> {
    let mut out: Vec<UnitFit> = fits
        .iter()
        .filter(|f| f.r2 > r2_threshold && f.beta_hat > 0.0)
        .copied()
        .collect();
    if out.len() < min {
        return Err(Error::InsufficientPopulation {
            admitted: out.len(),
            needed: min,
        });
    }
    out.sort_by(|a, b| a.f_idle_hat.total_cmp(&b.f_idle_hat).then(a.unit.cmp(&b.unit)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub window_s: f64,
    pub velocity_steps: Vec<i32>,
    pub pref_codes: Vec<[u8; 2]>,
    pub r2_threshold: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            window_s: 0.2,
            velocity_steps: (-4..=4).collect(),
            pref_codes: vec![[12, 8], [4, 8], [8, 12], [8, 4]],
            r2_threshold: 0.9,
        }
    }
}

/// Inner-product samples per unit collected through the scan pipeline.
pub fn calibration_samples(
    pop: &ThetaPopulation,
    scan_config: ScanConfig,
    cfg: &CalibrationConfig,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut chip = ChipState::new(pop, scan_config)?;
    let n = pop.len();
    let mut samples = vec![Vec::new(); n];
    for code in &cfg.pref_codes {
        chip.assert_clear();
        let configs: Vec<UnitConfig> = (0..n)
            .map(|unit| UnitConfig {
                unit,
                v_pref_code: *code,
                bypass: 1,
            })
            .collect();
        chip.program(&configs)?;
        let vp = [
            crate::theta_core::decode_velocity_code(code[0])? as f64,
            crate::theta_core::decode_velocity_code(code[1])? as f64,
        ];
        let fs = chip.scan_config.check(chip.enabled_phases())?;
        let cycles = (cfg.window_s * fs).ceil() as usize;
        for &s in &cfg.velocity_steps {
            let v = if vp[0] != 0.0 {
                VelocityVector::new(s as f64, 0.0)
            } else {
                VelocityVector::new(0.0, s as f64)
            };
            let p = v.vx * vp[0] + v.vy * vp[1];
            chip.hold();
            chip.release();
            let stream = chip.scan(v, cycles)?;
            let rows = reparallelize(&stream, chip.enabled_phases())?;
            for (row, (unit, _)) in rows.iter().zip(chip.phase_labels()) {
                let est = estimate_frequency_interval(row, fs)?;
                samples[unit].push((p, est.hz));
            }
        }
    }
    Ok(samples)
}

/// Full sweep: program, scan, re-parallelize, estimate and fit every unit.
pub fn calibrate(
    pop: &ThetaPopulation,
    scan_config: ScanConfig,
    cfg: &CalibrationConfig,
) -> Result<Vec<UnitFit>> {
    calibration_samples(pop, scan_config, cfg)?
        .iter()
        .enumerate()
        .map(|(u, s)| fit_unit(u, s))
        .collect()
}

pub fn write_calibration_csv(path: &Path, fits: &[UnitFit]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["unit", "f_idle_hat", "beta_hat", "r2"])?;
    for f in fits {
        w.write_record([
            f.unit.to_string(),
            format!("{:.6}", f.f_idle_hat),
            format!("{:.6}", f.beta_hat),
            format!("{:.6}", f.r2),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_calibration_csv(path: &Path) -> Result<Vec<UnitFit>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad calibration row {:?}", rec)))
        };
        out.push(UnitFit {
            unit: num(0)? as usize,
            f_idle_hat: num(1)?,
            beta_hat: num(2)?,
            r2: num(3)?,
        });
    }
    Ok(out)
}

/// One row per sample; columns are the enabled phases named `unit:tap`.
pub fn write_trace_csv<W: Write>(
    out: W,
    labels: &[(usize, usize)],
    rows: &[Vec<bool>],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(labels.iter().map(|(u, k)| format!("{u}:{k}")))?;
    let cycles = rows.first().map_or(0, |r| r.len());
    for t in 0..cycles {
        w.write_record(rows.iter().map(|r| if r[t] { "1" } else { "0" }))?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))?;
    Ok(())
}
