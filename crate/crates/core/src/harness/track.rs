use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::place_grid::{
    reset_controller, Debouncer, Direction, PlaceGrid, PulseEvent, ResetCause, ResetTimer,
};
use crate::theta_core::VelocityVector;
use crate::vector_net::{VectorNetwork, N_SLOTS};

use super::config::RunConfig;
use super::rig::Rig;
use super::script::{PathScript, Until};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub tick: u64,
    pub direction: Option<Direction>,
    pub x: i32,
    pub y: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetRecord {
    pub tick: u64,
    pub cause: ResetCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub script: String,
    pub events: Vec<PulseEvent>,
    pub trail: Vec<TrailEntry>,
    /// Grid state after each migration.
    pub snapshots: Vec<PlaceGrid>,
    /// Network outputs per tick; bit i belongs to `Direction::ALL[i]`.
    pub traces: Vec<u8>,
    pub resets: Vec<ResetRecord>,
    pub final_location: (i32, i32),
    pub active_groups: [usize; 4],
    pub warnings: Vec<String>,
    pub ticks: u64,
}

impl TrackResult {
    pub fn events_for(&self, d: Direction) -> Vec<PulseEvent> {
        self.events.iter().copied().filter(|e| e.direction == d).collect()
    }

    /// Signed (E-W, N-S) pulse counts.
    pub fn displacement(&self) -> (i32, i32) {
        self.events.iter().fold((0, 0), |(x, y), e| {
            let (dx, dy) = e.direction.delta();
            (x + dx, y + dy)
        })
    }
}

struct Tracker<'a> {
    rig: &'a mut Rig,
    nets: Vec<VectorNetwork>,
    routes: Vec<Vec<usize>>,
    debouncers: Vec<Debouncer>,
    timer: ResetTimer,
    tick: u64,
    since_reset: u64,
    last_reset: Option<u64>,
    result: TrackResult,
    grid: PlaceGrid,
}

impl Tracker<'_> {
    fn reset(&mut self, cause: ResetCause) {
        if self.last_reset == Some(self.tick) {
            return;
        }
        self.last_reset = Some(self.tick);
        self.result.resets.push(ResetRecord {
            tick: self.tick,
            cause,
        });
        self.rig.chip.hold();
        self.timer.assert();
        if self.timer.hold_ticks == 0 {
            self.rig.chip.release();
        }
        if self.rig.config.tracking.clear_filters {
            self.nets.iter_mut().for_each(VectorNetwork::clear);
        }
        self.debouncers.iter_mut().for_each(Debouncer::clear);
        self.since_reset = 0;
    }

    /// Advances one tick; returns the first network whose pulse was confirmed.
    fn step(&mut self, frame: &mut Vec<bool>, input: &mut [bool; N_SLOTS]) -> Result<Option<(u64, Direction)>> {
        frame.clear();
        self.rig.chip.scan_cycle(frame)?;
        let record = self.rig.config.tracking.record_traces;
        if self.timer.tick() {
            if !self.timer.held() {
                self.rig.chip.release();
            }
            if record {
                self.result.traces.push(0);
            }
            self.tick += 1;
            return Ok(None);
        }
        let mut bits = 0u8;
        let mut fired = None;
        for (i, net) in self.nets.iter_mut().enumerate() {
            for (slot, &idx) in self.routes[i].iter().enumerate() {
                input[slot] = frame[idx];
            }
            let out = net.step(input);
            bits |= (out as u8) << i;
            if let Some(start) = self.debouncers[i].push(out, self.tick) {
                match fired {
                    None => fired = Some((start, Direction::ALL[i])),
                    Some((_, d)) => self.result.warnings.push(format!(
                        "tick {}: {} and {} fired together; {} kept",
                        self.tick,
                        d,
                        Direction::ALL[i],
                        d
                    )),
                }
            }
        }
        if record {
            self.result.traces.push(bits);
        }
        self.tick += 1;
        self.since_reset += 1;
        Ok(fired)
    }
}

pub fn run_track(config: &RunConfig, script: &PathScript) -> Result<TrackResult> {
    let mut rig = Rig::build(config)?;
    run_track_with(&mut rig, script)
}

pub fn run_track_with(rig: &mut Rig, script: &PathScript) -> Result<TrackResult> {
    script.validate()?;
    let tables = rig.cardinal_tables()?;
    let mut nets = Vec::with_capacity(4);
    let mut routes = Vec::with_capacity(4);
    let mut active_groups = [0; 4];
    for (i, (_, t)) in tables.into_iter().enumerate() {
        routes.push(rig.router(&t)?);
        active_groups[i] = t.active_groups();
        nets.push(VectorNetwork::new(t, &rig.config.filters));
    }
    let tcfg = rig.config.tracking.clone();
    let grid = PlaceGrid::new(tcfg.grid_size, tcfg.grid_size)?;
    let cell_ticks = rig.config.network.pitch * rig.fs;
    let mut tr = Tracker {
        rig,
        nets,
        routes,
        debouncers: vec![Debouncer::new(tcfg.debounce); 4],
        timer: ResetTimer::new(tcfg.hold_ticks),
        tick: 0,
        since_reset: 0,
        last_reset: None,
        result: TrackResult {
            script: script.name.clone(),
            events: Vec::new(),
            trail: vec![TrailEntry {
                tick: 0,
                direction: None,
                x: 0,
                y: 0,
            }],
            snapshots: Vec::new(),
            traces: Vec::new(),
            resets: Vec::new(),
            final_location: (0, 0),
            active_groups,
            warnings: Vec::new(),
            ticks: 0,
        },
        grid,
    };
    let mut frame = Vec::with_capacity(tr.rig.chip.enabled_phases());
    let mut input = [false; N_SLOTS];
    let mut prev_v = VelocityVector::ZERO;
    let mut partial = false;
    for (si, seg) in script.segments.iter().enumerate() {
        let line = reset_controller(prev_v, seg.velocity, &[], si == 0);
        if let Some(cause) = line.cause {
            if partial && cause == ResetCause::VelocityChange {
                tr.result.warnings.push(format!(
                    "segment {si}: sub-cell displacement discarded at tick {}",
                    tr.tick
                ));
            }
            tr.reset(cause);
        }
        tr.rig.chip.set_velocity(seg.velocity);
        prev_v = seg.velocity;
        let speed = seg.velocity.norm();
        let (target, budget) = match seg.until {
            Until::Pulses(n) => {
                let per = cell_ticks / speed.max(f64::MIN_POSITIVE) + tcfg.hold_ticks as f64;
                (Some(n), (tcfg.budget_factor * n as f64 * per).ceil() as u64)
            }
            Until::Ticks(n) => (None, n),
        };
        let mut pulses = 0u32;
        let mut seg_ticks = 0u64;
        loop {
            match target {
                Some(n) if pulses >= n => break,
                None if seg_ticks >= budget => break,
                Some(_) if seg_ticks >= budget => {
                    return Err(Error::TickBudget {
                        segment: si,
                        budget,
                    })
                }
                _ => {}
            }
            if let Some(k) = tcfg.fixed_reset_interval {
                if tr.since_reset >= k && !tr.timer.held() {
                    tr.reset(ResetCause::FixedInterval);
                }
            }
            let fired = tr.step(&mut frame, &mut input)?;
            seg_ticks += 1;
            if let Some((start, direction)) = fired {
                let e = PulseEvent {
                    direction,
                    tick: start,
                };
                tr.grid.apply_pulse(&e)?;
                debug_assert!(tr.grid.check());
                let (x, y) = tr.grid.locate();
                tr.result.events.push(e);
                tr.result.trail.push(TrailEntry {
                    tick: start,
                    direction: Some(direction),
                    x,
                    y,
                });
                tr.result.snapshots.push(tr.grid.clone());
                let line = reset_controller(prev_v, prev_v, &[e], false);
                if let Some(cause) = line.cause {
                    tr.reset(cause);
                }
                pulses += 1;
            }
        }
        partial = target.is_none() && speed > 0.0 && tr.since_reset > 0;
    }
    tr.result.final_location = tr.grid.locate();
    tr.result.ticks = tr.tick;
    Ok(tr.result)
}
