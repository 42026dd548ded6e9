//! Place-cell grid: bump migration driven by debounced vector-cell pulses,
//! per-event leakage, and the phase-reset controller.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theta_core::VelocityVector;

pub const BUMP: u8 = 10;
pub const LEAK: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    E,
    N,
    W,
    S,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::E, Direction::N, Direction::W, Direction::S];

    pub fn delta(&self) -> (i32, i32) {
        match self {
            Direction::E => (1, 0),
            Direction::N => (0, 1),
            Direction::W => (-1, 0),
            Direction::S => (0, -1),
        }
    }

    pub fn letter(&self) -> char {
        match self {
            Direction::E => 'E',
            Direction::N => 'N',
            Direction::W => 'W',
            Direction::S => 'S',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.letter() == c.to_ascii_uppercase())
    }

    /// Cardinal direction of a velocity lying along one axis.
    pub fn of_velocity(v: VelocityVector) -> Option<Self> {
        match (v.vx.partial_cmp(&0.0)?, v.vy.partial_cmp(&0.0)?) {
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Equal) => Some(Direction::E),
            (std::cmp::Ordering::Less, std::cmp::Ordering::Equal) => Some(Direction::W),
            (std::cmp::Ordering::Equal, std::cmp::Ordering::Greater) => Some(Direction::N),
            (std::cmp::Ordering::Equal, std::cmp::Ordering::Less) => Some(Direction::S),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub direction: Direction,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 is `y = -half_h`, column 0 is `x = -half_w`.
    pub activity: Vec<u8>,
    pub bump: (i32, i32),
}

impl PlaceGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width % 2 == 0 || height % 2 == 0 {
            return Err(Error::InvalidArgument("grid dimensions must be odd".into()));
        }
        let mut g = Self {
            width,
            height,
            activity: vec![0; width * height],
            bump: (0, 0),
        };
        let i = g.index(0, 0).expect("origin");
        g.activity[i] = BUMP;
        Ok(g)
    }

    pub fn half(&self) -> (i32, i32) {
        ((self.width / 2) as i32, (self.height / 2) as i32)
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        let (hw, hh) = self.half();
        x.abs() <= hw && y.abs() <= hh
    }

    pub fn index(&self, x: i32, y: i32) -> Option<usize> {
        if !self.contains(x, y) {
            return None;
        }
        let (hw, hh) = self.half();
        Some((y + hh) as usize * self.width + (x + hw) as usize)
    }

    pub fn get(&self, x: i32, y: i32) -> Option<u8> {
        self.index(x, y).map(|i| self.activity[i])
    }

    pub fn apply_pulse(&mut self, e: &PulseEvent) -> Result<()> {
        let (dx, dy) = e.direction.delta();
        let (x, y) = self.bump;
        let (nx, ny) = (x + dx, y + dy);
        let target = self.index(nx, ny).ok_or(Error::OutOfBounds {
            x,
            y,
            dir: e.direction.letter(),
        })?;
        for a in &mut self.activity {
            *a = a.saturating_sub(LEAK);
        }
        self.activity[target] = BUMP;
        self.bump = (nx, ny);
        Ok(())
    }

    pub fn locate(&self) -> (i32, i32) {
        self.bump
    }

    /// Checks the unique-bump invariant and the activity alphabet.
    pub fn check(&self) -> bool {
        let bumps = self.activity.iter().filter(|&&a| a == BUMP).count();
        bumps == 1
            && self.activity.iter().all(|a| [0, LEAK, BUMP].contains(a))
            && self.get(self.bump.0, self.bump.1) == Some(BUMP)
    }

    /// Rows from top (`y = +half`) to bottom.
    pub fn rows_top_down(&self) -> Vec<Vec<u8>> {
        self.activity
            .chunks(self.width)
            .rev()
            .map(|r| r.to_vec())
            .collect()
    }
}

pub fn apply_pulse(grid: &mut PlaceGrid, e: &PulseEvent) -> Result<()> {
    grid.apply_pulse(e)
}

pub fn locate(grid: &PlaceGrid) -> (i32, i32) {
    grid.locate()
}

/// Streaming run detector: reports a run's first tick once it reaches `p` samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Debouncer {
    pub p: usize,
    run: usize,
    tick: u64,
}

impl Debouncer {
    pub fn new(p: usize) -> Self {
        Self {
            p: p.max(1),
            run: 0,
            tick: 0,
        }
    }

    /// Feeds the bit for `tick`.
    pub fn push(&mut self, bit: bool, tick: u64) -> Option<u64> {
        self.tick = tick;
        if bit {
            self.run += 1;
            if self.run == self.p {
                return Some(tick + 1 - self.p as u64);
            }
        } else {
            self.run = 0;
        }
        None
    }

    pub fn clear(&mut self) {
        self.run = 0;
    }
}

/// One event per maximal run of at least `p` high samples, at the run start.
pub fn debounce(bits: &[bool], p: usize, direction: Direction) -> Vec<PulseEvent> {
    let mut d = Debouncer::new(p);
    bits.iter()
        .enumerate()
        .filter_map(|(t, &b)| d.push(b, t as u64))
        .map(|tick| PulseEvent { direction, tick })
        .collect()
}

/// Maximal runs of high samples as (start, length).
pub fn runs(bits: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &b) in bits.iter().enumerate() {
        match (b, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, bits.len() - s));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetCause {
    TrailStart,
    VectorFire,
    VelocityChange,
    FixedInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetLine {
    pub asserted: bool,
    pub cause: Option<ResetCause>,
}

pub fn reset_controller(
    prev: VelocityVector,
    new: VelocityVector,
    events: &[PulseEvent],
    trail_start: bool,
) -> ResetLine {
    let cause = if trail_start {
        Some(ResetCause::TrailStart)
    } else if !events.is_empty() {
        Some(ResetCause::VectorFire)
    } else if prev != new {
        Some(ResetCause::VelocityChange)
    } else {
        None
    };
    ResetLine {
        asserted: cause.is_some(),
        cause,
    }
}

/// Hold timer for Cap_clear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResetTimer {
    pub hold_ticks: u64,
    remaining: u64,
}

impl ResetTimer {
    pub fn new(hold_ticks: u64) -> Self {
        Self {
            hold_ticks,
            remaining: 0,
        }
    }

    pub fn assert(&mut self) {
        self.remaining = self.hold_ticks;
    }

    /// True while the hold lasts; counts one tick down per call.
    pub fn tick(&mut self) -> bool {
        if self.remaining > 0 {
            self.remaining -= 1;
            true
        } else {
            false
        }
    }

    pub fn held(&self) -> bool {
        self.remaining > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(d: Direction) -> PulseEvent {
        PulseEvent { direction: d, tick: 0 }
    }

    #[test]
    fn pulse_east_leaves_tail() {
        let mut g = PlaceGrid::new(11, 11).unwrap();
        g.apply_pulse(&ev(Direction::E)).unwrap();
        assert_eq!(g.get(1, 0), Some(10));
        assert_eq!(g.get(0, 0), Some(5));
        assert!(g.check());
        g.apply_pulse(&ev(Direction::E)).unwrap();
        assert_eq!(g.get(0, 0), Some(0));
        assert_eq!(g.get(1, 0), Some(5));
    }

    #[test]
    fn closed_loop_and_locate() {
        let mut g = PlaceGrid::new(11, 11).unwrap();
        for d in [Direction::N, Direction::E, Direction::S, Direction::W] {
            g.apply_pulse(&ev(d)).unwrap();
        }
        assert_eq!(g.locate(), (0, 0));
        let mut g = PlaceGrid::new(11, 11).unwrap();
        assert_eq!(locate(&g), (0, 0));
        for d in [Direction::E, Direction::E, Direction::N] {
            g.apply_pulse(&ev(d)).unwrap();
        }
        assert_eq!(g.locate(), (2, 1));
    }

    #[test]
    fn boundary_errors() {
        let mut g = PlaceGrid::new(11, 11).unwrap();
        for _ in 0..5 {
            g.apply_pulse(&ev(Direction::E)).unwrap();
        }
        let before = g.clone();
        assert!(matches!(
            g.apply_pulse(&ev(Direction::E)),
            Err(Error::OutOfBounds { x: 5, y: 0, dir: 'E' })
        ));
        assert_eq!(g, before);
    }

    #[test]
    fn debounce_examples() {
        let p = 3;
        assert!(debounce(&[false, true, true, false], p, Direction::E).is_empty());
        let e = debounce(&[false, true, true, true, false], p, Direction::E);
        assert_eq!(e, vec![PulseEvent { direction: Direction::E, tick: 1 }]);
        let mut bits = vec![false; 10];
        bits.extend([true, true]);
        bits.extend([false; 5]);
        bits.extend([true; 50]);
        bits.push(false);
        let e = debounce(&bits, p, Direction::N);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].tick, 17);
    }

    #[test]
    fn reset_priorities() {
        let z = VelocityVector::ZERO;
        let v = VelocityVector::new(2.0, 0.0);
        assert_eq!(reset_controller(z, z, &[], true).cause, Some(ResetCause::TrailStart));
        assert!(!reset_controller(v, v, &[], false).asserted);
        let l = reset_controller(z, v, &[ev(Direction::E)], false);
        assert!(l.asserted);
        assert_eq!(l.cause, Some(ResetCause::VectorFire));
        assert_eq!(reset_controller(z, v, &[], false).cause, Some(ResetCause::VelocityChange));
    }

    #[test]
    fn reset_timer_holds() {
        let mut t = ResetTimer::new(10);
        t.assert();
        let held: usize = (0..15).filter(|_| t.tick()).count();
        assert_eq!(held, 10);
    }
}
