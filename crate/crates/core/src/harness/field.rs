use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::place_grid::{debounce, runs, Direction};
use crate::theta_core::VelocityVector;
use crate::vector_net::{TargetLocation, VectorNetwork, N_SLOTS};

use super::config::RunConfig;
use super::rig::Rig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldCell {
    pub x: i32,
    pub y: i32,
    pub active_groups: usize,
    pub output: Vec<bool>,
    /// Debounced event ticks.
    pub events: Vec<u64>,
}

impl FieldCell {
    pub fn runs(&self) -> Vec<(usize, usize)> {
        runs(&self.output)
    }

    pub fn longest_run(&self) -> usize {
        self.runs().iter().map(|r| r.1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub half: i32,
    pub ticks: usize,
    pub fs: f64,
    pub velocity: VelocityVector,
    /// Row-major from `y = -half`, `x = -half`.
    pub cells: Vec<FieldCell>,
    pub warnings: Vec<String>,
}

impl FieldMap {
    pub fn cell(&self, x: i32, y: i32) -> Option<&FieldCell> {
        self.cells.iter().find(|c| c.x == x && c.y == y)
    }

    /// 0/1 matrix at `tick`, rows from `y = +half` down.
    pub fn snapshot(&self, tick: usize) -> Vec<Vec<u8>> {
        self.matrix(|c| c.output.get(tick).copied().unwrap_or(false) as u8)
    }

    /// Cells that produced at least one debounced event.
    pub fn occupancy(&self) -> Vec<Vec<u8>> {
        self.matrix(|c| !c.events.is_empty() as u8)
    }

    fn matrix(&self, f: impl Fn(&FieldCell) -> u8) -> Vec<Vec<u8>> {
        (-self.half..=self.half)
            .rev()
            .map(|y| {
                (-self.half..=self.half)
                    .map(|x| self.cell(x, y).map_or(0, &f))
                    .collect()
            })
            .collect()
    }
}

pub fn field_map(config: &RunConfig, velocity: VelocityVector) -> Result<FieldMap> {
    let mut rig = Rig::build(config)?;
    field_map_with(&mut rig, velocity)
}

/// Recompiles one network per designated cell and runs each over the same
/// constant-velocity session from reset.
pub fn field_map_with(rig: &mut Rig, velocity: VelocityVector) -> Result<FieldMap> {
    let half = (rig.config.tracking.grid_size / 2) as i32;
    let mut params = rig.config.network;
    params.axis_min = params.axis_min.max(rig.config.tracking.field_axis_min);
    let speed = velocity.norm();
    if speed > 0.0 {
        params.speed = speed;
    }
    // Distance to the grid edge along the motion ray.
    let reach = if speed > 0.0 {
        half as f64 / (velocity.vx.abs().max(velocity.vy.abs()) / speed)
    } else {
        half as f64
    };
    let ticks = ((reach + 0.6) * params.pitch / params.speed * rig.fs).ceil() as usize;
    let p = rig.config.tracking.debounce;

    let phases = rig.chip.enabled_phases();
    rig.chip.hold();
    rig.chip.release();
    let frames = rig.chip.scan(velocity, ticks)?;

    let mut jobs = Vec::new();
    let mut warnings = Vec::new();
    for y in -half..=half {
        for x in -half..=half {
            match rig.compile_with(TargetLocation::from_grid(x, y), &params) {
                Ok((t, _)) => {
                    let route = rig.router(&t)?;
                    jobs.push((x, y, t, route));
                }
                Err(e) => warnings.push(format!("cell ({x},{y}) not compiled: {e}")),
            }
        }
    }

    let filters = rig.config.filters;
    let run = |(x, y, t, route): &(i32, i32, crate::vector_net::MuxTable, Vec<usize>)| {
        let active_groups = t.active_groups();
        let mut net = VectorNetwork::new(t.clone(), &filters);
        let mut input = [false; N_SLOTS];
        let output: Vec<bool> = frames
            .chunks(phases)
            .map(|frame| {
                for (slot, &idx) in route.iter().enumerate() {
                    input[slot] = frame[idx];
                }
                net.step(&input)
            })
            .collect();
        let events = debounce(&output, p, Direction::E)
            .into_iter()
            .map(|e| e.tick)
            .collect();
        FieldCell {
            x: *x,
            y: *y,
            active_groups,
            output,
            events,
        }
    };

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let chunk = jobs.len().div_ceil(workers.max(1)).max(1);
    let cells: Vec<FieldCell> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("field-map worker panicked"))
            .collect()
    });

    Ok(FieldMap {
        half,
        ticks,
        fs: rig.fs,
        velocity,
        cells,
        warnings,
    })
}
