use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::place_grid::Direction;

use super::config::RunConfig;
use super::field::FieldMap;
use super::script::PathScript;
use super::track::TrackResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub script: PathScript,
    pub final_location: (i32, i32),
    pub events: usize,
}

impl Manifest {
    pub fn new(config: &RunConfig, script: &PathScript, result: &TrackResult) -> Self {
        Self {
            tool: "thetanav".into(),
            version: VERSION.into(),
            seed: config.seed,
            config: config.clone(),
            script: script.clone(),
            final_location: result.final_location,
            events: result.events.len(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn matrix_csv(rows: &[Vec<u8>]) -> String {
    let mut s = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Writes manifest, trail, resets, traces and per-event snapshots into `dir`.
pub fn emit(
    result: &TrackResult,
    config: &RunConfig,
    script: &PathScript,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let p = dir.join("manifest.json");
    write(&p, &serde_json::to_string_pretty(&Manifest::new(config, script, result))?)?;
    written.push(p);

    let p = dir.join("trail.csv");
    let mut s = String::from("tick,direction,x,y\n");
    for t in &result.trail {
        let d = t.direction.map_or(String::new(), |d| d.to_string());
        s.push_str(&format!("{},{},{},{}\n", t.tick, d, t.x, t.y));
    }
    write(&p, &s)?;
    written.push(p);

    let p = dir.join("resets.csv");
    let mut s = String::from("tick,cause\n");
    for r in &result.resets {
        let cause = serde_json::to_value(r.cause)?;
        s.push_str(&format!("{},{}\n", r.tick, cause.as_str().unwrap_or("")));
    }
    write(&p, &s)?;
    written.push(p);

    if !result.traces.is_empty() {
        let p = dir.join("traces.csv");
        let mut s = String::from("tick,E,N,W,S\n");
        for (t, bits) in result.traces.iter().enumerate() {
            s.push_str(&t.to_string());
            for i in 0..Direction::ALL.len() {
                s.push_str(if bits >> i & 1 == 1 { ",1" } else { ",0" });
            }
            s.push('\n');
        }
        write(&p, &s)?;
        written.push(p);
    }

    let snap_dir = dir.join("snapshots");
    fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    for (i, g) in result.snapshots.iter().enumerate() {
        let p = snap_dir.join(format!("snapshot_{:04}.csv", i + 1));
        write(&p, &matrix_csv(&g.rows_top_down()))?;
        written.push(p);
    }
    Ok(written)
}

/// Writes the occupancy matrix, event list and optional periodic snapshots.
pub fn emit_field_map(map: &FieldMap, dir: &Path, snapshot_every: Option<usize>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let p = dir.join("field_occupancy.csv");
    write(&p, &matrix_csv(&map.occupancy()))?;
    written.push(p);

    let p = dir.join("field_events.csv");
    let mut s = String::from("x,y,tick,active_groups\n");
    for c in &map.cells {
        for t in &c.events {
            s.push_str(&format!("{},{},{},{}\n", c.x, c.y, t, c.active_groups));
        }
    }
    write(&p, &s)?;
    written.push(p);

    if let Some(every) = snapshot_every.filter(|e| *e > 0) {
        for t in (0..map.ticks).step_by(every) {
            let p = dir.join(format!("field_t{t:06}.csv"));
            write(&p, &matrix_csv(&map.snapshot(t)))?;
            written.push(p);
        }
    }
    Ok(written)
}
