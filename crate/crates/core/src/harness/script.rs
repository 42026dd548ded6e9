use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::place_grid::Direction;
use crate::theta_core::VelocityVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Until {
    /// Segment ends after this many place-cell migrations.
    Pulses(u32),
    /// Segment ends after this many ticks.
    Ticks(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub velocity: VelocityVector,
    pub until: Until,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathScript {
    pub name: String,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
}

pub const BUILTINS: [&str; 3] = ["path1_meander", "path2_detour", "path3_loop"];

impl PathScript {
    pub fn new(name: &str, segments: Vec<Segment>) -> Self {
        Self {
            name: name.to_string(),
            segments,
        }
    }

    /// Cardinal moves of `speed`, `n` migrations each.
    pub fn from_moves(name: &str, moves: &[(Direction, u32)], speed: f64) -> Self {
        let segments = moves
            .iter()
            .map(|&(d, n)| {
                let (dx, dy) = d.delta();
                Segment {
                    velocity: VelocityVector::new(speed * dx as f64, speed * dy as f64),
                    until: Until::Pulses(n),
                }
            })
            .collect();
        Self::new(name, segments)
    }

    pub fn builtin(name: &str, speed: f64) -> Result<Self> {
        use Direction::*;
        let moves: &[(Direction, u32)] = match name {
            "path1_meander" => &[(E, 2), (N, 1), (W, 2), (N, 1), (E, 3)],
            "path2_detour" => &[(E, 1), (N, 1), (E, 2), (S, 3)],
            "path3_loop" => &[(E, 2), (N, 2), (W, 2), (S, 2)],
            _ => return Err(Error::UnknownScript(name.to_string())),
        };
        Ok(Self::from_moves(name, moves, speed))
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidArgument("script has no segments".into()));
        }
        for (i, s) in self.segments.iter().enumerate() {
            let v = s.velocity;
            if !(v.vx.abs() <= 4.0 && v.vy.abs() <= 4.0) {
                return Err(Error::InvalidArgument(format!(
                    "segment {i}: velocity outside the linear range"
                )));
            }
            if let Until::Pulses(n) = s.until {
                if n > 0 && Direction::of_velocity(v).is_none() {
                    return Err(Error::InvalidArgument(format!(
                        "segment {i}: pulse-terminated segments need a cardinal velocity"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bump location implied by the pulse counts of the script.
    pub fn expected_final(&self) -> Option<(i32, i32)> {
        let mut pos = (0, 0);
        for s in &self.segments {
            if let Until::Pulses(n) = s.until {
                let (dx, dy) = Direction::of_velocity(s.velocity)?.delta();
                pos.0 += dx * n as i32;
                pos.1 += dy * n as i32;
            }
        }
        Some(pos)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: PathScript = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("script serializes")
    }

    /// A built-in name or a path to a TOML script.
    pub fn resolve(name_or_path: &str, speed: f64) -> Result<Self> {
        if BUILTINS.contains(&name_or_path) {
            return Self::builtin(name_or_path, speed);
        }
        let p = Path::new(name_or_path);
        if !p.exists() {
            return Err(Error::UnknownScript(name_or_path.to_string()));
        }
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_endpoints() {
        let p = PathScript::builtin("path2_detour", 2.0).unwrap();
        assert_eq!(p.expected_final(), Some((3, -2)));
        let p = PathScript::builtin("path3_loop", 2.0).unwrap();
        assert_eq!(p.expected_final(), Some((0, 0)));
        assert!(PathScript::builtin("nope", 2.0).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let p = PathScript::builtin("path1_meander", 2.0).unwrap();
        let s = p.to_toml_string();
        assert_eq!(PathScript::from_toml_str(&s).unwrap(), p);
    }

    #[test]
    fn validation() {
        assert!(PathScript::new("e", vec![]).validate().is_err());
        let diag = Segment {
            velocity: VelocityVector::new(1.0, 1.0),
            until: Until::Pulses(1),
        };
        assert!(PathScript::new("d", vec![diag]).validate().is_err());
        let fast = Segment {
            velocity: VelocityVector::new(5.0, 0.0),
            until: Until::Ticks(1),
        };
        assert!(PathScript::new("f", vec![fast]).validate().is_err());
    }
}
