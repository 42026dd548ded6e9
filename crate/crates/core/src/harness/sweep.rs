use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::script::PathScript;
use super::track::run_track;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub success: bool,
    pub final_location: Option<(i32, i32)>,
    pub events: usize,
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub script: String,
    pub expected: Option<(i32, i32)>,
    pub outcomes: Vec<SeedOutcome>,
}

impl SweepReport {
    pub fn successes(&self) -> usize {
        self.outcomes.iter().filter(|o| o.success).count()
    }

    pub fn success_fraction(&self) -> f64 {
        if self.outcomes.is_empty() {
            return 0.0;
        }
        self.successes() as f64 / self.outcomes.len() as f64
    }
}

fn one(config: &RunConfig, script: &PathScript, seed: u64, expected: Option<(i32, i32)>) -> SeedOutcome {
    match run_track(&config.with_seed(seed), script) {
        Ok(r) => {
            let success = Some(r.final_location) == expected;
            SeedOutcome {
                seed,
                success,
                final_location: Some(r.final_location),
                events: r.events.len(),
                cause: (!success).then(|| {
                    let seq: String = r.events.iter().map(|e| e.direction.letter()).collect();
                    format!("ended at {:?} after pulses {seq}", r.final_location)
                }),
            }
        }
        Err(e) => SeedOutcome {
            seed,
            success: false,
            final_location: None,
            events: 0,
            cause: Some(e.to_string()),
        },
    }
}

/// Runs the script over seeds `config.seed .. config.seed + n_seeds`.
pub fn sweep_seeds(config: &RunConfig, script: &PathScript, n_seeds: usize) -> SweepReport {
    let expected = script.expected_final();
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| config.seed + i).collect();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, n_seeds.max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    let outcomes = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&seed| one(config, script, seed, expected))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    SweepReport {
        script: script.name.clone(),
        expected,
        outcomes,
    }
}
