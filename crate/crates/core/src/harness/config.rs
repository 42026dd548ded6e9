use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chip_io::{CalibrationConfig, ScanConfig};
use crate::error::{Error, Result};
use crate::theta_core::PopulationSpec;
use crate::vector_net::{CompileParams, FilterConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingConfig {
    /// Minimum run width of a vector-cell pulse.
    pub debounce: usize,
    pub hold_ticks: u64,
    pub clear_filters: bool,
    /// Per-segment tick budget as a multiple of the predicted arrival time.
    pub budget_factor: f64,
    /// Optional periodic reset, in ticks.
    pub fixed_reset_interval: Option<u64>,
    pub grid_size: usize,
    pub record_traces: bool,
    /// Per-axis active-group floor for field-map cells; cells below it are
    /// reported and left undesignated.
    pub field_axis_min: usize,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            debounce: 64,
            hold_ticks: 10,
            clear_filters: true,
            budget_factor: 10.0,
            fixed_reset_interval: None,
            grid_size: 11,
            record_traces: true,
            field_axis_min: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    /// Overrides `population.seed`.
    pub seed: u64,
    pub population: PopulationSpec,
    pub scan: ScanConfig,
    pub calibration: CalibrationConfig,
    pub filters: FilterConfig,
    pub network: CompileParams,
    pub tracking: TrackingConfig,
}

impl RunConfig {
    pub fn population_spec(&self) -> PopulationSpec {
        PopulationSpec {
            seed: self.seed,
            ..self.population.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.population_spec().validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let f = &self.filters;
        if !(0.0 < f.alpha2 && f.alpha2 < f.alpha1 && f.alpha1 <= 1.0) {
            return bad("filter constants must satisfy 0 < alpha2 < alpha1 <= 1");
        }
        for [hi, lo] in [f.schmitt1, f.schmitt2] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return bad("schmitt thresholds must satisfy 0 <= fall < rise <= 1");
            }
        }
        let n = &self.network;
        if !(n.speed > 0.0 && n.speed <= 4.0) {
            return bad("speed must lie in (0, 4]");
        }
        if !(n.pitch > 0.0) || !(n.tolerance > 0.0 && n.tolerance <= 0.5) {
            return bad("pitch and tolerance out of range");
        }
        if n.g_min == 0 || n.g_min > crate::vector_net::N_GROUPS {
            return bad("g_min must lie in 1..=20");
        }
        if 2 * n.axis_min > crate::vector_net::N_GROUPS || 2 * self.tracking.field_axis_min > crate::vector_net::N_GROUPS {
            return bad("per-axis group floors must not exceed 10");
        }
        let t = &self.tracking;
        if t.debounce == 0 || t.grid_size % 2 == 0 || t.grid_size < 3 || !(t.budget_factor >= 1.0) {
            return bad("tracking parameters out of range");
        }
        if !(self.calibration.window_s >= 0.1) {
            return bad("calibration window must be at least 0.1 s");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
