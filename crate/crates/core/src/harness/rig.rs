use std::collections::HashMap;

use crate::chip_io::{calibrate, select_units, ChipState, UnitFit};
use crate::error::{Error, Result};
use crate::place_grid::Direction;
use crate::theta_core::{sample_population, ThetaPopulation};
use crate::vector_net::{
    compile_detailed, pair_layer1, CompileParams, GroupPlan, MuxTable, Pairing, TargetLocation, N_SLOTS,
};

use super::config::RunConfig;

/// A calibrated, paired and programmed chip ready to host vector networks.
#[derive(Debug, Clone)]
pub struct Rig {
    pub config: RunConfig,
    pub population: ThetaPopulation,
    pub fits: Vec<UnitFit>,
    pub admitted: Vec<UnitFit>,
    pub pairing: Pairing,
    pub chip: ChipState,
    pub fs: f64,
    frame_index: HashMap<(usize, usize), usize>,
}

impl Rig {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let population = sample_population(&config.population_spec())?;
        let fits = calibrate(&population, config.scan, &config.calibration)?;
        let admitted = select_units(&fits, config.calibration.r2_threshold)?;
        let pairing = pair_layer1(&admitted)?;
        let mut chip = ChipState::new(&population, config.scan)?;
        chip.program(&pairing.unit_configs())?;
        let fs = chip.scan_config.check(chip.enabled_phases())?;
        let frame_index = chip
            .phase_labels()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        Ok(Self {
            config: config.clone(),
            population,
            fits,
            admitted,
            pairing,
            chip,
            fs,
            frame_index,
        })
    }

    pub fn compile_detailed(&self, target: TargetLocation) -> Result<(MuxTable, Vec<GroupPlan>)> {
        self.compile_with(target, &self.config.network)
    }

    pub fn compile_with(&self, target: TargetLocation, params: &CompileParams) -> Result<(MuxTable, Vec<GroupPlan>)> {
        compile_detailed(
            &self.pairing,
            &self.fits,
            target,
            params,
            &self.config.filters,
            self.fs,
        )
    }

    pub fn compile(&self, target: TargetLocation) -> Result<MuxTable> {
        self.compile_detailed(target).map(|(t, _)| t)
    }

    /// Unit-distance targets for the four cardinal networks.
    pub fn cardinal_tables(&self) -> Result<Vec<(Direction, MuxTable)>> {
        Direction::ALL
            .iter()
            .map(|&d| {
                let (x, y) = d.delta();
                Ok((d, self.compile(TargetLocation::from_grid(x, y))?))
            })
            .collect()
    }

    /// Scan-frame index feeding each input slot of `table`.
    pub fn router(&self, table: &MuxTable) -> Result<Vec<usize>> {
        if table.slots.len() != N_SLOTS {
            return Err(Error::InvalidArgument("table has wrong slot count".into()));
        }
        table
            .slots
            .iter()
            .map(|&(u, k)| {
                self.frame_index
                    .get(&(u, k as usize))
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("phase {u}:{k} is not scanned")))
            })
            .collect()
    }

    /// Predicted ticks to cross one grid cell at the configured speed.
    pub fn cell_ticks(&self) -> f64 {
        self.config.network.pitch / self.config.network.speed * self.fs
    }
}
