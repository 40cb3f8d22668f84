//! Shared fixtures for the kernel benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use rles_core::{ChannelGrid, GridConfig, RunConfig, SgsConfig, SgsModel, SpectralOps};

/// Streamwise/spanwise resolution of the minimal-channel fixture together
/// with the wall-normal point count.
pub const SIZES: [(usize, usize); 3] = [(16, 17), (32, 33), (36, 37)];

pub fn grid(nxz: usize, ny: usize) -> GridConfig {
    GridConfig { lx: 4.0 * PI, lz: 4.0 * PI / 3.0, nx: nxz, ny, nz: nxz, stretch_beta: 2.2 }
}

pub fn ops(nxz: usize, ny: usize) -> SpectralOps {
    SpectralOps::new(Arc::new(ChannelGrid::new(grid(nxz, ny)).expect("valid bench grid")))
}

pub fn run_config(nxz: usize, ny: usize, model: SgsModel) -> RunConfig {
    RunConfig {
        grid: grid(nxz, ny),
        sgs: SgsConfig { model, ..Default::default() },
        ..RunConfig::re180()
    }
}
