//! Channel discretization.
//!
//! The streamwise (`x`) and spanwise (`z`) directions are periodic and
//! uniformly sampled; the wall-normal direction `y ∈ [-1, 1]` is clustered
//! towards the walls by a tanh map. Every field in the crate is laid out with
//! `y` fastest, so a wall-normal pencil at fixed `(x, z)` (or fixed
//! `(kx, kz)` in spectral space) is contiguous.

use std::f64::consts::PI;

use crate::error::{config_err, Result};

/// Smallest filter width used at wall points so model terms vanish there.
pub const DELTA_FLOOR: f64 = 1e-8;

/// Default wall-clustering strength of the tanh map.
pub const DEFAULT_STRETCH: f64 = 2.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Streamwise length in half-widths.
    pub lx: f64,
    /// Spanwise length in half-widths.
    pub lz: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Wall clustering parameter of `y = tanh(β s) / tanh(β)`.
    pub stretch_beta: f64,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.lx.is_finite()) {
            return Err(config_err("grid.lx", format!("must be positive, got {}", self.lx)));
        }
        if !(self.lz > 0.0 && self.lz.is_finite()) {
            return Err(config_err("grid.lz", format!("must be positive, got {}", self.lz)));
        }
        if self.nx < 8 || self.nx % 2 != 0 {
            return Err(config_err("grid.nx", format!("must be even and >= 8, got {}", self.nx)));
        }
        if self.nz < 8 || self.nz % 2 != 0 {
            return Err(config_err("grid.nz", format!("must be even and >= 8, got {}", self.nz)));
        }
        if self.ny < 9 || self.ny % 2 == 0 {
            return Err(config_err("grid.ny", format!("must be odd and >= 9, got {}", self.ny)));
        }
        if !(self.stretch_beta > 0.0 && self.stretch_beta.is_finite()) {
            return Err(config_err(
                "grid.stretch_beta",
                format!("must be positive, got {}", self.stretch_beta),
            ));
        }
        Ok(())
    }
}

/// Immutable channel geometry shared by every operator.
#[derive(Debug, Clone)]
pub struct ChannelGrid {
    pub config: GridConfig,
    /// Wall-normal collocation points, `y[0] = -1`, `y[ny-1] = 1`.
    pub y: Vec<f64>,
    /// Streamwise wavenumbers for the `nx/2 + 1` retained modes.
    pub kx: Vec<f64>,
    /// Spanwise wavenumbers in FFT order.
    pub kz: Vec<f64>,
    /// Cell widths `y[j+1] - y[j]`.
    pub dy: Vec<f64>,
    /// Filter width at each wall-normal point.
    pub delta: Vec<f64>,
}

impl ChannelGrid {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let GridConfig { nx, ny, nz, lx, lz, stretch_beta } = config;

        let y = stretched_points(ny, stretch_beta);
        let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();

        let kx = (0..=nx / 2).map(|m| 2.0 * PI * m as f64 / lx).collect();
        let kz = (0..nz)
            .map(|n| {
                let signed = if n <= nz / 2 { n as i64 } else { n as i64 - nz as i64 };
                2.0 * PI * signed as f64 / lz
            })
            .collect();

        let mut grid = ChannelGrid { config, y, kx, kz, dy, delta: Vec::new() };
        grid.delta = filter_width_profile(&grid);
        Ok(grid)
    }

    pub fn nx(&self) -> usize {
        self.config.nx
    }
    pub fn ny(&self) -> usize {
        self.config.ny
    }
    pub fn nz(&self) -> usize {
        self.config.nz
    }
    /// Number of retained streamwise modes in the real-to-complex layout.
    pub fn nkx(&self) -> usize {
        self.config.nx / 2 + 1
    }
    /// Index of the centreline plane `y = 0`.
    pub fn center(&self) -> usize {
        self.config.ny / 2
    }
    pub fn dx(&self) -> f64 {
        self.config.lx / self.config.nx as f64
    }
    pub fn dz(&self) -> f64 {
        self.config.lz / self.config.nz as f64
    }

    /// Wavenumber used by spectral differentiation; the Nyquist mode is
    /// zeroed so derivatives of real fields stay real.
    pub fn kx_deriv(&self, m: usize) -> f64 {
        if m == self.config.nx / 2 {
            0.0
        } else {
            self.kx[m]
        }
    }
    pub fn kz_deriv(&self, n: usize) -> f64 {
        if n == self.config.nz / 2 {
            0.0
        } else {
            self.kz[n]
        }
    }

    /// Signed spanwise mode index for FFT slot `n`.
    pub fn kz_index(&self, n: usize) -> i64 {
        let nz = self.config.nz;
        if n <= nz / 2 {
            n as i64
        } else {
            n as i64 - nz as i64
        }
    }

    /// Trapezoidal weights for the wall-normal direction. Interior weights
    /// are `(y[j+1] - y[j-1]) / 2`; these make the central difference
    /// skew-adjoint on fields vanishing at the walls.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let ny = self.ny();
        let mut w = vec![0.0; ny];
        w[0] = 0.5 * self.dy[0];
        w[ny - 1] = 0.5 * self.dy[ny - 2];
        for j in 1..ny - 1 {
            w[j] = 0.5 * (self.y[j + 1] - self.y[j - 1]);
        }
        w
    }

    /// Composite Simpson weights on the stretched grid (exact for cubics on
    /// each pair of cells). `ny` odd guarantees an even number of cells.
    pub fn simpson_weights(&self) -> Vec<f64> {
        let ny = self.ny();
        let mut w = vec![0.0; ny];
        for p in (0..ny - 1).step_by(2) {
            let h0 = self.dy[p];
            let h1 = self.dy[p + 1];
            let s = (h0 + h1) / 6.0;
            w[p] += s * (2.0 - h1 / h0);
            w[p + 1] += s * (h0 + h1) * (h0 + h1) / (h0 * h1);
            w[p + 2] += s * (2.0 - h0 / h1);
        }
        w
    }

    /// Channel-height average `(1/2) ∫ f dy` of a wall-normal profile.
    pub fn bulk_average(&self, profile: &[f64]) -> f64 {
        let w = self.simpson_weights();
        0.5 * profile.iter().zip(&w).map(|(f, w)| f * w).sum::<f64>()
    }
}

/// `y_j = tanh(β s_j) / tanh(β)` with `s_j` uniform on `[-1, 1]`.
fn stretched_points(ny: usize, beta: f64) -> Vec<f64> {
    let c = ny / 2;
    let norm = beta.tanh();
    let mut y = vec![0.0; ny];
    // Fill the lower half and mirror so the grid is exactly antisymmetric.
    for j in 0..c {
        let s = -1.0 + 2.0 * j as f64 / (ny - 1) as f64;
        let v = if beta < 1e-4 {
            // tanh(βs)/tanh(β) = s (1 + β²(1 - s²)/3 + O(β⁴))
            s * (1.0 + beta * beta * (1.0 - s * s) / 3.0)
        } else {
            (beta * s).tanh() / norm
        };
        y[j] = v;
        y[ny - 1 - j] = -v;
    }
    y[0] = -1.0;
    y[ny - 1] = 1.0;
    y[c] = 0.0;
    y
}

/// Filter width `δ(y) = (Δx Δz Δy(y))^{1/3}` with the wall-normal scale
/// `Δy(y) = 2 h_c cos(πy/2)`, `h_c` the centreline cell width. `Δy` is
/// exactly zero at the walls, where δ is floored to [`DELTA_FLOOR`].
pub fn filter_width_profile(grid: &ChannelGrid) -> Vec<f64> {
    let ny = grid.ny();
    let c = grid.center();
    let hc = grid.y[c + 1] - grid.y[c];
    let dxdz = grid.dx() * grid.dz();
    (0..ny)
        .map(|j| {
            let dyj = if j == 0 || j == ny - 1 {
                0.0
            } else {
                2.0 * hc * (0.5 * PI * grid.y[j]).cos()
            };
            (dxdz * dyj).cbrt().max(DELTA_FLOOR)
        })
        .collect()
}
