//! Gaussian filter and its low-order approximants.
//!
//! With `x = δ²|k|²/(4γ)` the Gaussian transfer function is `e^{-x}`. The
//! gradient model follows from the Taylor approximant `1 - x`, the rational
//! model from the (0,1) Padé approximant `1/(1 + x)`. In physical space the
//! Padé approximant is the inverse of `I - (δ²/4γ)Δ`, which this module
//! applies to channel fields by one tridiagonal solve per Fourier pencil.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{config_err, Result};
use crate::fields::{ScalarField, SpectralOps};
use crate::linalg::solve_tridiagonal;

/// Shape parameter of the Gaussian filter used throughout.
pub const DEFAULT_GAMMA: f64 = 6.0;

/// Kernel support of the wall-normal Gaussian, in standard deviations.
const KERNEL_SUPPORT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Gaussian,
    Taylor,
    Pade,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub gamma: f64,
    pub delta: f64,
}

impl FilterParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(config_err("sgs.gamma", format!("must be positive, got {gamma}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(config_err("delta", format!("must be non-negative, got {delta}")));
        }
        Ok(Self { gamma, delta })
    }

    /// The dimensionless argument `δ²k²/(4γ)`.
    pub fn scaled_wavenumber(&self, k2: f64) -> f64 {
        self.delta * self.delta * k2 / (4.0 * self.gamma)
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { gamma: DEFAULT_GAMMA, delta: 0.0 }
    }
}

/// Transfer function of the Gaussian filter or one of its approximants at
/// squared wavenumber `k2`.
pub fn transfer_function(kind: FilterKind, k2: f64, params: &FilterParams) -> f64 {
    transfer_at(kind, params.scaled_wavenumber(k2))
}

/// Transfer function in terms of `x = δ²k²/(4γ)`.
pub fn transfer_at(kind: FilterKind, x: f64) -> f64 {
    match kind {
        FilterKind::Gaussian => (-x).exp(),
        FilterKind::Taylor => 1.0 - x,
        FilterKind::Pade => 1.0 / (1.0 + x),
    }
}

/// Explicit Gaussian filter of a channel field with wall-normal width
/// profile `delta`.
///
/// Periodic directions are filtered exactly in Fourier space using `δ(y_j)`
/// on each plane. The wall-normal direction uses a discrete Gaussian kernel
/// truncated at four standard deviations and renormalised to unit sum, so
/// near the walls the kernel is one-sided. Output has the input's
/// representation.
pub fn apply_gaussian_filter(
    ops: &SpectralOps,
    field: &ScalarField,
    gamma: f64,
    delta: &[f64],
) -> Result<ScalarField> {
    let grid = ops.grid();
    let d = ops.dims();
    FilterParams::new(gamma, 0.0)?;
    let mut spec = ops.to_spectral(field)?;
    let data = spec.spectral_mut()?;

    let kernels = wall_normal_kernels(&grid.y, &grid.trapezoid_weights(), gamma, delta);

    let nz = d.nz;
    data.par_chunks_mut(d.ny).enumerate().for_each(|(p, pencil)| {
        let (m, n) = (p / nz, p % nz);
        let k2 = grid.kx[m].powi(2) + grid.kz[n].powi(2);
        for (j, c) in pencil.iter_mut().enumerate() {
            *c *= (-delta[j] * delta[j] * k2 / (4.0 * gamma)).exp();
        }
        let src = pencil.to_vec();
        for (j, (start, weights)) in kernels.iter().enumerate() {
            pencil[j] = weights
                .iter()
                .enumerate()
                .fold(Complex64::default(), |acc, (i, w)| acc + src[start + i] * *w);
        }
    });

    if field.is_spectral() {
        Ok(spec)
    } else {
        ops.inverse(&spec)
    }
}

/// Row `j` of the wall-normal Gaussian: first column and normalised weights.
fn wall_normal_kernels(
    y: &[f64],
    quad: &[f64],
    gamma: f64,
    delta: &[f64],
) -> Vec<(usize, Vec<f64>)> {
    let n = y.len();
    (0..n)
        .map(|j| {
            let sigma = delta[j] / (2.0 * gamma).sqrt();
            let reach = KERNEL_SUPPORT * sigma;
            let lo = (0..=j).rev().take_while(|&i| y[j] - y[i] <= reach).last().unwrap_or(j);
            let hi = (j..n).take_while(|&i| y[i] - y[j] <= reach).last().unwrap_or(j);
            if lo == hi {
                return (j, vec![1.0]);
            }
            let mut w: Vec<f64> = (lo..=hi)
                .map(|i| {
                    let r = y[i] - y[j];
                    (-r * r / (2.0 * sigma * sigma)).exp() * quad[i]
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            (lo, w)
        })
        .collect()
}

/// Applies `(I - (δ(y)²/4γ) Δ)^{-1}` with homogeneous Dirichlet conditions at
/// the walls. The coefficient multiplies the Laplacian pointwise.
pub fn helmholtz_inverse(
    ops: &SpectralOps,
    rhs: &ScalarField,
    gamma: f64,
    delta: &[f64],
) -> Result<ScalarField> {
    let mut out = rhs.clone();
    helmholtz_inverse_in_place(ops, out.spectral_mut()?, gamma, delta)?;
    Ok(out)
}

pub(crate) fn helmholtz_inverse_in_place(
    ops: &SpectralOps,
    data: &mut [Complex64],
    gamma: f64,
    delta: &[f64],
) -> Result<()> {
    let grid = ops.grid();
    let st = ops.stencils();
    let d = ops.dims();
    let ny = d.ny;
    let nz = d.nz;
    let coef: Vec<f64> = delta.iter().map(|dl| dl * dl / (4.0 * gamma)).collect();

    data.par_chunks_mut(ny).enumerate().try_for_each_init(
        || (vec![0.0; ny], vec![0.0; ny], vec![0.0; ny], Vec::new()),
        |(lo, di, up, scratch), (p, pencil)| {
            let (m, n) = (p / nz, p % nz);
            let k2 = grid.kx[m].powi(2) + grid.kz[n].powi(2);
            let inner = ny - 2;
            for r in 0..inner {
                let j = r + 1;
                let a = coef[j];
                lo[r] = -a * st.second_lower[j];
                di[r] = 1.0 + a * k2 - a * st.second_diag[j];
                up[r] = -a * st.second_upper[j];
            }
            pencil[0] = Complex64::default();
            pencil[ny - 1] = Complex64::default();
            solve_tridiagonal(&lo[..inner], &di[..inner], &up[..inner], &mut pencil[1..ny - 1], scratch)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Dims;
    use crate::grid::{ChannelGrid, GridConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn ops(nx: usize, ny: usize, nz: usize) -> SpectralOps {
        let g = ChannelGrid::new(GridConfig {
            lx: 2.0 * PI,
            lz: PI,
            nx,
            ny,
            nz,
            stretch_beta: 2.2,
        })
        .unwrap();
        SpectralOps::new(Arc::new(g))
    }

    #[test]
    fn zero_wavenumber_passes_through() {
        let p = FilterParams::new(6.0, 0.7).unwrap();
        for kind in [FilterKind::Gaussian, FilterKind::Taylor, FilterKind::Pade] {
            assert_eq!(transfer_function(kind, 0.0, &p), 1.0);
        }
    }

    #[test]
    fn unit_argument_values() {
        // δ²k² = 4γ gives x = 1.
        let p = FilterParams::new(6.0, 2.0).unwrap();
        let k2 = 6.0;
        assert_eq!(transfer_function(FilterKind::Taylor, k2, &p), 0.0);
        assert_eq!(transfer_function(FilterKind::Pade, k2, &p), 0.5);
        assert!((transfer_function(FilterKind::Gaussian, k2, &p) - 0.36787944).abs() < 1e-8);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(FilterParams::new(0.0, 1.0).is_err());
        assert!(FilterParams::new(6.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_filter_preserves_constants() {
        let o = ops(16, 33, 8);
        let f = ScalarField::from_fn(o.grid(), |_, _, _| 3.25);
        let delta = o.grid().delta.clone();
        let out = apply_gaussian_filter(&o, &f, 6.0, &delta).unwrap();
        for v in out.physical().unwrap() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_filter_damps_streamwise_mode() {
        let o = ops(16, 17, 8);
        let g = o.grid();
        let k = g.kx[2];
        let delta = vec![0.8; 17];
        let f = ScalarField::from_fn(g, |x, _, _| (k * x).cos());
        let out = apply_gaussian_filter(&o, &f, 6.0, &delta).unwrap();
        let factor = (-0.64 * k * k / 24.0).exp();
        let expect = ScalarField::from_fn(g, |x, _, _| factor * (k * x).cos());
        for (a, b) in out.physical().unwrap().iter().zip(expect.physical().unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn helmholtz_of_zero_is_zero() {
        let o = ops(8, 17, 8);
        let z = ScalarField::zeros_spectral(o.dims());
        let out = helmholtz_inverse(&o, &z, 6.0, &o.grid().delta).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn helmholtz_requires_spectral_input() {
        let o = ops(8, 17, 8);
        let z = ScalarField::zeros_physical(o.dims());
        assert!(helmholtz_inverse(&o, &z, 6.0, &o.grid().delta).is_err());
    }

    fn dirichlet_eigen_error(ny: usize) -> f64 {
        let o = ops(8, ny, 8);
        let g = o.grid();
        let (gamma, dl) = (6.0, 0.5);
        let delta = vec![dl; ny];
        let mode = |y: f64| (0.5 * PI * (y + 1.0)).sin();
        let rhs = o.forward(&ScalarField::from_fn(g, |_, y, _| mode(y))).unwrap();
        let out = o.inverse(&helmholtz_inverse(&o, &rhs, gamma, &delta).unwrap()).unwrap();
        let factor = 1.0 / (1.0 + dl * dl / (4.0 * gamma) * (0.5 * PI).powi(2));
        let d = o.dims();
        let v = out.physical().unwrap();
        (0..ny)
            .map(|iy| (v[d.physical_index(0, 0, iy)] - factor * mode(g.y[iy])).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn helmholtz_eigenfunction_converges_second_order() {
        let errs: Vec<f64> = [17, 33, 65, 129].iter().map(|&n| dirichlet_eigen_error(n)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.2, "order {order} from {errs:?}");
        }
    }

    fn weighted_norm(o: &SpectralOps, f: &ScalarField) -> f64 {
        let w = o.grid().trapezoid_weights();
        let d = o.dims();
        let v = f.spectral().unwrap();
        let mut s = 0.0;
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                for iy in 0..d.ny {
                    s += o.parseval_weight(m) * w[iy] * v[d.spectral_index(m, n, iy)].norm_sqr();
                }
            }
        }
        s.sqrt()
    }

    fn random_spectral(o: &SpectralOps, rng: &mut ChaCha8Rng) -> ScalarField {
        let d: Dims = o.dims();
        let v = (0..d.physical_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        o.forward(&ScalarField::from_physical(d, v).unwrap()).unwrap()
    }

    #[test]
    fn helmholtz_is_linear_and_non_amplifying() {
        let o = ops(16, 33, 12);
        let delta = o.grid().delta.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r1 = random_spectral(&o, &mut rng);
        let r2 = random_spectral(&o, &mut rng);
        let (a, b) = (1.7, -0.3);
        let mut comb = r1.clone();
        comb.scale(a);
        comb.axpy(b, &r2).unwrap();
        let lhs = helmholtz_inverse(&o, &comb, 6.0, &delta).unwrap();
        let mut rhs = helmholtz_inverse(&o, &r1, 6.0, &delta).unwrap();
        rhs.scale(a);
        rhs.axpy(b, &helmholtz_inverse(&o, &r2, 6.0, &delta).unwrap()).unwrap();
        for (x, y) in lhs.spectral().unwrap().iter().zip(rhs.spectral().unwrap()) {
            assert!((x - y).norm() < 1e-12);
        }
        for _ in 0..5 {
            let r = random_spectral(&o, &mut rng);
            let out = helmholtz_inverse(&o, &r, 6.0, &delta).unwrap();
            assert!(weighted_norm(&o, &out) <= weighted_norm(&o, &r));
        }
    }
}
