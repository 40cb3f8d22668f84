//! Fractional-step time integration of the filtered equations in the channel.
//!
//! One step: skew-symmetric convection plus model forcing (Adams–Bashforth 2,
//! Euler on the first step), Crank–Nicolson viscous solve per Fourier pencil,
//! exact discrete projection, constant-mass-flux correction and damping of
//! the highest retained Fourier mode.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{config_err, Error, Result};
use crate::fields::{Dims, ScalarField, SpectralOps, VelocityField, VelocityGradient};
use crate::grid::{filter_width_profile, ChannelGrid, GridConfig};
use crate::linalg::{solve_tridiagonal, BandCholesky};
use crate::sgs::{mean_model_shear, model_stress_spectral, sgs_force_spectral, SgsConfig};

/// Steps between finiteness checks.
pub const GUARD_INTERVAL: u64 = 100;
const GUARD_HISTORY: usize = 32;
pub const MAX_STABILIZER_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub dt: f64,
    pub n_steps: u64,
    /// Steps discarded before statistics sampling starts.
    pub transient_steps: u64,
    /// Target bulk velocity.
    pub u_m: f64,
    /// Reynolds number; the viscosity is `1/re`. Infinite means inviscid.
    pub re: f64,
    pub stabilizer_alpha: f64,
    pub seed: u64,
    /// Initial perturbation rms relative to `u_m`.
    pub perturbation: f64,
    pub sgs: SgsConfig,
    pub checkpoint_every: u64,
    /// 2/3-rule truncation of the explicit terms.
    pub dealias: bool,
    /// Hold the bulk velocity at `u_m`; when off the flow is unforced.
    pub constant_flux: bool,
}

impl RunConfig {
    /// Re_τ = 180 setup: 4π × 4π/3 box on 36 × 37 × 36 points.
    pub fn re180() -> Self {
        Self {
            grid: GridConfig {
                lx: 4.0 * std::f64::consts::PI,
                lz: 4.0 * std::f64::consts::PI / 3.0,
                nx: 36,
                ny: 37,
                nz: 36,
                stretch_beta: crate::grid::DEFAULT_STRETCH,
            },
            dt: 0.0002,
            n_steps: 100_000,
            transient_steps: 75_000,
            u_m: 15.63,
            re: 180.0,
            stabilizer_alpha: 0.02,
            seed: 1,
            perturbation: 0.1,
            sgs: SgsConfig::default(),
            checkpoint_every: 5_000,
            dealias: true,
            constant_flux: true,
        }
    }

    /// Re_τ = 395 setup: 2π × π box on 72 × 55 × 54 points.
    pub fn re395() -> Self {
        Self {
            grid: GridConfig {
                lx: 2.0 * std::f64::consts::PI,
                lz: std::f64::consts::PI,
                nx: 72,
                ny: 55,
                nz: 54,
                stretch_beta: crate::grid::DEFAULT_STRETCH,
            },
            dt: 0.00025,
            n_steps: 80_000,
            transient_steps: 60_000,
            u_m: 17.54,
            re: 395.0,
            ..Self::re180()
        }
    }

    pub fn nu(&self) -> f64 {
        if self.re.is_infinite() {
            0.0
        } else {
            1.0 / self.re
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.sgs.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config_err("run.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.re > 0.0) {
            return Err(config_err("run.re", format!("must be positive, got {}", self.re)));
        }
        if !(0.0..=MAX_STABILIZER_ALPHA).contains(&self.stabilizer_alpha) {
            return Err(config_err(
                "run.stabilizer_alpha",
                format!("must lie in [0, {MAX_STABILIZER_ALPHA}], got {}", self.stabilizer_alpha),
            ));
        }
        if !self.u_m.is_finite() {
            return Err(config_err("run.u_m", "must be finite"));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(config_err("run.perturbation", "must be non-negative"));
        }
        if self.transient_steps > self.n_steps {
            return Err(config_err("run.transient_steps", "exceeds run.n_steps"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Velocity in physical space.
    pub vel: VelocityField,
    /// Driving force per unit volume, i.e. minus the mean streamwise
    /// pressure gradient.
    pub dpdx: f64,
    pub t: f64,
    pub step: u64,
    pub nu: f64,
    /// Explicit right-hand side of the previous step (spectral), absent
    /// before the first step.
    pub prev_rhs: Option<VelocityField>,
    /// max |u| recorded at each finiteness check.
    pub max_u_history: Vec<f64>,
}

/// Exact discrete projection onto fields with zero divergence at every
/// grid point, orthogonal in the trapezoid-weighted inner product.
///
/// Velocity unknowns live on interior points; the constraint is imposed on
/// all points including the walls (one-sided `∂v/∂y` there). Per pencil the
/// normal matrix `D W⁻¹ Dᴴ` is real, banded (three sub-diagonals) and
/// positive definite, so it is Cholesky-factored once and cached.
#[derive(Debug, Clone)]
pub struct Projector {
    dims: Dims,
    weights: Vec<f64>,
    /// Entries of `∂/∂y` by row: `(column, coefficient)` over interior columns.
    rows: Vec<Vec<(usize, f64)>>,
    /// Same entries by interior column: `(row, coefficient)`.
    cols: Vec<Vec<(usize, f64)>>,
    kx: Vec<f64>,
    kz: Vec<f64>,
    factors: Vec<Option<BandCholesky>>,
}

const PROJECTION_BAND: usize = 3;

impl Projector {
    pub fn new(ops: &SpectralOps) -> Result<Self> {
        let grid = ops.grid();
        let d = ops.dims();
        let ny = d.ny;
        let weights = grid.trapezoid_weights();
        let mut rows = vec![Vec::new(); ny];
        let mut cols = vec![Vec::new(); ny];
        for (j, &(start, c)) in ops.stencils().first.iter().enumerate() {
            for (k, &coef) in c.iter().enumerate() {
                let col = start + k;
                if col == 0 || col == ny - 1 || coef == 0.0 {
                    continue;
                }
                rows[j].push((col, coef));
                cols[col].push((j, coef));
            }
        }
        // Coupling through `∂/∂y W⁻¹ ∂/∂yᵀ`, stored as band[i][i - j].
        let mut band = vec![[0.0; PROJECTION_BAND + 1]; ny];
        for (m, entries) in cols.iter().enumerate() {
            for &(i, ci) in entries {
                for &(j, cj) in entries {
                    if j <= i {
                        let off = i - j;
                        if off > PROJECTION_BAND {
                            return Err(Error::Singular { context: "projection bandwidth" });
                        }
                        band[i][off] += ci * cj / weights[m];
                    }
                }
            }
        }
        let kx: Vec<f64> = (0..d.nkx()).map(|m| grid.kx_deriv(m)).collect();
        let kz: Vec<f64> = (0..d.nz).map(|n| grid.kz_deriv(n)).collect();
        let mut factors = Vec::with_capacity(d.nkx() * d.nz);
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                let k2 = kx[m] * kx[m] + kz[n] * kz[n];
                if k2 == 0.0 {
                    factors.push(None);
                    continue;
                }
                let f = BandCholesky::factor(ny, PROJECTION_BAND, |i, j| {
                    let mut a = if i - j <= PROJECTION_BAND { band[i][i - j] } else { 0.0 };
                    if i == j && i > 0 && i < ny - 1 {
                        a += k2 / weights[i];
                    }
                    a
                })?;
                factors.push(Some(f));
            }
        }
        Ok(Self { dims: d, weights, rows, cols, kx, kz, factors })
    }

    /// Projects a spectral velocity in place and returns the projection
    /// potential `φ` with `u_new = u - ∇φ` (spectral).
    pub fn project(&self, vel: &mut VelocityField) -> Result<ScalarField> {
        let d = self.dims;
        let ny = d.ny;
        let mut phi = vec![Complex64::default(); d.spectral_len()];
        let [u, v, w] = &mut vel.comps;
        let (u, v, w) = (u.spectral_mut()?, v.spectral_mut()?, w.spectral_mut()?);
        u.par_chunks_mut(ny)
            .zip(v.par_chunks_mut(ny))
            .zip(w.par_chunks_mut(ny))
            .zip(phi.par_chunks_mut(ny))
            .enumerate()
            .for_each(|(p, (((u, v), w), psi))| self.project_pencil(p, u, v, w, psi));
        ScalarField::from_spectral(d, phi)
    }

    fn project_pencil(
        &self,
        p: usize,
        u: &mut [Complex64],
        v: &mut [Complex64],
        w: &mut [Complex64],
        phi: &mut [Complex64],
    ) {
        let d = self.dims;
        let ny = d.ny;
        let (m, n) = (p / d.nz, p % d.nz);
        let zero = Complex64::default();
        if m == d.nx / 2 || n == d.nz / 2 {
            for a in [u, v, w] {
                a.fill(zero);
            }
            return;
        }
        let Some(chol) = &self.factors[p] else {
            // Mean pencil: continuity forces the mean wall-normal velocity to zero.
            v.fill(zero);
            return;
        };
        let ikx = Complex64::new(0.0, self.kx[m]);
        let ikz = Complex64::new(0.0, self.kz[n]);
        for j in 0..ny {
            let mut r = zero;
            for &(col, c) in &self.rows[j] {
                r += v[col] * c;
            }
            if j > 0 && j < ny - 1 {
                r += ikx * u[j] + ikz * w[j];
            }
            phi[j] = r;
        }
        chol.solve_in_place(phi);
        for j in 1..ny - 1 {
            let s = 1.0 / self.weights[j];
            u[j] += ikx * phi[j] * s;
            w[j] += ikz * phi[j] * s;
            let mut acc = zero;
            for &(row, c) in &self.cols[j] {
                acc += phi[row] * c;
            }
            v[j] -= acc * s;
        }
        for a in [u, v, w] {
            a[0] = zero;
            a[ny - 1] = zero;
        }
        // Rescale the multiplier to a pointwise potential.
        for (j, x) in phi.iter_mut().enumerate() {
            *x = -*x / self.weights[j];
        }
    }
}

/// Projects a provisional velocity (either representation) onto the
/// discretely divergence-free fields. Returns the spectral solenoidal
/// velocity and the spectral projection potential.
pub fn pressure_projection(
    ops: &SpectralOps,
    vel: &VelocityField,
) -> Result<(VelocityField, ScalarField)> {
    let projector = Projector::new(ops)?;
    let mut spec = ops.velocity_to_spectral(vel)?;
    let phi = projector.project(&mut spec)?;
    Ok((spec, phi))
}

/// Holds the bulk velocity fixed by adding a multiple of the discrete
/// Stokes response `g`, `(I - ½Δtν ∂²/∂y²) g = 1` with `g = 0` at the walls.
/// For small `Δtν` the correction is uniform away from a thin wall layer and
/// never disturbs no-slip.
#[derive(Debug, Clone)]
pub struct MassFluxController {
    shape: Vec<f64>,
    shape_bulk: f64,
    simpson: Vec<f64>,
    dt: f64,
}

impl MassFluxController {
    pub fn new(ops: &SpectralOps, nu: f64, dt: f64) -> Result<Self> {
        let grid = ops.grid();
        let st = ops.stencils();
        let ny = grid.ny();
        let a = 0.5 * dt * nu;
        let inner = ny - 2;
        let (mut lo, mut di, mut up) = (vec![0.0; inner], vec![0.0; inner], vec![0.0; inner]);
        for r in 0..inner {
            lo[r] = -a * st.second_lower[r + 1];
            di[r] = 1.0 - a * st.second_diag[r + 1];
            up[r] = -a * st.second_upper[r + 1];
        }
        let mut shape = vec![0.0; ny];
        shape[1..ny - 1].fill(1.0);
        solve_tridiagonal(&lo, &di, &up, &mut shape[1..ny - 1], &mut Vec::new())?;
        let simpson = grid.simpson_weights();
        let shape_bulk = bulk(&simpson, &shape);
        Ok(Self { shape, shape_bulk, simpson, dt })
    }

    pub fn shape(&self) -> &[f64] {
        &self.shape
    }

    /// Corrects a mean streamwise profile in place and returns the added
    /// amplitude `c` (the bulk velocity moves by exactly `U_m - bulk`).
    pub fn correct_profile(&self, mean_u: &mut [f64], u_m: f64) -> f64 {
        let c = (u_m - bulk(&self.simpson, mean_u)) / self.shape_bulk;
        for (u, g) in mean_u.iter_mut().zip(&self.shape) {
            *u += c * g;
        }
        c
    }

    /// Applies the correction to a physical-space state and updates the
    /// driving force by `c / Δt`. Returns `c`.
    pub fn apply(&self, state: &mut SolverState, u_m: f64) -> Result<f64> {
        let mut mean = state.vel.u().plane_mean()?;
        let c = self.correct_profile(&mut mean, u_m);
        let ny = self.shape.len();
        for pencil in state.vel.comps[0].physical_mut()?.chunks_exact_mut(ny) {
            for (x, g) in pencil.iter_mut().zip(&self.shape) {
                *x += c * g;
            }
        }
        state.dpdx += c / self.dt;
        Ok(c)
    }
}

fn bulk(simpson: &[f64], profile: &[f64]) -> f64 {
    0.5 * simpson.iter().zip(profile).map(|(w, f)| w * f).sum::<f64>()
}

/// Highest retained streamwise and spanwise mode numbers.
pub fn highest_modes(dims: Dims, dealias: bool) -> (usize, usize) {
    if dealias {
        (dims.nx / 3, dims.nz / 3)
    } else {
        (dims.nx / 2 - 1, dims.nz / 2 - 1)
    }
}

/// Multiplies the highest retained Fourier mode in x and in z by
/// `1 - alpha`; the corner mode receives both factors.
pub fn stabilizing_mode_filter(
    vel: &mut VelocityField,
    alpha: f64,
    dealias: bool,
) -> Result<()> {
    if !(0.0..=MAX_STABILIZER_ALPHA).contains(&alpha) {
        return Err(config_err("run.stabilizer_alpha", format!("{alpha} outside [0, 0.05]")));
    }
    if alpha == 0.0 {
        return Ok(());
    }
    let d = vel.dims();
    let (mt, nt) = highest_modes(d, dealias);
    let keep = 1.0 - alpha;
    for comp in vel.comps.iter_mut() {
        let data = comp.spectral_mut()?;
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                let mut f = 1.0;
                if m == mt {
                    f *= keep;
                }
                if n == nt || (nt > 0 && n == d.nz - nt) {
                    f *= keep;
                }
                if f != 1.0 {
                    let off = d.spectral_index(m, n, 0);
                    data[off..off + d.ny].iter_mut().for_each(|c| *c *= f);
                }
            }
        }
    }
    Ok(())
}

/// Volume-averaged kinetic energy `(1/2V) ∫ |u|²` with trapezoid weights.
pub fn kinetic_energy(grid: &ChannelGrid, vel: &VelocityField) -> Result<f64> {
    let w = grid.trapezoid_weights();
    let ny = grid.ny();
    let mut e = 0.0;
    for c in &vel.comps {
        for pencil in c.physical()?.chunks_exact(ny) {
            e += pencil.iter().zip(&w).map(|(x, w)| w * x * x).sum::<f64>();
        }
    }
    Ok(0.5 * e / (2.0 * (grid.nx() * grid.nz()) as f64))
}

/// max |∇·u| / max |u|.
pub fn relative_divergence(ops: &SpectralOps, vel: &VelocityField) -> Result<f64> {
    let scale = vel.max_abs();
    let div = ops.divergence(vel)?.max_abs();
    Ok(if scale > 0.0 { div / scale } else { div })
}

/// Parabolic Poiseuille profile `u = (3/2) U_m (1 - y²)` plus a projected
/// random perturbation whose rms is `amplitude · U_m`.
pub fn initial_condition(
    grid: Arc<ChannelGrid>,
    u_m: f64,
    amplitude: f64,
    seed: u64,
) -> Result<VelocityField> {
    let ops = SpectralOps::new(grid);
    let projector = Projector::new(&ops)?;
    initial_condition_with(&ops, &projector, u_m, amplitude, seed)
}

const IC_MAX_MODE: usize = 4;
const IC_WALL_MODES: usize = 4;

fn initial_condition_with(
    ops: &SpectralOps,
    projector: &Projector,
    u_m: f64,
    amplitude: f64,
    seed: u64,
) -> Result<VelocityField> {
    if !(amplitude >= 0.0) {
        return Err(config_err("run.perturbation", "must be non-negative"));
    }
    let grid = ops.grid();
    let d = ops.dims();
    let ny = d.ny;
    let base = ScalarField::from_fn(grid, |_, y, _| 1.5 * u_m * (1.0 - y * y));
    let mut vel = VelocityField::new(
        base,
        ScalarField::zeros_physical(d),
        ScalarField::zeros_physical(d),
    );
    if amplitude == 0.0 {
        return Ok(vel);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mt, nt) = highest_modes(d, true);
    let mmax = mt.min(IC_MAX_MODE).min(d.nx / 2 - 1);
    let nmax = nt.min(IC_MAX_MODE).min(d.nz / 2 - 1) as i64;
    let shapes: Vec<Vec<f64>> = (1..=IC_WALL_MODES)
        .map(|p| {
            grid.y
                .iter()
                .map(|y| (p as f64 * std::f64::consts::FRAC_PI_2 * (y + 1.0)).sin())
                .collect()
        })
        .collect();
    let mut pert = VelocityField::zeros_spectral(d);
    for comp in pert.comps.iter_mut() {
        let data = comp.spectral_mut()?;
        for m in 0..=mmax {
            for nn in -nmax..=nmax {
                if m == 0 && nn <= 0 {
                    continue;
                }
                let n = nn.rem_euclid(d.nz as i64) as usize;
                let off = d.spectral_index(m, n, 0);
                for (p, shape) in shapes.iter().enumerate() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    let a = Complex64::new(re, im) / (p + 1) as f64;
                    for j in 0..ny {
                        data[off + j] += a * shape[j];
                    }
                }
                if m == 0 {
                    let mirror = d.spectral_index(0, d.nz - n, 0);
                    for j in 0..ny {
                        data[mirror + j] = data[off + j].conj();
                    }
                }
            }
        }
    }
    projector.project(&mut pert)?;
    let mut pert = ops.velocity_to_physical(&pert)?;
    let rms = (2.0 * kinetic_energy(grid, &pert)? / 3.0).sqrt();
    if rms > 0.0 {
        let s = amplitude * u_m / rms;
        for (c, p) in vel.comps.iter_mut().zip(pert.comps.iter_mut()) {
            p.scale(s);
            c.axpy(1.0, p)?;
        }
    }
    Ok(vel)
}

/// Time integrator bound to one configuration.
#[derive(Debug)]
pub struct Solver {
    config: RunConfig,
    ops: SpectralOps,
    projector: Projector,
    controller: MassFluxController,
    delta: Vec<f64>,
    nu: f64,
}

impl Solver {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = Arc::new(ChannelGrid::new(config.grid)?);
        let ops = SpectralOps::new(grid.clone());
        let projector = Projector::new(&ops)?;
        let nu = config.nu();
        let controller = MassFluxController::new(&ops, nu, config.dt)?;
        let delta = filter_width_profile(&grid);
        Ok(Self { config, ops, projector, controller, delta, nu })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    pub fn grid(&self) -> &ChannelGrid {
        self.ops.grid()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn projector(&self) -> &Projector {
        &self.projector
    }

    pub fn controller(&self) -> &MassFluxController {
        &self.controller
    }

    /// Laminar driving force `3 U_m ν`, which makes the parabola steady.
    pub fn laminar_forcing(&self) -> f64 {
        if self.config.constant_flux {
            3.0 * self.config.u_m * self.nu
        } else {
            0.0
        }
    }

    pub fn initial_state(&self) -> Result<SolverState> {
        let vel = initial_condition_with(
            &self.ops,
            &self.projector,
            self.config.u_m,
            self.config.perturbation,
            self.config.seed,
        )?;
        Ok(self.state_from(vel))
    }

    /// Fresh state (no AB2 history) around a given physical velocity.
    pub fn state_from(&self, vel: VelocityField) -> SolverState {
        SolverState {
            vel,
            dpdx: self.laminar_forcing(),
            t: 0.0,
            step: 0,
            nu: self.nu,
            prev_rhs: None,
            max_u_history: Vec::new(),
        }
    }

    /// `-½[∇·(uu) + u·∇u]`, spectral.
    fn convection(&self, vel: &VelocityField, grad: &VelocityGradient) -> Result<VelocityField> {
        let ops = &self.ops;
        let d = ops.dims();
        let u: Vec<&[f64]> = vel.comps.iter().map(|c| c.physical()).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(3);
        for i in 0..3 {
            let g: Vec<&[f64]> =
                grad.comps[i].iter().map(|c| c.physical()).collect::<Result<_>>()?;
            let adv: Vec<f64> = (0..d.physical_len())
                .into_par_iter()
                .map(|p| u[0][p] * g[0][p] + u[1][p] * g[1][p] + u[2][p] * g[2][p])
                .collect();
            let mut total = ops.forward(&ScalarField::from_physical(d, adv)?)?;
            for l in 0..3 {
                let prod: Vec<f64> = u[i].par_iter().zip(u[l].par_iter()).map(|(a, b)| a * b).collect();
                let prod = ops.forward(&ScalarField::from_physical(d, prod)?)?;
                let flux = match l {
                    0 => ops.ddx(&prod)?,
                    1 => ops.ddy(&prod)?,
                    _ => ops.ddz(&prod)?,
                };
                total.axpy(1.0, &flux)?;
            }
            total.scale(-0.5);
            out.push(total);
        }
        let mut it = out.into_iter();
        Ok(VelocityField::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
    }

    /// Explicit right-hand side: convection plus model forcing, truncated.
    fn explicit_rhs(&self, spec: &VelocityField, phys: &VelocityField) -> Result<VelocityField> {
        let grad = self.ops.gradient_from_parts(spec, phys)?;
        let mut rhs = self.convection(phys, &grad)?;
        if let Some(tau) = model_stress_spectral(&self.ops, &self.config.sgs, &grad, &self.delta)? {
            let force = sgs_force_spectral(&self.ops, &tau)?;
            for (r, f) in rhs.comps.iter_mut().zip(&force.comps) {
                r.axpy(1.0, f)?;
            }
        }
        for r in rhs.comps.iter_mut() {
            let data = r.spectral_mut()?;
            if self.config.dealias {
                self.ops.dealias_in_place(data);
            }
            self.ops.zero_nyquist(data);
        }
        Ok(rhs)
    }

    /// Crank–Nicolson update of one component: interior rows, Dirichlet walls.
    fn viscous_solve(
        &self,
        field: &mut [Complex64],
        explicit: &[Complex64],
        mean_force: f64,
    ) -> Result<()> {
        let grid = self.ops.grid();
        let st = self.ops.stencils();
        let d = self.ops.dims();
        let ny = d.ny;
        let dt = self.config.dt;
        let a = 0.5 * dt * self.nu;
        field.par_chunks_mut(ny).zip(explicit.par_chunks(ny)).enumerate().try_for_each_init(
            || (vec![0.0; ny], vec![0.0; ny], vec![0.0; ny], vec![Complex64::default(); ny], Vec::new()),
            |(lo, di, up, rhs, scratch), (p, (u, e))| {
                let (m, n) = (p / d.nz, p % d.nz);
                let k2 = grid.kx[m].powi(2) + grid.kz[n].powi(2);
                let inner = ny - 2;
                for r in 0..inner {
                    let j = r + 1;
                    let (sl, sd, su) = (st.second_lower[j], st.second_diag[j], st.second_upper[j]);
                    let lap = u[j - 1] * sl + u[j] * (sd - k2) + u[j + 1] * su;
                    let mut b = u[j] + lap * a + e[j] * dt;
                    if p == 0 {
                        b += Complex64::new(mean_force * dt, 0.0);
                    }
                    rhs[r] = b;
                    lo[r] = -a * sl;
                    di[r] = 1.0 - a * (sd - k2);
                    up[r] = -a * su;
                }
                solve_tridiagonal(&lo[..inner], &di[..inner], &up[..inner], &mut rhs[..inner], scratch)?;
                u[0] = Complex64::default();
                u[ny - 1] = Complex64::default();
                u[1..ny - 1].copy_from_slice(&rhs[..inner]);
                Ok(())
            },
        )
    }

    /// Advances the state by one time step.
    pub fn step(&self, state: &mut SolverState) -> Result<()> {
        let ops = &self.ops;
        let cfg = &self.config;
        let spec = ops.velocity_to_spectral(&state.vel)?;
        let rhs = self.explicit_rhs(&spec, &state.vel)?;
        let explicit = match &state.prev_rhs {
            Some(prev) => {
                let mut e = rhs.clone();
                for (c, p) in e.comps.iter_mut().zip(&prev.comps) {
                    c.scale(1.5);
                    c.axpy(-0.5, p)?;
                }
                e
            }
            None => rhs.clone(),
        };

        let mut next = spec;
        for (i, (c, e)) in next.comps.iter_mut().zip(&explicit.comps).enumerate() {
            let force = if i == 0 { state.dpdx } else { 0.0 };
            self.viscous_solve(c.spectral_mut()?, e.spectral()?, force)?;
        }
        self.projector.project(&mut next)?;

        if cfg.constant_flux {
            let ny = ops.dims().ny;
            let mean = &mut next.comps[0].spectral_mut()?[..ny];
            let mut profile: Vec<f64> = mean.iter().map(|c| c.re).collect();
            let c = self.controller.correct_profile(&mut profile, cfg.u_m);
            for (z, p) in mean.iter_mut().zip(profile) {
                z.re = p;
            }
            state.dpdx += c / cfg.dt;
        }
        stabilizing_mode_filter(&mut next, cfg.stabilizer_alpha, cfg.dealias)?;

        let mut vel = ops.velocity_to_physical(&next)?;
        let ny = ops.dims().ny;
        for c in vel.comps.iter_mut() {
            for pencil in c.physical_mut()?.chunks_exact_mut(ny) {
                pencil[0] = 0.0;
                pencil[ny - 1] = 0.0;
            }
        }
        state.vel = vel;
        state.prev_rhs = Some(rhs);
        state.step += 1;
        state.t += cfg.dt;

        if state.step % GUARD_INTERVAL == 0 {
            self.guard(state)?;
        }
        Ok(())
    }

    /// Finiteness check; records max |u| and fails on NaN or Inf.
    pub fn guard(&self, state: &mut SolverState) -> Result<()> {
        let finite = state
            .vel
            .comps
            .iter()
            .all(|c| c.physical().map(|v| v.iter().all(|x| x.is_finite())).unwrap_or(false))
            && state.dpdx.is_finite();
        let peak = if finite { state.vel.max_abs() } else { f64::NAN };
        state.max_u_history.push(peak);
        if state.max_u_history.len() > GUARD_HISTORY {
            state.max_u_history.remove(0);
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged { step: state.step, history: state.max_u_history.clone() })
        }
    }

    pub fn advance(&self, state: &mut SolverState, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }

    /// Plane-averaged model shear stress of the current state.
    pub fn mean_model_shear(&self, state: &SolverState) -> Result<Vec<f64>> {
        let grad = self.ops.gradient_tensor(&state.vel)?;
        mean_model_shear(&self.ops, &self.config.sgs, &grad, &self.delta)
    }

    pub fn filter_width(&self) -> &[f64] {
        &self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgs::SgsModel;
    use std::f64::consts::PI;

    fn small_config() -> RunConfig {
        RunConfig {
            grid: GridConfig { lx: 2.0 * PI, lz: PI, nx: 16, ny: 17, nz: 12, stretch_beta: 2.2 },
            dt: 1e-3,
            n_steps: 10,
            transient_steps: 0,
            u_m: 1.0,
            re: 100.0,
            stabilizer_alpha: 0.0,
            seed: 11,
            perturbation: 0.1,
            sgs: SgsConfig::default(),
            checkpoint_every: 0,
            dealias: true,
            constant_flux: true,
        }
    }

    fn max_diff(a: &VelocityField, b: &VelocityField) -> f64 {
        a.comps
            .iter()
            .zip(&b.comps)
            .flat_map(|(x, y)| {
                x.physical().unwrap().iter().zip(y.physical().unwrap()).map(|(p, q)| (p - q).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.stabilizer_alpha = 0.06;
        assert!(matches!(c.validate(), Err(Error::Config { field: "run.stabilizer_alpha", .. })));
        let mut c = small_config();
        c.dt = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config { field: "run.dt", .. })));
        RunConfig::re180().validate().unwrap();
        RunConfig::re395().validate().unwrap();
    }

    #[test]
    fn unperturbed_start_is_exact_parabola() {
        let solver = Solver::new(RunConfig { perturbation: 0.0, u_m: 15.63, ..small_config() }).unwrap();
        let s = solver.initial_state().unwrap();
        let mean = s.vel.u().plane_mean().unwrap();
        assert!((solver.grid().bulk_average(&mean) - 15.63).abs() < 1e-12);
        assert_eq!(s.vel.v().max_abs(), 0.0);
    }

    #[test]
    fn perturbed_start_is_solenoidal_and_deterministic() {
        let solver = Solver::new(small_config()).unwrap();
        let a = solver.initial_state().unwrap();
        let b = solver.initial_state().unwrap();
        assert_eq!(a.vel, b.vel);
        assert!(solver.ops().divergence(&a.vel).unwrap().max_abs() < 1e-8);
        assert!(a.vel.v().max_abs() > 1e-3);
        let d = a.vel.dims();
        for c in &a.vel.comps {
            for pencil in c.physical().unwrap().chunks_exact(d.ny) {
                assert!(pencil[0].abs() < 1e-12 && pencil[d.ny - 1].abs() < 1e-12);
            }
        }
        let other = Solver::new(RunConfig { seed: 12, ..small_config() }).unwrap();
        assert_ne!(other.initial_state().unwrap().vel, a.vel);
    }

    #[test]
    fn laminar_parabola_is_steady() {
        let solver = Solver::new(RunConfig { perturbation: 0.0, ..small_config() }).unwrap();
        let mut s = solver.initial_state().unwrap();
        let start = s.vel.clone();
        solver.step(&mut s).unwrap();
        assert!(max_diff(&s.vel, &start) < 1e-10);
        assert!((s.dpdx - 0.03).abs() < 1e-10);
    }

    #[test]
    fn projection_is_idempotent_and_kills_gradients() {
        let solver = Solver::new(small_config()).unwrap();
        let ops = solver.ops();
        let s = solver.initial_state().unwrap();
        let (once, _) = pressure_projection(ops, &s.vel).unwrap();
        let back = ops.velocity_to_physical(&once).unwrap();
        assert!(max_diff(&back, &s.vel) < 1e-10);

        // Discrete gradient of a potential vanishing near the walls.
        let phi = ScalarField::from_fn(ops.grid(), |x, y, z| {
            (1.0 - y * y).powi(3) * (x.sin() * (2.0 * z).cos() + 0.3 * (2.0 * x + z).cos())
        });
        let ph = ops.forward(&phi).unwrap();
        let grad = VelocityField::new(
            ops.inverse(&ops.ddx(&ph).unwrap()).unwrap(),
            ops.ddy(&phi).unwrap(),
            ops.inverse(&ops.ddz(&ph).unwrap()).unwrap(),
        );
        let (out, _) = pressure_projection(ops, &grad).unwrap();
        let out = ops.velocity_to_physical(&out).unwrap();
        // φ vanishes at the walls, so the interior difference gradient lies
        // exactly in the range the projector removes.
        assert!(out.max_abs() < 1e-8 * grad.max_abs(), "{}", out.max_abs());
    }

    #[test]
    fn projection_removes_divergence_of_random_input() {
        use rand::Rng;
        let solver = Solver::new(small_config()).unwrap();
        let ops = solver.ops();
        let d = ops.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut comp = || {
            let mut v: Vec<f64> = (0..d.physical_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            for pencil in v.chunks_exact_mut(d.ny) {
                pencil[0] = 0.0;
                pencil[d.ny - 1] = 0.0;
            }
            ScalarField::from_physical(d, v).unwrap()
        };
        let vel = VelocityField::new(comp(), comp(), comp());
        let before = ops.divergence(&vel).unwrap().max_abs();
        let (out, _) = pressure_projection(ops, &vel).unwrap();
        let after = ops.divergence(&out).unwrap().max_abs();
        assert!(after < 1e-6 * before, "{before} -> {after}");
    }

    #[test]
    fn projection_potential_is_a_discrete_gradient() {
        let solver = Solver::new(small_config()).unwrap();
        let ops = solver.ops();
        let mut s = solver.initial_state().unwrap();
        // Add an irrotational component to a solenoidal field.
        let phi = ScalarField::from_fn(ops.grid(), |x, y, z| (1.0 - y * y).powi(2) * (x + 2.0 * z).sin());
        let ph = ops.forward(&phi).unwrap();
        s.vel.comps[0].axpy(1.0, &ops.inverse(&ops.ddx(&ph).unwrap()).unwrap()).unwrap();
        s.vel.comps[2].axpy(1.0, &ops.inverse(&ops.ddz(&ph).unwrap()).unwrap()).unwrap();
        let (out, pot) = pressure_projection(ops, &s.vel).unwrap();
        // Interior streamwise correction equals -∂φ/∂x of the potential.
        let inp = ops.velocity_to_spectral(&s.vel).unwrap();
        let dpx = ops.ddx(&pot).unwrap();
        let d = ops.dims();
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                for j in 1..d.ny - 1 {
                    let p = d.spectral_index(m, n, j);
                    let corr = out.comps[0].spectral().unwrap()[p] - inp.comps[0].spectral().unwrap()[p];
                    if m == d.nx / 2 || n == d.nz / 2 {
                        continue;
                    }
                    assert!((corr + dpx.spectral().unwrap()[p]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn controller_hits_target_exactly() {
        for target in [15.63, 17.54] {
            let solver = Solver::new(RunConfig { perturbation: 0.0, u_m: target, ..small_config() }).unwrap();
            let mut s = solver.initial_state().unwrap();
            let mean = s.vel.u().plane_mean().unwrap();
            let b = solver.grid().bulk_average(&mean);
            s.vel.comps[0].scale(15.0 / b);
            let before = s.dpdx;
            let c = solver.controller().apply(&mut s, target).unwrap();
            let after = solver.grid().bulk_average(&s.vel.u().plane_mean().unwrap());
            assert!((after - target).abs() < 1e-12, "{after}");
            assert!((s.dpdx - before - c / solver.config().dt).abs() < 1e-9);
            // No-slip survives the correction.
            let ny = s.vel.dims().ny;
            assert!(s.vel.u().physical().unwrap().chunks(ny).all(|p| p[0] == 0.0 && p[ny - 1] == 0.0));
            // A second application is a no-op.
            let c2 = solver.controller().apply(&mut s, target).unwrap();
            assert!(c2.abs() < 1e-12);
        }
    }

    #[test]
    fn mode_filter_touches_only_top_modes() {
        let solver = Solver::new(small_config()).unwrap();
        let d = solver.ops().dims();
        let (mt, nt) = highest_modes(d, true);
        let mut v = VelocityField::zeros_spectral(d);
        let top = d.spectral_index(mt, 0, 3);
        let low = d.spectral_index(1, 1, 3);
        let span = d.spectral_index(0, d.nz - nt, 3);
        for c in v.comps.iter_mut() {
            let s = c.spectral_mut().unwrap();
            s[top] = Complex64::new(1.0, 0.5);
            s[low] = Complex64::new(0.3, -0.2);
            s[span] = Complex64::new(2.0, 0.0);
        }
        let orig = v.clone();
        stabilizing_mode_filter(&mut v, 0.0, true).unwrap();
        assert_eq!(v, orig);
        stabilizing_mode_filter(&mut v, 0.05, true).unwrap();
        for (c, o) in v.comps.iter().zip(&orig.comps) {
            let (s, so) = (c.spectral().unwrap(), o.spectral().unwrap());
            assert_eq!(s[top], so[top] * 0.95);
            assert_eq!(s[span], so[span] * 0.95);
            assert_eq!(s[low], so[low]);
        }
        assert!(stabilizing_mode_filter(&mut v, 0.1, true).is_err());
    }

    #[test]
    fn step_keeps_divergence_small() {
        let solver = Solver::new(RunConfig {
            perturbation: 0.3,
            sgs: SgsConfig { model: SgsModel::Rles, ..Default::default() },
            stabilizer_alpha: 0.02,
            ..small_config()
        })
        .unwrap();
        let mut s = solver.initial_state().unwrap();
        for _ in 0..5 {
            solver.step(&mut s).unwrap();
            assert!(relative_divergence(solver.ops(), &s.vel).unwrap() < 1e-8);
            let b = solver.grid().bulk_average(&s.vel.u().plane_mean().unwrap());
            assert!((b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_is_deterministic() {
        let solver = Solver::new(RunConfig {
            sgs: SgsConfig { model: SgsModel::Smagorinsky, ..Default::default() },
            ..small_config()
        })
        .unwrap();
        let mut a = solver.initial_state().unwrap();
        solver.advance(&mut a, 2).unwrap();
        let mut b = a.clone();
        solver.step(&mut a).unwrap();
        solver.step(&mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let solver = Solver::new(small_config()).unwrap();
        let mut s = solver.initial_state().unwrap();
        s.vel.comps[1].physical_mut().unwrap()[40] = f64::NAN;
        s.step = GUARD_INTERVAL - 1;
        match solver.step(&mut s) {
            Err(Error::Diverged { step, history }) => {
                assert_eq!(step, GUARD_INTERVAL);
                assert!(history.last().unwrap().is_nan());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
