//! Field containers and the differential operators acting on them.
//!
//! Physical arrays are indexed `(ix, iz, iy)` with `iy` fastest; spectral
//! arrays are indexed `(m, n, iy)` where `m ∈ 0..=nx/2` is the streamwise
//! mode of the real-to-complex layout and `n` the spanwise FFT slot.
//! Spectral coefficients are normalised so that mode `(0, 0)` holds the plane
//! mean.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::ChannelGrid;
use crate::linalg::PencilScalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn of(grid: &ChannelGrid) -> Self {
        Dims { nx: grid.nx(), ny: grid.ny(), nz: grid.nz() }
    }
    pub fn nkx(&self) -> usize {
        self.nx / 2 + 1
    }
    pub fn physical_len(&self) -> usize {
        self.nx * self.ny * self.nz
    }
    pub fn spectral_len(&self) -> usize {
        self.nkx() * self.ny * self.nz
    }
    #[inline]
    pub fn physical_index(&self, ix: usize, iz: usize, iy: usize) -> usize {
        (ix * self.nz + iz) * self.ny + iy
    }
    #[inline]
    pub fn spectral_index(&self, m: usize, n: usize, iy: usize) -> usize {
        (m * self.nz + n) * self.ny + iy
    }
    fn tuple(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Physical(Vec<f64>),
    Spectral(Vec<Complex64>),
}

/// A scalar on the channel grid, either in physical space or Fourier space
/// in the two periodic directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dims: Dims,
    data: FieldData,
}

impl ScalarField {
    pub fn zeros_physical(dims: Dims) -> Self {
        Self { dims, data: FieldData::Physical(vec![0.0; dims.physical_len()]) }
    }

    pub fn zeros_spectral(dims: Dims) -> Self {
        Self { dims, data: FieldData::Spectral(vec![Complex64::default(); dims.spectral_len()]) }
    }

    pub fn from_physical(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.physical_len() {
            return Err(Error::Shape { expected: dims.tuple(), found: (values.len(), 0, 0) });
        }
        Ok(Self { dims, data: FieldData::Physical(values) })
    }

    pub fn from_spectral(dims: Dims, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != dims.spectral_len() {
            return Err(Error::Shape { expected: dims.tuple(), found: (values.len(), 0, 0) });
        }
        Ok(Self { dims, data: FieldData::Spectral(values) })
    }

    /// Samples `f(x, y, z)` at the collocation points.
    pub fn from_fn(grid: &ChannelGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let dims = Dims::of(grid);
        let (dx, dz) = (grid.dx(), grid.dz());
        let mut v = vec![0.0; dims.physical_len()];
        for ix in 0..dims.nx {
            for iz in 0..dims.nz {
                for iy in 0..dims.ny {
                    v[dims.physical_index(ix, iz, iy)] =
                        f(ix as f64 * dx, grid.y[iy], iz as f64 * dz);
                }
            }
        }
        Self { dims, data: FieldData::Physical(v) }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.data, FieldData::Spectral(_))
    }

    pub fn repr_name(&self) -> &'static str {
        match self.data {
            FieldData::Physical(_) => "physical",
            FieldData::Spectral(_) => "spectral",
        }
    }

    pub fn data(&self) -> &FieldData {
        &self.data
    }

    pub fn physical(&self) -> Result<&[f64]> {
        match &self.data {
            FieldData::Physical(v) => Ok(v),
            FieldData::Spectral(_) => {
                Err(Error::Representation { expected: "physical", found: "spectral" })
            }
        }
    }

    pub fn physical_mut(&mut self) -> Result<&mut [f64]> {
        match &mut self.data {
            FieldData::Physical(v) => Ok(v),
            FieldData::Spectral(_) => {
                Err(Error::Representation { expected: "physical", found: "spectral" })
            }
        }
    }

    pub fn spectral(&self) -> Result<&[Complex64]> {
        match &self.data {
            FieldData::Spectral(v) => Ok(v),
            FieldData::Physical(_) => {
                Err(Error::Representation { expected: "spectral", found: "physical" })
            }
        }
    }

    pub fn spectral_mut(&mut self) -> Result<&mut [Complex64]> {
        match &mut self.data {
            FieldData::Spectral(v) => Ok(v),
            FieldData::Physical(_) => {
                Err(Error::Representation { expected: "spectral", found: "physical" })
            }
        }
    }

    pub fn into_physical(self) -> Result<Vec<f64>> {
        match self.data {
            FieldData::Physical(v) => Ok(v),
            FieldData::Spectral(_) => {
                Err(Error::Representation { expected: "physical", found: "spectral" })
            }
        }
    }

    pub fn check_dims(&self, dims: Dims) -> Result<()> {
        if self.dims != dims {
            return Err(Error::Shape { expected: dims.tuple(), found: self.dims.tuple() });
        }
        Ok(())
    }

    /// Largest absolute value (physical) or coefficient modulus (spectral).
    pub fn max_abs(&self) -> f64 {
        match &self.data {
            FieldData::Physical(v) => v.iter().fold(0.0, |a, x| a.max(x.abs())),
            FieldData::Spectral(v) => v.iter().fold(0.0, |a, x| a.max(x.norm())),
        }
    }

    /// Average over each `(x, z)` plane of a physical field.
    pub fn plane_mean(&self) -> Result<Vec<f64>> {
        let v = self.physical()?;
        let d = self.dims;
        let mut out = vec![0.0; d.ny];
        for pencil in v.chunks_exact(d.ny) {
            for (o, x) in out.iter_mut().zip(pencil) {
                *o += x;
            }
        }
        let inv = 1.0 / (d.nx * d.nz) as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(out)
    }

    pub fn scale(&mut self, a: f64) {
        match &mut self.data {
            FieldData::Physical(v) => v.iter_mut().for_each(|x| *x *= a),
            FieldData::Spectral(v) => v.iter_mut().for_each(|x| *x *= a),
        }
    }

    /// `self += a * other`; both fields must share a representation.
    pub fn axpy(&mut self, a: f64, other: &ScalarField) -> Result<()> {
        other.check_dims(self.dims)?;
        match (&mut self.data, &other.data) {
            (FieldData::Physical(x), FieldData::Physical(y)) => {
                x.iter_mut().zip(y).for_each(|(x, y)| *x += a * y)
            }
            (FieldData::Spectral(x), FieldData::Spectral(y)) => {
                x.iter_mut().zip(y).for_each(|(x, y)| *x += y * a)
            }
            _ => {
                return Err(Error::Representation {
                    expected: self.repr_name(),
                    found: other.repr_name(),
                })
            }
        }
        Ok(())
    }
}

/// Velocity components `(u, v, w)`: streamwise, wall-normal, spanwise.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub comps: [ScalarField; 3],
}

impl VelocityField {
    pub fn new(u: ScalarField, v: ScalarField, w: ScalarField) -> Self {
        Self { comps: [u, v, w] }
    }
    pub fn zeros_physical(dims: Dims) -> Self {
        Self { comps: std::array::from_fn(|_| ScalarField::zeros_physical(dims)) }
    }
    pub fn zeros_spectral(dims: Dims) -> Self {
        Self { comps: std::array::from_fn(|_| ScalarField::zeros_spectral(dims)) }
    }
    pub fn u(&self) -> &ScalarField {
        &self.comps[0]
    }
    pub fn v(&self) -> &ScalarField {
        &self.comps[1]
    }
    pub fn w(&self) -> &ScalarField {
        &self.comps[2]
    }
    pub fn dims(&self) -> Dims {
        self.comps[0].dims()
    }
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }
}

/// Symmetric rank-2 tensor stored as its six independent components in the
/// order `11, 12, 13, 22, 23, 33`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensorField {
    pub comps: [ScalarField; 6],
}

/// `(i, j)` pairs in storage order.
pub const TENSOR_SLOTS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl SymmetricTensorField {
    pub fn zeros_physical(dims: Dims) -> Self {
        Self { comps: std::array::from_fn(|_| ScalarField::zeros_physical(dims)) }
    }

    #[inline]
    pub fn slot(i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        match (a, b) {
            (0, 0) => 0,
            (0, 1) => 1,
            (0, 2) => 2,
            (1, 1) => 3,
            (1, 2) => 4,
            (2, 2) => 5,
            _ => panic!("tensor index ({i}, {j}) out of range"),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &ScalarField {
        &self.comps[Self::slot(i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut ScalarField {
        &mut self.comps[Self::slot(i, j)]
    }

    pub fn dims(&self) -> Dims {
        self.comps[0].dims()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(ScalarField::max_abs).fold(0.0, f64::max)
    }
}

/// `comps[i][l] = ∂u_i/∂x_l` in physical space.
#[derive(Debug, Clone)]
pub struct VelocityGradient {
    pub comps: [[ScalarField; 3]; 3],
}

impl VelocityGradient {
    pub fn dims(&self) -> Dims {
        self.comps[0][0].dims()
    }
}

/// Wall-normal finite-difference stencils on the stretched grid.
///
/// First derivatives use `(f[j+1] - f[j-1]) / (y[j+1] - y[j-1])` in the
/// interior and three-point one-sided Lagrange formulas at the walls. The
/// second derivative is the compact three-point formula, exact for
/// quadratics.
#[derive(Debug, Clone)]
pub struct WallNormalStencils {
    /// `(first column, coefficients)` of each first-derivative row.
    pub first: Vec<(usize, [f64; 3])>,
    /// Sub-, main and super-diagonal of the second derivative (interior rows;
    /// wall rows are zero).
    pub second_lower: Vec<f64>,
    pub second_diag: Vec<f64>,
    pub second_upper: Vec<f64>,
}

impl WallNormalStencils {
    pub fn new(y: &[f64]) -> Self {
        let n = y.len();
        let mut first = Vec::with_capacity(n);
        first.push((0, one_sided(y[0], y[1], y[2])));
        for j in 1..n - 1 {
            let s = 1.0 / (y[j + 1] - y[j - 1]);
            first.push((j - 1, [-s, 0.0, s]));
        }
        let top = one_sided(y[n - 1], y[n - 2], y[n - 3]);
        first.push((n - 3, [top[2], top[1], top[0]]));

        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for j in 1..n - 1 {
            let hm = y[j] - y[j - 1];
            let hp = y[j + 1] - y[j];
            lo[j] = 2.0 / (hm * (hm + hp));
            up[j] = 2.0 / (hp * (hm + hp));
            di[j] = -(lo[j] + up[j]);
        }
        Self { first, second_lower: lo, second_diag: di, second_upper: up }
    }

    pub fn first_derivative<T: PencilScalar + std::ops::Add<Output = T>>(
        &self,
        f: &[T],
        out: &mut [T],
    ) {
        for (o, (start, c)) in out.iter_mut().zip(&self.first) {
            *o = f[*start] * c[0] + f[start + 1] * c[1] + f[start + 2] * c[2];
        }
    }

    pub fn second_derivative<T: PencilScalar + std::ops::Add<Output = T>>(
        &self,
        f: &[T],
        out: &mut [T],
    ) {
        let n = f.len();
        out[0] = T::default();
        out[n - 1] = T::default();
        for j in 1..n - 1 {
            out[j] = f[j - 1] * self.second_lower[j]
                + f[j] * self.second_diag[j]
                + f[j + 1] * self.second_upper[j];
        }
    }
}

/// Derivative at `x0` of the quadratic through `(x0, x1, x2)`, as weights on
/// the three samples.
pub(crate) fn one_sided(x0: f64, x1: f64, x2: f64) -> [f64; 3] {
    let h1 = x1 - x0;
    let h2 = x2 - x0;
    [
        -(h1 + h2) / (h1 * h2),
        h2 / (h1 * (h2 - h1)),
        -h1 / (h2 * (h2 - h1)),
    ]
}

/// Transforms and derivative operators bound to one grid.
pub struct SpectralOps {
    grid: Arc<ChannelGrid>,
    dims: Dims,
    stencils: WallNormalStencils,
    x_fwd: Arc<dyn Fft<f64>>,
    x_inv: Arc<dyn Fft<f64>>,
    z_fwd: Arc<dyn Fft<f64>>,
    z_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralOps {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralOps").field("dims", &self.dims).finish()
    }
}

const FFT_LINES_PER_TASK: usize = 64;

impl SpectralOps {
    pub fn new(grid: Arc<ChannelGrid>) -> Self {
        let dims = Dims::of(&grid);
        let mut planner = FftPlanner::new();
        let stencils = WallNormalStencils::new(&grid.y);
        Self {
            x_fwd: planner.plan_fft_forward(dims.nx),
            x_inv: planner.plan_fft_inverse(dims.nx),
            z_fwd: planner.plan_fft_forward(dims.nz),
            z_inv: planner.plan_fft_inverse(dims.nz),
            grid,
            dims,
            stencils,
        }
    }

    pub fn grid(&self) -> &ChannelGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<ChannelGrid> {
        self.grid.clone()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn stencils(&self) -> &WallNormalStencils {
        &self.stencils
    }

    fn run_batched(plan: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let len = plan.len();
        buf.par_chunks_mut(len * FFT_LINES_PER_TASK).for_each(|chunk| plan.process(chunk));
    }

    /// Physical → spectral. Fails on a spectral input.
    pub fn forward(&self, field: &ScalarField) -> Result<ScalarField> {
        field.check_dims(self.dims)?;
        let data = field.physical()?;
        Ok(ScalarField { dims: self.dims, data: FieldData::Spectral(self.forward_raw(data)) })
    }

    pub(crate) fn forward_raw(&self, data: &[f64]) -> Vec<Complex64> {
        let Dims { nx, ny, nz } = self.dims;
        let nkx = self.dims.nkx();
        let lines = nz * ny;

        let mut xbuf = vec![Complex64::default(); lines * nx];
        for ix in 0..nx {
            let plane = &data[ix * lines..(ix + 1) * lines];
            for (l, &val) in plane.iter().enumerate() {
                xbuf[l * nx + ix] = Complex64::new(val, 0.0);
            }
        }
        Self::run_batched(&self.x_fwd, &mut xbuf);

        let mut zbuf = vec![Complex64::default(); nkx * ny * nz];
        for iz in 0..nz {
            for iy in 0..ny {
                let line = &xbuf[(iz * ny + iy) * nx..][..nkx];
                for (m, &c) in line.iter().enumerate() {
                    zbuf[(m * ny + iy) * nz + iz] = c;
                }
            }
        }
        Self::run_batched(&self.z_fwd, &mut zbuf);

        let scale = 1.0 / (nx * nz) as f64;
        let mut out = vec![Complex64::default(); nkx * nz * ny];
        for m in 0..nkx {
            for iy in 0..ny {
                let line = &zbuf[(m * ny + iy) * nz..][..nz];
                for (n, &c) in line.iter().enumerate() {
                    out[(m * nz + n) * ny + iy] = c * scale;
                }
            }
        }
        out
    }

    /// Spectral → physical. Fails on a physical input.
    pub fn inverse(&self, field: &ScalarField) -> Result<ScalarField> {
        field.check_dims(self.dims)?;
        let data = field.spectral()?;
        Ok(ScalarField { dims: self.dims, data: FieldData::Physical(self.inverse_raw(data)) })
    }

    pub(crate) fn inverse_raw(&self, data: &[Complex64]) -> Vec<f64> {
        let Dims { nx, ny, nz } = self.dims;
        let nkx = self.dims.nkx();

        let mut zbuf = vec![Complex64::default(); nkx * ny * nz];
        for m in 0..nkx {
            for n in 0..nz {
                let pencil = &data[(m * nz + n) * ny..][..ny];
                for (iy, &c) in pencil.iter().enumerate() {
                    zbuf[(m * ny + iy) * nz + n] = c;
                }
            }
        }
        Self::run_batched(&self.z_inv, &mut zbuf);

        let lines = nz * ny;
        let mut xbuf = vec![Complex64::default(); lines * nx];
        for m in 0..nkx {
            for iy in 0..ny {
                let line = &zbuf[(m * ny + iy) * nz..][..nz];
                for (iz, &c) in line.iter().enumerate() {
                    let base = (iz * ny + iy) * nx;
                    xbuf[base + m] = c;
                    if m > 0 && m < nx - m {
                        xbuf[base + nx - m] = c.conj();
                    }
                }
            }
        }
        Self::run_batched(&self.x_inv, &mut xbuf);

        let mut out = vec![0.0; nx * lines];
        for ix in 0..nx {
            let plane = &mut out[ix * lines..(ix + 1) * lines];
            for (l, o) in plane.iter_mut().enumerate() {
                *o = xbuf[l * nx + ix].re;
            }
        }
        out
    }

    pub fn to_spectral(&self, field: &ScalarField) -> Result<ScalarField> {
        if field.is_spectral() {
            field.check_dims(self.dims)?;
            Ok(field.clone())
        } else {
            self.forward(field)
        }
    }

    pub fn to_physical(&self, field: &ScalarField) -> Result<ScalarField> {
        if field.is_spectral() {
            self.inverse(field)
        } else {
            field.check_dims(self.dims)?;
            Ok(field.clone())
        }
    }

    pub fn velocity_to_spectral(&self, vel: &VelocityField) -> Result<VelocityField> {
        Ok(VelocityField {
            comps: [
                self.to_spectral(&vel.comps[0])?,
                self.to_spectral(&vel.comps[1])?,
                self.to_spectral(&vel.comps[2])?,
            ],
        })
    }

    pub fn velocity_to_physical(&self, vel: &VelocityField) -> Result<VelocityField> {
        Ok(VelocityField {
            comps: [
                self.to_physical(&vel.comps[0])?,
                self.to_physical(&vel.comps[1])?,
                self.to_physical(&vel.comps[2])?,
            ],
        })
    }

    /// ∂/∂x of a spectral field.
    pub fn ddx(&self, field: &ScalarField) -> Result<ScalarField> {
        let src = field.spectral()?;
        let d = self.dims;
        let mut out = vec![Complex64::default(); d.spectral_len()];
        for m in 0..d.nkx() {
            let ik = Complex64::new(0.0, self.grid.kx_deriv(m));
            let off = m * d.nz * d.ny;
            for (o, s) in out[off..off + d.nz * d.ny].iter_mut().zip(&src[off..]) {
                *o = ik * s;
            }
        }
        Ok(ScalarField { dims: d, data: FieldData::Spectral(out) })
    }

    /// ∂/∂z of a spectral field.
    pub fn ddz(&self, field: &ScalarField) -> Result<ScalarField> {
        let src = field.spectral()?;
        let d = self.dims;
        let mut out = vec![Complex64::default(); d.spectral_len()];
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                let ik = Complex64::new(0.0, self.grid.kz_deriv(n));
                let off = d.spectral_index(m, n, 0);
                for (o, s) in out[off..off + d.ny].iter_mut().zip(&src[off..off + d.ny]) {
                    *o = ik * s;
                }
            }
        }
        Ok(ScalarField { dims: d, data: FieldData::Spectral(out) })
    }

    /// ∂/∂y in either representation (the stencil acts pencil by pencil).
    pub fn ddy(&self, field: &ScalarField) -> Result<ScalarField> {
        field.check_dims(self.dims)?;
        let ny = self.dims.ny;
        let data = match &field.data {
            FieldData::Physical(v) => {
                let mut out = vec![0.0; v.len()];
                out.par_chunks_mut(ny).zip(v.par_chunks(ny)).for_each(|(o, f)| {
                    self.stencils.first_derivative(f, o);
                });
                FieldData::Physical(out)
            }
            FieldData::Spectral(v) => {
                let mut out = vec![Complex64::default(); v.len()];
                out.par_chunks_mut(ny).zip(v.par_chunks(ny)).for_each(|(o, f)| {
                    self.stencils.first_derivative(f, o);
                });
                FieldData::Spectral(out)
            }
        };
        Ok(ScalarField { dims: self.dims, data })
    }

    /// Full velocity gradient `∂u_i/∂x_l` in physical space. Periodic
    /// derivatives are spectral, wall-normal ones second-order differences.
    pub fn gradient_tensor(&self, vel: &VelocityField) -> Result<VelocityGradient> {
        let spec = self.velocity_to_spectral(vel)?;
        let phys = self.velocity_to_physical(vel)?;
        self.gradient_from_parts(&spec, &phys)
    }

    /// Gradient from a velocity already available in both representations.
    pub fn gradient_from_parts(
        &self,
        spec: &VelocityField,
        phys: &VelocityField,
    ) -> Result<VelocityGradient> {
        let mut rows: Vec<[ScalarField; 3]> = Vec::with_capacity(3);
        for (comp, p) in spec.comps.iter().zip(&phys.comps) {
            let dx = self.inverse(&self.ddx(comp)?)?;
            let dz = self.inverse(&self.ddz(comp)?)?;
            let dy = self.ddy(p)?;
            rows.push([dx, dy, dz]);
        }
        let mut it = rows.into_iter();
        Ok(VelocityGradient {
            comps: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
        })
    }

    /// `∂u/∂x + ∂v/∂y + ∂w/∂z` in physical space.
    pub fn divergence(&self, vel: &VelocityField) -> Result<ScalarField> {
        let spec = self.velocity_to_spectral(vel)?;
        let mut div = self.ddx(&spec.comps[0])?;
        div.axpy(1.0, &self.ddy(&spec.comps[1])?)?;
        div.axpy(1.0, &self.ddz(&spec.comps[2])?)?;
        self.inverse(&div)
    }

    /// Highest streamwise / spanwise mode kept by the 2/3 rule.
    pub fn dealias_cutoff(&self) -> (usize, usize) {
        (self.dims.nx / 3, self.dims.nz / 3)
    }

    /// 2/3-rule truncation: zeroes modes with `|m| > nx/3` or `|n| > nz/3`.
    pub fn dealias(&self, field: &ScalarField) -> Result<ScalarField> {
        if !field.is_spectral() {
            return Err(Error::Representation { expected: "spectral", found: "physical" });
        }
        let mut out = field.clone();
        self.dealias_in_place(out.spectral_mut()?);
        Ok(out)
    }

    pub(crate) fn dealias_in_place(&self, data: &mut [Complex64]) {
        let d = self.dims;
        let (mc, nc) = self.dealias_cutoff();
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                if m > mc || self.grid.kz_index(n).unsigned_abs() as usize > nc {
                    let off = d.spectral_index(m, n, 0);
                    data[off..off + d.ny].fill(Complex64::default());
                }
            }
        }
    }

    /// Zeroes the streamwise and spanwise Nyquist modes.
    pub(crate) fn zero_nyquist(&self, data: &mut [Complex64]) {
        let d = self.dims;
        for m in 0..d.nkx() {
            for n in 0..d.nz {
                if m == d.nx / 2 || n == d.nz / 2 {
                    let off = d.spectral_index(m, n, 0);
                    data[off..off + d.ny].fill(Complex64::default());
                }
            }
        }
    }

    /// Weight of spectral slot `m` in Parseval sums (modes `0 < m < nx/2`
    /// stand for themselves and their conjugates).
    pub fn parseval_weight(&self, m: usize) -> f64 {
        if m == 0 || m == self.dims.nx / 2 {
            1.0
        } else {
            2.0
        }
    }

    /// `Σ_modes |c|²` at one `y` level, i.e. the plane mean of `f²`.
    pub fn spectral_energy(&self, field: &ScalarField) -> Result<f64> {
        let data = field.spectral()?;
        let d = self.dims;
        let mut e = 0.0;
        for m in 0..d.nkx() {
            let w = self.parseval_weight(m);
            let off = m * d.nz * d.ny;
            e += w * data[off..off + d.nz * d.ny].iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        Ok(e / d.ny as f64)
    }
}
