//! A-priori model checks on a triply periodic box of side 2π.
//!
//! Synthetic solenoidal fields with a prescribed spectrum are filtered
//! exactly with the Gaussian filter; the resulting subfilter stress is
//! compared with the model stresses evaluated on the filtered field.
//! Box fields reuse the channel containers with `nx = ny = nz = n` and the
//! same `(ix, iz, iy)` layout.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::error::{config_err, Error, Result};
use crate::fields::{Dims, ScalarField, SymmetricTensorField, VelocityField, TENSOR_SLOTS};
use crate::filters::FilterParams;
use crate::sgs::{SgsModel, DEFAULT_CS};

pub const BOX_LENGTH: f64 = 2.0 * PI;
/// Default spectral slope of synthetic fields.
pub const DEFAULT_SLOPE: f64 = -5.0 / 3.0;
/// Wavenumber below which the synthetic spectrum is flat.
pub const PLATEAU_WAVENUMBER: f64 = 2.0;

const COMPONENT_NAMES: [&str; 6] = ["tau11", "tau12", "tau13", "tau22", "tau23", "tau33"];

struct Plans {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n) }
    }

    /// In-place 3D transform of an `n³` array; forward is scaled by `1/n³`.
    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        // Contiguous axis.
        plan.process(data);
        let mut line = vec![Complex64::default(); n];
        for stride in [n, n * n] {
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for off in 0..stride {
                    for (k, l) in line.iter_mut().enumerate() {
                        *l = data[base + off + k * stride];
                    }
                    plan.process(&mut line);
                    for (k, l) in line.iter().enumerate() {
                        data[base + off + k * stride] = *l;
                    }
                }
            }
        }
        if forward {
            let s = 1.0 / (n * n * n) as f64;
            data.iter_mut().for_each(|c| *c *= s);
        }
    }
}

/// Transforms on an `n³` periodic box and its 3/2-padded companion.
pub struct PeriodicBox {
    n: usize,
    base: Plans,
    padded: Plans,
}

impl std::fmt::Debug for PeriodicBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicBox").field("n", &self.n).finish()
    }
}

impl PeriodicBox {
    pub fn new(n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(config_err("n", format!("box size must be even and >= 8, got {n}")));
        }
        let mut planner = FftPlanner::new();
        let base = Plans::new(&mut planner, n);
        let padded = Plans::new(&mut planner, 3 * n / 2);
        Ok(Self { n, base, padded })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> Dims {
        Dims { nx: self.n, ny: self.n, nz: self.n }
    }

    pub fn spacing(&self) -> f64 {
        BOX_LENGTH / self.n as f64
    }

    /// Signed integer wavenumber of FFT slot `i` on an `n`-point axis.
    fn signed(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Wavenumber vector of flat spectral index `p`.
    pub fn wavevector(&self, p: usize) -> [f64; 3] {
        let n = self.n;
        let (ix, iz, iy) = (p / (n * n), (p / n) % n, p % n);
        [Self::signed(ix, n) as f64, Self::signed(iy, n) as f64, Self::signed(iz, n) as f64]
    }

    fn is_nyquist(&self, p: usize) -> bool {
        let n = self.n;
        let (ix, iz, iy) = (p / (n * n), (p / n) % n, p % n);
        ix == n / 2 || iy == n / 2 || iz == n / 2
    }

    pub fn forward(&self, f: &ScalarField) -> Result<Vec<Complex64>> {
        f.check_dims(self.dims())?;
        let mut data: Vec<Complex64> =
            f.physical()?.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.base.transform(&mut data, true);
        Ok(data)
    }

    pub fn inverse(&self, coef: &[Complex64]) -> ScalarField {
        let mut data = coef.to_vec();
        self.base.transform(&mut data, false);
        ScalarField::from_physical(self.dims(), data.iter().map(|c| c.re).collect())
            .expect("box length")
    }

    /// Copies coefficients onto the padded grid (Nyquist modes dropped).
    fn pad(&self, coef: &[Complex64]) -> Vec<Complex64> {
        let (n, m) = (self.n, self.padded.n);
        let mut out = vec![Complex64::default(); m * m * m];
        let map = |i: usize| -> usize {
            let s = Self::signed(i, n);
            s.rem_euclid(m as i64) as usize
        };
        for ix in 0..n {
            for iz in 0..n {
                for iy in 0..n {
                    if ix == n / 2 || iy == n / 2 || iz == n / 2 {
                        continue;
                    }
                    out[(map(ix) * m + map(iz)) * m + map(iy)] = coef[(ix * n + iz) * n + iy];
                }
            }
        }
        out
    }

    fn truncate(&self, padded: &[Complex64]) -> Vec<Complex64> {
        let (n, m) = (self.n, self.padded.n);
        let map = |i: usize| -> usize { Self::signed(i, n).rem_euclid(m as i64) as usize };
        let mut out = vec![Complex64::default(); n * n * n];
        for ix in 0..n {
            for iz in 0..n {
                for iy in 0..n {
                    if ix == n / 2 || iy == n / 2 || iz == n / 2 {
                        continue;
                    }
                    out[(ix * n + iz) * n + iy] = padded[(map(ix) * m + map(iz)) * m + map(iy)];
                }
            }
        }
        out
    }

    /// Physical values on the padded grid of a spectral field.
    fn padded_values(&self, coef: &[Complex64]) -> Vec<f64> {
        let mut p = self.pad(coef);
        self.padded.transform(&mut p, false);
        p.iter().map(|c| c.re).collect()
    }

    /// Spectral coefficients of a product of padded-grid values.
    fn product(&self, a: &[f64], b: &[f64]) -> Vec<Complex64> {
        let mut p: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| Complex64::new(x * y, 0.0)).collect();
        self.padded.transform(&mut p, true);
        self.truncate(&p)
    }

    /// Multiplies coefficients by the Gaussian transfer function.
    fn gaussian(&self, coef: &mut [Complex64], params: &FilterParams) {
        for (p, c) in coef.iter_mut().enumerate() {
            let k = self.wavevector(p);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            *c *= (-params.scaled_wavenumber(k2)).exp();
        }
    }

    pub fn gaussian_filter(&self, vel: &VelocityField, params: &FilterParams) -> Result<VelocityField> {
        let mut out = Vec::with_capacity(3);
        for c in &vel.comps {
            let mut h = self.forward(c)?;
            self.gaussian(&mut h, params);
            out.push(self.inverse(&h));
        }
        let mut it = out.into_iter();
        Ok(VelocityField::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
    }

    /// Spectral divergence, physical output.
    pub fn divergence(&self, vel: &VelocityField) -> Result<ScalarField> {
        let hats: Vec<Vec<Complex64>> = vel.comps.iter().map(|c| self.forward(c)).collect::<Result<_>>()?;
        let mut div = vec![Complex64::default(); hats[0].len()];
        for (p, d) in div.iter_mut().enumerate() {
            if self.is_nyquist(p) {
                continue;
            }
            let k = self.wavevector(p);
            *d = Complex64::i() * (k[0] * hats[0][p] + k[1] * hats[1][p] + k[2] * hats[2][p]);
        }
        Ok(self.inverse(&div))
    }

    /// Spectral derivative `∂/∂x_l` of coefficients (Nyquist zeroed).
    fn derivative(&self, coef: &[Complex64], l: usize) -> Vec<Complex64> {
        coef.iter()
            .enumerate()
            .map(|(p, c)| {
                if self.is_nyquist(p) {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, self.wavevector(p)[l]) * c
                }
            })
            .collect()
    }

    fn tensor_from_spectral(&self, comps: Vec<Vec<Complex64>>) -> SymmetricTensorField {
        let fields: Vec<ScalarField> = comps.iter().map(|c| self.inverse(c)).collect();
        SymmetricTensorField { comps: fields.try_into().expect("six components") }
    }
}

/// `sqrt(mean(u² + v² + w²) / 3)`.
pub fn rms(vel: &VelocityField) -> Result<f64> {
    let mut s = 0.0;
    let mut count = 0usize;
    for c in &vel.comps {
        let v = c.physical()?;
        s += v.iter().map(|x| x * x).sum::<f64>();
        count += v.len();
    }
    Ok((s / count as f64).sqrt())
}

/// Random solenoidal field with `E(k) ∝ k^slope` for `2 ≤ k ≤ n/3`, flat
/// below, zero above, normalised to unit rms.
pub fn synthesize_field(n: usize, slope: f64, seed: u64) -> Result<VelocityField> {
    if n < 16 || !n.is_power_of_two() {
        return Err(config_err("n", format!("must be a power of two >= 16, got {n}")));
    }
    if !slope.is_finite() {
        return Err(config_err("slope", "must be finite"));
    }
    let bx = PeriodicBox::new(n)?;
    let len = n * n * n;
    let cutoff = n as f64 / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hats = vec![vec![Complex64::default(); len]; 3];
    for p in 0..len {
        // Draw for every slot so the stream does not depend on the mask.
        let mut a = [Complex64::default(); 3];
        for c in a.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *c = Complex64::new(re, im);
        }
        let k = bx.wavevector(p);
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        let kmag = k2.sqrt();
        if k2 == 0.0 || kmag > cutoff || bx.is_nyquist(p) {
            continue;
        }
        let energy = kmag.max(PLATEAU_WAVENUMBER).powf(slope);
        let amp = (energy / (4.0 * PI * k2)).sqrt();
        let kdota = (a[0] * k[0] + a[1] * k[1] + a[2] * k[2]) / k2;
        for i in 0..3 {
            hats[i][p] = (a[i] - kdota * k[i]) * amp;
        }
    }
    // The real part of the inverse keeps the Hermitian half of each
    // coefficient pair, which is still divergence-free.
    let mut comps: Vec<ScalarField> = hats.iter().map(|h| bx.inverse(h)).collect();
    let vel = VelocityField::new(comps[0].clone(), comps[1].clone(), comps[2].clone());
    let r = rms(&vel)?;
    if r == 0.0 {
        return Err(config_err("n", "spectrum is empty"));
    }
    comps.iter_mut().for_each(|c| c.scale(1.0 / r));
    let mut it = comps.into_iter();
    Ok(VelocityField::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
}

/// `τ_ij = G(u_i u_j) - G(u_i) G(u_j)` with exact spectral Gaussian
/// filtering and 3/2-padded products.
pub fn exact_subfilter_stress(
    bx: &PeriodicBox,
    vel: &VelocityField,
    params: &FilterParams,
) -> Result<SymmetricTensorField> {
    let hats: Vec<Vec<Complex64>> = vel.comps.iter().map(|c| bx.forward(c)).collect::<Result<_>>()?;
    let raw: Vec<Vec<f64>> = hats.iter().map(|h| bx.padded_values(h)).collect();
    let filtered: Vec<Vec<f64>> = hats
        .iter()
        .map(|h| {
            let mut g = h.clone();
            bx.gaussian(&mut g, params);
            bx.padded_values(&g)
        })
        .collect();
    let mut comps = Vec::with_capacity(6);
    for &(i, j) in &TENSOR_SLOTS {
        let mut full = bx.product(&raw[i], &raw[j]);
        bx.gaussian(&mut full, params);
        let resolved = bx.product(&filtered[i], &filtered[j]);
        comps.push(full.iter().zip(&resolved).map(|(a, b)| a - b).collect());
    }
    Ok(bx.tensor_from_spectral(comps))
}

/// Model stress evaluated on an (already filtered) box velocity.
pub fn box_model_stress(
    bx: &PeriodicBox,
    filtered: &VelocityField,
    model: SgsModel,
    params: &FilterParams,
    cs: f64,
) -> Result<SymmetricTensorField> {
    let dims = bx.dims();
    if model == SgsModel::None {
        return Ok(SymmetricTensorField::zeros_physical(dims));
    }
    let hats: Vec<Vec<Complex64>> =
        filtered.comps.iter().map(|c| bx.forward(c)).collect::<Result<_>>()?;
    // grad[i][l] = ∂u_i/∂x_l
    let grad: Vec<Vec<Vec<Complex64>>> =
        hats.iter().map(|h| (0..3).map(|l| bx.derivative(h, l)).collect()).collect();
    let c = params.delta * params.delta / (2.0 * params.gamma);
    match model {
        SgsModel::Gradient | SgsModel::Rles => {
            let padded: Vec<Vec<Vec<f64>>> = grad
                .iter()
                .map(|row| row.iter().map(|g| bx.padded_values(g)).collect())
                .collect();
            let mut comps = Vec::with_capacity(6);
            for &(i, j) in &TENSOR_SLOTS {
                let mut acc = vec![Complex64::default(); hats[0].len()];
                for l in 0..3 {
                    for (a, b) in acc.iter_mut().zip(bx.product(&padded[i][l], &padded[j][l])) {
                        *a += b * c;
                    }
                }
                if model == SgsModel::Rles {
                    for (p, a) in acc.iter_mut().enumerate() {
                        let k = bx.wavevector(p);
                        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                        *a /= 1.0 + params.scaled_wavenumber(k2);
                    }
                }
                comps.push(acc);
            }
            Ok(bx.tensor_from_spectral(comps))
        }
        SgsModel::Smagorinsky => {
            let g: Vec<Vec<ScalarField>> = grad
                .iter()
                .map(|row| row.iter().map(|h| bx.inverse(h)).collect())
                .collect();
            let g: Vec<Vec<&[f64]>> = g
                .iter()
                .map(|row| row.iter().map(|f| f.physical()).collect::<Result<_>>())
                .collect::<Result<_>>()?;
            let len = dims.physical_len();
            let strain = |i: usize, j: usize, p: usize| 0.5 * (g[i][j][p] + g[j][i][p]);
            let mut tau = SymmetricTensorField::zeros_physical(dims);
            let l2 = (cs * params.delta).powi(2);
            for p in 0..len {
                let mut ss = 0.0;
                for &(i, j) in &TENSOR_SLOTS {
                    let w = if i == j { 1.0 } else { 2.0 };
                    ss += w * strain(i, j, p).powi(2);
                }
                let mag = (2.0 * ss).sqrt();
                for (slot, &(i, j)) in TENSOR_SLOTS.iter().enumerate() {
                    tau.comps[slot].physical_mut()?[p] = -l2 * mag * strain(i, j, p);
                }
            }
            Ok(tau)
        }
        SgsModel::None => unreachable!(),
    }
}

/// Tensor norm `sqrt(Σ_ij ∫ τ_ij²)` as a grid mean (off-diagonal slots
/// counted twice).
pub fn tensor_norm(t: &SymmetricTensorField) -> Result<f64> {
    let mut s = 0.0;
    let mut count = 0;
    for (slot, &(i, j)) in TENSOR_SLOTS.iter().enumerate() {
        let w = if i == j { 1.0 } else { 2.0 };
        let v = t.comps[slot].physical()?;
        s += w * v.iter().map(|x| x * x).sum::<f64>();
        count = v.len();
    }
    Ok((s / count as f64).sqrt())
}

fn tensor_difference_norm(a: &SymmetricTensorField, b: &SymmetricTensorField) -> Result<f64> {
    let mut diff = a.clone();
    for (d, o) in diff.comps.iter_mut().zip(&b.comps) {
        d.axpy(-1.0, o)?;
    }
    tensor_norm(&diff)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    /// Pearson coefficients in slot order 11, 12, 13, 22, 23, 33.
    pub components: [f64; 6],
    /// Correlation of the whole tensor with per-component means removed and
    /// off-diagonal slots weighted twice.
    pub pooled: f64,
}

pub fn correlation(
    exact: &SymmetricTensorField,
    model: &SymmetricTensorField,
) -> Result<CorrelationReport> {
    let dims = exact.dims();
    for c in &model.comps {
        c.check_dims(dims)?;
    }
    let mut components = [0.0; 6];
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (slot, &(i, j)) in TENSOR_SLOTS.iter().enumerate() {
        let a = exact.comps[slot].physical()?;
        let b = model.comps[slot].physical()?;
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            let (dx, dy) = (x - ma, y - mb);
            ab += dx * dy;
            aa += dx * dx;
            bb += dy * dy;
        }
        if aa == 0.0 || bb == 0.0 {
            return Err(Error::UndefinedCorrelation { component: COMPONENT_NAMES[slot].into() });
        }
        components[slot] = ab / (aa * bb).sqrt();
        let w = if i == j { 1.0 } else { 2.0 };
        sab += w * ab;
        saa += w * aa;
        sbb += w * bb;
    }
    Ok(CorrelationReport { components, pooled: sab / (saa * sbb).sqrt() })
}

/// One filter width of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub delta_over_h: f64,
    /// `‖τ_exact - τ_model‖ / ‖τ_exact‖`.
    pub rel_error: f64,
    /// `‖τ_rles - τ_gradient‖ / ‖τ_gradient‖`.
    pub rles_gap: f64,
    /// Observed order against the previous (larger) width.
    pub order: Option<f64>,
}

/// Relative gradient-model error over a sequence of filter widths.
pub fn gradient_convergence(
    bx: &PeriodicBox,
    vel: &VelocityField,
    gamma: f64,
    deltas_over_h: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    let h = bx.spacing();
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(deltas_over_h.len());
    for &r in deltas_over_h {
        let params = FilterParams::new(gamma, r * h)?;
        let exact = exact_subfilter_stress(bx, vel, &params)?;
        let filtered = bx.gaussian_filter(vel, &params)?;
        let grad = box_model_stress(bx, &filtered, SgsModel::Gradient, &params, DEFAULT_CS)?;
        let rles = box_model_stress(bx, &filtered, SgsModel::Rles, &params, DEFAULT_CS)?;
        let rel_error = tensor_difference_norm(&exact, &grad)? / tensor_norm(&exact)?;
        let rles_gap = tensor_difference_norm(&rles, &grad)? / tensor_norm(&grad)?;
        let order = rows
            .last()
            .map(|prev| (prev.rel_error / rel_error).ln() / (prev.delta_over_h / r).ln());
        rows.push(ConvergenceRow { delta_over_h: r, rel_error, rles_gap, order });
    }
    Ok(rows)
}

/// Summary of one a-priori comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriReport {
    pub n: usize,
    pub delta_over_h: f64,
    pub model: SgsModel,
    pub correlation: CorrelationReport,
    pub exact_norm: f64,
    pub model_norm: f64,
    pub gradient_norm: f64,
    pub rles_norm: f64,
}

/// Synthesises a field and compares `model` with the exact stress at
/// filter width `delta_over_h` grid spacings.
pub fn apriori_report(
    n: usize,
    delta_over_h: f64,
    model: SgsModel,
    gamma: f64,
    seed: u64,
) -> Result<AprioriReport> {
    let vel = synthesize_field(n, DEFAULT_SLOPE, seed)?;
    let bx = PeriodicBox::new(n)?;
    let params = FilterParams::new(gamma, delta_over_h * bx.spacing())?;
    let exact = exact_subfilter_stress(&bx, &vel, &params)?;
    let filtered = bx.gaussian_filter(&vel, &params)?;
    let grad = box_model_stress(&bx, &filtered, SgsModel::Gradient, &params, DEFAULT_CS)?;
    let rles = box_model_stress(&bx, &filtered, SgsModel::Rles, &params, DEFAULT_CS)?;
    let tau = match model {
        SgsModel::Gradient => grad.clone(),
        SgsModel::Rles => rles.clone(),
        other => box_model_stress(&bx, &filtered, other, &params, DEFAULT_CS)?,
    };
    Ok(AprioriReport {
        n,
        delta_over_h,
        model,
        correlation: correlation(&exact, &tau)?,
        exact_norm: tensor_norm(&exact)?,
        model_norm: tensor_norm(&tau)?,
        gradient_norm: tensor_norm(&grad)?,
        rles_norm: tensor_norm(&rles)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{transfer_function, FilterKind};

    fn single_mode(bx: &PeriodicBox, k: f64) -> VelocityField {
        let d = bx.dims();
        let h = bx.spacing();
        let mut u = vec![0.0; d.physical_len()];
        for ix in 0..d.nx {
            for iz in 0..d.nz {
                for iy in 0..d.ny {
                    u[d.physical_index(ix, iz, iy)] = (k * ix as f64 * h).cos();
                }
            }
        }
        VelocityField::new(
            ScalarField::from_physical(d, u).unwrap(),
            ScalarField::zeros_physical(d),
            ScalarField::zeros_physical(d),
        )
    }

    #[test]
    fn synthesized_field_properties() {
        let a = synthesize_field(16, DEFAULT_SLOPE, 3).unwrap();
        let b = synthesize_field(16, DEFAULT_SLOPE, 3).unwrap();
        assert_eq!(a, b);
        assert!((rms(&a).unwrap() - 1.0).abs() < 1e-10);
        let bx = PeriodicBox::new(16).unwrap();
        assert!(bx.divergence(&a).unwrap().max_abs() < 1e-10);
        assert_ne!(synthesize_field(16, DEFAULT_SLOPE, 4).unwrap(), a);
        assert!(synthesize_field(24, DEFAULT_SLOPE, 1).is_err());
    }

    #[test]
    fn transform_round_trip() {
        let a = synthesize_field(16, DEFAULT_SLOPE, 9).unwrap();
        let bx = PeriodicBox::new(16).unwrap();
        let back = bx.inverse(&bx.forward(a.u()).unwrap());
        for (x, y) in back.physical().unwrap().iter().zip(a.u().physical().unwrap()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_field_has_no_stress() {
        let bx = PeriodicBox::new(16).unwrap();
        let d = bx.dims();
        let c = ScalarField::from_physical(d, vec![1.3; d.physical_len()]).unwrap();
        let vel = VelocityField::new(c.clone(), c.clone(), c);
        let tau = exact_subfilter_stress(&bx, &vel, &FilterParams::new(6.0, 0.8).unwrap()).unwrap();
        assert!(tau.max_abs() < 1e-13);
    }

    #[test]
    fn zero_width_has_no_stress() {
        let bx = PeriodicBox::new(16).unwrap();
        let vel = synthesize_field(16, DEFAULT_SLOPE, 2).unwrap();
        let tau = exact_subfilter_stress(&bx, &vel, &FilterParams::new(6.0, 0.0).unwrap()).unwrap();
        assert!(tau.max_abs() < 1e-13);
    }

    #[test]
    fn single_mode_closed_form() {
        let bx = PeriodicBox::new(16).unwrap();
        let k = 3.0;
        let params = FilterParams::new(6.0, 0.9).unwrap();
        let tau = exact_subfilter_stress(&bx, &single_mode(&bx, k), &params).unwrap();
        let g1 = transfer_function(FilterKind::Gaussian, k * k, &params);
        let g2 = transfer_function(FilterKind::Gaussian, 4.0 * k * k, &params);
        let d = bx.dims();
        let t11 = tau.get(0, 0).physical().unwrap();
        let h = bx.spacing();
        for ix in 0..d.nx {
            let x = ix as f64 * h;
            let expect = 0.5 * (1.0 + g2 * (2.0 * k * x).cos()) - g1 * g1 * (k * x).cos().powi(2);
            assert!((t11[d.physical_index(ix, 2, 5)] - expect).abs() < 1e-13);
        }
        assert!((t11[0] - (0.5 * (1.0 + g2) - g1 * g1)).abs() < 1e-13);
    }

    #[test]
    fn correlation_limits() {
        let bx = PeriodicBox::new(16).unwrap();
        let vel = synthesize_field(16, DEFAULT_SLOPE, 5).unwrap();
        let exact = exact_subfilter_stress(&bx, &vel, &FilterParams::new(6.0, 4.0 * bx.spacing()).unwrap()).unwrap();
        let same = correlation(&exact, &exact).unwrap();
        assert!(same.components.iter().all(|c| (c - 1.0).abs() < 1e-12));
        assert!((same.pooled - 1.0).abs() < 1e-12);
        let mut neg = exact.clone();
        neg.comps.iter_mut().for_each(|c| c.scale(-1.0));
        let r = correlation(&exact, &neg).unwrap();
        assert!((r.pooled + 1.0).abs() < 1e-12);
        let zero = SymmetricTensorField::zeros_physical(bx.dims());
        match correlation(&exact, &zero) {
            Err(Error::UndefinedCorrelation { component }) => assert_eq!(component, "tau11"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn correlation_with_noise() {
        let bx = PeriodicBox::new(16).unwrap();
        let vel = synthesize_field(16, DEFAULT_SLOPE, 6).unwrap();
        let exact = exact_subfilter_stress(&bx, &vel, &FilterParams::new(6.0, 4.0 * bx.spacing()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut noisy = exact.clone();
        for c in noisy.comps.iter_mut() {
            let v = c.physical_mut().unwrap();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            for x in v.iter_mut() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *x += sd * e;
            }
        }
        let r = correlation(&exact, &noisy).unwrap();
        assert!((r.pooled - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05, "{}", r.pooled);
    }

    #[test]
    fn rles_is_smaller_than_gradient() {
        let r = apriori_report(16, 4.0, SgsModel::Rles, 6.0, 8).unwrap();
        assert!(r.rles_norm <= r.gradient_norm);
        assert!(r.correlation.pooled > 0.0);
    }

    #[test]
    fn smagorinsky_box_stress_dissipates() {
        let bx = PeriodicBox::new(16).unwrap();
        let vel = synthesize_field(16, DEFAULT_SLOPE, 10).unwrap();
        let params = FilterParams::new(6.0, 2.0 * bx.spacing()).unwrap();
        let tau = box_model_stress(&bx, &vel, SgsModel::Smagorinsky, &params, 0.1).unwrap();
        // Trace is -(C δ)² |S| tr S = 0 for a solenoidal field.
        let d = bx.dims();
        for p in 0..d.physical_len() {
            let tr: f64 = [0, 3, 5].iter().map(|&s| tau.comps[s].physical().unwrap()[p]).sum();
            assert!(tr.abs() < 1e-10);
        }
    }
}
