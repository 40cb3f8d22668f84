//! Plane- and time-averaged statistics, friction velocity and the total
//! shear stress balance.

use std::io::Write;

use crate::error::{config_err, Error, Result};
use crate::fields::{one_sided, VelocityField};
use crate::grid::ChannelGrid;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    pub fn parts(&self) -> (f64, f64) {
        (self.sum, self.comp)
    }

    pub fn from_parts(sum: f64, comp: f64) -> Self {
        Self { sum, comp }
    }
}

/// Plane-averaged quantities accumulated per wall-normal level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moment {
    U,
    V,
    W,
    UU,
    VV,
    WW,
    UV,
    /// Model shear stress `τ_12`.
    Tau12,
}

impl Moment {
    pub const ALL: [Moment; 8] = [
        Moment::U,
        Moment::V,
        Moment::W,
        Moment::UU,
        Moment::VV,
        Moment::WW,
        Moment::UV,
        Moment::Tau12,
    ];
}

/// Running sums of plane averages over the sampled time window.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStatistics {
    ny: usize,
    n_samples: u64,
    sums: Vec<Vec<CompensatedSum>>,
    dpdx: CompensatedSum,
    window: Option<(f64, f64)>,
}

impl FlowStatistics {
    pub fn new(ny: usize) -> Self {
        Self {
            ny,
            n_samples: 0,
            sums: vec![vec![CompensatedSum::default(); ny]; Moment::ALL.len()],
            dpdx: CompensatedSum::default(),
            window: None,
        }
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    /// Sampled time window `[t0, t1]`.
    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    /// Adds one snapshot. `model_shear` is the plane mean of `τ_12`, if the
    /// run has a model.
    pub fn accumulate(
        &mut self,
        vel: &VelocityField,
        t: f64,
        dpdx: f64,
        model_shear: Option<&[f64]>,
    ) -> Result<()> {
        let d = vel.dims();
        if d.ny != self.ny {
            return Err(config_err(
                "grid.ny",
                format!("snapshot has {} wall-normal points, statistics expect {}", d.ny, self.ny),
            ));
        }
        if let Some(tau) = model_shear {
            if tau.len() != self.ny {
                return Err(config_err("grid.ny", "model shear profile length mismatch"));
            }
        }
        let u = vel.u().physical()?;
        let v = vel.v().physical()?;
        let w = vel.w().physical()?;
        let mut plane = vec![[0.0; 7]; self.ny];
        for start in (0..u.len()).step_by(self.ny) {
            for j in 0..self.ny {
                let p = start + j;
                let (a, b, c) = (u[p], v[p], w[p]);
                let acc = &mut plane[j];
                acc[0] += a;
                acc[1] += b;
                acc[2] += c;
                acc[3] += a * a;
                acc[4] += b * b;
                acc[5] += c * c;
                acc[6] += a * b;
            }
        }
        let inv = 1.0 / (d.nx * d.nz) as f64;
        for (j, acc) in plane.iter().enumerate() {
            for (k, x) in acc.iter().enumerate() {
                self.sums[k][j].add(x * inv);
            }
            self.sums[7][j].add(model_shear.map_or(0.0, |t| t[j]));
        }
        self.dpdx.add(dpdx);
        self.n_samples += 1;
        self.window = Some(match self.window {
            None => (t, t),
            Some((t0, t1)) => (t0.min(t), t1.max(t)),
        });
        Ok(())
    }

    /// Time average of one moment (not symmetrised).
    pub fn average(&self, moment: Moment) -> Result<Vec<f64>> {
        if self.n_samples == 0 {
            return Err(Error::EmptyStatistics);
        }
        let k = Moment::ALL.iter().position(|m| *m == moment).unwrap();
        let n = self.n_samples as f64;
        Ok(self.sums[k].iter().map(|s| s.value() / n).collect())
    }

    /// Flat encoding for checkpoints: `(n_samples, values)`.
    pub fn encode(&self) -> (u64, Vec<f64>) {
        let mut out = Vec::with_capacity(2 * (self.sums.len() * self.ny + 1) + 3);
        for row in &self.sums {
            for s in row {
                let (a, b) = s.parts();
                out.push(a);
                out.push(b);
            }
        }
        let (a, b) = self.dpdx.parts();
        out.extend([a, b]);
        match self.window {
            Some((t0, t1)) => out.extend([1.0, t0, t1]),
            None => out.extend([0.0, 0.0, 0.0]),
        }
        (self.n_samples, out)
    }

    pub fn decode(ny: usize, n_samples: u64, values: &[f64]) -> Result<Self> {
        let rows = Moment::ALL.len();
        let expect = 2 * rows * ny + 5;
        if values.len() != expect {
            return Err(config_err(
                "statistics",
                format!("encoded length {} does not match {expect}", values.len()),
            ));
        }
        let mut sums = Vec::with_capacity(rows);
        for r in 0..rows {
            sums.push(
                (0..ny)
                    .map(|j| {
                        let p = 2 * (r * ny + j);
                        CompensatedSum::from_parts(values[p], values[p + 1])
                    })
                    .collect(),
            );
        }
        let b = 2 * rows * ny;
        let window = (values[b + 2] != 0.0).then(|| (values[b + 3], values[b + 4]));
        Ok(Self {
            ny,
            n_samples,
            sums,
            dpdx: CompensatedSum::from_parts(values[b], values[b + 1]),
            window,
        })
    }

    pub fn finalize(&self, grid: &ChannelGrid, nu: f64) -> Result<ProfileReport> {
        if grid.ny() != self.ny {
            return Err(config_err("grid.ny", "statistics were accumulated on another grid"));
        }
        if self.n_samples == 0 {
            return Err(Error::EmptyStatistics);
        }
        let raw_u = self.average(Moment::U)?;
        let friction = compute_u_tau(&grid.y, &raw_u, nu);

        let mean_u = symmetrize_even(&raw_u);
        let mean_v = symmetrize_odd(&self.average(Moment::V)?);
        let mean_w = symmetrize_even(&self.average(Moment::W)?);
        let uu = symmetrize_even(&self.average(Moment::UU)?);
        let vv = symmetrize_even(&self.average(Moment::VV)?);
        let ww = symmetrize_even(&self.average(Moment::WW)?);
        let uv_raw = symmetrize_odd(&self.average(Moment::UV)?);
        let tau12 = symmetrize_odd(&self.average(Moment::Tau12)?);

        // Cancellation can leave a true zero variance a few ulps negative.
        let var = |m2: &[f64], m1: &[f64]| -> Vec<f64> {
            m2.iter().zip(m1).map(|(a, b)| (a - b * b).max(0.0)).collect()
        };
        let var_u = var(&uu, &mean_u);
        let var_v = var(&vv, &mean_v);
        let var_w = var(&ww, &mean_w);
        let uv: Vec<f64> =
            uv_raw.iter().zip(mean_u.iter().zip(&mean_v)).map(|(a, (b, c))| a - b * c).collect();
        let rms = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x.sqrt()).collect() };

        let (total_shear, residual) =
            shear_stress_balance(&grid.y, &mean_u, &uv, &tau12, nu);
        Ok(ProfileReport {
            y: grid.y.clone(),
            urms: rms(&var_u),
            vrms: rms(&var_v),
            wrms: rms(&var_w),
            mean_u,
            mean_v,
            mean_w,
            var_u,
            var_v,
            var_w,
            uv,
            tau12,
            total_shear,
            residual,
            friction,
            mean_dpdx: self.dpdx.value() / self.n_samples as f64,
            n_samples: self.n_samples,
            window: self.window.unwrap_or((0.0, 0.0)),
            nu,
        })
    }
}

/// `(f(y) + f(-y)) / 2` on an antisymmetric grid.
pub fn symmetrize_even(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n).map(|j| 0.5 * (f[j] + f[n - 1 - j])).collect()
}

/// `(f(y) - f(-y)) / 2` on an antisymmetric grid.
pub fn symmetrize_odd(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n).map(|j| 0.5 * (f[j] - f[n - 1 - j])).collect()
}

/// First derivative exact for quadratics: three-point Lagrange formulas,
/// centred in the interior and one-sided at the ends.
pub fn profile_derivative(y: &[f64], f: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n];
    let lo = one_sided(y[0], y[1], y[2]);
    out[0] = lo[0] * f[0] + lo[1] * f[1] + lo[2] * f[2];
    let hi = one_sided(y[n - 1], y[n - 2], y[n - 3]);
    out[n - 1] = hi[0] * f[n - 1] + hi[1] * f[n - 2] + hi[2] * f[n - 3];
    for j in 1..n - 1 {
        let h1 = y[j] - y[j - 1];
        let h2 = y[j + 1] - y[j];
        out[j] = -h2 / (h1 * (h1 + h2)) * f[j - 1]
            + (h2 - h1) / (h1 * h2) * f[j]
            + h1 / (h2 * (h1 + h2)) * f[j + 1];
    }
    out
}

/// Friction velocity from the wall slopes of a mean profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallFriction {
    /// Wall shear `dU/dy` averaged over both walls (sign-corrected).
    pub wall_slope: f64,
    pub u_tau: f64,
    pub re_tau: f64,
    pub u_tau_lower: f64,
    pub u_tau_upper: f64,
    /// Set when either wall has reversed (or zero) shear.
    pub reversed: bool,
}

pub fn reynolds_tau(u_tau: f64, nu: f64) -> f64 {
    u_tau / nu
}

/// `u_τ = sqrt(ν |τ_w|)` with `τ_w` averaged over the two walls; channel
/// half-width 1.
pub fn compute_u_tau(y: &[f64], mean_u: &[f64], nu: f64) -> WallFriction {
    let n = y.len();
    let lo = one_sided(y[0], y[1], y[2]);
    let hi = one_sided(y[n - 1], y[n - 2], y[n - 3]);
    let s_lo = lo[0] * mean_u[0] + lo[1] * mean_u[1] + lo[2] * mean_u[2];
    let s_hi = hi[0] * mean_u[n - 1] + hi[1] * mean_u[n - 2] + hi[2] * mean_u[n - 3];
    let wall_slope = 0.5 * (s_lo - s_hi);
    let u_tau = (nu * wall_slope.abs()).sqrt();
    WallFriction {
        wall_slope,
        u_tau,
        re_tau: reynolds_tau(u_tau, nu),
        u_tau_lower: (nu * s_lo.abs()).sqrt(),
        u_tau_upper: (nu * s_hi.abs()).sqrt(),
        reversed: !(s_lo > 0.0 && s_hi < 0.0),
    }
}

/// Total shear `ν dU/dy - <u'v'> - <τ_12>` and its maximum deviation from
/// the straight line through the wall values, relative to the wall value.
pub fn shear_stress_balance(
    y: &[f64],
    mean_u: &[f64],
    uv: &[f64],
    tau12: &[f64],
    nu: f64,
) -> (Vec<f64>, f64) {
    let n = y.len();
    let dudy = profile_derivative(y, mean_u);
    let total: Vec<f64> = (0..n).map(|j| nu * dudy[j] - uv[j] - tau12[j]).collect();
    let (a, b) = (total[0], total[n - 1]);
    let dev = (0..n)
        .map(|j| (total[j] - (a + (b - a) * (y[j] - y[0]) / (y[n - 1] - y[0]))).abs())
        .fold(0.0, f64::max);
    let scale = 0.5 * (a - b).abs();
    let residual = if scale > 0.0 { dev / scale } else { dev };
    (total, residual)
}

/// Conversion between outer and wall units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallUnits {
    pub u_tau: f64,
    pub nu: f64,
}

impl WallUnits {
    /// Distance from the nearest wall in viscous units.
    pub fn y_plus(&self, y: f64) -> f64 {
        (1.0 - y.abs()) * self.u_tau / self.nu
    }

    /// Inverse of [`y_plus`](Self::y_plus) on the lower (`y < 0`) half.
    pub fn y_from_plus(&self, y_plus: f64) -> f64 {
        y_plus * self.nu / self.u_tau - 1.0
    }

    pub fn velocity_plus(&self, u: f64) -> f64 {
        u / self.u_tau
    }

    pub fn velocity_from_plus(&self, u_plus: f64) -> f64 {
        u_plus * self.u_tau
    }

    pub fn stress_plus(&self, s: f64) -> f64 {
        s / (self.u_tau * self.u_tau)
    }

    pub fn stress_from_plus(&self, s_plus: f64) -> f64 {
        s_plus * self.u_tau * self.u_tau
    }
}

/// Finalised, symmetrised profiles over the full channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub y: Vec<f64>,
    pub mean_u: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub mean_w: Vec<f64>,
    pub var_u: Vec<f64>,
    pub var_v: Vec<f64>,
    pub var_w: Vec<f64>,
    /// Reynolds shear stress `<u'v'>`.
    pub uv: Vec<f64>,
    pub tau12: Vec<f64>,
    pub urms: Vec<f64>,
    pub vrms: Vec<f64>,
    pub wrms: Vec<f64>,
    pub total_shear: Vec<f64>,
    /// Relative deviation of the total shear from a straight line.
    pub residual: f64,
    pub friction: WallFriction,
    pub mean_dpdx: f64,
    pub n_samples: u64,
    pub window: (f64, f64),
    pub nu: f64,
}

pub const PROFILE_COLUMNS: [&str; 8] =
    ["y", "y_plus", "U_plus", "uv_plus", "urms_plus", "vrms_plus", "wrms_plus", "total_shear"];

/// One lower-half row in wall units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallRow {
    pub y: f64,
    pub y_plus: f64,
    pub u_plus: f64,
    pub uv_plus: f64,
    pub urms_plus: f64,
    pub vrms_plus: f64,
    pub wrms_plus: f64,
    pub total_shear: f64,
}

impl WallRow {
    pub fn values(&self) -> [f64; 8] {
        [
            self.y,
            self.y_plus,
            self.u_plus,
            self.uv_plus,
            self.urms_plus,
            self.vrms_plus,
            self.wrms_plus,
            self.total_shear,
        ]
    }
}

impl ProfileReport {
    pub fn wall_units(&self) -> WallUnits {
        WallUnits { u_tau: self.friction.u_tau, nu: self.nu }
    }

    /// Rows from the lower wall up to the centreline, in wall units.
    pub fn wall_rows(&self) -> Vec<WallRow> {
        let wu = self.wall_units();
        let c = self.y.len() / 2;
        (0..=c)
            .map(|j| WallRow {
                y: self.y[j],
                y_plus: wu.y_plus(self.y[j]),
                u_plus: wu.velocity_plus(self.mean_u[j]),
                uv_plus: wu.stress_plus(self.uv[j]),
                urms_plus: wu.velocity_plus(self.urms[j]),
                vrms_plus: wu.velocity_plus(self.vrms[j]),
                wrms_plus: wu.velocity_plus(self.wrms[j]),
                total_shear: wu.stress_plus(self.total_shear[j]),
            })
            .collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", PROFILE_COLUMNS.join(","))?;
        for row in self.wall_rows() {
            let cells: Vec<String> = row.values().iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Total shear balance in outer units over the full channel.
    pub fn write_shear_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "y,viscous,reynolds,model,total")?;
        let dudy = profile_derivative(&self.y, &self.mean_u);
        for j in 0..self.y.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e}",
                self.y[j],
                self.nu * dudy[j],
                -self.uv[j],
                -self.tau12[j],
                self.total_shear[j]
            )?;
        }
        Ok(())
    }
}
