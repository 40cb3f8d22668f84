//! Binary checkpoint files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "RLESCKPT" u32 version
//! grid: f64 lx, f64 lz, u64 nx, u64 ny, u64 nz, f64 stretch_beta
//! [u8; 32] SHA-256 of the resolved config text
//! u64 length + UTF-8 resolved config text
//! u64 step, f64 t, f64 dpdx, f64 nu
//! 3 × nx·nz·ny f64 velocity (physical, y fastest)
//! u8 flag [+ 3 × spectral_len × (re, im) previous right-hand side]
//! u64 length + f64 guard history
//! u8 flag [+ u64 samples, u64 length, f64 statistics sums]
//! u32 CRC-32 of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rles_core::{
    Complex64, Dims, FlowStatistics, GridConfig, ScalarField, SolverState, VelocityField,
};

use crate::config;
use crate::error::{io_err, CliError, Result};

pub const MAGIC: &[u8; 8] = b"RLESCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub grid: GridConfig,
    pub config_text: String,
    pub state: SolverState,
    pub stats: Option<FlowStatistics>,
}

impl Checkpoint {
    pub fn digest(&self) -> [u8; 32] {
        config::digest(&self.config_text)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let s = &self.state;
        let mut w = Vec::new();
        w.extend_from_slice(MAGIC);
        w.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        put_f64(&mut w, self.grid.lx);
        put_f64(&mut w, self.grid.lz);
        for n in [self.grid.nx, self.grid.ny, self.grid.nz] {
            put_u64(&mut w, n as u64);
        }
        put_f64(&mut w, self.grid.stretch_beta);
        w.extend_from_slice(&self.digest());
        put_u64(&mut w, self.config_text.len() as u64);
        w.extend_from_slice(self.config_text.as_bytes());
        put_u64(&mut w, s.step);
        for x in [s.t, s.dpdx, s.nu] {
            put_f64(&mut w, x);
        }
        for c in &s.vel.comps {
            c.physical()?.iter().for_each(|x| put_f64(&mut w, *x));
        }
        match &s.prev_rhs {
            Some(rhs) => {
                w.push(1);
                for c in &rhs.comps {
                    for z in c.spectral()? {
                        put_f64(&mut w, z.re);
                        put_f64(&mut w, z.im);
                    }
                }
            }
            None => w.push(0),
        }
        put_u64(&mut w, s.max_u_history.len() as u64);
        s.max_u_history.iter().for_each(|x| put_f64(&mut w, *x));
        match &self.stats {
            Some(st) => {
                w.push(1);
                let (n, values) = st.encode();
                put_u64(&mut w, n);
                put_u64(&mut w, values.len() as u64);
                values.iter().for_each(|x| put_f64(&mut w, *x));
            }
            None => w.push(0),
        }
        let crc = crc32fast::hash(&w);
        w.extend_from_slice(&crc.to_le_bytes());
        Ok(w)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: String| CliError::Checkpoint { path: path.to_path_buf(), reason };
        if bytes.len() < MAGIC.len() + 8 || &bytes[..8] != MAGIC {
            return Err(fail("not a checkpoint file (bad magic)".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(fail(format!("CRC mismatch (stored {stored:08x}, computed {actual:08x})")));
        }
        let mut r = Reader { buf: body, pos: 8, path };
        let version = r.u32()?;
        if version == 0 || version > FORMAT_VERSION {
            return Err(fail(format!(
                "format version {version} is not supported (this build reads up to {FORMAT_VERSION})"
            )));
        }
        let lx = r.f64()?;
        let lz = r.f64()?;
        let nx = r.size()?;
        let ny = r.size()?;
        let nz = r.size()?;
        let grid = GridConfig { lx, lz, nx, ny, nz, stretch_beta: r.f64()? };
        grid.validate()?;
        let digest: [u8; 32] = r.take(32)?.try_into().unwrap();
        let len = r.size()?;
        let config_text = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| fail("config text is not UTF-8".into()))?;
        if config::digest(&config_text) != digest {
            return Err(fail("config digest does not match embedded config text".into()));
        }
        let step = r.u64()?;
        let t = r.f64()?;
        let dpdx = r.f64()?;
        let nu = r.f64()?;
        let dims = Dims { nx, ny, nz };
        let mut comps = Vec::with_capacity(3);
        for _ in 0..3 {
            comps.push(ScalarField::from_physical(dims, r.f64s(dims.physical_len())?)?);
        }
        let vel = into_velocity(comps);
        let prev_rhs = if r.flag()? {
            let mut comps = Vec::with_capacity(3);
            for _ in 0..3 {
                let raw = r.f64s(2 * dims.spectral_len())?;
                let z = raw.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
                comps.push(ScalarField::from_spectral(dims, z)?);
            }
            Some(into_velocity(comps))
        } else {
            None
        };
        let n_hist = r.size()?;
        let max_u_history = r.f64s(n_hist)?;
        let stats = if r.flag()? {
            let n = r.u64()?;
            let len = r.size()?;
            Some(FlowStatistics::decode(ny, n, &r.f64s(len)?)?)
        } else {
            None
        };
        if r.pos != body.len() {
            return Err(fail(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self {
            grid,
            config_text,
            state: SolverState { vel, dpdx, t, step, nu, prev_rhs, max_u_history },
            stats,
        })
    }

    /// Writes to a temporary sibling and renames it into place, so a crash
    /// never leaves a truncated checkpoint behind.
    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let tmp = tmp_path(path);
        {
            let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(&bytes).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes, path)
    }
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

fn into_velocity(comps: Vec<ScalarField>) -> VelocityField {
    let mut it = comps.into_iter();
    VelocityField::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
}

fn put_u64(w: &mut Vec<u8>, x: u64) {
    w.extend_from_slice(&x.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, x: f64) {
    w.extend_from_slice(&x.to_le_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(|| {
            CliError::Checkpoint {
                path: self.path.to_path_buf(),
                reason: format!("truncated at byte {}", self.pos),
            }
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn size(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| CliError::Checkpoint {
            path: self.path.to_path_buf(),
            reason: format!("length {n} out of range"),
        })
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.saturating_mul(8))?;
        Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
    }

    fn flag(&mut self) -> Result<bool> {
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(CliError::Checkpoint {
                path: self.path.to_path_buf(),
                reason: format!("invalid flag byte {b}"),
            }),
        }
    }
}
