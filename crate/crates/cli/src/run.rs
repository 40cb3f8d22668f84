//! Run orchestration: transient, sampling, checkpoints and output files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use rles_core::{FlowStatistics, ProfileReport, RunConfig, SgsModel, Solver, SolverState};

use crate::checkpoint::Checkpoint;
use crate::config;
use crate::error::{io_err, CliError, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const SHEAR_FILE: &str = "shear_balance.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.resolved";

/// Summary written next to the profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub config_sha256: String,
    pub steps_completed: u64,
    pub final_time: f64,
    pub samples: u64,
    pub sampling_window: Option<(f64, f64)>,
    pub u_tau: Option<f64>,
    pub re_tau: Option<f64>,
    pub u_tau_lower: Option<f64>,
    pub u_tau_upper: Option<f64>,
    pub shear_residual: Option<f64>,
    pub mean_dpdx: Option<f64>,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub checkpoint: Option<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Syntax { line: e.line(), message: e.to_string() })
    }
}

pub struct Run {
    solver: Solver,
    config_text: String,
    pub state: SolverState,
    pub stats: FlowStatistics,
    output: PathBuf,
    started: Instant,
    last_checkpoint: Option<PathBuf>,
    /// Print a progress line to stderr every this many steps (0: silent).
    pub progress_every: u64,
}

impl Run {
    pub fn fresh(cfg: RunConfig, output: &Path) -> Result<Self> {
        let solver = Solver::new(cfg.clone())?;
        let state = solver.initial_state()?;
        Self::assemble(solver, config::render(&cfg), state, FlowStatistics::new(cfg.grid.ny), output)
    }

    /// Resumes exactly where the checkpoint left off.
    pub fn from_checkpoint(ckpt: Checkpoint, output: &Path) -> Result<Self> {
        let cfg = config::resolve(None, &config::parse_config_text(&ckpt.config_text)?)?;
        if cfg.grid != ckpt.grid {
            return Err(CliError::Checkpoint {
                path: output.join(CHECKPOINT_FILE),
                reason: "grid header disagrees with embedded configuration".into(),
            });
        }
        let solver = Solver::new(cfg.clone())?;
        let stats = ckpt.stats.unwrap_or_else(|| FlowStatistics::new(cfg.grid.ny));
        Self::assemble(solver, ckpt.config_text, ckpt.state, stats, output)
    }

    fn assemble(
        solver: Solver,
        config_text: String,
        state: SolverState,
        stats: FlowStatistics,
        output: &Path,
    ) -> Result<Self> {
        std::fs::create_dir_all(output).map_err(io_err(output))?;
        Ok(Self {
            solver,
            config_text,
            state,
            stats,
            output: output.to_path_buf(),
            started: Instant::now(),
            last_checkpoint: None,
            progress_every: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        self.solver.config()
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn output(&self) -> &Path {
        &self.output
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            grid: self.config().grid,
            config_text: self.config_text.clone(),
            state: self.state.clone(),
            stats: Some(self.stats.clone()),
        }
    }

    pub fn write_checkpoint(&mut self) -> Result<PathBuf> {
        let path = self.output.join(CHECKPOINT_FILE);
        self.checkpoint().write(&path)?;
        self.last_checkpoint = Some(path.clone());
        Ok(path)
    }

    /// Steps until `state.step == target`, sampling every step past the
    /// transient and checkpointing on multiples of `checkpoint_every`.
    pub fn advance_to(&mut self, target: u64) -> Result<()> {
        let transient = self.config().transient_steps;
        let every = self.config().checkpoint_every;
        let with_model = self.config().sgs.model != SgsModel::None;
        while self.state.step < target {
            if let Err(source) = self.solver.step(&mut self.state) {
                return Err(CliError::Diverged {
                    step: self.state.step,
                    checkpoint: self.last_checkpoint.clone(),
                    source,
                });
            }
            let s = &self.state;
            if s.step > transient {
                let shear = if with_model { Some(self.solver.mean_model_shear(s)?) } else { None };
                self.stats.accumulate(&s.vel, s.t, s.dpdx, shear.as_deref())?;
            }
            if every > 0 && s.step.is_multiple_of(every) {
                self.write_checkpoint()?;
            }
            if self.progress_every > 0 && self.state.step.is_multiple_of(self.progress_every) {
                eprintln!(
                    "step {:>8}  t = {:.5}  dpdx = {:.6e}  max|u| = {:.4}",
                    self.state.step,
                    self.state.t,
                    self.state.dpdx,
                    self.state.vel.max_abs()
                );
            }
        }
        Ok(())
    }

    /// Writes the final checkpoint, profiles (when samples exist), the
    /// resolved configuration and the manifest.
    pub fn finish(&mut self) -> Result<Manifest> {
        let checkpoint = self.write_checkpoint()?;
        let mut outputs = vec![CONFIG_FILE.to_string(), MANIFEST_FILE.to_string(), CHECKPOINT_FILE.to_string()];
        let cfg_path = self.output.join(CONFIG_FILE);
        std::fs::write(&cfg_path, &self.config_text).map_err(io_err(&cfg_path))?;

        let report = if self.stats.n_samples() > 0 {
            let r = self.stats.finalize(self.solver.grid(), self.solver.nu())?;
            self.write_profiles(&r)?;
            outputs.extend([PROFILES_FILE.to_string(), SHEAR_FILE.to_string()]);
            Some(r)
        } else {
            None
        };
        outputs.sort();

        let manifest = Manifest {
            version: crate::VERSION.to_string(),
            config: config::resolved_pairs(self.config())
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            config_sha256: config::hex(&config::digest(&self.config_text)),
            steps_completed: self.state.step,
            final_time: self.state.t,
            samples: self.stats.n_samples(),
            sampling_window: self.stats.window(),
            u_tau: report.as_ref().map(|r| r.friction.u_tau),
            re_tau: report.as_ref().map(|r| r.friction.re_tau),
            u_tau_lower: report.as_ref().map(|r| r.friction.u_tau_lower),
            u_tau_upper: report.as_ref().map(|r| r.friction.u_tau_upper),
            shear_residual: report.as_ref().map(|r| r.residual),
            mean_dpdx: report.as_ref().map(|r| r.mean_dpdx),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
            checkpoint: Some(checkpoint.display().to_string()),
            outputs,
        };
        let path = self.output.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
        Ok(manifest)
    }

    fn write_profiles(&self, r: &ProfileReport) -> Result<()> {
        let path = self.output.join(PROFILES_FILE);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).map_err(io_err(&path))?;
        std::fs::write(&path, buf).map_err(io_err(&path))?;
        let path = self.output.join(SHEAR_FILE);
        let mut buf = Vec::new();
        r.write_shear_csv(&mut buf).map_err(io_err(&path))?;
        std::fs::write(&path, buf).map_err(io_err(&path))
    }
}

/// Full run from a fresh initial condition.
pub fn run_simulation(cfg: RunConfig, output: &Path, progress_every: u64) -> Result<Manifest> {
    let steps = cfg.n_steps;
    let mut run = Run::fresh(cfg, output)?;
    run.progress_every = progress_every;
    run.advance_to(steps)?;
    run.finish()
}

/// Continues a checkpoint for `steps` more steps, writing into `output`
/// (the checkpoint's directory when `None`).
pub fn restart(checkpoint: &Path, steps: u64, output: Option<&Path>, progress_every: u64) -> Result<Manifest> {
    let ckpt = Checkpoint::read(checkpoint)?;
    let dir = match output {
        Some(d) => d.to_path_buf(),
        None => checkpoint.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    };
    let mut run = Run::from_checkpoint(ckpt, &dir)?;
    run.progress_every = progress_every;
    let target = run.state.step + steps;
    run.advance_to(target)?;
    run.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rles_core::GridConfig;
    use std::f64::consts::PI;

    fn smoke(model: SgsModel) -> RunConfig {
        RunConfig {
            grid: GridConfig { lx: 2.0 * PI, lz: PI, nx: 16, ny: 17, nz: 16, stretch_beta: 2.2 },
            dt: 1e-3,
            n_steps: 10,
            transient_steps: 0,
            u_m: 1.0,
            re: 100.0,
            checkpoint_every: 5,
            sgs: rles_core::SgsConfig { model, ..Default::default() },
            ..RunConfig::re180()
        }
    }

    #[test]
    fn smoke_run_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let m = run_simulation(smoke(SgsModel::None), dir.path(), 0).unwrap();
        for f in [CHECKPOINT_FILE, PROFILES_FILE, SHEAR_FILE, MANIFEST_FILE, CONFIG_FILE] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
        let back = Manifest::read(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.steps_completed, 10);
        assert_eq!(m.samples, 10);
        assert!(m.u_tau.unwrap() > 0.0 && m.re_tau.unwrap() > 0.0);
        for key in config::valid_keys() {
            assert!(m.config.contains_key(key), "{key} missing from manifest");
        }
    }

    #[test]
    fn restart_continues_where_it_stopped() {
        let dir = tempfile::tempdir().unwrap();
        run_simulation(smoke(SgsModel::Gradient), dir.path(), 0).unwrap();
        let m = restart(&dir.path().join(CHECKPOINT_FILE), 4, None, 0).unwrap();
        assert_eq!(m.steps_completed, 14);
        assert_eq!(m.samples, 14);
    }

    #[test]
    fn no_samples_skips_profiles() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { n_steps: 3, transient_steps: 3, checkpoint_every: 0, ..smoke(SgsModel::None) };
        let m = run_simulation(cfg, dir.path(), 0).unwrap();
        assert_eq!(m.samples, 0);
        assert!(m.u_tau.is_none());
        assert!(!dir.path().join(PROFILES_FILE).exists());
    }
}
