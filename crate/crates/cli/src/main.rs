use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use rles_cli::compare::{compare_profiles, load_run_profile};
use rles_cli::config::{self, parse_override, Preset, Setting};
use rles_cli::reference::{load_reference, ColumnMap, Quantity};
use rles_cli::{report, run, VERSION};
use rles_core::apriori::{gradient_convergence, apriori_report, synthesize_field, PeriodicBox, DEFAULT_SLOPE};
use rles_core::SgsModel;

#[derive(Parser)]
#[command(name = "rles", version = VERSION, about = "Channel-flow LES with rational subgrid models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation from a fresh initial condition.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<Preset>,
        /// Subgrid model: none, smagorinsky, gradient or rles.
        #[arg(long)]
        model: Option<SgsModel>,
        #[arg(long, default_value = "rles-out")]
        output: PathBuf,
        /// Extra `key=value` settings, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Report progress every N steps (0 disables).
        #[arg(long, default_value_t = 1000)]
        progress: u64,
    },
    /// Continue a run from a checkpoint.
    Restart {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        steps: u64,
        /// Output directory (defaults to the checkpoint's directory).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        progress: u64,
    },
    /// Compare a run's profiles with reference data.
    Compare {
        /// Run directory or its profiles.csv.
        #[arg(long)]
        run: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Column mapping, e.g. "yplus:2,uplus:3".
        #[arg(long)]
        map: String,
        #[arg(long)]
        quantity: Quantity,
        /// Restrict the abscissa range, e.g. "5:150".
        #[arg(long)]
        range: Option<String>,
        /// Side-by-side CSV output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// A-priori test of the subgrid models on a synthetic periodic field.
    Apriori {
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 4.0)]
        delta_over_h: f64,
        #[arg(long, default_value = "gradient")]
        model: SgsModel,
        #[arg(long, default_value_t = 6.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also write the gradient-model convergence table to this CSV.
        #[arg(long)]
        convergence: Option<PathBuf>,
    },
    /// Tabulate the Gaussian transfer function and its approximants.
    TransferCurves {
        #[arg(long, default_value_t = 10.0)]
        x_max: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> anyhow::Result<(f64, f64)> {
    let (a, b) = s.split_once(':').context("range must be lo:hi")?;
    let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
    if a >= b || a.is_nan() || b.is_nan() {
        bail!("range lower bound {a} is not below upper bound {b}");
    }
    Ok((a, b))
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config: file, preset, model, output, set, progress } => {
            let mut overrides: Vec<Setting> = set.iter().map(|s| parse_override(s)).collect::<Result<_, _>>()?;
            if let Some(m) = model {
                overrides.push(Setting::flag("sgs.model", m));
            }
            if file.is_none() && preset.is_none() && overrides.is_empty() {
                bail!("give --config, --preset or --set");
            }
            let cfg = config::load(file.as_deref(), preset, &overrides)?;
            eprintln!(
                "rles {VERSION}: {}x{}x{} grid, model {}, {} steps, output {}",
                cfg.grid.nx,
                cfg.grid.ny,
                cfg.grid.nz,
                cfg.sgs.model,
                cfg.n_steps,
                output.display()
            );
            let m = run::run_simulation(cfg, &output, progress)?;
            print_manifest(&m);
        }
        Command::Restart { checkpoint, steps, output, progress } => {
            let m = run::restart(&checkpoint, steps, output.as_deref(), progress)?;
            print_manifest(&m);
        }
        Command::Compare { run, reference, map, quantity, range, output } => {
            let map: ColumnMap = map.parse()?;
            let reference = load_reference(&reference, &map)?;
            let run = load_run_profile(&run)?;
            let range = range.as_deref().map(parse_range).transpose()?;
            let c = compare_profiles(&run, &reference, quantity, range)?;
            println!("quantity   {}", c.quantity);
            println!("abscissa   {}", c.abscissa);
            println!("points     {}", c.points.len());
            println!("rel L2     {:.6e}", c.rel_l2);
            println!("rel Linf   {:.6e}", c.rel_linf);
            if let Some(p) = output {
                c.write_csv_file(&p)?;
            }
        }
        Command::Apriori { n, delta_over_h, model, gamma, seed, convergence } => {
            let r = apriori_report(n, delta_over_h, model, gamma, seed)?;
            print!("{}", report::apriori_summary(&r));
            if let Some(path) = convergence {
                let vel = synthesize_field(n, DEFAULT_SLOPE, seed)?;
                let bx = PeriodicBox::new(n)?;
                let widths: Vec<f64> = (0..6).map(|k| delta_over_h / f64::powi(2.0, k)).collect();
                let rows = gradient_convergence(&bx, &vel, gamma, &widths)?;
                write_or_print(Some(&path), &report::convergence_csv(&rows))?;
            }
        }
        Command::TransferCurves { x_max, points, output } => {
            write_or_print(output.as_ref(), &report::transfer_curves_csv(x_max, points)?)?;
        }
    }
    Ok(())
}

fn print_manifest(m: &run::Manifest) {
    println!("steps      {}", m.steps_completed);
    println!("samples    {}", m.samples);
    if let (Some(u), Some(r)) = (m.u_tau, m.re_tau) {
        println!("u_tau      {u:.6}");
        println!("Re_tau     {r:.4}");
    }
    println!("wall clock {:.1} s", m.wall_clock_seconds);
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match rles_cli::parse_threads(std::env::var(rles_cli::THREADS_ENV).ok().as_deref()) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
