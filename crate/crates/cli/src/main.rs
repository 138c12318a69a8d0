use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pbe_core::experiments::{
    read_samples, relative_l2_error, run_partial, sweep_orders, write_sweep, ExperimentConfig,
    ExperimentKind, Method, Profile,
};
use pbe_core::spatial::{cavity_velocity, read_velocity, write_velocity, Grid2D};
use pbe_core::Error;

/// Moment-closure and sectional solvers for aggregation-breakage population balances.
#[derive(Parser)]
#[command(name = "pbe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV and JSON output.
    Run {
        #[command(flatten)]
        setup: Setup,
        /// Reference run CSV (a `<stem>.csv` or `<stem>_fields.csv`); adds E2 to the summary.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Run a closure for several orders against one sectional reference.
    Sweep {
        #[command(flatten)]
        setup: Setup,
        /// Orders to run, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8, 9])]
        orders: Vec<usize>,
    },
    /// Relative space-time L2 error between two written runs.
    Error {
        reference: PathBuf,
        candidate: PathBuf,
    },
    /// Export the lid-driven cavity velocity, or check imported files.
    ///
    /// Files hold one grid row per line, from the bottom row up, with `n`
    /// whitespace-separated values; `u` is the x and `z` the y component.
    CavityVelocity {
        /// Cells per direction.
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        reynolds: f64,
        #[arg(long, default_value_t = 1.0)]
        lid_speed: f64,
        /// Directory receiving `u.txt` and `z.txt`.
        #[arg(long, default_value = "out/velocity")]
        out: PathBuf,
        /// Read these two files (u, z) instead of computing the field.
        #[arg(long, num_args = 2, value_names = ["U", "Z"])]
        import: Option<Vec<PathBuf>>,
    },
}

#[derive(Args)]
struct Setup {
    /// TOML configuration; without it a built-in preset for `--kind` is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment preset when no configuration file is given.
    #[arg(long, default_value = "breakage")]
    kind: ExperimentKind,
    /// Resolution profile: desk or paper.
    #[arg(long)]
    profile: Option<Profile>,
    /// pn, mn, qmom or fvs.
    #[arg(long)]
    closure: Option<Method>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Setup {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => {
                let mut c = ExperimentConfig::load(path)?;
                if let Some(p) = self.profile {
                    c.apply_profile(p);
                }
                c
            }
            None => ExperimentConfig::preset(self.kind, self.profile.unwrap_or(Profile::Desk)),
        };
        if let Some(m) = self.closure {
            config.closure = m;
        }
        if let Some(n) = self.order {
            config.order = n;
        }
        if let Some(dir) = &self.out {
            config.output.dir = dir.clone();
        }
        config.validate()?;
        Ok(config)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) => 2,
        _ if e.is_closure_failure() => 3,
        _ if e.is_cfl_violation() => 4,
        _ => 1,
    }
}

fn nx(config: &ExperimentConfig) -> usize {
    config.spatial.as_ref().map_or(1, |s| s.nx)
}

fn run_cmd(setup: &Setup, reference: Option<&Path>) -> Result<(), Error> {
    let config = setup.resolve()?;
    let (mut report, failure) = run_partial(&config);
    if failure.is_none() {
        if let Some(path) = reference {
            let (times, values) = read_samples(path)?;
            report.e2 = Some(relative_l2_error(&times, &values, &report.times, &report.samples())?);
        }
    }
    let written = report.write(&config.output.dir, &config.output.snapshots, nx(&config))?;
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    println!("{}", report.summary_json());
    failure.map_or(Ok(()), Err)
}

fn sweep_cmd(setup: &Setup, orders: &[usize]) -> Result<(), Error> {
    let config = setup.resolve()?;
    let (reference, rows) = sweep_orders(&config, orders)?;
    let dir = &config.output.dir;
    reference.write(dir, &config.output.snapshots, nx(&config))?;
    let path = dir.join(format!("{}_{}_sweep.csv", config.kind.name(), config.closure));
    write_sweep(&path, &rows)?;
    println!("order,seconds,E2");
    for r in &rows {
        println!("{},{:.6},{:.6e}", r.order, r.seconds, r.e2);
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn error_cmd(reference: &Path, candidate: &Path) -> Result<(), Error> {
    let (rt, rv) = read_samples(reference)?;
    let (ct, cv) = read_samples(candidate)?;
    println!("{:.6e}", relative_l2_error(&rt, &rv, &ct, &cv)?);
    Ok(())
}

fn velocity_cmd(
    n: usize,
    reynolds: f64,
    lid_speed: f64,
    out: &Path,
    import: Option<&[PathBuf]>,
) -> Result<(), Error> {
    let grid = Grid2D::unit_square(n)?;
    let vel = match import {
        Some([u, z]) => read_velocity(u, z, &grid, 0.0)?,
        Some(_) => return Err(Error::Config("--import takes two files".into())),
        None => {
            let vel = cavity_velocity(&grid, reynolds, lid_speed)?;
            std::fs::create_dir_all(out)?;
            let (u, z) = (out.join("u.txt"), out.join("z.txt"));
            write_velocity(&u, &z, &grid, &vel)?;
            eprintln!("wrote {} and {}", u.display(), z.display());
            vel
        }
    };
    let max_speed = vel
        .u
        .iter()
        .zip(&vel.z)
        .map(|(u, z)| u.hypot(*z))
        .fold(0.0, f64::max);
    println!(
        "grid {n}x{n}, max speed {max_speed:.6e}, max divergence {:.3e}",
        vel.max_divergence(&grid)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { setup, reference } => run_cmd(setup, reference.as_deref()),
        Command::Sweep { setup, orders } => sweep_cmd(setup, orders),
        Command::Error {
            reference,
            candidate,
        } => error_cmd(reference, candidate),
        Command::CavityVelocity {
            n,
            reynolds,
            lid_speed,
            out,
            import,
        } => velocity_cmd(*n, *reynolds, *lid_speed, out, import.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
