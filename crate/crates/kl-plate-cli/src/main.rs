//! Command-line front end for the plate solver: thin argument handling over
//! the library's run driver. All numerical output is CSV so results diff
//! cleanly across runs.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kl_plate::driver::{
    beam_summary_csv, convergence_csv, parse_config, run_beam_eig, run_convergence, run_roots,
    run_solve, run_symbol, solve_csv, Problem, RunConfig,
};
use kl_plate::error::Error;
use kl_plate::exactsol::{circular_lambda, CircularBc};

#[derive(Parser)]
#[command(
    name = "kl-plate",
    version,
    about = "Kirchhoff-Love plate solver on composite overlapping grids"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand. Values given here override the ones in
/// the JSON configuration file.
#[derive(Args)]
struct Common {
    /// JSON run configuration file (keys mirror the library's RunConfig).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for CSV tables and field snapshots.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid refinement level (target spacing 0.1 / level).
    #[arg(long)]
    level: Option<u32>,
    /// Time-stepping scheme: c2 | upc2 | pc22 | nb2.
    #[arg(long)]
    scheme: Option<String>,
    /// Boundary condition on all physical sides: clamped | supported | free.
    #[arg(long)]
    bc: Option<String>,
    /// Dissipation factor (ad = df sqrt(-Q_M) / 16).
    #[arg(long)]
    df: Option<f64>,
    /// Time-step safety factor.
    #[arg(long)]
    csf: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time-march one problem and report max-norm errors.
    Solve(Common),
    /// Grid-refinement study with error ratios and fitted rates.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Comma-separated refinement levels (at least three).
        #[arg(long, default_value = "1,2,4")]
        levels: String,
    },
    /// Time-stepping eigenvalues for the 1-D beam test grids.
    Eig1d(Common),
    /// Fourier symbol of the spatial operator and derived coefficients.
    Symbol(Common),
    /// Amplification-factor sweep over the symbol range, plus the
    /// circular-plate frequency parameters.
    Roots(Common),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Treat bad usage as a configuration error (exit 1); clap's own
            // default would exit 2, which is reserved for instability.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Instability { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Solve(c) => {
            let cfg = load(&c, Problem::Mms2d)?;
            let o = run_solve(&cfg)?;
            print!("{}", solve_csv(&o, &cfg));
        }
        Cmd::Converge { common, levels } => {
            let cfg = load(&common, Problem::Mms2d)?;
            let levels = parse_levels(&levels)?;
            let t = run_convergence(&cfg, &levels)?;
            print!("{}", convergence_csv(&t));
            if !t.diverged.is_empty() {
                return Err(Error::Instability { step: 0, max_w: f64::INFINITY });
            }
        }
        Cmd::Eig1d(c) => {
            let cfg = load(&c, Problem::Beam1dEig)?;
            let rows = run_beam_eig(&cfg)?;
            print!("{}", beam_summary_csv(&rows));
        }
        Cmd::Symbol(c) => {
            let cfg = load(&c, Problem::SymbolSweep)?;
            let s = run_symbol(&cfg)?;
            let (x1, x2, _) = s
                .lattice
                .iter()
                .fold((0.0, 0.0, f64::INFINITY), |acc, &(x1, x2, q)| {
                    if q < acc.2 {
                        (x1, x2, q)
                    } else {
                        acc
                    }
                });
            println!("q_hat,ad,xi1_argmin,xi2_argmin");
            println!("{:.16e},{:.16e},{:.16e},{:.16e}", s.q_hat, s.ad, x1, x2);
        }
        Cmd::Roots(c) => {
            let cfg = load(&c, Problem::Roots)?;
            let lam = lambda_table(cfg.nu);
            print!("{lam}");
            let s = run_roots(&cfg)?;
            let worst = s.locus.iter().fold(0.0_f64, |m, &(_, r)| m.max(r));
            println!();
            println!("scheme,dt,mu,max_modulus");
            println!("{},{:.16e},{:.16e},{:.16e}", s.scheme, s.dt, s.mu, worst);
            if let Some(dir) = cfg.out.as_deref() {
                std::fs::write(dir.join("lambda.csv"), lam)?;
            }
        }
    }
    Ok(())
}

/// Read the configuration (or start from defaults for the subcommand's
/// natural problem) and apply flag overrides.
fn load(c: &Common, default_problem: Problem) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => RunConfig::minimal(default_problem),
    };
    if let Some(l) = c.level {
        cfg.level = l;
    }
    if let Some(s) = &c.scheme {
        cfg.scheme = s.parse()?;
    }
    if let Some(b) = &c.bc {
        cfg.bc = b.parse()?;
    }
    if let Some(d) = c.df {
        cfg.df = d;
    }
    if let Some(x) = c.csf {
        cfg.csf = Some(x);
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.clone());
        std::fs::create_dir_all(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_levels(text: &str) -> Result<Vec<u32>, Error> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|e| Error::Config(format!("levels: {p:?}: {e}")))
        })
        .collect()
}

/// Smallest positive roots of the circular-plate frequency equations for the
/// first three angular mode numbers.
fn lambda_table(nu: f64) -> String {
    let mut s = String::from("bc,n,lambda\n");
    for (name, bc) in [("clamped", CircularBc::Clamped), ("supported", CircularBc::Supported)] {
        for n in 0..=2u32 {
            let _ = writeln!(s, "{},{},{:.15}", name, n, circular_lambda(bc, n, nu, 1));
        }
    }
    s
}
