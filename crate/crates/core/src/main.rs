use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cdfloquet::agp::write_alpha_csv;
use cdfloquet::experiments::{default_figure_dir, run_config, run_figure, solve_agp_cli, Figure, FigureOptions, Manifest};
use cdfloquet::models::{Boundary, ModelSpec, TrapSpec};
use cdfloquet::{Error, Result};

/// Environment variable capping the worker thread count.
const THREADS_VAR: &str = "CDFLOQUET_THREADS";

#[derive(Parser)]
#[command(name = "cdfloquet", version, about = "Counterdiabatic and Floquet-engineered spin-chain driving")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce one of the built-in figures (fig1 .. fig4).
    Figure {
        name: String,
        /// Output directory (default out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the long Floquet settings instead of the reduced ones.
        #[arg(long)]
        full_scale: bool,
        /// Write into an existing directory.
        #[arg(long)]
        force: bool,
    },
    /// Run a JSON experiment config.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Print variational coefficients for one model point.
    Agp(AgpArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    TwoQubitXxzz,
    ThreeLevel,
    IsingUniform,
    TrapIsing,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Open,
}

#[derive(clap::Args)]
struct AgpArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Chain length for the Ising models.
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    j: Option<f64>,
    /// Field of the three-level model.
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    h_x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    h_z: Option<f64>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, allow_negative_numbers = true)]
    h_t: Option<f64>,
    #[arg(long)]
    w_t: Option<f64>,
    /// Initial trap site (1-based).
    #[arg(long)]
    i0: Option<usize>,
    /// Final trap site (1-based).
    #[arg(long)]
    i_f: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: f64,
    /// Number of commutator terms ℓ.
    #[arg(long)]
    order: usize,
    /// Also print matched drive amplitudes for this reference frequency.
    #[arg(long)]
    omega0: Option<f64>,
    /// Write the coefficient table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn need<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("--{name} is required for this model")))
}

impl AgpArgs {
    fn model_spec(&self) -> Result<ModelSpec> {
        let boundary = |default| match self.boundary {
            Some(BoundaryArg::Periodic) => Boundary::Periodic,
            Some(BoundaryArg::Open) => Boundary::Open,
            None => default,
        };
        Ok(match self.model {
            ModelKind::TwoQubitXxzz => ModelSpec::TwoQubitXxzz {
                j: need(self.j, "j")?,
                h_z: need(self.h_z, "h-z")?,
            },
            ModelKind::ThreeLevel => ModelSpec::ThreeLevel {
                j: need(self.j, "j")?,
                h: need(self.h, "h")?,
            },
            ModelKind::IsingUniform => ModelSpec::IsingUniform {
                l: need(self.sites, "sites")?,
                j: need(self.j, "j")?,
                h_x: need(self.h_x, "h-x")?,
                h_z: need(self.h_z, "h-z")?,
                boundary: boundary(Boundary::Periodic),
            },
            ModelKind::TrapIsing => ModelSpec::TrapIsing {
                l: need(self.sites, "sites")?,
                j: need(self.j, "j")?,
                h_x: need(self.h_x, "h-x")?,
                h_z: need(self.h_z, "h-z")?,
                trap: TrapSpec {
                    h_t: need(self.h_t, "h-t")?,
                    w_t: need(self.w_t, "w-t")?,
                    i0: need(self.i0, "i0")?,
                    i_f: need(self.i_f, "i-f")?,
                },
                boundary: boundary(Boundary::Open),
            },
        })
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_VAR}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn report(manifest: &Manifest, dir: &std::path::Path) {
    for r in &manifest.runs {
        println!(
            "{:<12} F² = {:.10}  1-F² = {:.3e}  absorbed = {:.6e}  ({} steps, {:.1} s)",
            r.label, r.final_fidelity, r.final_infidelity, r.final_absorbed, r.steps, r.runtime_s
        );
    }
    println!("wrote {} files to {}", manifest.files.len(), dir.display());
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Figure {
            name,
            out,
            full_scale,
            force,
        } => {
            let fig: Figure = name.parse()?;
            let dir = out.unwrap_or_else(|| default_figure_dir(fig));
            let manifest = run_figure(fig, &dir, FigureOptions { full_scale, force })?;
            report(&manifest, &dir);
        }
        Command::Run { config, out, force } => {
            let manifest = run_config(&config, out.as_deref(), force)?;
            let dir = out.unwrap_or_else(|| {
                manifest.parameters["output_dir"]
                    .as_str()
                    .map(PathBuf::from)
                    .unwrap_or_default()
            });
            report(&manifest, &dir);
        }
        Command::Agp(args) => {
            let spec = args.model_spec()?;
            let r = solve_agp_cli(&spec, args.lambda, args.order, args.omega0)?;
            print!("{}", r.render());
            if let Some(path) = &args.csv {
                let f = std::fs::File::create(path).map_err(|e| Error::from(e).context(&path.display().to_string()))?;
                write_alpha_csv(std::io::BufWriter::new(f), std::slice::from_ref(&r.coefficients))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("cdfloquet").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn agp_arguments_accept_negative_couplings() {
        let cli = parse(&["agp", "--model", "two-qubit-xxzz", "--j", "-1", "--h-z", "5", "--lambda", "0", "--order", "1"]);
        let Command::Agp(args) = cli.command else { panic!("expected agp") };
        assert_eq!(args.model_spec().unwrap(), ModelSpec::TwoQubitXxzz { j: -1.0, h_z: 5.0 });
    }

    #[test]
    fn missing_model_parameter_is_a_usage_error() {
        let cli = parse(&["agp", "--model", "trap-ising", "--sites", "8", "--j", "-1", "--lambda", "0", "--order", "1"]);
        let e = run(cli).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--h-x"));
    }

    #[test]
    fn zero_order_exits_with_usage_code() {
        let cli = parse(&["agp", "--model", "three-level", "--j", "1", "--h", "2", "--lambda", "0", "--order", "0"]);
        assert_eq!(run(cli).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn trap_boundary_defaults_to_open() {
        let cli = parse(&[
            "agp", "--model", "trap-ising", "--sites", "6", "--j", "-1", "--h-x", "0.8", "--h-z", "0.9", "--h-t", "8", "--w-t",
            "1", "--i0", "2", "--i-f", "5", "--lambda", "0.5", "--order", "2",
        ]);
        let Command::Agp(args) = cli.command else { panic!("expected agp") };
        assert!(matches!(args.model_spec().unwrap(), ModelSpec::TrapIsing { boundary: Boundary::Open, .. }));
    }

    #[test]
    fn figure_refuses_existing_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().to_str().unwrap();
        let e = run(parse(&["figure", "fig1", "--out", out])).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        run(parse(&["figure", "fig1", "--out", out, "--force"])).unwrap();
        assert!(tmp.path().join("fig1_prefactor.csv").exists());
    }

    #[test]
    fn agp_writes_csv() {
        let tmp = tempfile::tempdir().unwrap();
        let csv = tmp.path().join("alpha.csv");
        let cli = parse(&[
            "agp", "--model", "ising-uniform", "--sites", "4", "--j", "1", "--h-x", "0.3", "--h-z", "0.3", "--lambda", "1",
            "--order", "2", "--csv", csv.to_str().unwrap(),
        ]);
        run(cli).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().count(), 3);
    }
}
