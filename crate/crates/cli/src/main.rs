//! `fluxon`: evaluate the singular expansion near a surface fluxon and run
//! the verification suites from the command line.
//!
//! Exit codes: 0 success, 1 failed check or runtime error, 2 usage error.

mod commands;
mod config;
mod output;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fluxon::geometry::BuiltinSurface;
use fluxon::verification::{GridSpec, Suite};
use fluxon::LocalPoint;

use crate::config::{CommandConfig, Format, Phi0Mode, ProfileKind, RunConfig, Tolerances};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "fluxon", version, about = "Singular potential and field near a point fluxon on a curved boundary")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Boundary surface, e.g. `sphere:a=1`, `plane`, `paraboloid:kx=1,ky=-1`,
    /// `cylinder:a=2`, `biquadratic:kx=1,ky=0.5,c30=0.1`.
    #[arg(long, global = true, default_value = "sphere:a=1", value_parser = parse_surface)]
    surface: BuiltinSurface,
    /// Sign of the flux, +1 or -1.
    #[arg(long, global = true, default_value_t = 1, allow_negative_numbers = true)]
    nu: i32,
    /// Flux quantum in dimensionless mode.
    #[arg(long, global = true)]
    phi0: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Units::Dimensionless)]
    units: Units,
    /// Gauge length of the logarithm; defaults to 2a on a sphere and 1 otherwise.
    #[arg(long, global = true)]
    d: Option<f64>,
    /// Scale of the standard verification grid; defaults to the curvature radius.
    #[arg(long, global = true)]
    grid_scale: Option<f64>,
    #[arg(long, global = true, default_value_t = Tolerances::default().rel_tol)]
    rel_tol: f64,
    #[arg(long, global = true, default_value_t = Tolerances::default().abs_tol)]
    abs_tol: f64,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Output file; stdout when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Singular potential terms at points of the local frame.
    Eval {
        #[command(flatten)]
        points: Points,
    },
    /// Singular field in the local spherical basis.
    Field {
        #[command(flatten)]
        points: Points,
    },
    /// Run one verification suite.
    Check {
        #[arg(value_parser = parse_suite)]
        suite: Suite,
    },
    /// Exact sphere potential against the singular expansion along a ray.
    SphereCompare {
        /// Closest radius, in units of the sphere radius.
        #[arg(long, default_value_t = 1e-6)]
        r_min: f64,
        /// Farthest radius, in units of the sphere radius.
        #[arg(long, default_value_t = 1e-2)]
        r_max: f64,
        #[arg(long, default_value_t = 9)]
        n: usize,
        /// Local polar angle of the ray, in (pi/2, pi].
        #[arg(long, default_value_t = 0.75 * PI)]
        theta: f64,
        #[arg(long, default_value_t = 0.3)]
        phi: f64,
        /// Curvature used by the singular terms instead of 1/a.
        #[arg(long)]
        curvature: Option<f64>,
    },
    /// Potential of a charge smeared over a finite core.
    Smear {
        /// Core width.
        #[arg(long)]
        width: f64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Gaussian)]
        profile: ProfileArg,
        #[arg(long = "point", value_parser = parse_point, allow_hyphen_values = true)]
        points: Vec<LocalPoint>,
        /// Fit a/w + b ln w + c to the value at the origin over a width sweep.
        #[arg(long)]
        cutoff_fit: bool,
    },
    /// Run a configuration previously written with `--print-config`.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Points {
    /// Point `x,y,z` in the local frame (z <= 0); repeatable.
    #[arg(long = "point", required = true, value_parser = parse_point, allow_hyphen_values = true)]
    points: Vec<LocalPoint>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Units {
    Dimensionless,
    Si,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Gaussian,
    Tophat,
}

fn parse_surface(s: &str) -> Result<BuiltinSurface, String> {
    s.parse().map_err(|e: fluxon::Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse::<Suite>()
        .map_err(|_| format!("expected one of {}", Suite::ALL.map(|s| s.name()).join(", ")))
}

fn parse_point(s: &str) -> Result<LocalPoint, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y, z] = parts.as_slice() else {
        return Err(format!("expected x,y,z, got `{s}`"));
    };
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    Ok(LocalPoint::new(num(x)?, num(y)?, num(z)?))
}

fn build_config(cli: Cli) -> Result<RunConfig, String> {
    let c = cli.common;
    let phi0 = match (c.units, c.phi0) {
        (Units::Si, Some(_)) => return Err("--phi0 cannot be combined with --units si".into()),
        (Units::Si, None) => Phi0Mode::Si,
        (Units::Dimensionless, phi0) => Phi0Mode::Dimensionless { phi0: phi0.unwrap_or(1.0) },
    };
    let command = match cli.command {
        Cmd::Eval { points } => CommandConfig::Eval { points: points.points },
        Cmd::Field { points } => CommandConfig::Field { points: points.points },
        Cmd::Check { suite } => CommandConfig::Check { suite },
        Cmd::SphereCompare { r_min, r_max, n, theta, phi, curvature } => {
            CommandConfig::SphereCompare { r_min, r_max, n, theta, phi, curvature }
        }
        Cmd::Smear { width, profile, points, cutoff_fit } => CommandConfig::Smear {
            width,
            profile: match profile {
                ProfileArg::Gaussian => ProfileKind::Gaussian,
                ProfileArg::Tophat => ProfileKind::Tophat,
            },
            points,
            cutoff_fit,
        },
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            return serde_json::from_str(&text).map_err(|e| format!("{}: {e}", config.display()));
        }
    };
    if let Some(l) = c.grid_scale {
        if !(l > 0.0 && l.is_finite()) {
            return Err(format!("--grid-scale must be positive, got {l}"));
        }
    }
    Ok(RunConfig {
        command,
        surface: c.surface,
        nu: c.nu,
        phi0,
        d: c.d,
        grid: c.grid_scale.map(GridSpec::standard),
        tolerances: Tolerances { rel_tol: c.rel_tol, abs_tol: c.abs_tol },
        output: c.output,
        format: match c.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
    })
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("FLUXON_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("FLUXON_THREADS must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let print_config = cli.common.print_config;
    let cfg = match build_config(cli) {
        Ok(cfg) => cfg,
        Err(e) => return usage(e),
    };
    if let Err(e) = cfg.resolve() {
        return usage(e);
    }
    if let Err(e) = configure_threads() {
        return usage(e);
    }
    if print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return ExitCode::SUCCESS;
    }
    let outcome = match commands::execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILED);
        }
    };
    let written = outcome
        .table
        .render(cfg.format)
        .and_then(|bytes| output::emit(&bytes, cfg.output.as_deref()));
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(EXIT_FAILED);
    }
    match outcome.failure {
        Some(msg) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_FAILED)
        }
        None => ExitCode::SUCCESS,
    }
}
