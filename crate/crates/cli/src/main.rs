//! `mlz`: command-line front end for the t/τ-family workbench.
//!
//! Exit codes: 0 success or passing check, 1 failed check, 2 invalid input.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlz_core::integrability::{
    linspace, scan_parameter, solve_partner_with, verify_pair, zero_area_check, DEFAULT_SOLVE_TOL,
};
use mlz_core::io::{to_json, ModelFile};
use mlz_core::matrix::DEFAULT_RANK_TOL;
use mlz_core::models::{
    build_bowtie, build_demkov_osherov, build_fermion, build_h5, build_h6, build_lz2,
    build_tavis_cummings, DiabaticModel, TtauPartner,
};
use mlz_core::propagator::{transition_matrix, DEFAULT_RK_TOL, DEFAULT_T_LIST};
use mlz_core::semiclassical::{compare_with_numerics, predict_probabilities};
use mlz_core::spectrum::{crossing_count_check, eigenflow, ExactCrossingOptions, DEFAULT_SAMPLES};
use mlz_core::MlzError;

#[derive(Parser)]
#[command(
    name = "mlz",
    version,
    about = "Multistate Landau-Zener t/tau-family workbench"
)]
struct Cli {
    /// Write the report to this file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a catalog model and emit it as a model file.
    Catalog {
        #[command(subcommand)]
        model: CatalogModel,
    },
    /// Check the commuting-partner conditions of a model file.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Solve the partner conditions as a linear system.
    Solve {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SOLVE_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
    /// Solver residual along one model parameter.
    Scan {
        file: PathBuf,
        /// `tau`, `slope[i]`, `tau_slope[i]` or `coupling[i][j]` (0-based).
        #[arg(long)]
        param: String,
        /// `a:b:steps`.
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long, default_value_t = DEFAULT_SOLVE_TOL)]
        tol: f64,
    },
    /// Adiabatic eigenvalues on a time grid, as CSV.
    Spectrum {
        file: PathBuf,
        #[command(flatten)]
        grid: Grid,
    },
    /// Exact crossings compared with the uncoupled diabatic crossings.
    Crossings {
        file: PathBuf,
        #[command(flatten)]
        grid: Grid,
        /// Absolute gap below which a minimum is an exact crossing.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Numerical transition probabilities.
    Propagate {
        file: PathBuf,
        #[command(flatten)]
        run: Run,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Chronological product of pairwise Landau-Zener blocks.
    Predict {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Prediction against propagation; passes when the largest deviation is below `--tol`.
    Compare {
        file: PathBuf,
        #[command(flatten)]
        run: Run,
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
    },
    /// Cycle sums and per-edge partner checks on the coupling graph.
    ZeroArea {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Args)]
struct Grid {
    /// `a:b`.
    #[arg(long, allow_hyphen_values = true, default_value = "-6:6")]
    window: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Args)]
struct Run {
    /// Comma-separated increasing horizons; the evolution runs over `[-T, T]`.
    #[arg(long = "T", value_delimiter = ',', allow_hyphen_values = true, default_values_t = DEFAULT_T_LIST.to_vec())]
    horizons: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_RK_TOL)]
    rk_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
#[command(rename_all = "kebab-case")]
enum CatalogModel {
    H5 {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        e1: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        e2: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, default_value_t = 0.15, allow_negative_numbers = true)]
        g1: f64,
        #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
        g2: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
    H6 {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        e1: f64,
        #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
        e2: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, default_value_t = 0.105, allow_negative_numbers = true)]
        g: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
    DemkovOsherov {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-1.0, 0.0, 1.0])]
        intercepts: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.1, 0.2, 0.3])]
        couplings: Vec<f64>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
    Bowtie {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, -1.0, 2.0])]
        beta: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.2, 0.3, 0.25])]
        g: Vec<f64>,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
    TavisCummings {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, 2.0])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        g: f64,
        /// Excitation number.
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
    Fermion {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [1.0, 2.0, 3.0])]
        e: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.1, 0.2, 0.3])]
        g: Vec<f64>,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        x: f64,
        /// Particle number.
        #[arg(long, default_value_t = 2)]
        particles: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
    Lz2 {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 0.105, allow_negative_numbers = true)]
        g: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        tau: f64,
    },
}

enum Failure {
    Invalid(String),
}

impl From<MlzError> for Failure {
    fn from(e: MlzError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Invalid(msg.into()))
}

/// Report text and whether the command's check passed.
type Outcome = Result<(String, bool), Failure>;

fn load(path: &Path) -> Result<(DiabaticModel, Option<TtauPartner>), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(ModelFile::parse(&text)?.to_model()?)
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("--{name} must be positive, got {v}"))
    }
}

fn parse_window(s: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b] = parts.as_slice() else {
        return invalid(format!("window must be a:b, got {s}"));
    };
    let (a, b) = match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return invalid(format!("window must be a:b, got {s}")),
    };
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return invalid(format!("window needs finite a < b, got {s}"));
    }
    Ok((a, b))
}

fn parse_range(s: &str) -> Result<Vec<f64>, Failure> {
    let Some((window, steps)) = s.rsplit_once(':') else {
        return invalid(format!("range must be a:b:steps, got {s}"));
    };
    let (a, b) = parse_window(window)?;
    match steps.trim().parse::<usize>() {
        Ok(n) if n >= 2 => Ok(linspace(a, b, n)),
        _ => invalid(format!("range needs at least 2 steps, got {steps}")),
    }
}

fn grid_options(grid: &Grid, threshold: Option<f64>) -> Result<ExactCrossingOptions, Failure> {
    if grid.samples < 3 {
        return invalid(format!(
            "--samples must be at least 3, got {}",
            grid.samples
        ));
    }
    if let Some(t) = threshold {
        positive("threshold", t)?;
    }
    Ok(ExactCrossingOptions {
        window: parse_window(&grid.window)?,
        samples: grid.samples,
        threshold,
    })
}

fn check_run(run: &Run) -> Result<(), Failure> {
    positive("rk-tol", run.rk_tol)?;
    for &t in &run.horizons {
        positive("T", t)?;
    }
    Ok(())
}

enum Param {
    Tau,
    Slope(usize),
    TauSlope(usize),
    Coupling(usize, usize),
}

fn parse_param(s: &str, n: usize) -> Result<Param, Failure> {
    let bad = || {
        Failure::Invalid(format!(
            "unknown parameter {s}; use tau, slope[i], tau_slope[i] or coupling[i][j]"
        ))
    };
    let index = |text: &str| -> Result<usize, Failure> {
        let k: usize = text.parse().map_err(|_| bad())?;
        if k < n {
            Ok(k)
        } else {
            Err(Failure::Invalid(format!(
                "index {k} out of range for n = {n}"
            )))
        }
    };
    if s == "tau" {
        return Ok(Param::Tau);
    }
    let (name, rest) = s.split_once('[').ok_or_else(bad)?;
    let rest = rest.strip_suffix(']').ok_or_else(bad)?;
    match name {
        "slope" => Ok(Param::Slope(index(rest)?)),
        "tau_slope" => Ok(Param::TauSlope(index(rest)?)),
        "coupling" => {
            let (i, j) = rest.split_once("][").ok_or_else(bad)?;
            let (i, j) = (index(i)?, index(j)?);
            if i == j {
                return invalid("scan only off-diagonal couplings");
            }
            Ok(Param::Coupling(i, j))
        }
        _ => Err(bad()),
    }
}

fn with_param(model: &DiabaticModel, param: &Param, v: f64) -> mlz_core::Result<DiabaticModel> {
    let mut slope = model.slope().to_vec();
    let mut tau_slope = model.tau_slope().to_vec();
    let mut coupling = model.coupling().clone();
    let mut tau = model.tau();
    match *param {
        Param::Tau => tau = v,
        Param::Slope(k) => slope[k] = v,
        Param::TauSlope(k) => tau_slope[k] = v,
        Param::Coupling(i, j) => coupling.set_sym(i, j, v),
    }
    DiabaticModel::new(slope, tau_slope, coupling, tau)
}

fn catalog(model: &CatalogModel) -> Outcome {
    let file = match model {
        CatalogModel::H5 {
            e1,
            e2,
            b,
            g1,
            g2,
            tau,
        } => {
            let (m, p) = build_h5(*e1, *e2, *b, *g1, *g2, *tau)?;
            ModelFile::from_model(&m, Some(&p))
        }
        CatalogModel::H6 { e1, e2, b, g, tau } => {
            ModelFile::from_model(&build_h6(*e1, *e2, *b, *g, *tau)?, None)
        }
        CatalogModel::DemkovOsherov {
            intercepts,
            couplings,
            tau,
        } => ModelFile::from_model(&build_demkov_osherov(intercepts, couplings, *tau)?, None),
        CatalogModel::Bowtie { beta, g, tau } => {
            let (m, p) = build_bowtie(beta, g, *tau)?;
            ModelFile::from_model(&m, Some(&p))
        }
        CatalogModel::TavisCummings { eps, g, m, tau } => {
            let (model, p, _) = build_tavis_cummings(eps, *g, *m, *tau)?;
            ModelFile::from_model(&model, Some(&p))
        }
        CatalogModel::Fermion {
            e,
            g,
            x,
            particles,
            tau,
        } => {
            let f = build_fermion(e, g, *x, *particles, *tau)?;
            ModelFile::from_model(&f.model, Some(&f.partner))
        }
        CatalogModel::Lz2 { beta, g, tau } => {
            ModelFile::from_model(&build_lz2(*beta, *g, *tau)?, None)
        }
    };
    Ok((file.to_json()?, true))
}

fn run(command: &Command) -> Outcome {
    match command {
        Command::Catalog { model } => catalog(model),
        Command::Verify { file, tol } => {
            positive("tol", *tol)?;
            let (model, partner) = load(file)?;
            let Some(partner) = partner else {
                return invalid(format!("{} has no partner to verify", file.display()));
            };
            let r = verify_pair(&model, &partner, *tol)?;
            Ok((to_json(&r)?, r.pass))
        }
        Command::Solve {
            file,
            tol,
            rank_tol,
        } => {
            positive("tol", *tol)?;
            positive("rank-tol", *rank_tol)?;
            let (model, _) = load(file)?;
            let r = solve_partner_with(&model, *tol, *rank_tol)?;
            Ok((to_json(&r)?, r.feasible))
        }
        Command::Scan {
            file,
            param,
            range,
            tol,
        } => {
            positive("tol", *tol)?;
            let (model, _) = load(file)?;
            let p = parse_param(param, model.n())?;
            let grid = parse_range(range)?;
            let r = scan_parameter(|v| with_param(&model, &p, v), param, &grid, *tol)?;
            Ok((to_json(&r)?, true))
        }
        Command::Spectrum { file, grid } => {
            let opts = grid_options(grid, None)?;
            let (model, _) = load(file)?;
            let flow = eigenflow(&model, opts.window.0, opts.window.1, opts.samples)?;
            Ok((flow.to_csv(), true))
        }
        Command::Crossings {
            file,
            grid,
            threshold,
        } => {
            let opts = grid_options(grid, *threshold)?;
            let (model, _) = load(file)?;
            let r = crossing_count_check(&model, &opts)?;
            Ok((to_json(&r)?, r.matches))
        }
        Command::Propagate { file, run, format } => {
            check_run(run)?;
            let (model, _) = load(file)?;
            let r = transition_matrix(&model, &run.horizons, run.rk_tol)?;
            match format {
                Format::Json => Ok((to_json(&r)?, true)),
                Format::Csv => Ok((r.probability.to_csv(), true)),
            }
        }
        Command::Predict { file, format } => {
            let (model, _) = load(file)?;
            let r = predict_probabilities(&model)?;
            match format {
                Format::Json => Ok((to_json(&r)?, true)),
                Format::Csv => Ok((r.probability.to_csv(), true)),
            }
        }
        Command::Compare { file, run, tol } => {
            check_run(run)?;
            positive("tol", *tol)?;
            let (model, _) = load(file)?;
            let r = compare_with_numerics(&model, &run.horizons, run.rk_tol)?;
            eprintln!("max |P_pred - P_num| = {:.6e}", r.max_deviation);
            Ok((to_json(&r)?, r.max_deviation < *tol))
        }
        Command::ZeroArea { file, tol } => {
            positive("tol", *tol)?;
            let (model, partner) = load(file)?;
            let r = zero_area_check(&model, partner.as_ref(), *tol)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            Ok((to_json(&r)?, r.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok((report, pass)) => {
            match &cli.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, &report) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => {
                    let mut stdout = io::stdout().lock();
                    if let Err(e) = stdout
                        .write_all(report.as_bytes())
                        .and_then(|()| stdout.flush())
                    {
                        if e.kind() != io::ErrorKind::BrokenPipe {
                            eprintln!("error: {e}");
                            return ExitCode::from(2);
                        }
                    }
                }
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
