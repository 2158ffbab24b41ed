//! Command-line orchestration: configuration loading, the `kinreg`
//! subcommands, and the output conventions they share.
//!
//! Conventions, uniform across commands:
//!
//! * every run resolves a full configuration (schema defaults, then the
//!   `--config` file, then flags) and stamps its SHA-256 plus the schema
//!   version into every output — CSVs as trailing `config_hash` /
//!   `schema_version` columns, snapshot files in their metadata trailer.
//!   Reruns of the same configuration produce byte-identical files;
//! * all files are written atomically (temp file in the target directory,
//!   then rename), so an interrupted run never leaves partial outputs;
//! * diagnostics go to stderr as `error code=<code> <message>`; the process
//!   exits 0 on success, 1 for validation problems (bad flags, bad
//!   configuration, bad input files), 2 for runtime failures (instability,
//!   non-finite values, I/O);
//! * `KINREG_THREADS` caps the size of the worker pool.

pub mod config;
pub mod sweep;

pub use config::{AlphaSource, ExperimentConfig, OutputFormats, SCHEMA_VERSION};
pub use sweep::{exponent_row, power_law_study, run_sweep, StudyRow};

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::coeffs::{CoefficientModel, Interval};
use crate::error::{Error, Result};
use crate::kinetic::{
    chi_density, dissipation_field, velocity_average, ChiVariant, RhoKind, DEFAULT_N_LAMBDA,
};
use crate::nondeg::{estimate_alpha, exponents, exponents_exact, ExactExponents};
use crate::regularity::{spacetime_regularity, SpaceTimeOptions};
use crate::solver::{
    atomic_write, read_snapshots, run, write_snapshots, GridSpec, RunOptions, SolutionField,
};
use crate::spectral::for_each_index;
use config::{format_ratio, parse_ratio, ratio_f64};

#[derive(Parser)]
#[command(
    name = "kinreg",
    version,
    about = "Numerical laboratory for degenerate convection-diffusion equations with stochastic forcing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form regularity exponents q*(α, d) and s*(α, d), in exact rational arithmetic
    Exponents(ExponentsArgs),
    /// Measure the near-degenerate λ-sets of the kinetic symbol over a δ-sweep and fit α
    Nondeg(NondegArgs),
    /// Integrate the configured model; write snapshots, summaries, and ensemble functionals
    Solve(SolveArgs),
    /// Kinetic χ-density averages and the parabolic dissipation of stored snapshots
    Kinetic(KineticArgs),
    /// Dyadic block-norm decay of stored snapshots, with a smoothness verdict
    Regularity(RegularityArgs),
    /// Study grid over power-law pairs (l, n): fit α, predict exponents, solve, verdict
    Sweep(SweepArgs),
    /// Audit a configuration file and report every problem it has
    Validate(ValidateArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file; schema defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExponentsArgs {
    /// Non-degeneracy exponent α in (0, 1], as p/q or a plain decimal
    #[arg(long)]
    alpha: String,
    /// Spatial dimension
    #[arg(long)]
    d: usize,
    /// Noise-free setting: doubles the usable exponent and reports 2s*
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct NondegArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Model shorthand: burgers, powerlaw:L,N, heat:C, or table:PATH
    /// (defaults to the configured model)
    #[arg(long)]
    model: Option<String>,
    /// Smallest δ of the sweep (overrides nondeg.delta_min)
    #[arg(long)]
    delta_min: Option<f64>,
    /// Largest δ of the sweep (overrides nondeg.delta_max)
    #[arg(long)]
    delta_max: Option<f64>,
    /// Number of δ points, log-spaced (overrides nondeg.delta_points)
    #[arg(long)]
    delta_points: Option<usize>,
    /// Unit frequencies sampled per δ (overrides nondeg.sphere_samples)
    #[arg(long)]
    sphere_samples: Option<usize>,
    /// λ-cells resolving the state interval (overrides nondeg.lambda_grid)
    #[arg(long)]
    lambda_grid: Option<usize>,
    /// Smallness condition: squared or mixed (overrides nondeg.variant)
    #[arg(long)]
    variant: Option<String>,
    /// Sphere-lattice seed (overrides nondeg.seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Stochastic sample paths to integrate (overrides output.paths)
    #[arg(long)]
    paths: Option<usize>,
    /// Keep every stride-th step; 0 picks about 32 snapshots (overrides output.stride)
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Args)]
struct KineticArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Snapshot file to analyze
    #[arg(long)]
    input: PathBuf,
    /// Averaging weight ρ(λ): one, poly2, or bump
    #[arg(long, default_value = "one")]
    rho: String,
    /// Density variant: plus, minus, or chi
    #[arg(long, default_value = "chi")]
    variant: String,
    /// λ-cells resolving the state interval
    #[arg(long, default_value_t = DEFAULT_N_LAMBDA)]
    n_lambda: usize,
}

#[derive(Args)]
struct RegularityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Snapshot file(s); several files form an ensemble over a shared grid
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Integrability exponent of the block norms (overrides regularity.q)
    #[arg(long)]
    q: Option<f64>,
    /// Axes to analyze: space, time, or spacetime (overrides regularity.mode)
    #[arg(long)]
    mode: Option<String>,
    /// Either `fit` (fit α from the model's δ-sweep) or a fixed rational α
    /// (overrides regularity.alpha)
    #[arg(long)]
    alpha: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Power-law flux exponents, e.g. 1,2
    #[arg(long)]
    l: String,
    /// Power-law diffusion exponents, e.g. 1,2
    #[arg(long)]
    n: String,
}

#[derive(Args)]
struct ValidateArgs {
    /// Configuration file to audit
    #[arg(long)]
    config: PathBuf,
}

/// Run the command line and return the process exit code, printing any
/// diagnostic to stderr in the machine-readable `error code=<code>` form.
pub fn cli_main() -> i32 {
    match cli_dispatch(std::env::args_os()) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error code={} {err}", err.code_name());
            err.exit_code()
        }
    }
}

/// Parse `argv` and run the selected subcommand.
pub fn cli_dispatch<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_thread_pool()?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            err.print()?;
            return Ok(());
        }
        Err(err) => return Err(Error::InvalidArgument(err.to_string())),
    };
    match cli.command {
        Command::Exponents(args) => run_exponents(&args),
        Command::Nondeg(args) => run_nondeg(&args),
        Command::Solve(args) => run_solve(&args),
        Command::Kinetic(args) => run_kinetic(&args),
        Command::Regularity(args) => run_regularity(&args),
        Command::Sweep(args) => run_sweep_command(&args),
        Command::Validate(args) => run_validate(&args),
    }
}

/// Honor `KINREG_THREADS`. Installing the global pool can only happen once
/// per process; later calls (tests, repeated dispatch) keep the first pool.
fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("KINREG_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Error::InvalidArgument(format!(
            "KINREG_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    if threads == 0 {
        return Err(Error::InvalidArgument(
            "KINREG_THREADS must be at least 1".to_string(),
        ));
    }
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config.schema_version()?;
    if let Some(dir) = &common.output {
        config.set("output.dir", dir.display().to_string())?;
    }
    Ok(config)
}

/// Write a CSV atomically. Every row must match the header width.
fn write_csv<S: AsRef<str>>(path: &Path, header: &[S], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))?;
    atomic_write(path, &bytes)
}

/// Shortest representation that round-trips the value exactly.
fn fmt_exact(v: f64) -> String {
    format!("{v:?}")
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt6_opt(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_else(|| "nan".to_string())
}

// -- exponents --------------------------------------------------------------

fn render_exponents(e: &ExactExponents) -> String {
    let mut line = format!(
        "q_star={} (≈{}) s_star={}",
        format_ratio(e.q_star),
        fmt6(ratio_f64(e.q_star)),
        format_ratio(e.s_star),
    );
    if e.deterministic {
        line.push_str(&format!(" two_s_star={}", format_ratio(e.effective_s())));
    }
    line
}

fn run_exponents(args: &ExponentsArgs) -> Result<()> {
    let alpha = parse_ratio(&args.alpha)?;
    if alpha <= num_rational::Ratio::from_integer(0) || alpha > num_rational::Ratio::from_integer(1)
    {
        return Err(Error::InvalidArgument(format!(
            "--alpha must lie in (0, 1], got {}",
            format_ratio(alpha)
        )));
    }
    let exact = exponents_exact(alpha, args.d, args.deterministic)?;
    println!("{}", render_exponents(&exact));
    Ok(())
}

// -- nondeg -----------------------------------------------------------------

/// Translate a `--model` shorthand into configuration keys, so the run's
/// hash reflects the model actually measured.
fn apply_model_flag(config: &mut ExperimentConfig, text: &str) -> Result<()> {
    let bad = || {
        Error::InvalidArgument(format!(
            "cannot parse --model {text:?}; expected burgers, powerlaw:L,N, heat:C, or table:PATH"
        ))
    };
    let (family, rest) = match text.split_once(':') {
        Some((f, r)) => (f, Some(r)),
        None => (text, None),
    };
    match (family, rest) {
        ("burgers", None) => config.set("model.family", "burgers"),
        ("powerlaw", Some(pair)) => {
            let (l, n) = pair.split_once(',').ok_or_else(bad)?;
            let l: u32 = l.trim().parse().map_err(|_| bad())?;
            let n: u32 = n.trim().parse().map_err(|_| bad())?;
            config.set("model.family", "powerlaw")?;
            config.set("model.l", l.to_string())?;
            config.set("model.n", n.to_string())
        }
        ("heat", Some(c)) => {
            let c: f64 = c.trim().parse().map_err(|_| bad())?;
            config.set("model.family", "heat")?;
            config.set("model.c", fmt_exact(c))
        }
        ("table", Some(path)) if !path.is_empty() => {
            config.set("model.family", "table")?;
            config.set("model.table_path", path)
        }
        _ => Err(bad()),
    }
}

fn run_nondeg(args: &NondegArgs) -> Result<()> {
    let mut config = load_config(&args.common)?;
    if let Some(text) = &args.model {
        apply_model_flag(&mut config, text)?;
    }
    if let Some(v) = args.delta_min {
        config.set("nondeg.delta_min", fmt_exact(v))?;
    }
    if let Some(v) = args.delta_max {
        config.set("nondeg.delta_max", fmt_exact(v))?;
    }
    if let Some(v) = args.delta_points {
        config.set("nondeg.delta_points", v.to_string())?;
    }
    if let Some(v) = args.sphere_samples {
        config.set("nondeg.sphere_samples", v.to_string())?;
    }
    if let Some(v) = args.lambda_grid {
        config.set("nondeg.lambda_grid", v.to_string())?;
    }
    if let Some(v) = &args.variant {
        config.set("nondeg.variant", v)?;
    }
    if let Some(v) = args.seed {
        config.set("nondeg.seed", v.to_string())?;
    }

    let model = config.base_model()?;
    let opts = config.alpha_options()?;
    let fit = estimate_alpha(&model, &opts)?;

    if config.output_formats()?.reports {
        let hash = config.hash();
        let rows: Vec<Vec<String>> = fit
            .delta_grid
            .iter()
            .zip(&fit.sup_measures)
            .map(|(&delta, &sup)| {
                vec![
                    fmt_exact(delta),
                    fmt_exact(sup),
                    hash.clone(),
                    SCHEMA_VERSION.to_string(),
                ]
            })
            .collect();
        let path = config.output_dir().join("nondeg.csv");
        write_csv(
            &path,
            &["delta", "sup_measure", "config_hash", "schema_version"],
            &rows,
        )?;
        println!("wrote {}", path.display());
    }
    println!(
        "alpha={} r2={} flag={}",
        fmt6_opt(fit.alpha),
        fmt6(fit.r_squared),
        fit.flag()
    );
    Ok(())
}

// -- solve ------------------------------------------------------------------

/// Metadata stamped into snapshot trailers: provenance plus the entire
/// resolved configuration under `config.*` keys, so a snapshot file is
/// self-describing.
fn snapshot_metadata(config: &ExperimentConfig, hash: &str) -> Vec<(String, String)> {
    let mut extra = vec![
        ("config_hash".to_string(), hash.to_string()),
        ("schema_version".to_string(), SCHEMA_VERSION.to_string()),
    ];
    for (k, v) in config.resolved() {
        extra.push((format!("config.{k}"), v.clone()));
    }
    extra
}

const SUMMARY_HEADER: [&str; 7] = [
    "t",
    "mass",
    "min",
    "max",
    "l2",
    "config_hash",
    "schema_version",
];

fn run_solve(args: &SolveArgs) -> Result<()> {
    let mut config = load_config(&args.common)?;
    if let Some(p) = args.paths {
        config.set("output.paths", p.to_string())?;
    }
    if let Some(s) = args.stride {
        config.set("output.stride", s.to_string())?;
    }

    let model = config.run_model()?;
    let grid = config.grid()?;
    if model.dimension() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: model.dimension(),
            got: grid.dimension(),
            context: "model vs grid dimension",
        });
    }
    let init = config.initial_data()?;
    let noise = config.noise()?;
    let formats = config.output_formats()?;
    let stride = config.output_stride()?;
    // without forcing, every path is the same trajectory — run it once
    let paths = if noise.is_some() {
        config.output_paths()?
    } else {
        1
    };
    let dir = config.output_dir();
    let hash = config.hash();

    let solutions: Vec<SolutionField> = (0..paths as u64)
        .into_par_iter()
        .map(|path_id| {
            run(
                &model,
                &grid,
                &init,
                noise.as_ref(),
                &RunOptions { stride, path_id },
            )
        })
        .collect::<Result<_>>()?;

    let metadata = snapshot_metadata(&config, &hash);
    let metadata_refs: Vec<(&str, String)> = metadata
        .iter()
        .map(|(k, v)| (k.as_str(), v.clone()))
        .collect();
    let mut ensemble_rows: Vec<Vec<String>> = Vec::new();
    for solution in &solutions {
        let id = solution.path_id();
        if formats.snapshots {
            let path = dir.join(format!("path_{id:03}.krg"));
            write_snapshots(&path, solution, &metadata_refs)?;
            println!("wrote {}", path.display());
        }
        let summary = solution.summary();
        if formats.reports {
            let rows: Vec<Vec<String>> = summary
                .iter()
                .map(|row| {
                    vec![
                        fmt_exact(row.t),
                        fmt_exact(row.mass),
                        fmt_exact(row.min),
                        fmt_exact(row.max),
                        fmt_exact(row.l2),
                        hash.clone(),
                        SCHEMA_VERSION.to_string(),
                    ]
                })
                .collect();
            let path = dir.join(format!("summary_{id:03}.csv"));
            write_csv(&path, &SUMMARY_HEADER, &rows)?;
            println!("wrote {}", path.display());
        }
        for row in &summary {
            ensemble_rows.push(vec![
                id.to_string(),
                fmt_exact(row.t),
                fmt_exact(row.mass),
                fmt_exact(row.min),
                fmt_exact(row.max),
                fmt_exact(row.l2),
                hash.clone(),
                SCHEMA_VERSION.to_string(),
            ]);
        }
    }
    if formats.reports && noise.is_some() {
        let path = dir.join("ensemble.csv");
        write_csv(
            &path,
            &[
                "path_id",
                "t",
                "mass",
                "min",
                "max",
                "l2",
                "config_hash",
                "schema_version",
            ],
            &ensemble_rows,
        )?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// -- snapshot input ---------------------------------------------------------

/// Rebuild a solution from a snapshot file written by `solve`, using the
/// metadata trailer for the grid geometry and provenance.
fn solution_from_file(path: &Path) -> Result<SolutionField> {
    let missing = |what: &str| Error::BadSnapshot {
        path: path.to_path_buf(),
        message: format!("metadata lacks {what}; re-emit the file with `kinreg solve`"),
    };
    let file = read_snapshots(path)?;
    let times = file.times().ok_or_else(|| missing("snapshot times"))?;
    let half_width = file.half_width().ok_or_else(|| missing("the box half-width"))?;
    let t_final = file
        .metadata
        .get("t_final")
        .and_then(|v| v.parse().ok())
        .or_else(|| times.last().copied())
        .filter(|&t| t > 0.0)
        .unwrap_or(1.0);
    let cfl = file
        .metadata
        .get("cfl")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0.4);
    let grid = GridSpec::new(&file.shape, half_width, t_final, cfl)?;
    let path_id = file
        .metadata
        .get("path_id")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let noise_seed = file.metadata.get("noise_seed").and_then(|v| v.parse().ok());
    let tag = file
        .metadata
        .get("model")
        .cloned()
        .unwrap_or_else(|| "unknown".to_string());
    SolutionField::from_parts(grid, times, file.snapshots, path_id, noise_seed, tag)
}

/// Rebuild the coefficient model a snapshot was produced with from its
/// metadata tag. Tabulated models cannot be reconstructed this way.
fn model_from_tag(tag: &str) -> Result<CoefficientModel> {
    let unsupported = || {
        Error::InvalidArgument(format!(
            "cannot reconstruct a coefficient model from tag {tag:?}; pass --config with the original settings"
        ))
    };
    if tag == "burgers" {
        return Ok(CoefficientModel::burgers());
    }
    if let Some(body) = tag.strip_prefix("powerlaw(").and_then(|r| r.strip_suffix(')')) {
        let (mut l, mut n) = (None, None);
        for part in body.split(',') {
            match part.split_once('=') {
                Some(("l", v)) => l = v.parse::<u32>().ok(),
                Some(("n", v)) => n = v.parse::<u32>().ok(),
                _ => return Err(unsupported()),
            }
        }
        return match (l, n) {
            (Some(l), Some(n)) => CoefficientModel::power_law(l, n),
            _ => Err(unsupported()),
        };
    }
    if let Some(body) = tag.strip_prefix("heat(").and_then(|r| r.strip_suffix(')')) {
        let (mut c, mut d) = (None, None);
        for part in body.split(',') {
            match part.split_once('=') {
                Some(("c", v)) => c = v.parse::<f64>().ok(),
                Some(("d", v)) => d = v.parse::<usize>().ok(),
                _ => return Err(unsupported()),
            }
        }
        return match (c, d) {
            (Some(c), Some(d)) => CoefficientModel::heat(c, d),
            _ => Err(unsupported()),
        };
    }
    Err(unsupported())
}

/// The model for analyzing stored snapshots: the configured one when a
/// configuration file was passed, otherwise the one recorded in the file.
fn resolve_model(
    config: &ExperimentConfig,
    config_given: bool,
    reference: &SolutionField,
    widened: bool,
) -> Result<CoefficientModel> {
    if config_given {
        if widened {
            config.run_model()
        } else {
            config.base_model()
        }
    } else {
        model_from_tag(reference.model_tag())
    }
}

/// The smallest state interval containing both the model's nominal interval
/// and everything the snapshots attain, so χ-densities never reject a state
/// the solver legitimately produced.
fn covering_interval(model: &CoefficientModel, solution: &SolutionField) -> Result<Interval> {
    let base = model.interval();
    let (mut lo, mut hi) = (base.lo(), base.hi());
    for snap in solution.snapshots() {
        lo = lo.min(snap.min());
        hi = hi.max(snap.max());
    }
    if lo < base.lo() || hi > base.hi() {
        let pad = 1e-9 * (hi - lo).max(1.0);
        Interval::new(lo - pad, hi + pad)
    } else {
        Ok(base)
    }
}

// -- kinetic ----------------------------------------------------------------

fn run_kinetic(args: &KineticArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let rho = RhoKind::from_name(&args.rho)?;
    let variant = ChiVariant::from_name(&args.variant)?;
    let solution = solution_from_file(&args.input)?;
    let model = resolve_model(&config, args.common.config.is_some(), &solution, true)?;
    if model.dimension() != solution.grid().dimension() {
        return Err(Error::DimensionMismatch {
            expected: solution.grid().dimension(),
            got: model.dimension(),
            context: "model vs snapshot dimension",
        });
    }
    let states = covering_interval(&model, &solution)?;

    let density = chi_density(&solution, &states, args.n_lambda, variant)?;
    let averages = velocity_average(&density, |lambda| rho.eval(&states, lambda));

    let dir = config.output_dir();
    let hash = config.hash();
    let shape = solution.grid().shape().to_vec();
    let mut header: Vec<String> = vec!["t".to_string()];
    for axis in 0..shape.len() {
        header.push(format!("i{axis}"));
    }
    header.push("average".to_string());
    header.push("config_hash".to_string());
    header.push("schema_version".to_string());
    let mut rows = Vec::new();
    for (s, field) in averages.iter().enumerate() {
        let t = solution.times()[s];
        for_each_index(&shape, |flat, idx| {
            let mut row = Vec::with_capacity(header.len());
            row.push(fmt_exact(t));
            for &i in idx {
                row.push(i.to_string());
            }
            row.push(fmt_exact(field.data()[flat]));
            row.push(hash.clone());
            row.push(SCHEMA_VERSION.to_string());
            rows.push(row);
        });
    }
    let average_path = dir.join("kinetic_average.csv");
    write_csv(&average_path, &header, &rows)?;
    println!("wrote {}", average_path.display());

    let dissipation = dissipation_field(&solution, &model)?;
    let rows: Vec<Vec<String>> = dissipation
        .summary_rows()
        .into_iter()
        .map(|(t, integral)| {
            vec![
                fmt_exact(t),
                fmt_exact(integral),
                hash.clone(),
                SCHEMA_VERSION.to_string(),
            ]
        })
        .collect();
    let dissipation_path = dir.join("dissipation.csv");
    write_csv(
        &dissipation_path,
        &["t", "dissipation", "config_hash", "schema_version"],
        &rows,
    )?;
    println!("wrote {}", dissipation_path.display());
    println!("dissipation_total={}", fmt6(dissipation.time_integral()));
    Ok(())
}

// -- regularity -------------------------------------------------------------

fn run_regularity(args: &RegularityArgs) -> Result<()> {
    let mut config = load_config(&args.common)?;
    if let Some(q) = args.q {
        config.set("regularity.q", fmt_exact(q))?;
    }
    if let Some(mode) = &args.mode {
        config.set("regularity.mode", mode)?;
    }
    if let Some(alpha) = &args.alpha {
        config.set("regularity.alpha", alpha)?;
    }
    let q = config.regularity_q()?;
    let mode = config.regularity_mode()?;
    let fit_window = config.fit_window()?;

    let paths: Vec<SolutionField> = args
        .input
        .iter()
        .map(|p| solution_from_file(p))
        .collect::<Result<_>>()?;
    let d_space = paths[0].grid().dimension();

    // target: the noise-free bar 2s*(α) — the stricter of the two regimes
    let target = match config.alpha_source()? {
        AlphaSource::Fixed(alpha) => ratio_f64(exponents_exact(alpha, d_space, true)?.effective_s()),
        AlphaSource::Fitted => {
            let model = resolve_model(&config, args.common.config.is_some(), &paths[0], false)?;
            let fit = estimate_alpha(&model, &config.alpha_options()?)?;
            let alpha = fit.alpha.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "α fit failed (flag={}); pass --alpha <value> instead",
                    fit.flag()
                ))
            })?;
            exponents(alpha, d_space, true)?.effective_s()
        }
    };

    let opts = SpaceTimeOptions {
        q,
        mode,
        fit_window,
        target_s: Some(target),
    };
    let report = spacetime_regularity(&paths, &opts)?;
    let aggregate = &report.aggregate;

    let hash = config.hash();
    let rows: Vec<Vec<String>> = aggregate
        .block_norms
        .iter()
        .enumerate()
        .map(|(j, &norm)| {
            vec![
                j.to_string(),
                fmt_exact(norm),
                hash.clone(),
                SCHEMA_VERSION.to_string(),
            ]
        })
        .collect();
    let path = config.output_dir().join("regularity_blocks.csv");
    write_csv(
        &path,
        &["J", "block_norm", "config_hash", "schema_version"],
        &rows,
    )?;
    println!("wrote {}", path.display());
    println!(
        "s_est={} s_star={} verdict={}",
        fmt6_opt(aggregate.fitted_s),
        fmt6(target),
        aggregate.verdict.unwrap_or(false)
    );
    Ok(())
}

// -- sweep ------------------------------------------------------------------

fn parse_u32_list(raw: &str, flag: &str) -> Result<Vec<u32>> {
    let values: Vec<u32> = raw
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| {
            Error::InvalidArgument(format!("{flag} expects a comma-separated list, got {raw:?}"))
        })?;
    if values.is_empty() || values.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "{flag} entries must be ≥ 1, got {raw:?}"
        )));
    }
    Ok(values)
}

fn run_sweep_command(args: &SweepArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let ls = parse_u32_list(&args.l, "--l")?;
    let ns = parse_u32_list(&args.n, "--n")?;
    let (csv_path, rows) = run_sweep(&config, &ls, &ns)?;
    for row in &rows {
        println!(
            "l={} n={} q_star={} two_s_star={} s_est={} status={}",
            row.l,
            row.n,
            format_ratio(row.q_star),
            format_ratio(row.two_s_star),
            fmt6_opt(row.s_est),
            row.status
        );
    }
    println!("wrote {}", csv_path.display());
    Ok(())
}

// -- validate ---------------------------------------------------------------

fn run_validate(args: &ValidateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let problems = ExperimentConfig::check_text(&text);
    if problems.is_empty() {
        let config = ExperimentConfig::from_text(&text)?;
        println!(
            "ok config_hash={} schema_version={}",
            config.hash(),
            SCHEMA_VERSION
        );
        return Ok(());
    }
    for problem in &problems {
        eprintln!("error code={} {problem}", problem.code_name());
    }
    Err(Error::InvalidArgument(format!(
        "{} configuration problem(s) in {}",
        problems.len(),
        args.config.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    #[test]
    fn exponents_line_matches_the_documented_format() {
        let exact = exponents_exact(Ratio::new(1, 2), 2, true).unwrap();
        assert_eq!(
            render_exponents(&exact),
            "q_star=25/13 (≈1.923077) s_star=1/150 two_s_star=1/75"
        );
        let exact = exponents_exact(Ratio::new(1, 1), 2, true).unwrap();
        assert_eq!(
            render_exponents(&exact),
            "q_star=13/7 (≈1.857143) s_star=1/78 two_s_star=1/39"
        );
        // without the noise-free doubling the 2s* field is omitted
        let exact = exponents_exact(Ratio::new(1, 2), 2, false).unwrap();
        assert_eq!(
            render_exponents(&exact),
            "q_star=25/13 (≈1.923077) s_star=1/150"
        );
    }

    #[test]
    fn model_flag_shorthand_sets_config_keys() {
        let mut config = ExperimentConfig::default();
        apply_model_flag(&mut config, "powerlaw:2,1").unwrap();
        assert_eq!(config.base_model().unwrap().tag(), "powerlaw(l=2,n=1)");
        apply_model_flag(&mut config, "burgers").unwrap();
        assert_eq!(config.base_model().unwrap().tag(), "burgers");
        apply_model_flag(&mut config, "heat:0.5").unwrap();
        assert_eq!(config.get("model.c"), "0.5");
        for bad in ["powerlaw", "powerlaw:2", "heat:", "table:", "fizz"] {
            assert!(
                apply_model_flag(&mut config, bad).is_err(),
                "{bad:?} should be rejected"
            );
        }
    }

    #[test]
    fn model_tags_round_trip_through_reconstruction() {
        let models = [
            CoefficientModel::power_law(1, 2).unwrap(),
            CoefficientModel::burgers(),
            CoefficientModel::heat(1.5, 1).unwrap(),
        ];
        for model in models {
            let rebuilt = model_from_tag(&model.tag()).unwrap();
            assert_eq!(rebuilt.tag(), model.tag());
            assert_eq!(rebuilt.dimension(), model.dimension());
        }
        assert!(model_from_tag("table(mystery)").is_err());
        assert!(model_from_tag("").is_err());
    }

    #[test]
    fn dispatch_distinguishes_help_from_bad_usage() {
        assert!(cli_dispatch(["kinreg", "--help"]).is_ok());
        assert!(cli_dispatch(["kinreg", "exponents", "--help"]).is_ok());
        let err = cli_dispatch(["kinreg", "transmogrify"]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = cli_dispatch(["kinreg", "exponents", "--alpha", "1/2"]).unwrap_err();
        assert_eq!(err.exit_code(), 1); // missing --d
    }

    #[test]
    fn solve_kinetic_regularity_pipeline_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("exp.cfg");
        std::fs::write(
            &cfg_path,
            "[model]\nfamily = heat\nc = 1.0\n\
             [grid]\nnx = 64\nT = 0.05\n\
             [init]\nkind = sine\namplitude = 0.8\n",
        )
        .unwrap();
        let out = dir.path().join("out");
        let cfg = cfg_path.to_str().unwrap();
        let out_str = out.to_str().unwrap();

        cli_dispatch(["kinreg", "solve", "--config", cfg, "--output", out_str]).unwrap();
        let snapshot = out.join("path_000.krg");
        assert!(snapshot.exists());
        assert!(out.join("summary_000.csv").exists());
        // deterministic run: no ensemble functional file
        assert!(!out.join("ensemble.csv").exists());

        // the snapshot is self-describing: config keys live in its metadata
        let file = read_snapshots(&snapshot).unwrap();
        assert_eq!(
            file.metadata.get("config.model.family").map(String::as_str),
            Some("heat")
        );
        assert_eq!(
            file.metadata.get("schema_version").map(String::as_str),
            Some(SCHEMA_VERSION)
        );
        let hash = file.metadata.get("config_hash").unwrap().clone();
        assert_eq!(hash.len(), 64);

        let snap_str = snapshot.to_str().unwrap();
        cli_dispatch([
            "kinreg", "kinetic", "--input", snap_str, "--rho", "one", "--output", out_str,
        ])
        .unwrap();
        let dissipation = std::fs::read_to_string(out.join("dissipation.csv")).unwrap();
        let mut lines = dissipation.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,dissipation,config_hash,schema_version"
        );
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 4);
            assert!(fields[1].parse::<f64>().unwrap() >= 0.0);
            assert_eq!(fields[3], SCHEMA_VERSION);
        }
        assert!(out.join("kinetic_average.csv").exists());

        cli_dispatch([
            "kinreg",
            "regularity",
            "--input",
            snap_str,
            "--alpha",
            "1/2",
            "--output",
            out_str,
        ])
        .unwrap();
        let blocks = std::fs::read_to_string(out.join("regularity_blocks.csv")).unwrap();
        let mut lines = blocks.lines();
        assert_eq!(
            lines.next().unwrap(),
            "J,block_norm,config_hash,schema_version"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,"), "{first}");
    }

    #[test]
    fn reruns_write_byte_identical_outputs() {
        // Two runs into two different directories: the output location must
        // leave no trace in the files, hash columns included.
        let dir = tempfile::tempdir().unwrap();
        let run = |out: &std::path::Path| {
            cli_dispatch([
                "kinreg",
                "nondeg",
                "--model",
                "powerlaw:1,1",
                "--sphere-samples",
                "64",
                "--delta-points",
                "6",
                "--lambda-grid",
                "256",
                "--output",
                out.to_str().unwrap(),
            ])
            .unwrap();
            std::fs::read(out.join("nondeg.csv")).unwrap()
        };
        let first = run(&dir.path().join("a"));
        let second = run(&dir.path().join("b"));
        assert_eq!(first, second);
    }

    #[test]
    fn validate_counts_problems_and_names_keys() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.cfg");
        std::fs::write(&bad, "[grid]\nnx = -128,64\n").unwrap();
        let err =
            cli_dispatch(["kinreg", "validate", "--config", bad.to_str().unwrap()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("problem"), "{err}");

        let good = dir.path().join("good.cfg");
        std::fs::write(&good, "[grid]\nnx = 32,32\n").unwrap();
        cli_dispatch(["kinreg", "validate", "--config", good.to_str().unwrap()]).unwrap();
    }

    #[test]
    fn covering_interval_expands_only_when_needed() {
        let model = CoefficientModel::burgers();
        let grid = GridSpec::new(&[8], 1.0, 0.01, 0.4).unwrap();
        let init = crate::solver::InitialData::Sine {
            amplitude: 0.5,
            wavenumbers: vec![1],
        };
        let solution = run(&model, &grid, &init, None, &RunOptions::default()).unwrap();
        let states = covering_interval(&model, &solution).unwrap();
        assert_eq!(states.lo(), model.interval().lo());
        assert_eq!(states.hi(), model.interval().hi());
    }
}
