//! `chromsim` command-line front end.
//!
//! Runs a scenario file and writes CSV results plus a JSON manifest into
//! `--out-dir`. With `--ladder` it runs a grid-convergence study instead.
//! Failures print one JSON error record on stderr and exit with
//! 2 (validation), 3 (solver) or 4 (I/O).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chromsim::model::{CflMode, IdealVariant};
use chromsim::reference::{ReferenceCache, FINE_GRID};
use chromsim::study::{
    convergence_study, parse_ladder, write_study_csv, Comparison, ReferenceKind,
};
use chromsim::{run_with, scenario_file, Error, RunOptions, Scenario, SolverMode};
use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

const L1_CONVENTION: &str =
    "outlet, time-integrated: sum over k >= 1 of (t_k - t_(k-1)) |u_num(t_k) - u_ref(t_k)|, \
                             reference linearly resampled, not normalised";

#[derive(Debug, Parser)]
#[command(
    name = "chromsim",
    version,
    about = "Column liquid chromatography simulator"
)]
struct Cli {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,

    /// Solver: mmocaa, mmoc-unadjusted or ideal (default: chosen from the scenario).
    #[arg(long)]
    mode: Option<SolverMode>,

    /// Disable the mass-adjusted advection.
    #[arg(long)]
    no_mass_adjust: bool,

    /// Foot perturbation, in (0, 1).
    #[arg(long)]
    eta: Option<f64>,

    /// Accept v dt / dx < K instead of < 1 (K defaults to 2; 0 restores strict).
    #[arg(long, value_name = "K", num_args = 0..=1, default_missing_value = "2")]
    relax_cfl: Option<u32>,

    /// Ideal solver: use (delta u / 2)^2 in the gradient-squared term.
    #[arg(long = "corrected-3.10")]
    corrected: bool,

    /// Times at which full fields are written.
    #[arg(long, value_delimiter = ',', value_name = "T1,T2,...")]
    snapshots: Vec<f64>,

    #[arg(long, default_value = ".")]
    out_dir: PathBuf,

    /// Fine-grid reference cache [default: $CHROMSIM_CACHE_DIR, else <out-dir>/reference-cache].
    #[arg(long)]
    cache_dir: Option<PathBuf>,

    /// Convergence ladder `nx1:nt1,nx2:nt2,...`.
    #[arg(long, value_name = "NX:NT,...")]
    ladder: Option<String>,

    /// Worker threads for ladder rows.
    #[arg(long, default_value_t = 1)]
    jobs: usize,

    /// Compare the outlet curve with a reference and write overlay.csv.
    #[arg(long, value_enum)]
    compare: Option<ReferenceChoice>,

    /// Fine-grid reference resolution `nx:nt`.
    #[arg(long, value_name = "NX:NT")]
    reference_grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReferenceChoice {
    /// Analytic for linear isotherms with D > 0, fine grid otherwise.
    Auto,
    Analytic,
    FineGrid,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Write { .. } => "io",
            CliError::Core(e) => match e.root() {
                Error::Io(_) => "io",
                Error::NonConvergence { .. }
                | Error::SingularBlock { .. }
                | Error::NonPhysical { .. } => "solver",
                _ => "validation",
            },
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "solver" => 3,
            "io" => 4,
            _ => 2,
        }
    }

    fn record(&self) -> Value {
        let mut record = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Core(e) = self {
            if let Error::Step { step, .. } = e {
                record["step"] = json!(step);
            }
            if let Error::Parse { line, .. } = e.root() {
                record["line"] = json!(line);
            }
        }
        record
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct Manifest {
    version: &'static str,
    scenario: String,
    mode: String,
    config: Value,
    derived: Value,
    outputs: Vec<String>,
    wall_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    study: Option<Value>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::Usage(e.to_string().trim_end().to_owned())),
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code())
}

fn execute(cli: &Cli) -> CliResult<()> {
    let start = Instant::now();
    let scenario = load_scenario(cli)?;
    fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Write {
        path: cli.out_dir.clone(),
        source,
    })?;
    let cache = cache(cli);
    let fine_grid = match &cli.reference_grid {
        Some(text) => parse_grid(text)?,
        None => FINE_GRID,
    };

    let mut outputs = Vec::new();
    let mut manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        scenario: cli.scenario.display().to_string(),
        mode: String::new(),
        config: config_json(&scenario_file::render(scenario.config())),
        derived: json!({
            "diffusion": scenario.diffusion(),
            "phase_ratio": scenario.phase_ratio(),
            "dx": scenario.dx(),
            "dt": scenario.dt(),
            "cfl": scenario.cfl(),
            "cfl_bound": scenario.solver().cfl.bound(),
        }),
        outputs: Vec::new(),
        wall_seconds: 0.0,
        mass: None,
        comparison: None,
        study: None,
    };

    if let Some(ladder) = &cli.ladder {
        let ladder = parse_ladder(ladder)?;
        let reference = reference_kind(
            cli.compare.unwrap_or(ReferenceChoice::Auto),
            &scenario,
            fine_grid,
            cache,
        );
        let rows = convergence_study(&scenario, &ladder, &reference, cli.mode, cli.jobs)?;
        write_file(&cli.out_dir, "convergence.csv", &mut outputs, |w| {
            write_study_csv(&rows, w)
        })?;
        manifest.mode = cli
            .mode
            .unwrap_or_else(|| SolverMode::dispatch(&scenario))
            .as_str()
            .to_owned();
        manifest.study = Some(json!({
            "reference": reference.as_str(),
            "l1_norm": L1_CONVENTION,
            "rows": rows.iter().map(|r| json!({
                "n_x": r.n_x,
                "n_t": r.n_t,
                "l1": r.l1,
                "max_error": r.max_error,
                "order": r.order,
            })).collect::<Vec<_>>(),
        }));
    } else {
        let options = RunOptions {
            mode: cli.mode,
            snapshots: cli.snapshots.clone(),
        };
        let trajectory = run_with(&scenario, &options)?;
        manifest.mode = trajectory.mode.as_str().to_owned();
        let chromatogram = trajectory.chromatogram();
        write_file(&cli.out_dir, "chromatogram.csv", &mut outputs, |w| {
            chromatogram.write_csv(w)
        })?;
        write_file(&cli.out_dir, "mass.csv", &mut outputs, |w| {
            trajectory.ledger.write_csv(w)
        })?;
        write_file(&cli.out_dir, "diagnostics.csv", &mut outputs, |w| {
            trajectory.write_diagnostics_csv(w)
        })?;
        if !cli.snapshots.is_empty() {
            write_file(&cli.out_dir, "snapshots.csv", &mut outputs, |w| {
                trajectory.write_snapshots_csv(scenario.dx(), w)
            })?;
        }
        let last = trajectory.ledger.current();
        manifest.mass = Some(json!({
            "injected": last.injected,
            "holdup": last.holdup,
            "outflow": last.outflow,
            "deficit": last.deficit(),
            "relative_error": trajectory.relative_mass_error(),
        }));
        if let Some(choice) = cli.compare {
            let reference = reference_kind(choice, &scenario, fine_grid, cache);
            let comparison = Comparison::new(chromatogram, &reference.build(&scenario)?)?;
            write_file(&cli.out_dir, "overlay.csv", &mut outputs, |w| {
                comparison.write_overlay_csv(w)
            })?;
            manifest.comparison = Some(json!({
                "reference": reference.as_str(),
                "l1_norm": L1_CONVENTION,
                "l1": comparison.l1,
                "max_error": comparison.max_error,
            }));
        }
    }

    outputs.push("manifest.json".to_owned());
    manifest.outputs = outputs;
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    let mut unused = Vec::new();
    write_file(&cli.out_dir, "manifest.json", &mut unused, |mut w| {
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)
    })
}

fn load_scenario(cli: &Cli) -> CliResult<Scenario<f64>> {
    let mut config = scenario_file::load::<f64>(&cli.scenario)?;
    if cli.no_mass_adjust {
        config.solver.mass_adjust = false;
    }
    if let Some(eta) = cli.eta {
        config.solver.eta = eta;
    }
    match cli.relax_cfl {
        Some(0) => config.solver.cfl = CflMode::Strict,
        Some(k) => config.solver.cfl = CflMode::Relaxed(k),
        None => {}
    }
    if cli.corrected {
        config.solver.ideal_variant = IdealVariant::Corrected;
    }
    Ok(Scenario::validate(config)?)
}

fn cache(cli: &Cli) -> ReferenceCache {
    match &cli.cache_dir {
        Some(dir) => ReferenceCache::new(dir),
        None => ReferenceCache::from_env_or(cli.out_dir.join("reference-cache")),
    }
}

fn reference_kind(
    choice: ReferenceChoice,
    scenario: &Scenario<f64>,
    grid: (usize, usize),
    cache: ReferenceCache,
) -> ReferenceKind {
    match choice {
        ReferenceChoice::Auto => ReferenceKind::auto(scenario, grid, Some(cache)),
        ReferenceChoice::Analytic => ReferenceKind::Analytic,
        ReferenceChoice::FineGrid => ReferenceKind::FineGrid {
            grid,
            cache: Some(cache),
        },
    }
}

fn parse_grid(text: &str) -> CliResult<(usize, usize)> {
    match parse_ladder(text)?.as_slice() {
        [grid] => Ok(*grid),
        _ => Err(CliError::Usage(format!(
            "--reference-grid takes one nx:nt pair, got '{text}'"
        ))),
    }
}

fn write_file(
    dir: &Path,
    name: &str,
    outputs: &mut Vec<String>,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CliResult<()> {
    let path = dir.join(name);
    let io = |source| CliError::Write {
        path: path.clone(),
        source,
    };
    let mut w = BufWriter::new(File::create(&path).map_err(io)?);
    body(&mut w).map_err(io)?;
    w.flush().map_err(io)?;
    outputs.push(name.to_owned());
    Ok(())
}

/// Scenario text as `{section: {key: value}}`; counts become JSON integers,
/// other numbers floats, comma lists arrays.
fn config_json(text: &str) -> Value {
    const COUNTS: [&str; 5] = ["m", "n_x", "n_t", "inner_cap", "relax_cfl"];
    let mut root = Map::new();
    let mut section = String::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.to_owned();
            root.insert(section.clone(), Value::Object(Map::new()));
        } else if let Some((key, value)) = line.split_once('=') {
            let (key, value) = (key.trim(), value.trim());
            let parsed = if COUNTS.contains(&key) {
                value
                    .parse::<u64>()
                    .map_or_else(|_| json!(value), |n| json!(n))
            } else {
                scalar_or_list(value)
            };
            if let Some(Value::Object(map)) = root.get_mut(&section) {
                map.insert(key.to_owned(), parsed);
            }
        }
    }
    Value::Object(root)
}

fn scalar_or_list(value: &str) -> Value {
    let scalar = |s: &str| match (s.parse::<bool>(), s.parse::<f64>()) {
        (Ok(b), _) => json!(b),
        (_, Ok(x)) => json!(x),
        _ => json!(s),
    };
    if value.contains(',') {
        Value::Array(value.split(',').map(|s| scalar(s.trim())).collect())
    } else {
        scalar(value)
    }
}
