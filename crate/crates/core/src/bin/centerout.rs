use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use centerout::experiment::{self, error_exit_code, error_json, ExperimentConfig, Report, SolverConfig, TestKind, CONTOUR_DIRECTIONS};
use centerout::generators::{Generator, GeneratorSpec};
use centerout::io::{self, Format};
use centerout::potential::{Potentials, PotentialFile};
use centerout::quantiles::contour;
use centerout::reference::SphericalGrid;
use centerout::{Error, Result};

/// Center-outward distribution and quantile functions via optimal transport.
#[derive(Parser)]
#[command(name = "centerout", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from a synthetic generator.
    Generate {
        /// Generator spec as JSON, or @path to a JSON file.
        #[arg(long)]
        generator: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Solve the transport problem and write the grid, plan and potentials.
    Fit(ConfigArgs),
    /// Quantile contours from a fitted directory.
    Contours {
        /// Directory written by `fit` or `verify`.
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long, default_value_t = CONTOUR_DIRECTIONS)]
        directions: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Fit and run the selected property checks.
    Verify(ConfigArgs),
    /// Summarize the report of an experiment directory.
    Report {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator spec as JSON, or @path to a JSON file.
    #[arg(long, conflicts_with = "input")]
    generator: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_radii: Option<usize>,
    #[arg(long)]
    n_directions: Option<usize>,
    /// Entropic regularization; selects the Sinkhorn solver.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1e-9, requires = "epsilon")]
    tol: f64,
    #[arg(long, default_value_t = 10_000, requires = "epsilon")]
    max_iter: usize,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    tests: Option<Vec<TestKind>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(self) -> Result<ExperimentConfig> {
        let mut value = match &self.config {
            Some(path) => std::fs::read_to_string(path)?.parse::<serde_json::Value>().map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?,
            None => serde_json::json!({}),
        };
        let obj = value.as_object_mut().ok_or_else(|| Error::InvalidArgument("config must be a JSON object".into()))?;
        let mut set = |key: &str, v: serde_json::Value| {
            obj.insert(key.into(), v);
        };
        if let Some(g) = &self.generator {
            set("generator", serde_json::to_value(parse_generator(g)?)?);
            set("input", serde_json::Value::Null);
        }
        if let Some(p) = &self.input {
            set("input", serde_json::to_value(p)?);
            set("generator", serde_json::Value::Null);
        }
        for (key, v) in [("n", self.n), ("d", self.d), ("n_radii", self.n_radii), ("n_directions", self.n_directions)] {
            if let Some(v) = v {
                set(key, v.into());
            }
        }
        if let Some(epsilon) = self.epsilon {
            set("solver", serde_json::to_value(SolverConfig::Sinkhorn { epsilon, tol: self.tol, max_iter: self.max_iter })?);
        }
        if let Some(l) = &self.levels {
            set("levels", serde_json::to_value(l)?);
        }
        if let Some(t) = &self.tests {
            set("tests", serde_json::to_value(t)?);
        }
        if let Some(s) = self.seed {
            set("seed", s.into());
        }
        if let Some(o) = &self.output {
            set("output", serde_json::to_value(o)?);
        }
        let config: ExperimentConfig = serde_json::from_value(value).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }
}

fn parse_generator(arg: &str) -> Result<GeneratorSpec> {
    match arg.strip_prefix('@') {
        Some(path) => io::read_json(Path::new(path)),
        None => serde_json::from_str(arg).map_err(|e| Error::Parse { line: e.line(), message: format!("generator: {e}") }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Generate { generator, n, seed, output, format } => {
            let data = Generator::new(parse_generator(&generator)?)?.sample(n, seed)?;
            match output {
                Some(path) => {
                    let format = format.unwrap_or_else(|| Format::from_path(&path));
                    io::write_points(&path, data.points(), format)?;
                }
                None => match format.unwrap_or(Format::Csv) {
                    Format::Csv => print!("{}", String::from_utf8_lossy(&io::points_to_csv(data.points())?)),
                    Format::Json => println!("{}", serde_json::to_string(data.points())?),
                },
            }
            Ok(0)
        }
        Command::Fit(args) => {
            let mut config = args.resolve()?;
            config.tests.clear();
            let out = experiment::execute(&config)?;
            experiment::write_artifacts(&config.output, &out)?;
            println!("{}", serde_json::to_string_pretty(&out.report.summary)?);
            Ok(0)
        }
        Command::Contours { fit, levels, directions, output, format } => {
            let grid: SphericalGrid = io::read_json(&fit.join("grid.json"))?;
            let file: PotentialFile = io::read_json(&fit.join("potentials.json"))?;
            let pot = Potentials::from_file(file, grid)?;
            let contours = levels.iter().map(|&r| contour(&pot, r, directions)).collect::<Result<Vec<_>>>()?;
            let format = format.or(output.as_deref().map(Format::from_path)).unwrap_or(Format::Csv);
            let bytes = match format {
                Format::Csv => io::contours_to_csv(&contours)?,
                Format::Json => serde_json::to_vec_pretty(&contours)?,
            };
            match output {
                Some(path) => io::write_atomic(&path, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(0)
        }
        Command::Verify(args) => {
            let config = args.resolve()?;
            let report = experiment::run(&config)?;
            print_report(&report);
            Ok(report.exit_code() as u8)
        }
        Command::Report { dir } => {
            let report: Report = io::read_json(&dir.join("report.json"))?;
            print_report(&report);
            Ok(report.exit_code() as u8)
        }
    }
}

fn print_report(report: &Report) {
    let s = &report.summary;
    println!("n={} d={} grid={}x{}+{} plan={} cost={:.6}", s.n, s.d, s.n_radii, s.n_directions, s.origin_copies, s.plan_kind, s.plan_cost);
    for e in &report.entries {
        let status = match e.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        let scope = if e.contracted { "" } else { " (informational)" };
        println!("{status} {:?} [{}]{scope}", e.test, e.property);
    }
    println!("{}", if report.all_pass { "all contracted checks passed" } else { "some contracted checks failed" });
}
