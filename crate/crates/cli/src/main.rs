//! `conelayer`: check, canonicalize, solve and differentiate problem documents.
//!
//! Exit codes: 0 success, 1 usage or unreadable input, 2 parse or validation
//! failure (including non-DPP problems), 3 non-optimal solve, 4 gradcheck error
//! above tolerance.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use conelayer::array::{Array, Values};
use conelayer::canon::time_canonicalization;
use conelayer::diff::DiffMode;
use conelayer::expr::{check_dpp, Problem};
use conelayer::io::{parse_problem, parse_values, write_cones, write_matrix_market, write_vector, Dense};
use conelayer::layer::{gradcheck, Layer, LayerError, GRADCHECK_FLOOR};
use conelayer::solver::{SolverSettings, Status};

#[derive(Parser, Debug)]
#[command(
    name = "conelayer",
    version,
    about = "Differentiable cone-program layers from problem documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the DPP rules and print the report.
    CheckDpp {
        #[arg(long)]
        problem: PathBuf,
    },
    /// Write A (Matrix Market), b, c, the cone sidecar and the variable layout.
    Canonicalize {
        #[command(flatten)]
        input: Input,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Solve and write variable values, objective and status.
    Solve {
        #[command(flatten)]
        input: Input,
        /// Solver tolerance (absolute and relative).
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parameter gradients for a cotangent on the variables.
    Grad {
        #[command(flatten)]
        input: Input,
        /// Values document with one cotangent per variable; missing ones are zero.
        #[arg(long)]
        seed_cotangent: PathBuf,
        /// Solver tolerance (absolute and relative).
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare gradients with central finite differences (h = 1e-6).
    Gradcheck {
        #[command(flatten)]
        input: Input,
        /// Cotangent document; all ones on every variable when absent.
        #[arg(long)]
        seed_cotangent: Option<PathBuf>,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Median time of fresh canonicalization against the cached map.
    BenchCanon {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Input {
    #[arg(long)]
    problem: PathBuf,
    /// Values document; may be omitted when the problem has no parameters.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Direct,
    Iterative,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NotOptimal(String),
    #[error("{0}")]
    GradCheck(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::NotOptimal(_) => 3,
            Failure::GradCheck(_) => 4,
        }
    }
}

impl From<LayerError> for Failure {
    fn from(e: LayerError) -> Self {
        match e {
            LayerError::NotOptimal(s) => Failure::NotOptimal(format!("solver status {s:?}")),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<Problem, Failure> {
    parse_problem(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load_values(path: &Path) -> Result<Values, Failure> {
    parse_values(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn load(input: &Input) -> Result<(Problem, Values), Failure> {
    let problem = load_problem(&input.problem)?;
    let values = match &input.params {
        Some(p) => load_values(p)?,
        None if problem.parameters().is_empty() => Values::new(),
        None => {
            return Err(Failure::Usage(
                "--params is required: the problem has parameters".into(),
            ))
        }
    };
    Ok((problem, values))
}

fn dense(values: &Values) -> BTreeMap<&str, Dense> {
    values.iter().map(|(k, v)| (k.as_str(), Dense::from_array(v))).collect()
}

fn emit(output: Option<&Path>, doc: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("json values serialize") + "\n";
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn diff_mode(mode: Option<Mode>) -> DiffMode {
    match mode {
        None => DiffMode::Auto,
        Some(Mode::Direct) => DiffMode::Direct,
        Some(Mode::Iterative) => DiffMode::Iterative,
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::CheckDpp { problem } => {
            let report = check_dpp(&load_problem(&problem)?);
            println!("{report}");
            if report.valid {
                Ok(())
            } else {
                Err(Failure::Invalid("problem is not DPP".into()))
            }
        }
        Command::Canonicalize { input, output } => {
            let (problem, values) = load(&input)?;
            let layer = Layer::compile(&problem, SolverSettings::default())?;
            let theta = layer.bind(&values)?;
            let data = layer.asa().materialize(&theta).map_err(LayerError::from)?;
            fs::create_dir_all(&output)
                .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", output.display())))?;
            let layout: BTreeMap<&str, serde_json::Value> = layer
                .asa()
                .variable_layout()
                .entries()
                .iter()
                .map(|e| (e.name.as_str(), json!({"offset": e.offset, "shape": e.shape})))
                .collect();
            let files = [
                ("A.mtx", write_matrix_market(&data.a)),
                ("b.txt", write_vector(&data.b)),
                ("c.txt", write_vector(&data.c)),
                ("cones.txt", write_cones(&data.cones)),
                (
                    "variables.json",
                    serde_json::to_string_pretty(&layout).expect("serializes") + "\n",
                ),
            ];
            for (name, text) in files {
                let path = output.join(name);
                fs::write(&path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let c = &data.cones;
            println!(
                "A: {}x{} with {} entries; cones: zero {}, nonneg {}, soc {:?}; offset {}",
                data.a.nrows(),
                data.a.ncols(),
                data.a.nnz(),
                c.zero,
                c.nonneg,
                c.soc,
                layer.asa().objective_offset(&theta).map_err(LayerError::from)?
            );
            Ok(())
        }
        Command::Solve { input, tol, output } => {
            let (problem, values) = load(&input)?;
            let layer = Layer::compile(&problem, SolverSettings::default().with_tolerance(tol))?;
            let r = layer.forward(&values)?;
            let doc = json!({
                "status": r.status,
                "objective": r.objective,
                "values": r.outputs.as_ref().map(dense),
                "iterations": r.info.iterations,
                "primal_residual": r.info.primal_residual,
                "dual_residual": r.info.dual_residual,
                "gap": r.info.gap,
            });
            emit(output.as_deref(), &doc)?;
            if r.status == Status::Optimal {
                Ok(())
            } else {
                Err(Failure::NotOptimal(format!("solver status {:?}", r.status)))
            }
        }
        Command::Grad {
            input,
            seed_cotangent,
            tol,
            mode,
            output,
        } => {
            let (problem, values) = load(&input)?;
            let cot = load_values(&seed_cotangent)?;
            let layer = Layer::compile(&problem, SolverSettings::default().with_tolerance(tol))?
                .with_diff_mode(diff_mode(mode));
            let r = layer.forward(&values)?;
            let g = layer.backward(&r.tape, &cot)?;
            let doc = json!({
                "gradients": dense(&g.grads),
                "mode": g.info.mode,
                "fallback": g.info.fallback,
                "residual": g.info.residual,
            });
            emit(output.as_deref(), &doc)
        }
        Command::Gradcheck {
            input,
            seed_cotangent,
            tol,
            mode,
            output,
        } => {
            let (problem, values) = load(&input)?;
            let layer = Layer::compile(&problem, SolverSettings::default().with_tolerance(1e-10))?
                .with_diff_mode(diff_mode(mode));
            let cot = match &seed_cotangent {
                Some(p) => load_values(p)?,
                None => layer
                    .variables()
                    .iter()
                    .map(|d| {
                        let ones = Array::new(d.shape.clone(), vec![1.0; d.shape.size()]).expect("sized");
                        (d.name.clone(), ones)
                    })
                    .collect(),
            };
            let check = gradcheck(&layer, &values, &cot, 1e-6)?;
            let pass = check.max_rel_error <= tol;
            let doc = json!({
                "max_rel_error": check.max_rel_error,
                "worst": check.worst,
                "tolerance": tol,
                "floor": GRADCHECK_FLOOR,
                "pass": pass,
                "analytic": dense(&check.analytic),
                "numeric": dense(&check.numeric),
            });
            emit(output.as_deref(), &doc)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::GradCheck(format!(
                    "max relative error {:e} exceeds {tol:e}",
                    check.max_rel_error
                )))
            }
        }
        Command::BenchCanon { input, reps, output } => {
            let (problem, values) = load(&input)?;
            if check_dpp(&problem).valid {
                let t = time_canonicalization(&problem, &values, reps).map_err(LayerError::from)?;
                let doc = json!({
                    "reps": t.reps,
                    "compile_ms": 1e3 * t.compile_secs,
                    "fresh_median_ms": 1e3 * t.fresh_secs,
                    "cached_median_ms": 1e3 * t.cached_secs,
                    "speedup": t.speedup(),
                });
                emit(output.as_deref(), &doc)
            } else {
                Err(Failure::Invalid("problem is not DPP".into()))
            }
        }
    }
}
