//! Command-line front end. Exit codes: 0 success, 1 error, 2 iteration
//! limit reached, 64 usage error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::asci::{run_asci, write_asci_csv, AsciConfig};
use crate::cispace::enumerate_basis;
use crate::driver::{
    degraded_state, format_float, run_one_shot, run_squish_observed, write_trace_csv,
    ConvergenceRef, MSchedule, Mode, OneShotConfig, OneShotResult, Scheme, SquishConfig,
    SquishTrace,
};
use crate::eigensolver::{read_state, DEFAULT_TOL};
use crate::error::{Result, SquishError};
use crate::fcidump::{classify_orbitals, read_fcidump, OrbitalPartition};
use crate::hamiltonian::{
    count_report, initial_term_set, one_norm, truncated_table, Grouping, InitialSet,
};
use crate::rdm::build_rdms;
use crate::shadows::{budget_for, BudgetQuery};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_TIMEOUT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "squish", version, about = "Iterative Hamiltonian truncation toolkit")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads (falls back to SQUISH_THREADS, then all cores).
    #[arg(long, global = true, env = "SQUISH_THREADS")]
    pub threads: Option<usize>,

    /// Increase log verbosity on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the truncation loop (all modes, including one-shot).
    Squish(SquishArgs),
    /// Term counts and 1-norms.
    Counts(CountsArgs),
    /// Selected CI with perturbative determinant ranking.
    Asci(AsciArgs),
    /// Classical-shadows measurement budget.
    Budget(BudgetArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SquishArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
    #[arg(long, default_value = "squish_v")]
    pub mode: Mode,
    #[arg(long, default_value = "no_vvvv")]
    pub initial_set: InitialSet,
    #[arg(long, default_value = "conjugate")]
    pub grouping: Grouping,
    #[arg(long, default_value_t = 2)]
    pub m0: usize,
    #[arg(long, default_value_t = 10.0)]
    pub growth: f64,
    #[arg(long, default_value_t = 3)]
    pub grow_every: usize,
    /// Convergence threshold in Hartree.
    #[arg(long, default_value_t = 1e-6)]
    pub delta: f64,
    #[arg(long, default_value = "self")]
    pub convergence: ConvergenceRef,
    /// Number of target states.
    #[arg(long, default_value_t = 1)]
    pub states: usize,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub solver_tol: f64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write the included term set of every iteration here.
    #[arg(long)]
    pub audit_dir: Option<PathBuf>,
    /// Approximate state for one-shot mode (`alpha_hex beta_hex amplitude`).
    #[arg(long)]
    pub state_file: Option<PathBuf>,
    /// One-shot ranking scheme.
    #[arg(long, default_value = "energetic")]
    pub scheme: Scheme,
    /// One-shot class budgets, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20,50,100,200,500,1000")]
    pub budgets: Vec<usize>,
    /// Term set whose ground state stands in for a missing state file.
    #[arg(long, default_value = "no_vvvv")]
    pub degraded_set: InitialSet,
    /// Dump the final state's 1- and 2-RDMs as text.
    #[arg(long)]
    pub rdm_out: Option<PathBuf>,
    /// Leave the wall_ms column empty so output is byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CountsArgs {
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub fcidump: Option<PathBuf>,
    /// Counting only: `M,NV` spatial and virtual orbital counts.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub synthetic: Option<Vec<usize>>,
    /// Also report 1-norms (needs integrals).
    #[arg(long, requires = "fcidump")]
    pub norms: bool,
    #[arg(long, default_value = "conjugate")]
    pub grouping: Grouping,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct AsciArgs {
    #[arg(long)]
    pub fcidump: PathBuf,
    /// Target-space sizes per iteration, comma separated; the last repeats.
    #[arg(long, value_delimiter = ',', default_value = "10,50,225")]
    pub target_size: Vec<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub delta: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub solver_tol: f64,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BudgetArgs {
    #[arg(long, required_unless_present = "fcidump")]
    pub eta: Option<usize>,
    /// Spin-orbital count.
    #[arg(long, required_unless_present = "fcidump")]
    pub n: Option<usize>,
    #[arg(long)]
    pub epsilon: f64,
    /// Take eta and N from an FCIDUMP header instead.
    #[arg(long, conflicts_with_all = ["eta", "n"])]
    pub fcidump: Option<PathBuf>,
}

/// Everything that determines a run, echoed into its JSON summary.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a, T: Serialize> {
    pub subcommand: &'static str,
    pub inputs: Vec<String>,
    pub arguments: &'a T,
    pub resolved: Value,
    /// No subcommand draws random numbers.
    pub seed: Option<u64>,
    pub tool_version: &'static str,
}

fn manifest<'a, T: Serialize>(
    subcommand: &'static str,
    inputs: Vec<&Path>,
    arguments: &'a T,
    resolved: Value,
) -> RunManifest<'a, T> {
    RunManifest {
        subcommand,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        arguments,
        resolved,
        seed: None,
        tool_version: env!("CARGO_PKG_VERSION"),
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let result = match &cli.command {
        Command::Squish(a) => cmd_squish(a),
        Command::Counts(a) => cmd_counts(a),
        Command::Asci(a) => cmd_asci(a),
        Command::Budget(a) => cmd_budget(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Write to `path`, or to stdout when there is none.
fn with_output(path: Option<&PathBuf>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn write_json(path: Option<&PathBuf>, value: &Value) -> Result<()> {
    with_output(path, |w| {
        let text = if path.is_some() {
            serde_json::to_string_pretty(value)
        } else {
            serde_json::to_string(value)
        }
        .map_err(|e| SquishError::Domain(format!("JSON encoding failed: {e}")))?;
        writeln!(w, "{text}")?;
        Ok(())
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data always serializes")
}

pub fn cmd_squish(args: &SquishArgs) -> Result<i32> {
    let table = read_fcidump(&args.fcidump)?;
    let config = SquishConfig {
        mode: args.mode,
        initial_set: args.initial_set,
        grouping: args.grouping,
        schedule: MSchedule {
            m0: args.m0,
            growth: args.growth,
            grow_every: args.grow_every,
        },
        delta: args.delta,
        convergence: args.convergence,
        states: args.states,
        max_iterations: args.max_iterations,
        solver_tol: args.solver_tol,
        track_overlap: true,
    };
    config.validate()?;
    if args.mode == Mode::OneShot {
        return one_shot(args, &table);
    }
    if let Some(dir) = &args.audit_dir {
        fs::create_dir_all(dir)?;
    }
    let mut observer = |k: usize, terms: &crate::hamiltonian::TermSet| -> Result<()> {
        if let Some(dir) = &args.audit_dir {
            let mut w = create(&dir.join(format!("iter_{k:04}.terms")))?;
            terms.write_text(&mut w)?;
            w.flush()?;
        }
        Ok(())
    };
    let (trace, code) = match run_squish_observed(&table, &config, &mut observer) {
        Ok(t) => (t, EXIT_OK),
        Err(SquishError::Timeout(t)) => {
            eprintln!("error: iteration limit {} reached", args.max_iterations);
            (*t, EXIT_TIMEOUT)
        }
        Err(e) => return Err(e),
    };
    with_output(args.out_csv.as_ref(), |w| write_trace_csv(&trace, w, !args.no_timing))?;
    if let Some(path) = &args.rdm_out {
        if let Some(state) = trace.final_states.first() {
            let basis = enumerate_basis(table.header.norb, table.header.nelec, table.header.ms2)?;
            let mut w = create(path)?;
            build_rdms(&state.amplitudes, &basis).write_text(&mut w)?;
            w.flush()?;
        }
    }
    let m = manifest("squish", vec![&args.fcidump], args, to_value(&config));
    write_json(args.out_json.as_ref(), &squish_summary(&m, &trace))?;
    Ok(code)
}

fn squish_summary<T: Serialize>(m: &RunManifest<T>, trace: &SquishTrace) -> Value {
    let last = trace.records.last();
    json!({
        "manifest": m,
        "termination": trace.termination.to_string(),
        "iterations": trace.records.len(),
        "hf_energy": trace.hf_energy,
        "exact_energies": trace.exact_energies,
        "final_included_tuples": last.map(|r| r.included_tuples),
        "final_vvvv_tuples": last.map(|r| r.vvvv_tuples),
        "final_e_nv": last.map(|r| r.e_nv),
        "final_e_v": last.map(|r| r.e_v),
        "final_state_energies_nv": last.map(|r| r.states_nv.clone()),
        "final_state_energies_v": last.map(|r| r.states_v.clone()),
        "final_err_exact": last.and_then(|r| r.err_exact),
        "final_overlap": last.and_then(|r| r.overlap),
        "final_one_norm": last.map(|r| r.one_norm),
        "final_s_squared": last.map(|r| r.s_squared),
    })
}

fn one_shot(args: &SquishArgs, table: &crate::fcidump::IntegralTable) -> Result<i32> {
    let h = &table.header;
    let basis = enumerate_basis(h.norb, h.nelec, h.ms2)?;
    let approx = match &args.state_file {
        Some(p) => read_state(BufReader::new(File::open(p)?), &basis)?,
        None => degraded_state(table, args.degraded_set, args.grouping, args.solver_tol)?,
    };
    let config = OneShotConfig {
        scheme: args.scheme,
        initial_set: args.initial_set,
        grouping: args.grouping,
        budgets: args.budgets.clone(),
        solver_tol: args.solver_tol,
    };
    let result = run_one_shot(table, &approx, &config)?;
    with_output(args.out_csv.as_ref(), |w| write_one_shot_csv(&result, w))?;
    let mut inputs = vec![args.fcidump.as_path()];
    if let Some(p) = &args.state_file {
        inputs.push(p.as_path());
    }
    let m = manifest("squish", inputs, args, to_value(&config));
    let summary = json!({
        "manifest": m,
        "exact_energy": result.exact_energy,
        "approx_energy": result.approx_energy,
        "pool_classes": result.pool_classes,
        "points": result.points,
        "first_within_chemical_accuracy": result
            .first_within(crate::driver::CHEMICAL_ACCURACY)
            .map(|p| p.m),
    });
    write_json(args.out_json.as_ref(), &summary)?;
    Ok(EXIT_OK)
}

fn write_one_shot_csv(result: &OneShotResult, w: &mut dyn Write) -> Result<()> {
    writeln!(w, "m,included_tuples,vvvv_tuples,E_eval,err_exact")?;
    for p in &result.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.m,
            p.included_tuples,
            p.vvvv_tuples,
            format_float(p.e_eval),
            format_float(p.err_exact)
        )?;
    }
    Ok(())
}

pub fn cmd_counts(args: &CountsArgs) -> Result<i32> {
    let (partition, table) = match (&args.synthetic, &args.fcidump) {
        (Some(v), _) => {
            if v.len() != 2 {
                return Err(SquishError::Domain("--synthetic expects M,NV".into()));
            }
            (OrbitalPartition::synthetic(v[0], v[1])?, None)
        }
        (None, Some(p)) => {
            let t = read_fcidump(p)?;
            (classify_orbitals(&t.header)?, Some(t))
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    let terms = initial_term_set(&partition, InitialSet::NoVvvv, args.grouping);
    let report = count_report(&partition, &terms);
    let mut out = json!({
        "one_body_terms": report.one_body_total,
        "two_body_terms": report.two_body_total,
        "two_body_without_vvvv": report.included_two_body,
        "vvvv_terms": report.excluded,
    });
    if args.norms {
        let t = table.as_ref().expect("clap ties --norms to --fcidump");
        out["one_norm_full"] = json!(one_norm(t));
        out["one_norm_no_vvvv"] = json!(one_norm(&truncated_table(t, &terms)));
    }
    if args.json {
        println!("{out}");
    } else {
        println!("one_body_terms {}", report.one_body_total);
        println!("two_body_terms {}", report.two_body_total);
        println!("two_body_without_vvvv {}", report.included_two_body);
        println!("vvvv_terms {}", report.excluded);
        if args.norms {
            println!("one_norm_full {}", format_float(out["one_norm_full"].as_f64().unwrap()));
            println!(
                "one_norm_no_vvvv {}",
                format_float(out["one_norm_no_vvvv"].as_f64().unwrap())
            );
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_asci(args: &AsciArgs) -> Result<i32> {
    let table = read_fcidump(&args.fcidump)?;
    let config = AsciConfig {
        target_sizes: args.target_size.clone(),
        delta_e: args.delta,
        max_iterations: args.max_iterations,
        solver_tol: args.solver_tol,
    };
    let trace = run_asci(&table, &config)?;
    with_output(args.out_csv.as_ref(), |w| write_asci_csv(&trace, w))?;
    if let Some(p) = &args.out_json {
        let m = manifest("asci", vec![&args.fcidump], args, to_value(&config));
        let summary = json!({
            "manifest": m,
            "converged": trace.converged,
            "iterations": trace.records.len(),
            "final_space_size": trace.records.last().map(|r| r.space_size),
            "final_energy": trace.final_energy(),
        });
        write_json(Some(p), &summary)?;
    }
    Ok(if trace.converged { EXIT_OK } else { EXIT_TIMEOUT })
}

pub fn cmd_budget(args: &BudgetArgs) -> Result<i32> {
    let q = match &args.fcidump {
        Some(p) => {
            let t = read_fcidump(p)?;
            BudgetQuery {
                eta: t.header.nelec,
                n_spin_orbitals: t.header.n_spin_orbitals(),
                epsilon: args.epsilon,
            }
        }
        None => BudgetQuery {
            eta: args.eta.expect("clap requires --eta"),
            n_spin_orbitals: args.n.expect("clap requires --n"),
            epsilon: args.epsilon,
        },
    };
    let report = budget_for(&q)?;
    println!("{}", to_value(&report));
    Ok(EXIT_OK)
}
