// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shapenum::analyzer::{self, Config, FindingKind};
use shapenum::concrete::{run_collect, ConcreteState, RunOutcome};
use shapenum::disjunct::DisjState;
use shapenum::lang::{parse_program_with_defs, Program};
use shapenum::memory::{AbstractMem, Precondition};
use shapenum::numeric::{Intervals, NumDomain, Zone};
use shapenum::shape::DefTable;
use shapenum::{Error, Result};

// A closed stdout (e.g. piped into `head`) ends the process quietly.
macro_rules! out {
    ($($t:tt)*) => {
        if write!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    };
}
macro_rules! outln {
    ($($t:tt)*) => {
        if writeln!(std::io::stdout(), $($t)*).is_err() {
            std::process::exit(0);
        }
    };
}

#[derive(Parser)]
#[command(name = "shapenum", version, about = "Shape and numeric analysis of heap-manipulating programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Numeric {
    Interval,
    Zone,
}

#[derive(clap::Args)]
struct AnalysisOpts {
    file: PathBuf,
    /// File of inductive definitions replacing the built-in list.
    #[arg(long)]
    defs: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    unfold_bound: usize,
    #[arg(long, default_value_t = 1)]
    widen_delay: usize,
    #[arg(long, default_value_t = 4)]
    max_disjuncts: usize,
    #[arg(long, default_value_t = 3)]
    oracle_depth: usize,
    /// Initial content of a variable: x=list, x=null, x=top or x=LO..HI.
    /// Adds to `//@pre` lines in the program.
    #[arg(long = "pre")]
    pre: Vec<String>,
    #[arg(long, value_enum, default_value = "interval")]
    numeric: Numeric,
}

#[derive(Subcommand)]
enum Cmd {
    /// Analyze a program and print or write the per-label invariants.
    Analyze {
        #[command(flatten)]
        opts: AnalysisOpts,
        #[arg(long, value_enum, default_value = "text")]
        emit: Emit,
        /// Directory to write analysis.{txt,json,dot} into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a program concretely.
    Run {
        file: PathBuf,
        #[arg(long)]
        defs: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        fuel: usize,
        #[arg(long)]
        trace: bool,
        /// Initial variable values in declaration order, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        init: Vec<i64>,
    },
    /// Analyze, then check the result against concrete runs.
    Check {
        #[command(flatten)]
        opts: AnalysisOpts,
        #[arg(long, default_value_t = 200)]
        fuel: usize,
        /// Number of initial states to run from.
        #[arg(long, default_value_t = 3)]
        runs: usize,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn load(file: &Path, defs: Option<&Path>) -> Result<(String, Program)> {
    let table = match defs {
        Some(d) => DefTable::parse(&read(d)?)?,
        None => DefTable::builtin(),
    };
    let text = read(file)?;
    let p = parse_program_with_defs(&text, table)?;
    Ok((text, p))
}

impl AnalysisOpts {
    fn config(&self) -> Config {
        Config {
            unfold_bound: self.unfold_bound,
            widen_delay: self.widen_delay,
            max_disjuncts: self.max_disjuncts,
            oracle_depth: self.oracle_depth,
            ..Config::default()
        }
    }

    fn load(&self) -> Result<(Program, Vec<(String, Precondition)>)> {
        let (text, p) = load(&self.file, self.defs.as_deref())?;
        let mut pre = analyzer::parse_pre_directives(&text)?;
        for item in &self.pre {
            pre.push(analyzer::parse_pre(item)?);
        }
        Ok((p, pre))
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, body))
        .map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })
}

fn init_state<N: NumDomain>(p: &Program, pre: &[(String, Precondition)], cfg: &Config) -> Result<DisjState<N>> {
    let refs: Vec<(&str, Precondition)> = pre.iter().map(|(v, c)| (v.as_str(), c.clone())).collect();
    Ok(DisjState::single(AbstractMem::init_with(&cfg.domain(p), p, &refs)?))
}

fn analyze<N: NumDomain>(opts: &AnalysisOpts, emit: Emit, out: Option<&Path>) -> Result<()> {
    let (p, pre) = opts.load()?;
    let cfg = opts.config();
    let res = analyzer::analyze::<N>(&p, init_state(&p, &pre, &cfg)?, &cfg)?;
    match out {
        Some(dir) => {
            write_out(dir, "analysis.txt", &analyzer::to_text(&p, &res))?;
            let json = serde_json::to_string_pretty(&analyzer::to_json(&p, &res)).map_err(|e| Error::Internal(e.to_string()))?;
            write_out(dir, "analysis.json", &json)?;
            write_out(dir, "analysis.dot", &analyzer::to_dot(&p, &res))?;
        }
        None => match emit {
            Emit::Text => out!("{}", analyzer::to_text(&p, &res)),
            Emit::Json => outln!("{:#}", analyzer::to_json(&p, &res)),
            Emit::Dot => out!("{}", analyzer::to_dot(&p, &res)),
        },
    }
    Ok(())
}

fn check<N: NumDomain>(opts: &AnalysisOpts, fuel: usize, runs: usize) -> Result<u8> {
    let (p, pre) = opts.load()?;
    let cfg = opts.config();
    let init = init_state::<N>(&p, &pre, &cfg)?;
    let res = analyzer::analyze(&p, init.clone(), &cfg)?;
    let inits = analyzer::initial_states(&p, &pre, runs)?;
    let rep = analyzer::cross_check(&p, &init, &res, &inits, fuel, cfg.oracle_depth);
    outln!(
        "runs {} (skipped {}), states {}, accepted {}, concrete errors {}",
        rep.runs, rep.skipped, rep.states_checked, rep.accepted, rep.concrete_errors
    );
    for f in &rep.findings {
        outln!("{f}");
    }
    for ((l, k), d) in &res.alarms {
        outln!("alarm {l} {k}: {d}");
    }
    for (l, ok) in &res.asserts {
        outln!("assert {l} {}", if *ok { "proven" } else { "unproven" });
    }
    let inconclusive = rep.count(FindingKind::Inconclusive);
    if !rep.is_sound() {
        outln!("UNSOUND: {} violation(s)", rep.violations());
        return Ok(2);
    }
    if inconclusive > 0 {
        outln!("note: {inconclusive} state(s) needed deeper unfolding than --oracle-depth");
    }
    if !res.all_asserts_proven() {
        return Ok(1);
    }
    outln!("ok");
    Ok(0)
}

fn run(file: &Path, defs: Option<&Path>, fuel: usize, trace: bool, init: &[i64]) -> Result<u8> {
    let (_, p) = load(file, defs)?;
    let s = ConcreteState::initial(&p, init);
    let c = run_collect(&p, s.env, s.store, fuel);
    if trace {
        for st in &c.trace {
            outln!("{st}");
        }
    } else if let Some(last) = c.trace.last() {
        outln!("{last}");
    }
    Ok(match c.outcome {
        RunOutcome::Finished => 0,
        RunOutcome::OutOfFuel => {
            outln!("out of fuel after {fuel} steps");
            0
        }
        RunOutcome::Error(e) => {
            outln!("{e}");
            1
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Analyze { opts, emit, out } => match opts.numeric {
            Numeric::Interval => analyze::<Intervals>(opts, *emit, out.as_deref()),
            Numeric::Zone => analyze::<Zone>(opts, *emit, out.as_deref()),
        }
        .map(|_| 0),
        Cmd::Run { file, defs, fuel, trace, init } => run(file, defs.as_deref(), *fuel, *trace, init),
        Cmd::Check { opts, fuel, runs } => match opts.numeric {
            Numeric::Interval => check::<Intervals>(opts, *fuel, *runs),
            Numeric::Zone => check::<Zone>(opts, *fuel, *runs),
        },
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
