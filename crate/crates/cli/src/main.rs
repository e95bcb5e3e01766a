//! `lab`: runs one experiment and writes its report, tables and artifacts.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 config or usage error,
//! 3 budget exceeded.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use masklab::ensemble::KMode;
use masklab::harness::{run, ExperimentConfig, RunOutput, Subcommand, Table};
use masklab::rng::parse_seed;
use masklab::symmetry::BackmapMode;
use masklab::Error;

const PASS: u8 = 0;
const ASSERTION_FAILED: u8 = 1;
const CONFIG_ERROR: u8 = 2;
const BUDGET_EXCEEDED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "lab", version, about = "Masked Unique-SAT laboratory")]
struct Cli {
    /// sample, neutrality, sparsify, treelike, isolate, switch, success,
    /// codec, clash or selftest
    command: String,
    /// `audit` after `codec`
    action: Option<String>,
    #[arg(long)]
    config: PathBuf,
    /// Decimal or 0x-hex 64-bit seed; overrides the config.
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Report path; tables and artifacts are written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    backmap: Option<BackmapMode>,
    #[arg(long = "k-mode")]
    k_mode: Option<KMode>,
}

fn subcommand(cli: &Cli) -> Result<Subcommand, Error> {
    match (cli.command.as_str(), cli.action.as_deref()) {
        ("codec", Some("audit")) => Ok(Subcommand::CodecAudit),
        ("codec-audit", _) => Err(Error::invalid("subcommand", "use `codec audit`")),
        (c, None) => c.parse(),
        (c, Some(a)) => Err(Error::invalid("subcommand", format!("unexpected argument {a:?} after {c:?}"))),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = &cli.seed {
        cfg.seed = parse_seed(s)?;
    }
    if let Some(b) = cli.backmap {
        cfg.wrapper.backmap = b;
    }
    if let Some(k) = cli.k_mode {
        cfg.ensemble.k_mode = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `dir/run.json` + `blocks.csv` -> `dir/run.blocks.csv`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.with_extension("");
    PathBuf::from(format!("{}.{suffix}", stem.display()))
}

fn write_table(path: &Path, t: &Table) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&t.header)?;
    for row in &t.rows {
        w.write_record(row)?;
    }
    w.flush()
}

fn write_outputs(out: &Path, o: &RunOutput) -> std::io::Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, o.report.to_json())?;
    for t in &o.tables {
        write_table(&sibling(out, &format!("{}.csv", t.name)), t)?;
    }
    for a in &o.artifacts {
        fs::write(sibling(out, &a.suffix), &a.bytes)?;
    }
    Ok(())
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::BudgetExceeded { .. } | Error::TrialLimit { .. } => BUDGET_EXCEEDED,
        _ => CONFIG_ERROR,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG_ERROR } else { PASS });
        }
    };
    let prepared = subcommand(&cli).and_then(|sub| Ok((sub, load_config(&cli)?)));
    let (sub, cfg) = match prepared {
        Ok(x) => x,
        Err(e) => {
            eprintln!("lab: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    if let Some(k) = cli.workers {
        if k == 0 {
            eprintln!("lab: --workers must be positive");
            return ExitCode::from(CONFIG_ERROR);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .expect("global pool is configured once");
    }
    let start = Instant::now();
    let output = match run(sub, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("lab {sub}: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };
    // Wall-clock goes to stderr so the report stays byte-identical.
    for a in &output.report.assertions {
        let verdict = if a.passed { "PASS" } else { "FAIL" };
        eprintln!("[{verdict}] criterion {:>2} {}: {}", a.criterion, a.name, a.detail);
    }
    eprintln!("lab {sub}: {:.2}s wall-clock", start.elapsed().as_secs_f64());
    match &cli.out {
        Some(out) => {
            if let Err(e) = write_outputs(out, &output) {
                eprintln!("lab: writing {}: {e}", out.display());
                return ExitCode::from(CONFIG_ERROR);
            }
        }
        None => print!("{}", output.report.to_json()),
    }
    ExitCode::from(if output.report.passed { PASS } else { ASSERTION_FAILED })
}
