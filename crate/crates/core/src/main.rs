use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use logdet_bandits::design::{g_optimal_design_default, max_leverage};
use logdet_bandits::harness::{self, ExperimentConfig};
use logdet_bandits::lifted::ActionSet;
use logdet_bandits::BanditError;

#[derive(Parser)]
#[command(name = "logdet-bandits", version, about = "Adversarial linear contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write one trace CSV per seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// G-optimal design of a set of actions, one per CSV row.
    Design {
        #[arg(long)]
        actions: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Recompute learner loss, comparator and regret from a trace.
    Oracle {
        #[arg(long)]
        trace: PathBuf,
        /// Regenerate the environment from this config to recompute the
        /// comparator independently (needs `--seed`).
        #[arg(long, requires = "seed")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum Failure {
    Config(String),
    Verify,
    Runtime(String),
}

impl From<BanditError> for Failure {
    fn from(e: BanditError) -> Self {
        match e {
            BanditError::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Verify { seed, out } => cmd_verify(seed, out.as_deref()),
        Command::Design { actions, tol } => cmd_design(&actions, tol),
        Command::Oracle { trace, config, seed } => cmd_oracle(&trace, config.as_deref(), seed),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify) => ExitCode::from(1),
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = harness::parse_config(config)?;
    let dir = out.or_else(|| cfg.output.as_ref().map(PathBuf::from));
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).map_err(|e| Failure::Config(format!("{}: {e}", d.display())))?;
    }
    println!("seed,rounds,learner_loss,comparator_loss,regret");
    for &seed in &cfg.seeds {
        let run = harness::run_seed(&cfg, seed)?;
        if let Some(d) = &dir {
            let path = d.join(trace_name(&cfg, seed));
            harness::write_csv(&run.traces, &path)?;
        }
        let r = &run.report;
        println!(
            "{seed},{},{},{},{}",
            run.traces.len(),
            harness::format_g17(r.learner_loss),
            harness::format_g17(r.comparator_loss),
            harness::format_g17(r.regret)
        );
    }
    Ok(())
}

fn trace_name(cfg: &ExperimentConfig, seed: u64) -> String {
    format!("{}_seed{seed}.csv", cfg.algorithm.as_str())
}

fn cmd_verify(seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let report = harness::verify_suites(seed);
    println!("{:<34} {:>6} {:>14} {:>14} {:>8}  detail", "check", "result", "value", "threshold", "secs");
    for r in &report.rows {
        println!(
            "{:<34} {:>6} {:>14.6e} {:>14.6e} {:>8.2}  {}",
            r.name,
            if r.pass { "PASS" } else { "FAIL" },
            r.value,
            r.threshold,
            r.seconds,
            r.detail
        );
    }
    if let Some(p) = out {
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.to_string()))?;
        std::fs::write(p, json).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn cmd_design(actions: &Path, tol: f64) -> Result<(), Failure> {
    if !(tol > 0.0) {
        return Err(Failure::Config(format!("--tol must be positive, got {tol}")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(actions)
        .map_err(|e| Failure::Config(format!("{}: {e}", actions.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Config(format!("line {}: {e}", i + 1)))?;
        let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Failure::Config(format!("line {}: {e}", i + 1)))?);
    }
    let set = ActionSet::from_rows(rows).map_err(|e| Failure::Config(e.to_string()))?;
    let (nu, report) = g_optimal_design_default(&set, tol)?;
    println!("action,weight");
    for (i, w) in nu.weights().iter().enumerate() {
        println!("{i},{}", harness::format_g17(*w));
    }
    println!("# max_leverage {}", harness::format_g17(max_leverage(&nu, &set)?));
    println!("# iterations {} gap {:e}", report.iterations, report.final_gap);
    Ok(())
}

fn cmd_oracle(trace: &Path, config: Option<&Path>, seed: Option<u64>) -> Result<(), Failure> {
    let traces = harness::read_csv_file(trace)?;
    let env = match (config, seed) {
        (Some(c), Some(s)) => {
            let mut cfg = harness::parse_config(c)?;
            if cfg.horizon as usize != traces.len() {
                cfg.horizon = traces.len() as u64;
                cfg.validate()?;
            }
            Some(harness::realize(&cfg, s)?)
        }
        _ => None,
    };
    let rep = harness::oracle(&traces, env.as_ref())?;
    println!("rounds,learner_loss,comparator_loss,regret,max_column_error,independent_comparator");
    println!(
        "{},{},{},{},{:e},{}",
        rep.rounds,
        harness::format_g17(rep.learner_loss),
        harness::format_g17(rep.comparator_loss),
        harness::format_g17(rep.regret),
        rep.max_column_error,
        rep.independent_comparator
    );
    if rep.max_column_error > 1e-9 {
        eprintln!("trace columns disagree with recomputation by {:e}", rep.max_column_error);
        return Err(Failure::Verify);
    }
    Ok(())
}
