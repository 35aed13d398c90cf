use clap::{Parser, Subcommand};
use log::{error, info, warn};
use offdiag_cli::report::{verdict_str, write_all};
use offdiag_cli::sweep::{run_sweep, summary_row, summary_table, sweep_exit_code};
use offdiag_cli::{acceptance, analyze, with_workers, Grid, RunConfig, RunError};
use offdiag_core::blocks::DEFAULT_SEED;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "offdiag", version, about = "Essential-selfadjointness diagnostics from off-diagonal block data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify one operator and write report.json plus CSV tables.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Repeat an analysis over a parameter grid `param=start:stop:step`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the acceptance suite (all criteria, or a comma-separated subset).
    Selftest {
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

const DEFAULT_OUT: &str = "offdiag-out";

fn out_dir(cli: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    cli.or_else(|| config.outputs.dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn run_analyze(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>, workers: Option<usize>) -> Result<i32, RunError> {
    let shown = config_path.display().to_string();
    let config = RunConfig::load(config_path)?;
    let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let dir = out_dir(out, &config);
    let a = with_workers(workers, || analyze(&config, seed))?.map_err(|e| e.with_path(&shown))?;
    write_all(&dir, &a.report, &a.tables, &a.timing).map_err(|e| e.with_path(&shown))?;
    let v = &a.report.verdict;
    println!("{}: {} via {} -> {}", a.report.operator.label, verdict_str(v.verdict), v.provenance, dir.display());
    let bad = a.inequality_violations();
    if bad > 0 {
        error!("{shown}: {bad} inequality violations on solver vectors; see inequalities.csv");
        return Ok(2);
    }
    Ok(0)
}

fn run_sweep_cmd(config_path: &Path, grid: &str, out: Option<PathBuf>, seed: Option<u64>, workers: Option<usize>) -> Result<i32, RunError> {
    let shown = config_path.display().to_string();
    let config = RunConfig::load(config_path)?;
    let grid = Grid::parse(grid)?;
    let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
    let dir = out_dir(out, &config);
    let points = with_workers(workers, || run_sweep(&config, &grid, seed))?.map_err(|e| e.with_path(&shown))?;
    let mut rows = Vec::new();
    for p in &points {
        match &p.outcome {
            Ok(a) => write_all(&dir.join(&p.directory), &a.report, &a.tables, &a.timing).map_err(|e| e.with_path(&shown))?,
            Err(e) => warn!("{}={}: {}", grid.param, p.value, e.clone().with_path(&shown)),
        }
        let row = summary_row(&grid, p);
        info!("{}={}: {:?}", grid.param, p.value, row.verdict);
        rows.push(row);
    }
    std::fs::create_dir_all(&dir).map_err(|e| RunError::config(&shown, "outputs.dir", format!("{}: {e}", dir.display())))?;
    let table = summary_table(&rows);
    std::fs::write(dir.join(&table.name), table.to_csv()).map_err(|e| RunError::config(&shown, "outputs.dir", e.to_string()))?;
    let json = serde_json::to_vec_pretty(&rows).expect("rows serialize");
    std::fs::write(dir.join("sweep.json"), json).map_err(|e| RunError::config(&shown, "outputs.dir", e.to_string()))?;
    for r in &rows {
        let v = r.verdict.map(verdict_str).unwrap_or("error");
        println!("{}={}: {v}", r.param, r.value);
    }
    Ok(sweep_exit_code(&points))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("OFFDIAG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Analyze { config, out, seed, workers } => run_analyze(&config, out, seed, workers),
        Command::Sweep { config, grid, out, seed, workers } => run_sweep_cmd(&config, &grid, out, seed, workers),
        Command::Selftest { only } => {
            let outcomes = acceptance::run(&only);
            for o in &outcomes {
                println!("{}", o.line());
            }
            Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 1 })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
