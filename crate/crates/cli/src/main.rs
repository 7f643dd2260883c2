use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use marsc::bench::{self, ExperimentConfig, ResultRow, SummaryRow};
use marsc::bnt::{self, BntConfig, Budget};
use marsc::edf::{solve_edf, EdfConfig, EdfKey};
use marsc::exact::{self, ExactConfig, ToptwInstance};
use marsc::feasibility::validate;
use marsc::model::{score_with, Accrual};
use marsc::par::{self, Execution};
use marsc::scenarios::{self, ScenarioParams};
use marsc::{Instance, Solution};

#[derive(Parser)]
#[command(name = "marsc", version, about = "Coalition routing and scheduling: generate, solve, validate, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccrualArg {
    Literal,
    Completion,
}

impl From<AccrualArg> for Accrual {
    fn from(a: AccrualArg) -> Self {
        match a {
            AccrualArg::Literal => Accrual::Literal,
            AccrualArg::Completion => Accrual::Completion,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance from scenario parameters.
    Gen {
        /// Scenario parameters as JSON; missing fields take defaults.
        #[arg(long)]
        params: PathBuf,
        /// Build from this record CSV instead of synthetic records.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve an instance and write the solution JSON.
    Solve {
        #[arg(long, value_parser = ["bnt", "edf", "exact"])]
        algo: String,
        #[arg(long)]
        instance: PathBuf,
        /// Re-seed the instance's coalition value model.
        #[arg(long)]
        seed: Option<u64>,
        /// BNT runs; more than one enables re-execution.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        budget_ms: Option<u64>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long, value_enum, default_value = "literal")]
        accrual: AccrualArg,
        /// Disable the proximity filter on agent candidates.
        #[arg(long)]
        no_proximity: bool,
        /// EDF ordering key: earliest or deadline.
        #[arg(long, default_value = "earliest")]
        key: EdfKey,
        /// Size cap for the exact solver.
        #[arg(long, default_value_t = exact::DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a solution against an instance; prints one JSON line per violation.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Run an experiment grid and write per-run results.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Median and bootstrap interval per group, plus BNT/EDF ratios.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score-versus-ratio series, one panel per value kind.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map a team orienteering instance onto the coalition model.
    Reduce {
        /// ToptwInstance JSON, or a column-layout text file with --agents.
        #[arg(long)]
        toptw: PathBuf,
        /// Read the column layout `id x y service profit open close`.
        #[arg(long)]
        solomon: bool,
        #[arg(long, default_value_t = 1)]
        agents: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("cannot parse {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { params, records, out } => {
            let params: ScenarioParams = read_json(&params)?;
            let instance = match records {
                Some(path) => {
                    let parsed = scenarios::parse_records(open(&path)?)?;
                    for s in &parsed.skipped {
                        eprintln!("{}:{}: skipped: {}", path.display(), s.line, s.reason);
                    }
                    let (inst, cursor) = scenarios::build_instance(&parsed.records, &params)?;
                    eprintln!("records used up to {cursor}");
                    inst
                }
                None => scenarios::synth_instance(&params)?,
            };
            write_json(&out, &instance)?;
            println!(
                "agents={} nodes={} locations={}",
                instance.agent_count(),
                instance.node_count(),
                instance.locations.len()
            );
        }
        Command::Solve {
            algo,
            instance,
            seed,
            runs,
            budget_ms,
            max_steps,
            accrual,
            no_proximity,
            key,
            cap,
            out,
        } => {
            let mut inst: Instance = read_json(&instance)?;
            if let Some(s) = seed {
                let kind = inst.values.kind();
                inst = inst.with_values(kind, s);
            }
            let accrual = Accrual::from(accrual);
            let proximity_filter = !no_proximity;
            let solution: Solution = match algo.as_str() {
                "bnt" => {
                    let cfg = BntConfig {
                        accrual,
                        proximity_filter,
                        budget: Budget {
                            max_steps,
                            wall: budget_ms.map(std::time::Duration::from_millis),
                        },
                    };
                    if runs > 1 {
                        bnt::refine(&inst, &cfg, runs)
                    } else {
                        bnt::solve_bnt(&inst, &cfg)
                    }
                }
                "edf" => solve_edf(
                    &inst,
                    &EdfConfig {
                        accrual,
                        proximity_filter,
                        key,
                    },
                ),
                _ => {
                    exact::solve_exact(
                        &inst,
                        &ExactConfig {
                            cap,
                            accrual,
                            ..ExactConfig::default()
                        },
                    )?
                    .solution
                }
            };
            write_json(&out, &solution)?;
            println!(
                "score={} traversals={} visits={}",
                score_with(&solution, &inst, accrual),
                solution.metadata.traversals,
                solution.visits.len()
            );
        }
        Command::Validate { instance, solution } => {
            let inst: Instance = read_json(&instance)?;
            let sol: Solution = read_json(&solution)?;
            let report = validate(&sol, &inst);
            if !report.is_empty() {
                print!("{}", report.to_json_lines());
                bail!("{} violation(s)", report.len());
            }
            println!("feasible");
        }
        Command::Bench { config, out, jobs } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let exec = if jobs == Some(1) || !Execution::available() {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let rows = par::with_threads(jobs, || bench::run_experiment(&cfg, exec))?;
            bench::write_csv(&rows, create(&out)?)?;
            let skipped = rows.iter().filter(|r| r.skipped).count();
            println!("rows={} skipped={skipped}", rows.len());
        }
        Command::Summarize { input, out } => {
            let rows: Vec<ResultRow> = bench::read_csv(open(&input)?)?;
            if rows.is_empty() {
                bail!("{} holds no result rows", input.display());
            }
            let summary = bench::summarize_rows(&rows)?;
            bench::write_csv(&summary, create(&out)?)?;
            for (kind, eta) in bench::median_eta_by_kind(&rows)? {
                println!("{kind}: median eta {eta:.4}");
            }
        }
        Command::Plotdata { input, out } => {
            let summary: Vec<SummaryRow> = bench::read_csv(open(&input)?)?;
            let plot = bench::plot_rows(&summary);
            bench::write_csv(&plot, create(&out)?)?;
            println!("points={}", plot.len());
        }
        Command::Reduce {
            toptw,
            solomon,
            agents,
            out,
        } => {
            let t = if solomon {
                let text = std::fs::read_to_string(&toptw).with_context(|| format!("cannot read {}", toptw.display()))?;
                ToptwInstance::from_solomon(&text, agents)?
            } else {
                ToptwInstance::from_json_file(&toptw)?
            };
            let inst = exact::reduce_toptw(&t)?;
            write_json(&out, &inst)?;
            println!("nodes={} agents={}", inst.node_count(), inst.agent_count());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let reason = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {reason}");
            ExitCode::FAILURE
        }
    }
}
