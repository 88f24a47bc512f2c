use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use moderation_pipeline::harness::{self, emit_figures, load_scenario, RegretReport, Scenario};
use moderation_pipeline::sim::{
    littles_law_sides, loss_decomposition, realized_loss, run_spec, Trace,
};
use moderation_pipeline::{solve_w_fluid, EnvConfig, Error};

#[derive(Parser)]
#[command(
    name = "modsim",
    version,
    about = "Moderation queue simulator and regret harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or preset and write the report and figures.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $MODSIM_OUT, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the first replication's trace per policy as JSONL.
        #[arg(long)]
        traces: bool,
    },
    /// Solve the w-fluid benchmark for an environment file.
    Fluid {
        #[arg(long)]
        env: PathBuf,
        /// Comma-separated window sizes; 0 means the horizon.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        w: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a JSONL trace and re-run it to check determinism.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Sweep one generator parameter of a scenario.
    Sweep {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        reps: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(inner) = source {
                eprintln!("  caused by: {inner}");
                source = inner.source();
            }
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidEnv(_)
        | Error::InvalidDistribution(_)
        | Error::Config(_)
        | Error::NonFinite(_) => 2,
        Error::Contract { .. } => 3,
        Error::Run { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn execute(command: Command) -> moderation_pipeline::Result<()> {
    match command {
        Command::Simulate {
            scenario,
            reps,
            seed,
            out,
            traces,
        } => {
            let scenario = overridden(load_scenario(&scenario)?, reps, seed);
            let dir = harness::output_dir(out.as_deref()).join(&scenario.name);
            let report = harness::run_experiment(&scenario)?;
            print_report(&report);
            write_outputs(&report, &scenario, &dir)?;
            if traces {
                let env = scenario.validate()?;
                for spec in &scenario.policies {
                    let trace = run_spec(&env, spec, scenario.base_seed)?;
                    let path = dir.join(format!("trace-{}.jsonl", spec.display_name()));
                    trace.write_jsonl(BufWriter::new(File::create(&path)?))?;
                    println!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Command::Fluid { env, w, out } => {
            let env: EnvConfig = serde_json::from_reader(BufReader::new(File::open(&env)?))?;
            env.validate()?;
            let dir = harness::output_dir(out.as_deref());
            std::fs::create_dir_all(&dir)?;
            println!("{:>8}  {:>16}  {:>12}", "w", "L*(w,T)", "L*/T");
            for w in w {
                let w = if w == 0 { env.horizon.max(1) } else { w };
                let fluid = solve_w_fluid(&env, w)?;
                println!(
                    "{:>8}  {:>16.6}  {:>12.6}",
                    w,
                    fluid.objective,
                    fluid.objective / env.horizon.max(1) as f64
                );
                let path = dir.join(format!("fluid-w{w}.json"));
                std::fs::write(&path, serde_json::to_string_pretty(&fluid.export_json())?)?;
            }
            Ok(())
        }
        Command::Replay { trace } => {
            let trace = Trace::read_jsonl(BufReader::new(File::open(&trace)?))?;
            let decomposition = loss_decomposition(&trace)?;
            let (by_posts, by_periods) = littles_law_sides(&trace);
            println!("policy            {}", trace.policy);
            println!("seed              {}", trace.seed);
            println!("horizon           {}", trace.horizon());
            println!("posts             {}", trace.posts.len());
            println!("realized loss     {:.6}", realized_loss(&trace));
            println!(
                "decomposition     idiosyncrasy {:.3}, delay {:.3}, classification {:.3}",
                decomposition.idiosyncrasy, decomposition.delay, decomposition.classification
            );
            println!("little's law      {by_posts} = {by_periods}");
            if by_posts != by_periods {
                return Err(Error::Contract {
                    period: trace.horizon(),
                    message: "time-in-system identity does not hold".into(),
                });
            }
            if let Some(spec) = &trace.policy_spec {
                let again = run_spec(&trace.env, spec, trace.seed)?;
                if again != trace {
                    return Err(Error::Contract {
                        period: trace.horizon(),
                        message: "re-running the trace's policy and seed gave a different trace"
                            .into(),
                    });
                }
                println!("replay            identical");
            } else {
                println!("replay            skipped (trace has no policy spec)");
            }
            Ok(())
        }
        Command::Sweep {
            scenario,
            param,
            values,
            reps,
            seed,
            out,
        } => {
            let scenario = overridden(load_scenario(&scenario)?, reps, seed);
            let dir =
                harness::output_dir(out.as_deref()).join(format!("{}-{param}", scenario.name));
            let report = harness::sweep(&scenario, &param, &values)?;
            print_report(&report);
            write_outputs(&report, &scenario, &dir)?;
            Ok(())
        }
    }
}

fn overridden(mut scenario: Scenario, reps: Option<u32>, seed: Option<u64>) -> Scenario {
    if let Some(r) = reps {
        scenario.replications = r;
    }
    if let Some(s) = seed {
        scenario.base_seed = s;
    }
    scenario
}

fn print_report(report: &RegretReport) {
    println!(
        "{:<22} {:>10} {:>8} {:>14} {:>12}",
        "policy", "x", "w", "avg regret", "stderr"
    );
    for row in &report.rows {
        let x = row.x.map_or_else(|| "-".to_string(), |x| x.to_string());
        println!(
            "{:<22} {:>10} {:>8} {:>14.6} {:>12.6}",
            row.policy, x, row.w, row.regret.mean, row.regret.stderr
        );
    }
    for gap in &report.gaps {
        let x = gap.x.map_or_else(|| "-".to_string(), |x| x.to_string());
        println!(
            "gap {:<18} {:>10} {:>23.6} {:>12.6}",
            gap.label, x, gap.gap.mean, gap.gap.stderr
        );
    }
}

fn write_outputs(
    report: &RegretReport,
    scenario: &Scenario,
    dir: &Path,
) -> moderation_pipeline::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
    println!("wrote {}", path.display());
    for file in emit_figures(report, scenario, dir)? {
        println!("wrote {}", file.display());
    }
    Ok(())
}
