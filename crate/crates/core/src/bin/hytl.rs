use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use hytl_core::attcat::{attcat_scores, emit_heatmap, AttcatOptions, Weighting};
use hytl_core::harness::{evaluate, scripted_return};
use hytl_core::{train, Agent, RunConfig};
use hytl_env::task_library;
use hytl_env::trajectory::write_line;
use hytl_ltl::{parse, parse_inferring_alphabet, progress, simplify, Formula};

#[derive(Parser)]
#[command(
    name = "hytl",
    version,
    about = "Temporal-logic-guided hierarchical RL on a kinematic tabletop"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes metrics.csv, eval.csv and checkpoint.hytl.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deterministic evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        /// Write every evaluation step as JSON lines.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Progress a formula against assignments read from stdin, one
    /// comma-separated proposition list per line.
    Progress {
        #[arg(long)]
        formula: String,
    },
    /// Per-token attributions of a formula for one proposition class.
    Attcat {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        formula: String,
        #[arg(long)]
        class: String,
        #[arg(long)]
        out: PathBuf,
        /// Weight by attention each token pays rather than receives.
        #[arg(long)]
        sender: bool,
    },
    /// List the task library.
    Tasks,
}

fn load(path: &PathBuf) -> anyhow::Result<Agent> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Agent::load(BufReader::new(file))?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train { config, seed, out: dir } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = RunConfig::from_toml(&text)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let outcome = train(cfg, &dir)?;
            let last = outcome.evals.last();
            writeln!(
                out,
                "env_steps={} episodes={} final_success={}",
                outcome.agent.env_steps,
                outcome.agent.episodes,
                last.map_or("none".to_string(), |e| e.success_rate.to_string())
            )?;
        }
        Command::Eval {
            checkpoint,
            episodes,
            trajectory,
        } => {
            if episodes == 0 {
                bail!("--episodes must be positive");
            }
            let mut agent = load(&checkpoint)?;
            let oracle = scripted_return(&mut agent, episodes)?;
            let (row, traces) = evaluate(&mut agent, episodes, oracle)?;
            if let Some(path) = trajectory {
                let mut f =
                    BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
                for line in traces.iter().flat_map(|t| &t.trajectory) {
                    write_line(&mut f, line)?;
                }
                f.flush()?;
            }
            writeln!(
                out,
                "success_rate={} mean_return={} normalized_return={} mean_length={}",
                row.success_rate, row.mean_return, row.normalized_return, row.mean_length
            )?;
        }
        Command::Progress { formula } => {
            let (phi, alphabet) = parse_inferring_alphabet(&formula)?;
            let mut phi = simplify(&phi);
            for line in io::stdin().lock().lines() {
                let line = line?;
                let sigma = alphabet.assignment_from_csv(&line)?;
                phi = simplify(&progress(&sigma, &phi));
                writeln!(out, "{}", phi.display(&alphabet))?;
                if matches!(phi, Formula::True | Formula::False) {
                    break;
                }
            }
        }
        Command::Attcat {
            checkpoint,
            formula,
            class,
            out: path,
            sender,
        } => {
            let agent = load(&checkpoint)?;
            let (encoder, probe) = match (&agent.encoder, &agent.probe) {
                (Some(e), Some(p)) => (e.clone(), p.clone()),
                _ => {
                    return Err(
                        hytl_core::CoreError::UntrainedModel("checkpoint has no encoder or probe".into()).into(),
                    )
                }
            };
            let alphabet = agent.task.alphabet();
            let phi = parse(&formula, &alphabet)?;
            let c = alphabet
                .id(&class)
                .ok_or_else(|| anyhow!("unknown proposition {class:?}"))?;
            let tokens = agent.vocab.tokenize(&phi)?;
            let (y, scores) = attcat_scores(
                &encoder,
                &agent.encoder_store,
                &probe,
                &agent.probe_store,
                &agent.vocab,
                &tokens,
                c.0 as usize,
                &class,
                AttcatOptions {
                    weighting: if sender { Weighting::Sent } else { Weighting::Received },
                    final_layer_only: false,
                },
            )?;
            emit_heatmap(&scores, BufWriter::new(File::create(&path)?))?;
            writeln!(out, "y={y} tokens={} -> {}", scores.tokens.len(), path.display())?;
        }
        Command::Tasks => {
            for task in task_library() {
                writeln!(out, "{}\t{}", task.name, task.formula)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
