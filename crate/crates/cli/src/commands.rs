use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lookahead_core::chat::{exchange, ChatSession, SessionStatus};
use lookahead_core::checkpoint;
use lookahead_core::corpus::{load_corpus, save_corpus, DialogueSession, GoalVector};
use lookahead_core::datagen::{generate_corpus, goals_achieved, GoalPool, TemplateBank};
use lookahead_core::evaluation::{evaluate, sweep, sweep_table, SweepParam};
use lookahead_core::model::Model;
use lookahead_core::training::{train, write_metrics, TrainConfig, Variant};

use crate::server;

#[derive(Debug, Parser)]
#[command(name = "lookahead", version, about = "Look-ahead goal-oriented dialogue agents")]
pub struct Cli {
    /// Seed for every random choice of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Training config file (TOML or JSON), field names as in TrainConfig.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with the rule-based planner agents.
    GenerateData {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Statistics file; defaults to `<out>.stats.json`.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Train a model and write its best checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the model variant (seq2seq_goal, goal_state, goal_look, full).
        #[arg(long)]
        variant: Option<String>,
        /// Metrics log; defaults to `<out>.metrics.jsonl`.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Self-play an agent against a simulator.
    Evaluate {
        #[arg(long)]
        agent: PathBuf,
        #[arg(long)]
        simulator: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate one model per value of K or the hidden size.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        simulator: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a checkpoint over HTTP.
    Serve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// Talk to a checkpoint in the terminal. You play the customer.
    Chat(ChatArgs),
}

#[derive(Debug, Args)]
pub struct ChatArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Agent goal bits, e.g. 1,0,1,1,0,0; sampled when absent.
    #[arg(long, value_delimiter = ',')]
    pub goals: Option<Vec<u8>>,
    /// Your goal bits; sampled when absent.
    #[arg(long, value_delimiter = ',')]
    pub human_goals: Option<Vec<u8>>,
    /// Save the transcript to this corpus file on exit.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    let Some(path) = path else {
        return Ok(TrainConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: TrainConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    config.validate()?;
    Ok(config)
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn goal_arg(bits: Option<Vec<u8>>) -> Result<Option<GoalVector>> {
    bits.map(|b| GoalVector::from_bits(&b).context("goal bits must be 0 or 1"))
        .transpose()
}

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::GenerateData { n, out, stats } => {
            let corpus = generate_corpus(n, seed, &GoalPool::full(), &TemplateBank::default());
            save_corpus(&corpus.sessions, &out)?;
            let stats_path = stats.unwrap_or_else(|| sidecar(&out, ".stats.json"));
            write_json(&stats_path, &corpus.stats)?;
            println!("{}", serde_json::to_string_pretty(&corpus.stats)?);
        }
        Command::Train {
            corpus,
            out,
            variant,
            metrics,
        } => {
            let mut config = load_config(cli.config.as_deref())?;
            config.seed = seed;
            if let Some(v) = variant {
                let v = Variant::ALL
                    .into_iter()
                    .find(|x| x.name() == v)
                    .with_context(|| format!("unknown variant `{v}`"))?;
                config = v.apply(&config);
            }
            let sessions = load_corpus(&corpus)?;
            let result = train(&sessions, &config)?;
            checkpoint::save(&result.model, &out)?;
            let metrics = metrics.unwrap_or_else(|| sidecar(&out, ".metrics.jsonl"));
            write_metrics(BufWriter::new(File::create(&metrics)?), &result.metrics)?;
            println!(
                "best epoch {} of {}, checkpoint written to {}",
                result.best_epoch,
                result.metrics.len(),
                out.display()
            );
        }
        Command::Evaluate {
            agent,
            simulator,
            n,
            out,
        } => {
            let report = evaluate(&load_model(&agent)?, &load_model(&simulator)?, n, seed)?;
            println!(
                "sessions {} achieved_ratio {:.4} avg_turns {:.3}",
                report.n_sessions, report.achieved_ratio, report.avg_turns
            );
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
        }
        Command::Sweep {
            param,
            values,
            corpus,
            simulator,
            n,
            out,
        } => {
            let mut config = load_config(cli.config.as_deref())?;
            config.seed = seed;
            let rows = sweep(param, &values, &config, &load_corpus(&corpus)?, &load_model(&simulator)?, n, seed)?;
            let table = sweep_table(&rows);
            print!("{table}");
            if let Some(out) = out {
                fs::write(out, table)?;
            }
        }
        Command::Serve { ckpt, bind } => {
            let engine = Arc::new(lookahead_core::chat::ChatEngine::new(Arc::new(load_model(&ckpt)?), seed));
            tokio::runtime::Runtime::new()?.block_on(server::serve(engine, &bind))?;
        }
        Command::Chat(args) => {
            let model = load_model(&args.ckpt)?;
            let stdin = std::io::stdin();
            let session = chat_loop(
                &model,
                goal_arg(args.goals)?,
                goal_arg(args.human_goals)?,
                seed,
                stdin.lock(),
                std::io::stdout(),
            )?;
            if let Some(path) = args.save {
                save_corpus(&[transcript_record(&session)], &path)?;
                println!("transcript saved to {}", path.display());
            }
        }
    }
    Ok(())
}

/// The session in corpus form, labelled by the agreement oracle.
pub fn transcript_record(session: &ChatSession) -> DialogueSession {
    let achieved = goals_achieved(&session.human_goals, &session.goals, &session.turns, &TemplateBank::default());
    DialogueSession {
        goals_a: session.human_goals.clone(),
        goals_b: session.goals.clone(),
        turns: session.turns.clone(),
        outcome: achieved as u8,
    }
}

/// Reads customer lines from `input` until `/quit`, end of input or the end
/// of the session, printing each agent reply.
pub fn chat_loop(
    model: &Model,
    goals: Option<GoalVector>,
    human_goals: Option<GoalVector>,
    seed: u64,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<ChatSession> {
    let engine = lookahead_core::chat::ChatEngine::new(Arc::new(model.clone()), seed);
    let created = engine.create(goals, human_goals)?;
    let mut session = created.clone();
    let labels = lookahead_core::datagen::CUSTOMER_GOAL_LABELS;
    let yours: Vec<&str> = labels
        .iter()
        .zip(session.human_goals.bits())
        .filter(|(_, &b)| b)
        .map(|(l, _)| *l)
        .collect();
    writeln!(output, "You are the customer. Your constraints: {}", if yours.is_empty() { "none".into() } else { yours.join(", ") })?;
    writeln!(output, "Type /quit to leave.")?;
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text == "/quit" {
            break;
        }
        if text.is_empty() {
            continue;
        }
        let reply = exchange(model, &mut session, text)?;
        writeln!(output, "agent: {}  (done {:.2})", reply.reply, reply.done_prob)?;
        if reply.status == SessionStatus::Ended {
            writeln!(output, "session ended")?;
            break;
        }
    }
    Ok(session)
}
