use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use dfprompt::conditioning::build_schedule;
use dfprompt::config::{RunConfig, ScorerConfig};
use dfprompt::data::{filter_dataset, read_jsonl, read_prompt_log, with_augmented_copies, write_jsonl, PromptRecord};
use dfprompt::policy::checkpoint::Checkpoint;
use dfprompt::policy::train::write_metrics_csv;
use dfprompt::policy::{greedy_dfprompt, suggest_dfprompt, train, train_reference, SamplingConfig, TrainOutcome};
use dfprompt::{DfPrompt, ScoreRequest, ScoringEnv};

mod error;

use error::CliError;

#[derive(Parser)]
#[command(name = "dfprompt", version, about = "Dynamic fine-control prompt toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse DF-Prompt text and print it as JSON.
    Parse { text: String },
    /// Print canonical DF-Prompt text from JSON (`-` reads stdin).
    Format { json: String },
    /// Print the per-step token schedule of a DF-Prompt.
    Schedule {
        text: String,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Keep the prompt-log pairs whose modifiers pass the confidence filter.
    Filter(FilterArgs),
    /// Train a policy on a filtered dataset.
    Train(TrainArgs),
    /// Compare suggested prompts against the plain prompts.
    Evaluate(EvaluateArgs),
    /// Suggest a DF-Prompt for a short prompt.
    Suggest(SuggestArgs),
    /// Print the default configuration, or the one echoed in a checkpoint.
    Config {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ScorerArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic world file; overrides the configured scorer.
    #[arg(long, conflicts_with = "remote")]
    world: Option<PathBuf>,
    /// Scoring service base URL; overrides the configured scorer.
    #[arg(long)]
    remote: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScorerArgs {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(w) = &self.world {
            cfg.scorer = ScorerConfig::synthetic(w);
        }
        if let Some(url) = &self.remote {
            cfg.scorer = ScorerConfig::remote(url);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    gamma: Option<f64>,
    /// Seed-paired samples per record.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Filtered pairs (JSONL).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    metrics: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long)]
    episodes: Option<usize>,
    /// Add one case/punctuation-augmented copy of every pair to the
    /// reference's training data.
    #[arg(long)]
    augment: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Policy checkpoint; without one each prompt is compared with itself.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Short prompts, one per line.
    #[arg(long)]
    prompts: PathBuf,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[arg(long, default_value_t = 2)]
    samples: usize,
    #[arg(long)]
    max_len: Option<usize>,
    /// Count only strict PickScore wins.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SuggestArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    short: String,
    #[arg(long)]
    max_len: Option<usize>,
    /// Sampling temperature; 0 gives the argmax suggestion.
    #[arg(long, default_value_t = 0.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli.command, &mut out).and_then(|()| out.flush().map_err(|e| CliError::io("stdout", e)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command, out: &mut impl Write) -> Result<(), CliError> {
    match command {
        Command::Parse { text } => {
            let p: DfPrompt = text.parse()?;
            writeln!(out, "{}", serde_json::to_string_pretty(&p).expect("prompt serializes")).map_err(stdout_err)
        }
        Command::Format { json } => {
            let text = if json == "-" {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s).map_err(|e| CliError::io("stdin", e))?;
                s
            } else {
                json
            };
            let p: DfPrompt = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("prompt JSON: {e}")))?;
            writeln!(out, "{p}").map_err(stdout_err)
        }
        Command::Schedule { text, steps } => {
            if steps == 0 {
                return Err(CliError::Input("--steps must be at least 1".into()));
            }
            let p: DfPrompt = text.parse()?;
            write!(out, "{}", build_schedule(&p, steps).export()).map_err(stdout_err)
        }
        Command::Filter(args) => cmd_filter(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args, out),
        Command::Suggest(args) => cmd_suggest(args, out),
        Command::Config { checkpoint } => {
            let json = match checkpoint {
                Some(p) => serde_json::to_string_pretty(&load_checkpoint(&p)?.config).expect("json value serializes"),
                None => RunConfig::default().to_json(),
            };
            writeln!(out, "{json}").map_err(stdout_err)
        }
    }
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::io("stdout", e)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Ok(Checkpoint::load(path)?)
}

fn cmd_filter(args: FilterArgs) -> Result<(), CliError> {
    let mut cfg = args.scorer.run_config()?;
    if let Some(g) = args.gamma {
        cfg.filter.gamma = g;
    }
    if let Some(k) = args.samples {
        cfg.filter.samples = k;
    }
    cfg.validate()?;
    let env = cfg.scorer.build()?;
    let log = read_prompt_log(&args.input)?;
    let mut records = Vec::with_capacity(log.len());
    for (source, prompt) in log {
        match PromptRecord::split(source.clone(), prompt) {
            Ok(r) => records.push(r),
            Err(e) => eprintln!("skipping {source}: {e}"),
        }
    }
    let kept = filter_dataset(&records, env.as_ref(), &cfg.filter.to_filter_config(cfg.seed))?;
    write_jsonl(&args.out, &kept)?;
    eprintln!("kept {} of {} pairs", kept.len(), records.len());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = args.scorer.run_config()?;
    if let Some(n) = args.episodes {
        cfg.training.episodes = n;
    }
    cfg.validate()?;
    let env = cfg.scorer.build()?;
    let data = read_jsonl(&args.data)?;
    let corpus = if args.augment { with_augmented_copies(&data, cfg.seed) } else { data.clone() };
    let reference = Arc::new(train_reference(&corpus, cfg.reference, cfg.smoothing)?);
    let mut prompts: Vec<String> = Vec::new();
    for (short, _) in data.pairs() {
        if !prompts.iter().any(|p| p == short) {
            prompts.push(short.to_string());
        }
    }
    let TrainOutcome { policy, value, metrics, halted } =
        train::<f64>(&cfg.training, &cfg.reward, reference, &prompts, env.as_ref(), cfg.seed)?;

    let echo = serde_json::to_value(&cfg).expect("config serializes");
    Checkpoint::from_models(&policy, &value, echo).save(&args.checkpoint)?;
    let file = File::create(&args.metrics).map_err(|e| CliError::io(args.metrics.display(), e))?;
    write_metrics_csv(BufWriter::new(file), &metrics).map_err(|e| CliError::io(args.metrics.display(), e))?;
    if let Some(last) = metrics.last() {
        eprintln!("episode {}: mean reward {:.4}, mean kl {:.4}", last.episode, last.mean_reward, last.mean_kl);
    }
    match halted {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn read_prompt_list(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    let prompts: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if prompts.is_empty() {
        return Err(CliError::Input(format!("{}: no prompts", path.display())));
    }
    Ok(prompts)
}

fn cmd_evaluate(args: EvaluateArgs, out: &mut impl Write) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Input("--samples must be at least 1".into()));
    }
    let cfg = args.scorer.run_config()?;
    cfg.validate()?;
    let env = cfg.scorer.build()?;
    let prompts = read_prompt_list(&args.prompts)?;
    let policy = match &args.checkpoint {
        Some(p) => Some(load_checkpoint(p)?.into_models().0),
        None => None,
    };
    let max_len = args.max_len.unwrap_or(cfg.training.max_len);
    let n_steps = cfg.training.n_steps;

    let (mut aes, mut clip, mut wins, mut total) = (0.0, 0.0, 0usize, 0usize);
    for short in &prompts {
        let suggestion = match &policy {
            Some(p) => greedy_dfprompt(p, short, max_len)?,
            None => DfPrompt::plain(short)?,
        };
        for k in 0..args.samples as u64 {
            let seed = cfg.seed + k;
            let refined = env.score(&ScoreRequest::new(short.as_str(), &suggestion, seed, n_steps))?;
            let plain = env.score(&ScoreRequest::plain(short.as_str(), seed, n_steps))?;
            aes += refined.aes;
            clip += refined.clip;
            let win = if args.strict { refined.pick > plain.pick } else { refined.pick >= plain.pick };
            wins += usize::from(win);
            total += 1;
        }
    }
    let n = total as f64;
    writeln!(out, "prompts\tsamples\tmean_aes\tmean_clip\tpick_win_rate").map_err(stdout_err)?;
    writeln!(out, "{}\t{}\t{:.6}\t{:.6}\t{:.6}", prompts.len(), args.samples, aes / n, clip / n, wins as f64 / n)
        .map_err(stdout_err)
}

fn cmd_suggest(args: SuggestArgs, out: &mut impl Write) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let max_len = args.max_len.unwrap_or_else(|| {
        ckpt.config.pointer("/training/max_len").and_then(|v| v.as_u64()).map_or(8, |v| v as usize)
    });
    if max_len == 0 {
        return Err(CliError::Input("--max-len must be at least 1".into()));
    }
    let top_k = ckpt.config.pointer("/training/top_k").and_then(|v| v.as_u64()).map_or(200, |v| v as usize);
    let (policy, _) = ckpt.into_models();
    let sampling = SamplingConfig { temperature: args.temperature, top_k };
    let prompt = suggest_dfprompt(&policy, &args.short, max_len, &sampling, args.seed)?;
    writeln!(out, "{prompt}").map_err(stdout_err)
}
