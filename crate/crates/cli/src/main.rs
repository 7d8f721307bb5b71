mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use run_config::RunConfig;

#[derive(Parser)]
#[command(
    name = "swiftdep",
    version,
    about = "Transition-based dependency parsing toolkit"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump static-oracle transition sequences for a CoNLL-U file.
    #[command(
        long_about = "Dump static-oracle transition sequences for a CoNLL-U file.\n\n\
        Writes one block of transitions per projective sentence (blank-line separated) to \
        --output or stdout. Non-projective sentences are skipped and listed in \
        <report-dir>/oracle_skipped.tsv (columns: sentence, sent_id, reason), or on stderr when \
        no report directory is given. <report-dir>/oracle_summary.tsv has columns: sentence, n, \
        length, shift, reduce, left_arcs, right_arcs."
    )]
    Oracle(OracleArgs),
    /// Train a scorer and write a model file.
    #[command(
        long_about = "Train a scorer on the projective sentences of --input and write \
        it to --model. Non-projective sentences are skipped with a warning. The per-epoch trace \
        goes to <report-dir>/train_trace.tsv (columns: epoch, lr, mean_nll) or stderr; with \
        --dev, greedy dev UAS/LAS are reported after training."
    )]
    Train(Box<TrainArgs>),
    /// Parse a CoNLL-U file with a trained model.
    #[command(
        long_about = "Parse --input with --model and write CoNLL-U with predicted \
        HEAD/DEPREL columns to --output or stdout. <report-dir>/parse_steps.tsv has columns: \
        sentence, n, transitions, skeleton_candidates, labeled_candidates, fallback_roots."
    )]
    Parse(ParseArgs),
    /// Score predictions or compare systems with bootstrap tests.
    #[command(long_about = "Score --pred against the gold --input (UAS/LAS over \
        non-punctuation tokens, micro-averaged; multiple-root count; errors by gold dependency \
        length) and write a JSON summary to --output or stdout. <report-dir>/eval_sentences.tsv \
        has columns: sentence, tokens, correct_heads, correct_labeled, multi_root.\n\n\
        With --compare A B ..., every pair of systems is tested with a one-sided paired \
        bootstrap over sentences (higher-scoring system vs the other) and the p-values of each \
        metric are Holm-adjusted across pairs.")]
    Eval(EvalArgs),
    /// Sequence-length, candidate-count and scaling statistics.
    #[command(
        long_about = "Oracle statistics for the projective sentences of --input, written \
        as JSON to --output or stdout: mean sequence length per oracle variant, asw/aeS and \
        asw/aeR length ratios, per-step and per-sentence feasible-candidate counts (unlabeled \
        and labeled), the asw/ae candidate ratio, and a fit of total arc-swift candidates \
        against sentence length (total = a * n^b). <report-dir>/stats_sentences.tsv has \
        columns: sentence, variant, n, length, shift, reduce, left_arcs, right_arcs, \
        skeleton_candidates, labeled_candidates."
    )]
    Stats(StatsArgs),
    /// Run the property suites on random projective trees.
    #[command(long_about = "Check oracle round trips for all five oracle variants, \
        arc-swift to arc-eager expansion, sequence-length identities and exhaustive \
        enumeration of short sentences. Exits nonzero and prints a minimal failing sentence on \
        any violation.")]
    Fuzz(FuzzArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-sentence work (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// Transition system: asd, ae, ah or asw.
    #[arg(long)]
    system: Option<String>,
    /// Arc-eager oracle: static-s or static-r.
    #[arg(long)]
    oracle: Option<String>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    system: SystemArgs,
    /// CoNLL-U input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Transition dump (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for TSV reports.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainerArgs {
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sentences per minibatch.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    anneal_factor: Option<f64>,
    /// Epochs before annealing starts.
    #[arg(long)]
    anneal_after: Option<usize>,
    /// Epochs between annealing steps.
    #[arg(long)]
    anneal_every: Option<usize>,
    /// Dropout probability for dense and biaffine units.
    #[arg(long)]
    dropout: Option<f64>,
    /// Probability of replacing an input word by UNK.
    #[arg(long)]
    unk_replace: Option<f64>,
    #[arg(long)]
    word_dim: Option<usize>,
    #[arg(long)]
    pos_dim: Option<usize>,
    /// Context tokens on each side.
    #[arg(long)]
    window: Option<usize>,
    /// Size of head/dependent representations.
    #[arg(long)]
    repr_dim: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    trainer: TrainerArgs,
    /// CoNLL-U training data.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Optional CoNLL-U development data.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Punctuation policy for dev scoring: label or xpos.
    #[arg(long)]
    punct: Option<String>,
    /// Directory for TSV reports.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Transition system; must match the model if given.
    #[arg(long)]
    system: Option<String>,
    /// CoNLL-U input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// CoNLL-U output (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Beam size; 1 is greedy decoding.
    #[arg(long)]
    beam: Option<usize>,
    /// Ranking of finished beam items: none or length.
    #[arg(long)]
    beam_norm: Option<String>,
    /// Directory for TSV reports.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gold CoNLL-U.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Predicted CoNLL-U.
    #[arg(long, conflicts_with = "compare")]
    pred: Option<PathBuf>,
    /// Predicted CoNLL-U files of two or more systems to compare.
    #[arg(long, num_args = 2..)]
    compare: Vec<PathBuf>,
    /// Bootstrap samples for --compare.
    #[arg(long, default_value_t = 10_000)]
    bootstrap: usize,
    /// Punctuation policy: label or xpos.
    #[arg(long)]
    punct: Option<String>,
    /// JSON summary (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for TSV reports.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// CoNLL-U input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON summary (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for TSV reports.
    #[arg(long)]
    report_dir: Option<PathBuf>,
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of random trees.
    #[arg(long, default_value_t = 1000)]
    trees: usize,
    /// Largest tree size.
    #[arg(long, default_value_t = 30)]
    max_n: usize,
    /// Exhaustively enumerate sentences up to this length (0 disables).
    #[arg(long, default_value_t = 4)]
    enumerate: usize,
}

fn opt<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

fn path(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<PathBuf>) {
    if let Some(v) = v {
        out.push((key, v.display().to_string()));
    }
}

/// Builds the run configuration: defaults, then the config file, then flags.
fn resolve(common: &CommonArgs, flags: Vec<(&'static str, String)>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(file) = &common.config {
        cfg.load_file(file)?;
    }
    let mut all = Vec::new();
    opt(&mut all, "seed", &common.seed);
    opt(&mut all, "jobs", &common.jobs);
    all.extend(flags);
    for (k, v) in all {
        cfg.set(k, &v)?;
    }
    Ok(cfg)
}

fn system_flags(out: &mut Vec<(&'static str, String)>, s: &SystemArgs) {
    opt(out, "system", &s.system);
    opt(out, "oracle", &s.oracle);
}

fn trainer_flags(out: &mut Vec<(&'static str, String)>, t: &TrainerArgs) {
    opt(out, "epochs", &t.epochs);
    opt(out, "lr", &t.lr);
    opt(out, "beta1", &t.beta1);
    opt(out, "beta2", &t.beta2);
    opt(out, "epsilon", &t.epsilon);
    opt(out, "batch_size", &t.batch_size);
    opt(out, "anneal_factor", &t.anneal_factor);
    opt(out, "anneal_after", &t.anneal_after);
    opt(out, "anneal_every", &t.anneal_every);
    opt(out, "dropout", &t.dropout);
    opt(out, "unk_replace", &t.unk_replace);
    opt(out, "word_dim", &t.word_dim);
    opt(out, "pos_dim", &t.pos_dim);
    opt(out, "window", &t.window);
    opt(out, "repr_dim", &t.repr_dim);
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut f = Vec::new();
    match cli.command {
        Command::Oracle(a) => {
            system_flags(&mut f, &a.system);
            path(&mut f, "input", &a.input);
            path(&mut f, "output", &a.output);
            path(&mut f, "report_dir", &a.report_dir);
            let cfg = resolve(&a.common, f)?;
            commands::with_jobs(cfg.jobs, || commands::oracle(&cfg))
        }
        Command::Train(a) => {
            system_flags(&mut f, &a.system);
            trainer_flags(&mut f, &a.trainer);
            path(&mut f, "input", &a.input);
            path(&mut f, "model", &a.model);
            path(&mut f, "dev", &a.dev);
            opt(&mut f, "punct", &a.punct);
            path(&mut f, "report_dir", &a.report_dir);
            let cfg = resolve(&a.common, f)?;
            commands::with_jobs(cfg.jobs, || commands::train(&cfg))
        }
        Command::Parse(a) => {
            let explicit_system = a.system.is_some();
            opt(&mut f, "system", &a.system);
            path(&mut f, "input", &a.input);
            path(&mut f, "model", &a.model);
            path(&mut f, "output", &a.output);
            opt(&mut f, "beam", &a.beam);
            opt(&mut f, "beam_norm", &a.beam_norm);
            path(&mut f, "report_dir", &a.report_dir);
            let cfg = resolve(&a.common, f)?;
            commands::with_jobs(cfg.jobs, || commands::parse(&cfg, explicit_system))
        }
        Command::Eval(a) => {
            path(&mut f, "input", &a.input);
            opt(&mut f, "punct", &a.punct);
            path(&mut f, "output", &a.output);
            path(&mut f, "report_dir", &a.report_dir);
            let cfg = resolve(&a.common, f)?;
            if a.compare.is_empty() {
                let pred = a
                    .pred
                    .as_deref()
                    .ok_or_else(|| anyhow::anyhow!("--pred or --compare is required"))?;
                commands::eval(&cfg, pred)
            } else {
                commands::compare(&cfg, &a.compare, a.bootstrap)
            }
        }
        Command::Stats(a) => {
            path(&mut f, "input", &a.input);
            path(&mut f, "output", &a.output);
            path(&mut f, "report_dir", &a.report_dir);
            let cfg = resolve(&a.common, f)?;
            commands::with_jobs(cfg.jobs, || commands::stats(&cfg))
        }
        Command::Fuzz(a) => {
            let cfg = resolve(&a.common, f)?;
            let fuzz = swiftdep::fuzz::FuzzConfig {
                trees: a.trees,
                max_n: a.max_n,
                seed: a.common.seed.unwrap_or(7),
                enumerate_up_to: a.enumerate,
            };
            commands::with_jobs(cfg.jobs, || commands::fuzz(&fuzz))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
