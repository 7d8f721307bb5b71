//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use swiftdep::decode::{beam_parse, greedy_parse, ParseOutput};
use swiftdep::eval::{
    evaluate_corpus, holm_adjust, paired_bootstrap, rejections, total, EvalCounts, ALPHAS,
};
use swiftdep::fuzz::{run_fuzz, FuzzConfig};
use swiftdep::oracle::{sentence_oracle, KindCounts};
use swiftdep::scoring::{load_model, save_model, train as train_model, ScorerModel};
use swiftdep::stats::{candidate_count_report, corpus_stats, runtime_scaling_report};
use swiftdep::transition::render_sequences;
use swiftdep::{
    is_projective, parse_conllu, punctuation_mask, write_conllu, LabelVocab, OracleVariant,
    Prediction, PunctPolicy, Sentence,
};

use crate::run_config::RunConfig;

/// Runs `f` on a dedicated pool of `jobs` threads, or the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .context("building thread pool")?
            .install(f),
        None => f(),
    }
}

fn read_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_conllu(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Writes `name` under the report directory, or to stderr without one.
fn write_report(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
            let p: PathBuf = d.join(name);
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn sent_label(s: &Sentence, index: usize) -> String {
    s.sent_id()
        .map(str::to_string)
        .unwrap_or_else(|| format!("#{}", index + 1))
}

/// Projective sentences with their corpus indices, and the skipped rest.
struct Split {
    indices: Vec<usize>,
    kept: Vec<Sentence>,
    skipped: Vec<(usize, Sentence)>,
}

fn projective_only(corpus: Vec<Sentence>) -> Split {
    let mut split = Split {
        indices: Vec::new(),
        kept: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, s) in corpus.into_iter().enumerate() {
        if is_projective(&s) {
            split.indices.push(i);
            split.kept.push(s);
        } else {
            split.skipped.push((i, s));
        }
    }
    split
}

pub fn oracle(cfg: &RunConfig) -> Result<ExitCode> {
    let variant = cfg.variant()?;
    let corpus = read_corpus(cfg.input()?)?;
    let vocab = LabelVocab::from_corpus(&corpus);
    let Split {
        indices,
        kept,
        skipped,
    } = projective_only(corpus);
    let seqs = kept
        .par_iter()
        .map(|s| sentence_oracle(s, &vocab, variant))
        .collect::<Result<Vec<_>, _>>()?;
    write_output(cfg.output.as_deref(), &render_sequences(&seqs, &vocab))?;

    let mut skip = String::from("sentence\tsent_id\treason\n");
    for (i, s) in &skipped {
        writeln!(
            skip,
            "{}\t{}\tnon-projective",
            i + 1,
            s.sent_id().unwrap_or("_")
        )?;
    }
    let mut summary = String::from("sentence\tn\tlength\tshift\treduce\tleft_arcs\tright_arcs\n");
    for ((&i, s), seq) in indices.iter().zip(&kept).zip(&seqs) {
        let k = KindCounts::of(seq);
        writeln!(
            summary,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            s.len(),
            seq.len(),
            k.shift,
            k.reduce,
            k.left,
            k.right
        )?;
    }
    match cfg.report_dir.as_deref() {
        Some(d) => {
            write_report(Some(d), "oracle_skipped.tsv", &skip)?;
            write_report(Some(d), "oracle_summary.tsv", &summary)?;
        }
        None => {
            for (i, s) in &skipped {
                eprintln!(
                    "skipped non-projective sentence {} ({})",
                    i + 1,
                    sent_label(s, *i)
                );
            }
        }
    }
    info!(
        "{variant}: {} sequences, {} skipped",
        seqs.len(),
        skipped.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn decode_corpus(
    cfg: &RunConfig,
    model: &ScorerModel,
    corpus: &[Sentence],
) -> Result<Vec<ParseOutput>> {
    let outs = corpus
        .par_iter()
        .map(|s| {
            if cfg.beam <= 1 {
                greedy_parse(s, model)
            } else {
                beam_parse(s, model, cfg.beam, cfg.beam_norm)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(outs)
}

fn predictions(model: &ScorerModel, outs: &[ParseOutput]) -> Vec<Prediction> {
    outs.iter()
        .map(|o| o.arcs.to_prediction(&model.lexicon.labels))
        .collect()
}

fn score(gold: &[Sentence], preds: &[Prediction], punct: PunctPolicy) -> Result<Vec<EvalCounts>> {
    let masks: Vec<Vec<bool>> = gold.iter().map(|s| punctuation_mask(s, punct)).collect();
    Ok(evaluate_corpus(preds, gold, &masks)?)
}

pub fn train(cfg: &RunConfig) -> Result<ExitCode> {
    let variant = cfg.variant()?;
    let model_path = cfg.model()?.to_path_buf();
    let corpus = read_corpus(cfg.input()?)?;
    let Split { kept, skipped, .. } = projective_only(corpus);
    if !skipped.is_empty() {
        warn!(
            "skipping {} non-projective training sentences",
            skipped.len()
        );
    }
    let outcome = train_model(&kept, variant, &cfg.trainer)?;
    save_model(&outcome.model, &model_path)?;
    let mut trace = String::from("epoch\tlr\tmean_nll\n");
    for e in &outcome.trace {
        writeln!(trace, "{}\t{}\t{}", e.epoch, e.lr, e.mean_nll)?;
    }
    write_report(cfg.report_dir.as_deref(), "train_trace.tsv", &trace)?;
    if let Some(dev) = &cfg.dev {
        let dev = read_corpus(dev)?;
        let outs = decode_corpus(cfg, &outcome.model, &dev)?;
        let t = total(&score(
            &dev,
            &predictions(&outcome.model, &outs),
            cfg.punct,
        )?);
        eprintln!(
            "dev UAS {:.2} LAS {:.2} over {} tokens",
            t.uas(),
            t.las(),
            t.tokens
        );
    }
    info!("model written to {}", model_path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn parse(cfg: &RunConfig, explicit_system: bool) -> Result<ExitCode> {
    let input = cfg.input()?;
    let model_path = cfg.model()?;
    if !model_path.exists() {
        bail!("model file {} does not exist", model_path.display());
    }
    let model =
        load_model(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    if explicit_system && model.system != cfg.system {
        bail!(
            "--system {} does not match the model's system {}",
            cfg.system,
            model.system
        );
    }
    let corpus = read_corpus(input)?;
    let outs = decode_corpus(cfg, &model, &corpus)?;
    let preds = predictions(&model, &outs);
    write_output(cfg.output.as_deref(), &write_conllu(&corpus, Some(&preds))?)?;
    if cfg.report_dir.is_some() {
        let mut steps = String::from(
            "sentence\tn\ttransitions\tskeleton_candidates\tlabeled_candidates\tfallback_roots\n",
        );
        for (i, (s, o)) in corpus.iter().zip(&outs).enumerate() {
            writeln!(
                steps,
                "{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                s.len(),
                o.transitions.len(),
                o.total_skeletons(),
                o.total_labeled(),
                o.fallback
            )?;
        }
        write_report(cfg.report_dir.as_deref(), "parse_steps.tsv", &steps)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct BinSummary {
    range: String,
    tokens: usize,
    errors: usize,
    error_rate: Option<f64>,
}

#[derive(Serialize)]
struct EvalSummary {
    uas: f64,
    las: f64,
    punct: String,
    sentences: usize,
    tokens: usize,
    correct_heads: usize,
    correct_labeled: usize,
    multi_root: usize,
    bins: Vec<BinSummary>,
    resampling_unit: &'static str,
}

fn summarize(t: &EvalCounts, punct: PunctPolicy) -> EvalSummary {
    let bins = swiftdep::eval::LENGTH_BINS
        .iter()
        .zip(&t.bins)
        .map(|(&(lo, hi), b)| BinSummary {
            range: if hi == usize::MAX {
                format!("{lo}+")
            } else {
                format!("{lo}-{hi}")
            },
            tokens: b.tokens,
            errors: b.errors,
            error_rate: b.error_rate(),
        })
        .collect();
    EvalSummary {
        uas: t.uas(),
        las: t.las(),
        punct: punct.to_string(),
        sentences: t.sentences,
        tokens: t.tokens,
        correct_heads: t.correct_heads,
        correct_labeled: t.correct_labeled,
        multi_root: t.multi_root,
        bins,
        resampling_unit: "sentence",
    }
}

fn read_predictions(path: &Path, gold: &[Sentence]) -> Result<Vec<Prediction>> {
    let pred = read_corpus(path)?;
    if pred.len() != gold.len() {
        bail!(
            "{} has {} sentences, gold has {}",
            path.display(),
            pred.len(),
            gold.len()
        );
    }
    Ok(pred.iter().map(Prediction::from_gold).collect())
}

pub fn eval(cfg: &RunConfig, pred: &Path) -> Result<ExitCode> {
    let gold = read_corpus(cfg.input()?)?;
    let preds = read_predictions(pred, &gold)?;
    let counts = score(&gold, &preds, cfg.punct)?;
    let summary = summarize(&total(&counts), cfg.punct);
    write_output(
        cfg.output.as_deref(),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    if cfg.report_dir.is_some() {
        let mut rows =
            String::from("sentence\ttokens\tcorrect_heads\tcorrect_labeled\tmulti_root\n");
        for (i, c) in counts.iter().enumerate() {
            writeln!(
                rows,
                "{}\t{}\t{}\t{}\t{}",
                i + 1,
                c.tokens,
                c.correct_heads,
                c.correct_labeled,
                c.multi_root
            )?;
        }
        write_report(cfg.report_dir.as_deref(), "eval_sentences.tsv", &rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SystemScore {
    file: String,
    uas: f64,
    las: f64,
}

#[derive(Serialize)]
struct PairTest {
    metric: &'static str,
    better: String,
    worse: String,
    p_value: f64,
    holm_p_value: f64,
    /// Rejection of "no improvement" at 0.05, 0.01 and 0.001.
    reject: [bool; 3],
}

#[derive(Serialize)]
struct Comparison {
    systems: Vec<SystemScore>,
    samples: usize,
    seed: u64,
    resampling_unit: &'static str,
    alphas: [f64; 3],
    tests: Vec<PairTest>,
}

pub fn compare(cfg: &RunConfig, files: &[PathBuf], samples: usize) -> Result<ExitCode> {
    let gold = read_corpus(cfg.input()?)?;
    let counts = files
        .iter()
        .map(|f| score(&gold, &read_predictions(f, &gold)?, cfg.punct))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<EvalCounts> = counts.iter().map(|c| total(c)).collect();
    let name = |i: usize| files[i].display().to_string();
    let systems = totals
        .iter()
        .enumerate()
        .map(|(i, t)| SystemScore {
            file: name(i),
            uas: t.uas(),
            las: t.las(),
        })
        .collect();

    let mut tests = Vec::new();
    for metric in ["uas", "las"] {
        let value = |t: &EvalCounts| if metric == "uas" { t.uas() } else { t.las() };
        let mut raw = Vec::new();
        for i in 0..files.len() {
            for j in i + 1..files.len() {
                // Test the system that scores higher against the other.
                let (a, b) = if value(&totals[j]) > value(&totals[i]) {
                    (j, i)
                } else {
                    (i, j)
                };
                let r = paired_bootstrap(&counts[a], &counts[b], samples, cfg.seed)?;
                raw.push((a, b, if metric == "uas" { r.uas } else { r.las }));
            }
        }
        let adjusted = holm_adjust(&raw.iter().map(|r| r.2).collect::<Vec<_>>())?;
        for ((a, b, p), adj) in raw.into_iter().zip(adjusted) {
            tests.push(PairTest {
                metric,
                better: name(a),
                worse: name(b),
                p_value: p,
                holm_p_value: adj,
                reject: rejections(adj),
            });
        }
    }
    let out = Comparison {
        systems,
        samples,
        seed: cfg.seed,
        resampling_unit: "sentence",
        alphas: ALPHAS,
        tests,
    };
    write_output(
        cfg.output.as_deref(),
        &(serde_json::to_string_pretty(&out)? + "\n"),
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct StatsSummary {
    #[serde(flatten)]
    report: swiftdep::stats::EfficiencyReport,
    skipped_non_projective: usize,
    scaling: Option<swiftdep::stats::ScalingFit>,
    scaling_error: Option<String>,
}

pub fn stats(cfg: &RunConfig) -> Result<ExitCode> {
    let corpus = read_corpus(cfg.input()?)?;
    let vocab = LabelVocab::from_corpus(&corpus);
    let Split { kept, skipped, .. } = projective_only(corpus);
    let variants = OracleVariant::ALL;
    let report = candidate_count_report(&kept, &vocab, &variants)?;
    let (scaling, scaling_error) = match runtime_scaling_report(&kept, &vocab) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = StatsSummary {
        report,
        skipped_non_projective: skipped.len(),
        scaling,
        scaling_error,
    };
    write_output(
        cfg.output.as_deref(),
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    if cfg.report_dir.is_some() {
        let st = corpus_stats(&kept, &vocab, &variants)?;
        let mut rows = String::from(
            "sentence\tvariant\tn\tlength\tshift\treduce\tleft_arcs\tright_arcs\tskeleton_candidates\tlabeled_candidates\n",
        );
        for (v, vrows) in st.variants.iter().zip(&st.rows) {
            for (i, r) in vrows.iter().enumerate() {
                writeln!(
                    rows,
                    "{}\t{v}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    i + 1,
                    r.n,
                    r.length,
                    r.shifts,
                    r.reduces,
                    r.left_arcs,
                    r.right_arcs,
                    r.skeletons,
                    r.labeled
                )?;
            }
        }
        write_report(cfg.report_dir.as_deref(), "stats_sentences.tsv", &rows)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn fuzz(cfg: &FuzzConfig) -> Result<ExitCode> {
    let report = run_fuzz(cfg);
    println!(
        "checked {} trees ({} tokens), enumeration up to n = {}",
        report.trees_checked, report.tokens_checked, report.enumeration_lengths
    );
    if report.passed() {
        println!("all properties hold");
        return Ok(ExitCode::SUCCESS);
    }
    for f in &report.failures {
        println!(
            "FAIL {}: {} (minimal tree of {} tokens, shrunk from {})",
            f.violation.property,
            f.violation.message,
            f.minimal.len(),
            f.original_len
        );
    }
    let first = &report.failures[0];
    print!(
        "{}",
        write_conllu(std::slice::from_ref(&first.minimal), None)?
    );
    Ok(ExitCode::FAILURE)
}
