//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use relex_core::depstruct::{extract_structure, NodeType, StructureKind};
use relex_core::gradcheck::{run_suite, TOLERANCE};
use relex_core::model::Dims;

use crate::config::{RunConfig, KEYS};
use crate::corpus_io::{read_corpus_file, write_corpus};
use crate::model_io::load_model;
use crate::run::{predict_file, score, score_corpora, train_from_config, write_predictions};
use crate::synthetic::{gen_nominal_pairs, gen_synthetic};

#[derive(Debug, Parser)]
#[command(name = "relex", version, about = "Joint entity and relation extraction over dependency-parsed text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain entities, train jointly and write the model.
    Train(TrainArgs),
    /// Tag a corpus with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Print the dependency structure between two tokens.
    InspectPath(InspectArgs),
    /// Write a template-generated corpus.
    GenSynthetic(GenArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Configuration file of `key = value` lines.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// List the configuration keys and exit.
    #[arg(long)]
    pub list_keys: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(short, long)]
    pub model: PathBuf,
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output corpus file (standard output when absent).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(short, long)]
    pub gold: PathBuf,
    /// Predicted corpus file.
    #[arg(short, long, required_unless_present = "model", conflicts_with = "model")]
    pub pred: Option<PathBuf>,
    /// Predict the gold corpus with this model instead of reading predictions.
    #[arg(short, long)]
    pub model: Option<PathBuf>,
    /// Relation type meaning "no relation"; ignored when scoring.
    #[arg(long)]
    pub negative_relation: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DimsChoice {
    Small,
    Standard,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value_t = DimsChoice::Small)]
    pub dims: DimsChoice,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(short, long)]
    pub corpus: PathBuf,
    /// Sentence number (1-based).
    #[arg(short, long)]
    pub sentence: usize,
    /// First token (1-based).
    pub from: usize,
    /// Second token (1-based).
    pub to: usize,
    /// sptree, subtree or fulltree.
    #[arg(long, default_value = "sptree")]
    pub structure: StructureKind,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Number of sentences.
    #[arg(short = 'n', long, default_value_t = 20)]
    pub sentences: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// One annotated nominal pair per sentence, for relation_only models.
    #[arg(long)]
    pub nominal: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn emit(path: Option<&PathBuf>, text: &str, out: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

/// Runs a parsed command. Errors map to exit code 1.
pub fn execute(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(args) => {
            if args.list_keys {
                for (key, help) in KEYS {
                    writeln!(out, "{key:<22} {help}")?;
                }
                return Ok(());
            }
            let mut config = RunConfig::default();
            if let Some(p) = &args.config {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                config.apply_text(&text).with_context(|| format!("invalid configuration {}", p.display()))?;
            }
            for o in &args.overrides {
                config.apply_override(o).with_context(|| format!("invalid --set {o}"))?;
            }
            let outcome = train_from_config(&config, out)?;
            if let Some(report) = outcome.test {
                write!(out, "{report}")?;
                writeln!(out, "{}", report.machine_line())?;
            }
        }
        Command::Predict(args) => {
            let model = load_model(&args.model)?;
            let (sentences, predictions) = predict_file(&model, &args.input, args.threads)?;
            emit(args.output.as_ref(), &write_predictions(&sentences, &predictions), out)?;
        }
        Command::Eval(args) => {
            let report = match (&args.pred, &args.model) {
                (Some(pred), _) => {
                    let gold = read_corpus_file(&args.gold)?;
                    let pred = read_corpus_file(pred)?;
                    score_corpora(&gold, &pred, args.negative_relation.as_deref())?
                }
                (None, Some(model)) => {
                    let model = load_model(model)?;
                    let (gold, pred) = predict_file(&model, &args.gold, args.threads)?;
                    let negative = args.negative_relation.as_deref().or(model.vocab.negative_relation.as_deref());
                    score(&gold, &pred, negative)
                }
                (None, None) => bail!("eval needs --pred or --model"),
            };
            write!(out, "{report}")?;
            writeln!(out, "{}", report.machine_line())?;
        }
        Command::Gradcheck(args) => {
            let dims = match args.dims {
                DimsChoice::Small => Dims::small(),
                DimsChoice::Standard => Dims::standard(),
            };
            let results = run_suite(dims, args.seed)?;
            let mut failed = 0;
            for r in &results {
                let status = if r.passed() { "ok" } else { "FAIL" };
                writeln!(
                    out,
                    "{:<28} max_rel_err={:.3e} elements={:<6} worst={} {status}",
                    r.name, r.max_rel_error, r.elements, r.worst
                )?;
                failed += usize::from(!r.passed());
            }
            if failed > 0 {
                bail!("{failed} of {} gradient checks exceed {TOLERANCE:e}", results.len());
            }
            writeln!(out, "all {} checks within {TOLERANCE:e}", results.len())?;
        }
        Command::InspectPath(args) => inspect(&args, out)?,
        Command::GenSynthetic(args) => {
            if args.sentences == 0 {
                bail!("--sentences must be at least 1");
            }
            let corpus = if args.nominal {
                gen_nominal_pairs(args.sentences, args.seed)
            } else {
                gen_synthetic(args.sentences, args.seed)
            };
            emit(args.output.as_ref(), &write_corpus(&corpus), out)?;
        }
    }
    Ok(())
}

fn inspect(args: &InspectArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let corpus = read_corpus_file(&args.corpus)?;
    let Some(sentence) = args.sentence.checked_sub(1).and_then(|i| corpus.get(i)) else {
        bail!("sentence {} not in corpus of {} sentences", args.sentence, corpus.len());
    };
    let n = sentence.len();
    let token = |t: usize| -> anyhow::Result<usize> {
        if t == 0 || t > n {
            bail!("token {t} outside sentence of length {n}");
        }
        Ok(t - 1)
    };
    let (a, b) = (token(args.from)?, token(args.to)?);
    let form = |t: usize| sentence.tokens()[t].form.as_str();
    let tree = sentence.tree();
    let s = extract_structure(tree, a, b, args.structure)?;
    let words: Vec<&str> = sentence.tokens().iter().map(|t| t.form.as_str()).collect();
    writeln!(out, "sentence {}: {}", args.sentence, words.join(" "))?;
    writeln!(out, "targets: {} {} / {} {}", a + 1, form(a), b + 1, form(b))?;
    writeln!(out, "lca: {} {}", s.anchor + 1, form(s.anchor))?;
    let path: Vec<String> = tree.shortest_path(a, b).iter().map(|&t| format!("{} {}", t + 1, form(t))).collect();
    writeln!(out, "path: {}", path.join(" -> "))?;
    writeln!(out, "{}: {} nodes, root {} {}", s.kind, s.nodes().len(), s.root + 1, form(s.root))?;
    for t in s.pre_order() {
        let ty = match s.node_type(t) {
            NodeType::OnPath => "on-path",
            NodeType::OffPath => "off-path",
        };
        let children: Vec<String> = s.children(t).iter().map(|c| (c + 1).to_string()).collect();
        writeln!(out, "  {:>3} {:<16} {:<8} children: {}", t + 1, form(t), ty, children.join(" "))?;
    }
    Ok(())
}
