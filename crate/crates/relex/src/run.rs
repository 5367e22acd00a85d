//! Training runs, batch prediction and scoring over files.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context as _};
use rayon::prelude::*;
use relex_core::metrics::MetricReport;
use relex_core::model::{Model, Prediction};
use relex_core::sentence::Sentence;
use relex_core::train::{EpochReport, Trainer};
use relex_core::vocab::{VocabOptions, Vocabulary};

use crate::config::RunConfig;
use crate::corpus_io::{read_corpus_file, write_sentence};
use crate::model_io::save_model;
use crate::vectors::{load_word_vectors, Coverage};

/// A fresh model for `train` under `config`, with pretrained vectors
/// copied into every word-embedding table when configured.
pub fn build_model(config: &RunConfig, train: &[Sentence]) -> anyhow::Result<(Model, Option<Coverage>)> {
    let options = VocabOptions { min_word_freq: config.min_word_freq, negative_relation: config.negative_relation.clone() };
    let vocab = Vocabulary::build(train, &options);
    let mut model = Model::new(config.model.clone(), vocab, config.train.seed)?;
    let Some(path) = &config.vectors else { return Ok((model, None)) };
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut coverage = None;
    for table in [Some(model.net.encoder.word), model.net.relation.encoder.map(|e| e.word)].into_iter().flatten() {
        let c = load_word_vectors(&text, &model.vocab.words, model.params.value_mut(table))
            .with_context(|| format!("invalid word vectors {}", path.display()))?;
        coverage = Some(c);
    }
    Ok((model, coverage))
}

/// Predicts every sentence, in parallel over sentences.
pub fn predict_all(model: &Model, sentences: &[Sentence]) -> anyhow::Result<Vec<Prediction>> {
    sentences.par_iter().map(|s| model.predict(s).map_err(anyhow::Error::from)).collect()
}

/// Runs `f` on a pool of `threads` workers (0 means one per core).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

/// Scores predictions against gold sentences.
pub fn score(gold: &[Sentence], pred: &[Prediction], negative: Option<&str>) -> MetricReport {
    let mut report = MetricReport::default();
    for (g, p) in gold.iter().zip(pred) {
        report.add_sentence(g.entities(), g.relations(), &p.entities, &p.relations, negative);
    }
    report
}

/// Scores a predicted corpus file against a gold one, sentence by
/// sentence; both must hold the same token sequences.
pub fn score_corpora(gold: &[Sentence], pred: &[Sentence], negative: Option<&str>) -> anyhow::Result<MetricReport> {
    if gold.len() != pred.len() {
        bail!("gold has {} sentences, predictions have {}", gold.len(), pred.len());
    }
    let mut report = MetricReport::default();
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        let same = g.len() == p.len() && g.tokens().iter().zip(p.tokens()).all(|(a, b)| a.form == b.form);
        if !same {
            bail!("sentence {} differs between gold and predictions", i + 1);
        }
        report.add_sentence(g.entities(), g.relations(), p.entities(), p.relations(), negative);
    }
    Ok(report)
}

/// Predictions in the corpus format.
pub fn write_predictions(sentences: &[Sentence], predictions: &[Prediction]) -> String {
    let mut out = String::new();
    for (i, (s, p)) in sentences.iter().zip(predictions).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_sentence(&mut out, s, &p.entities, &p.relations);
    }
    out
}

/// Summary of a finished training run.
pub struct TrainOutcome {
    pub model: Model,
    pub coverage: Option<Coverage>,
    pub test: Option<MetricReport>,
}

/// Validates the configuration and paths, trains, writes the model and
/// scores the test corpus when one is configured. Every epoch line goes
/// to `log` and to the configured log file.
pub fn train_from_config(config: &RunConfig, log: &mut dyn Write) -> anyhow::Result<TrainOutcome> {
    config.validate()?;
    config.validate_paths()?;
    let read = |p: &Option<std::path::PathBuf>| p.as_deref().map(read_corpus_file).transpose();
    let train = read(&config.train_path)?.expect("validated");
    let dev = read(&config.dev_path)?;
    let test = read(&config.test_path)?;
    if train.is_empty() {
        bail!("training corpus is empty");
    }
    let (model, coverage) = build_model(config, &train)?;
    if let Some(c) = coverage {
        writeln!(log, "vectors: {} of {} words ({} lowercased)", c.rows, model.vocab.words.len(), c.lowercased)?;
    }
    let mut log_file = match &config.log_path {
        Some(p) => Some(std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => None,
    };
    let mut io_error = None;
    let mut on_epoch = |r: &EpochReport| {
        let line = r.log_line();
        let mut emit = |w: &mut dyn Write| {
            if let Err(e) = writeln!(w, "{line}") {
                io_error.get_or_insert(e);
            }
        };
        emit(log);
        if let Some(f) = log_file.as_mut() {
            emit(f);
        }
    };
    let mut trainer = Trainer::new(model, config.train.clone())?;
    let model = trainer.train(&train, dev.as_deref(), &mut on_epoch)?;
    if let Some(e) = io_error {
        return Err(e).context("cannot write the training log");
    }
    save_model(&model, config.model_path.as_deref().expect("validated"))?;
    let test = match test {
        Some(t) => {
            let pred = with_threads(config.threads, || predict_all(&model, &t))??;
            Some(score(&t, &pred, model.vocab.negative_relation.as_deref()))
        }
        None => None,
    };
    Ok(TrainOutcome { model, coverage, test })
}

/// Loads a model and a corpus and predicts it.
pub fn predict_file(model: &Model, input: &Path, threads: usize) -> anyhow::Result<(Vec<Sentence>, Vec<Prediction>)> {
    let sentences = read_corpus_file(input)?;
    let predictions = with_threads(threads, || predict_all(model, &sentences))??;
    Ok((sentences, predictions))
}
