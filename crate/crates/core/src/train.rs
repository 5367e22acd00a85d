//! Entity pretraining, joint training with scheduled sampling, and
//! evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;
use crate::metrics::MetricReport;
use crate::model::{Mode, Model, Parts};
use crate::optim::{clip_gradients, AdamConfig, AdamState, AveragedParams};
use crate::params::{ParamGroup, ParamStore};
use crate::sentence::Sentence;
use crate::{seeded_rng, SeededRng};

/// Scheduled-sampling probability `ε_i = k / (k + exp(i / k))` of feeding
/// the gold tag in epoch `i`.
pub fn epsilon(i: usize, k: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(Error::InvalidArgument(format!("schedule k must be at least 1, got {k}")));
    }
    Ok(k / (k + math::exp(i as f64 / k)))
}

/// Optimization hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub dropout: f64,
    pub clip: f64,
    pub schedule_k: f64,
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub seed: u64,
    pub entity_weight: f64,
    pub relation_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            l2: 1e-5,
            dropout: 0.3,
            clip: 10.0,
            schedule_k: 10.0,
            epochs: 100,
            pretrain_epochs: 10,
            seed: 1,
            entity_weight: 1.0,
            relation_weight: 1.0,
        }
    }
}

impl TrainConfig {
    /// Hard requirements; violating any of them is an error.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be non-negative, got {}", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.clip > 0.0) {
            return bad(format!("clip must be positive, got {}", self.clip));
        }
        if !(self.schedule_k >= 1.0 && self.schedule_k.is_finite()) {
            return bad(format!("schedule_k must be at least 1, got {}", self.schedule_k));
        }
        if !(self.entity_weight >= 0.0 && self.relation_weight >= 0.0) {
            return bad(String::from("loss weights must be non-negative"));
        }
        Ok(())
    }

    /// Settings outside the ranges the hyper-parameters were tuned over.
    /// Callers treat these as errors unless range checks are disabled.
    pub fn out_of_range(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |name: &str, v: f64, lo: f64, hi: f64, zero_ok: bool| {
            if !((lo..=hi).contains(&v) || (zero_ok && v == 0.0)) {
                out.push(format!("{name} = {v} is outside [{lo}, {hi}]"));
            }
        };
        check("learning_rate", self.learning_rate, 1e-4, 5e-3, false);
        check("l2", self.l2, 1e-7, 1e-4, true);
        check("dropout", self.dropout, 0.0, 0.5, false);
        check("clip", self.clip, 1.0, 100.0, false);
        check("schedule_k", self.schedule_k, 1.0, 100.0, false);
        check("epochs", self.epochs as f64, 1.0, 100.0, false);
        check("pretrain_epochs", self.pretrain_epochs as f64, 0.0, 100.0, false);
        out
    }
}

/// What a training epoch updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Entity loss only; embeddings, sequence layer and tagger.
    Entity,
    /// Relation loss only; relation-side parameters.
    Relation,
    /// Summed loss; every parameter.
    Joint,
}

impl Phase {
    fn parts(self) -> Parts {
        match self {
            Phase::Entity => Parts { entities: true, relations: false },
            Phase::Relation => Parts { entities: false, relations: true },
            Phase::Joint => Parts::ALL,
        }
    }

    fn updates(self, group: ParamGroup) -> bool {
        match self {
            Phase::Entity => group == ParamGroup::Entity,
            Phase::Relation => group == ParamGroup::Relation,
            Phase::Joint => true,
        }
    }
}

/// Progress of one epoch.
#[derive(Clone, Debug)]
pub struct EpochReport {
    pub phase: Phase,
    pub pretraining: bool,
    pub epoch: usize,
    pub epsilon: f64,
    /// Mean training loss per sentence.
    pub loss: f64,
    pub dev: Option<MetricReport>,
}

impl EpochReport {
    /// `epoch i eps=<ε> loss=<loss> dev_ent_f1=<f1> dev_rel_f1=<f1>`;
    /// missing dev scores print as `-`. Pretraining epochs start with
    /// `pretrain` instead.
    pub fn log_line(&self) -> String {
        let (ent, rel) = match &self.dev {
            Some(d) => (format!("{:.4}", d.entity.f1()), format!("{:.4}", d.relation.f1())),
            None => (String::from("-"), String::from("-")),
        };
        let head = if self.pretraining { "pretrain" } else { "epoch" };
        format!(
            "{head} {} eps={:.6} loss={:.6} dev_ent_f1={ent} dev_rel_f1={rel}",
            self.epoch, self.epsilon, self.loss
        )
    }
}

/// Predicts every sentence and scores against its gold annotation.
pub fn evaluate(model: &Model, corpus: &[Sentence]) -> Result<MetricReport> {
    let mut report = MetricReport::default();
    for s in corpus {
        let p = model.predict(s)?;
        report.add_sentence(
            s.entities(),
            s.relations(),
            &p.entities,
            &p.relations,
            model.vocab.negative_relation.as_deref(),
        );
    }
    Ok(report)
}

/// The score early stopping maximizes: relation macro-F1 for
/// relation-only models, relation micro-F1 otherwise.
pub fn primary_score(model: &Model, report: &MetricReport) -> f64 {
    if model.config.relation_only {
        report.macro_f1().unwrap_or(0.0)
    } else {
        report.relation.f1()
    }
}

/// Owns a model during training along with the optimizer state, the
/// running parameter average and the training RNG.
pub struct Trainer {
    config: TrainConfig,
    model: Model,
    adam: AdamState,
    average: AveragedParams,
    rng: SeededRng,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamState::new(
            &model.params,
            AdamConfig { learning_rate: config.learning_rate, l2: config.l2, ..AdamConfig::default() },
        );
        let average = AveragedParams::new(&model.params);
        // a separate stream from the one used for initialization
        let rng = seeded_rng(config.seed ^ 0x5eed_0f_7a1e);
        Ok(Trainer { config, model, adam, average, rng })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// The model with its current (not averaged) parameters.
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &ParamStore {
        &self.model.params
    }

    /// The model with averaged parameters, used for every prediction.
    pub fn averaged_model(&self) -> Model {
        let params = self.average.averaged(&self.model.params);
        Model { params, ..self.model.clone() }
    }

    /// One update on one sentence. Returns the loss before the update.
    pub fn train_sentence(&mut self, sentence: &Sentence, phase: Phase, epsilon: f64) -> Result<f64> {
        let Trainer { config, model, adam, average, rng } = self;
        let mut g = Graph::new(&model.params);
        let mut mode = Mode::Train { rng, dropout: config.dropout, epsilon };
        let fwd = model.forward(&mut g, sentence, &mut mode, phase.parts())?;
        let mut terms = Vec::new();
        if let Some(l) = fwd.entity_loss {
            terms.push(g.scale(l, config.entity_weight));
        }
        if let Some(l) = fwd.relation_loss {
            terms.push(g.scale(l, config.relation_weight));
        }
        if terms.is_empty() {
            return Ok(0.0);
        }
        let loss = if terms.len() == 1 { terms[0] } else { g.add(&terms)? };
        let value = g.scalar(loss);
        let mut grads = g.backward(loss)?;
        drop(g);
        clip_gradients(&mut grads, config.clip);
        adam.step(&mut model.params, &grads, |p| phase.updates(p.group))?;
        average.update(&model.params);
        Ok(value)
    }

    /// One pass over `corpus` in a freshly shuffled order. Returns the
    /// mean loss per sentence.
    pub fn run_epoch(&mut self, corpus: &[Sentence], phase: Phase, epsilon: f64) -> Result<f64> {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut self.rng);
        let mut total = 0.0;
        for i in order {
            total += self.train_sentence(&corpus[i], phase, epsilon)?;
        }
        Ok(if corpus.is_empty() { 0.0 } else { total / corpus.len() as f64 })
    }

    /// Entity pretraining: `pretrain_epochs` epochs of entity-only updates.
    /// Relation parameters are untouched.
    pub fn pretrain(&mut self, corpus: &[Sentence], on_epoch: &mut dyn FnMut(&EpochReport)) -> Result<Vec<f64>> {
        let mut losses = Vec::new();
        if self.model.config.relation_only {
            return Ok(losses);
        }
        for i in 0..self.config.pretrain_epochs {
            let eps = epsilon(i, self.config.schedule_k)?;
            let loss = self.run_epoch(corpus, Phase::Entity, eps)?;
            losses.push(loss);
            on_epoch(&EpochReport { phase: Phase::Entity, pretraining: true, epoch: i, epsilon: eps, loss, dev: None });
        }
        Ok(losses)
    }

    /// Pretraining followed by `epochs` joint epochs (or, for unshared
    /// models, `epochs` entity epochs then `epochs` relation epochs).
    /// With a dev corpus the averaged parameters of the best epoch are
    /// returned, otherwise those after the last epoch.
    pub fn train(
        &mut self,
        train: &[Sentence],
        dev: Option<&[Sentence]>,
        on_epoch: &mut dyn FnMut(&EpochReport),
    ) -> Result<Model> {
        if train.is_empty() {
            return Err(Error::Empty("training corpus"));
        }
        self.pretrain(train, on_epoch)?;
        let phases: &[Phase] = if self.model.config.shared { &[Phase::Joint] } else { &[Phase::Entity, Phase::Relation] };
        let mut best: Option<(f64, Model)> = None;
        for &phase in phases {
            for i in 0..self.config.epochs {
                let eps = epsilon(i, self.config.schedule_k)?;
                let loss = self.run_epoch(train, phase, eps)?;
                let mut report = EpochReport { phase, pretraining: false, epoch: i, epsilon: eps, loss, dev: None };
                if let Some(dev) = dev {
                    let snapshot = self.averaged_model();
                    let scores = evaluate(&snapshot, dev)?;
                    let score = primary_score(&snapshot, &scores);
                    // the entity phase of an unshared model cannot score relations
                    if phase != Phase::Entity && best.as_ref().is_none_or(|(b, _)| score > *b) {
                        best = Some((score, snapshot));
                    }
                    report.dev = Some(scores);
                }
                on_epoch(&report);
            }
        }
        Ok(match best {
            Some((_, m)) => m,
            None => self.averaged_model(),
        })
    }
}
