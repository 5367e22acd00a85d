//! The joint network: embeddings, the bidirectional sequence layer, the
//! greedy entity tagger and the tree-structured relation classifier stacked
//! on top of it.

pub mod encoder;
pub mod entity;
pub mod relation;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::depstruct::StructureKind;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamGroup, ParamId, ParamKind, ParamStore};
use crate::sentence::{EntitySpan, RelationInstance, Sentence};
use crate::tensor::Tensor;
use crate::vocab::Vocabulary;
use crate::{math, seeded_rng, SeededRng};

pub use encoder::{Encoder, LstmCell};
pub use entity::{EntityHead, TagDecision};
pub use relation::{RelationCandidate, RelationNet, TreeCell};

/// Layer widths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub word: usize,
    pub pos: usize,
    pub dep: usize,
    pub label: usize,
    pub seq_hidden: usize,
    pub tree_hidden: usize,
    pub entity_hidden: usize,
    pub relation_hidden: usize,
}

impl Dims {
    /// Embeddings 200/25/25/25, every hidden layer 100.
    pub const fn standard() -> Self {
        Dims {
            word: 200,
            pos: 25,
            dep: 25,
            label: 25,
            seq_hidden: 100,
            tree_hidden: 100,
            entity_hidden: 100,
            relation_hidden: 100,
        }
    }

    /// Tiny widths for gradient checks and quick experiments.
    pub const fn small() -> Self {
        Dims {
            word: 6,
            pos: 3,
            dep: 3,
            label: 3,
            seq_hidden: 4,
            tree_hidden: 4,
            entity_hidden: 5,
            relation_hidden: 5,
        }
    }
}

impl Default for Dims {
    fn default() -> Self {
        Self::standard()
    }
}

/// How relation candidates are generated from detected entities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CandidateMode {
    /// Both orders of every pair.
    #[default]
    Both,
    /// Only the sentence-order pair.
    LeftToRight,
    /// Both orders; the reversed one is always a negative training example.
    NegativeSampling,
}

impl CandidateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateMode::Both => "both",
            CandidateMode::LeftToRight => "l2r_only",
            CandidateMode::NegativeSampling => "neg_sample",
        }
    }
}

impl FromStr for CandidateMode {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        match s {
            "both" => Ok(CandidateMode::Both),
            "l2r_only" => Ok(CandidateMode::LeftToRight),
            "neg_sample" => Ok(CandidateMode::NegativeSampling),
            other => Err(format!(
                "invalid candidate mode {other:?} (expected both, l2r_only or neg_sample)"
            )),
        }
    }
}

impl fmt::Display for CandidateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Architecture and decoding options.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub dims: Dims,
    pub structure: StructureKind,
    pub candidates: CandidateMode,
    /// Append the averaged sequence states of both entities to `d_p`.
    pub pair: bool,
    /// Feed entity-label embeddings to the tagger and the tree LSTM.
    pub label_embeddings: bool,
    /// Share embeddings and the sequence layer between entities and
    /// relations. When off, the relation side has its own copies and the
    /// two halves are trained one after the other.
    pub shared: bool,
    /// Mask illegal BILOU transitions at prediction time.
    pub constrained_decoding: bool,
    /// Relation classification only: entities come from the gold
    /// annotation and candidates from the annotated pairs.
    pub relation_only: bool,
    pub forget_bias: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dims: Dims::standard(),
            structure: StructureKind::ShortestPath,
            candidates: CandidateMode::Both,
            pair: true,
            label_embeddings: true,
            shared: true,
            constrained_decoding: true,
            relation_only: false,
            forget_bias: 0.0,
        }
    }
}

impl ModelConfig {
    /// Relation-classification setup for nominal-pair data: no entity
    /// detection and no label embeddings.
    pub fn relation_only(mut self) -> Self {
        self.relation_only = true;
        self.label_embeddings = false;
        self
    }
}

/// Forward-pass mode. Training enables dropout and scheduled sampling.
pub enum Mode<'r> {
    Predict,
    Train {
        rng: &'r mut SeededRng,
        dropout: f64,
        /// Probability of feeding the gold tag (when legal).
        epsilon: f64,
    },
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train { .. })
    }

    pub(crate) fn dropout(&mut self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        match self {
            Mode::Predict => Ok(x),
            Mode::Train { rng, dropout, .. } => g.dropout(x, *dropout, Some(&mut **rng)),
        }
    }
}

/// A dense layer `W x + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
}

impl Dense {
    pub fn register(
        init: &mut Init<'_>,
        prefix: &str,
        out: usize,
        input: usize,
        group: ParamGroup,
    ) -> Result<Self> {
        Ok(Dense {
            w: init.weight(&format!("{prefix}.W"), out, input, group)?,
            b: init.bias(&format!("{prefix}.b"), out, group, 0.0)?,
        })
    }

    pub fn apply(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        g.affine(w, x, Some(b))
    }
}

/// Registers parameters with their initial values: Glorot-uniform weights,
/// zero biases (or the forget bias), uniform(-0.1, 0.1) embeddings.
pub struct Init<'a> {
    pub store: &'a mut ParamStore,
    pub rng: &'a mut SeededRng,
}

impl Init<'_> {
    pub fn weight(&mut self, name: &str, rows: usize, cols: usize, group: ParamGroup) -> Result<ParamId> {
        let limit = math::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-limit..=limit)).collect();
        self.store.add(name, ParamKind::Weight, group, Tensor::from_vec(rows, cols, data)?)
    }

    pub fn bias(&mut self, name: &str, rows: usize, group: ParamGroup, value: f64) -> Result<ParamId> {
        self.store.add(name, ParamKind::Bias, group, Tensor::vector(alloc::vec![value; rows]))
    }

    pub fn embedding(&mut self, name: &str, rows: usize, cols: usize, group: ParamGroup) -> Result<ParamId> {
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-0.1..=0.1)).collect();
        self.store.add(name, ParamKind::Embedding, group, Tensor::from_vec(rows, cols, data)?)
    }
}

/// Parameter handles of the whole network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub encoder: Encoder,
    /// Entity-label embeddings shared by the tagger and the tree LSTM input.
    pub label: Option<ParamId>,
    pub entity: EntityHead,
    pub relation: RelationNet,
}

/// A configured network with its vocabulary and parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    pub net: Network,
}

/// Output of [`Model::predict`].
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub tags: Vec<usize>,
    pub entities: Vec<EntitySpan>,
    pub relations: Vec<RelationInstance>,
}

/// Losses and decisions of one sentence-level forward pass.
#[derive(Debug, Default)]
pub struct SentenceForward {
    pub decisions: Vec<TagDecision>,
    pub spans: Vec<EntitySpan>,
    pub candidates: Vec<RelationCandidate>,
    pub logits: Vec<NodeId>,
    pub entity_loss: Option<NodeId>,
    pub relation_loss: Option<NodeId>,
}

/// Which parts of the network a forward pass evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parts {
    pub entities: bool,
    pub relations: bool,
}

impl Parts {
    pub const ALL: Parts = Parts { entities: true, relations: true };
}

impl Model {
    /// Builds a freshly initialized model; `seed` fixes every initial value.
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut rng = seeded_rng(seed);
        let d = config.dims;
        let mut init = Init { store: &mut store, rng: &mut rng };
        let encoder = Encoder::register(&mut init, "", &vocab, &d, config.forget_bias, ParamGroup::Entity)?;
        let label = if config.label_embeddings {
            Some(init.embedding("emb.label", vocab.tags.len(), d.label, ParamGroup::Entity)?)
        } else {
            None
        };
        let entity = EntityHead::register(&mut init, &config, vocab.tags.len())?;
        let relation = RelationNet::register(&mut init, &config, &vocab)?;
        let net = Network { encoder, label, entity, relation };
        Ok(Model { config, vocab, params: store, net })
    }

    /// Same model with other parameter values.
    pub fn with_params(&self, params: ParamStore) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for ((_, a), (_, b)) in self.params.iter().zip(params.iter()) {
            if a.name != b.name || a.value.shape() != b.value.shape() {
                return Err(Error::InvalidArgument(format!(
                    "parameter {} does not match {}",
                    b.name, a.name
                )));
            }
        }
        Ok(Model { params, ..self.clone() })
    }

    /// Word and POS ids of a sentence.
    pub fn token_ids(&self, sentence: &Sentence) -> Vec<(usize, usize)> {
        sentence
            .tokens()
            .iter()
            .map(|t| (self.vocab.word_id(&t.form), self.vocab.pos_id(&t.pos)))
            .collect()
    }

    /// Gold tag ids of a sentence (types unknown to the model become `O`).
    pub fn gold_tags(&self, sentence: &Sentence) -> Vec<usize> {
        let known: Vec<EntitySpan> = sentence
            .entities()
            .iter()
            .filter(|e| self.vocab.tags.type_index(&e.ty).is_some())
            .cloned()
            .collect();
        self.vocab.tags.encode(&known, sentence.len()).expect("validated spans")
    }

    /// Builds the sentence graph: sequence layer, entity decoding (with
    /// losses in training mode), candidate construction and relation
    /// scoring.
    pub fn forward(
        &self,
        g: &mut Graph,
        sentence: &Sentence,
        mode: &mut Mode<'_>,
        parts: Parts,
    ) -> Result<SentenceForward> {
        let mut out = SentenceForward::default();
        let ids = self.token_ids(sentence);
        let states = self.net.encoder.sequence_layer(g, &ids, mode)?;

        let fed_tags: Vec<usize>;
        if self.config.relation_only {
            out.spans = sentence.entities().to_vec();
            fed_tags = self.gold_tags(sentence);
        } else {
            let gold = mode.is_training().then(|| self.gold_tags(sentence));
            out.decisions = entity::decode_entities(
                g,
                &self.net.entity,
                &self.vocab.tags,
                self.net.label,
                &states,
                gold.as_deref(),
                self.config.constrained_decoding,
                mode,
            )?;
            fed_tags = out.decisions.iter().map(|d| d.fed).collect();
            out.spans = self.vocab.tags.decode(&fed_tags);
            if parts.entities && mode.is_training() {
                let losses: Vec<NodeId> = out.decisions.iter().filter_map(|d| d.loss).collect();
                out.entity_loss = Some(g.add(&losses)?);
            }
        }

        if !parts.relations {
            return Ok(out);
        }
        out.candidates = relation::build_candidates(
            sentence,
            &self.vocab,
            &out.spans,
            self.config.candidates,
            self.config.relation_only,
        );
        if out.candidates.is_empty() {
            return Ok(out);
        }
        let rel_states = match &self.net.relation.encoder {
            Some(enc) => enc.sequence_layer(g, &ids, mode)?,
            None => states,
        };
        let label_table = if self.config.shared { self.net.label } else { self.net.relation.label };
        let mut scorer = relation::SentenceScorer::new(
            &self.net.relation,
            &self.config,
            &self.vocab,
            sentence,
            &rel_states,
            &fed_tags,
            label_table,
        );
        let mut losses = Vec::new();
        for cand in &out.candidates {
            let logits = scorer.score(g, cand, mode)?;
            if mode.is_training() {
                losses.push(g.pick_neg_log_softmax(logits, cand.gold)?);
            }
            out.logits.push(logits);
        }
        if !losses.is_empty() {
            out.relation_loss = Some(g.add(&losses)?);
        }
        Ok(out)
    }

    /// Decodes entities and relations of a sentence with the current
    /// parameters.
    pub fn predict(&self, sentence: &Sentence) -> Result<Prediction> {
        let mut g = Graph::new(&self.params);
        let fwd = self.forward(&mut g, sentence, &mut Mode::Predict, Parts::ALL)?;
        let scored: Vec<(usize, f64)> = fwd
            .logits
            .iter()
            .map(|&l| relation::best_label(g.value(l).data()))
            .collect();
        let relations =
            relation::resolve_candidates(&fwd.candidates, &scored, &self.vocab.relations);
        let tags = if self.config.relation_only {
            self.gold_tags(sentence)
        } else {
            fwd.decisions.iter().map(|d| d.fed).collect()
        };
        Ok(Prediction { tags, entities: fwd.spans, relations })
    }
}
