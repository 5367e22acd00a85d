//! `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use relex_core::depstruct::StructureKind;
use relex_core::model::{CandidateMode, ModelConfig};
use relex_core::train::TrainConfig;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("line {line}: {source}")]
    At {
        line: usize,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("train", "training corpus path"),
    ("dev", "development corpus path (enables early stopping)"),
    ("test", "test corpus path, scored after training"),
    ("vectors", "pretrained word vectors (word2vec text format)"),
    ("model", "model file to write"),
    ("log", "file receiving the per-epoch log lines"),
    ("learning_rate", "Adam step size"),
    ("l2", "L2 strength on weight matrices"),
    ("dropout", "dropout probability on embeddings and hidden layers"),
    ("clip", "global gradient-norm threshold"),
    ("schedule_k", "scheduled-sampling decay constant k"),
    ("epochs", "joint training epochs"),
    ("pretrain_epochs", "entity pretraining epochs"),
    ("seed", "seed for initialization and training"),
    ("entity_weight", "weight of the entity loss"),
    ("relation_weight", "weight of the relation loss"),
    ("allow_out_of_range", "accept hyper-parameters outside the tuning ranges"),
    ("word_dim", "word embedding width"),
    ("pos_dim", "POS embedding width"),
    ("dep_dim", "dependency-type embedding width"),
    ("label_dim", "entity-label embedding width"),
    ("seq_hidden", "sequence LSTM width per direction"),
    ("tree_hidden", "tree LSTM width per direction"),
    ("entity_hidden", "entity hidden layer width"),
    ("relation_hidden", "relation hidden layer width"),
    ("structure", "sptree, subtree or fulltree"),
    ("candidates", "both, l2r_only or neg_sample"),
    ("pair", "append the entity pair feature"),
    ("label_embeddings", "feed entity-label embeddings (default: on unless relation_only)"),
    ("shared", "share embeddings and sequence layer between the two tasks"),
    ("constrained_decoding", "forbid ill-formed BILOU transitions when predicting"),
    ("relation_only", "classify relations between given nominals only"),
    ("forget_bias", "initial forget-gate bias"),
    ("min_word_freq", "training words rarer than this map to UNK"),
    ("negative_relation", "relation type meaning no relation, e.g. Other"),
    ("threads", "worker threads for prediction (0 = all cores)"),
];

/// Model keys written into a model's metadata.
pub const MODEL_KEYS: &[&str] = &[
    "word_dim",
    "pos_dim",
    "dep_dim",
    "label_dim",
    "seq_hidden",
    "tree_hidden",
    "entity_hidden",
    "relation_hidden",
    "structure",
    "candidates",
    "pair",
    "label_embeddings",
    "shared",
    "constrained_decoding",
    "relation_only",
    "forget_bias",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
    pub allow_out_of_range: bool,
    pub min_word_freq: usize,
    pub negative_relation: Option<String>,
    pub threads: usize,
    label_embeddings: Option<bool>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            train_path: None,
            dev_path: None,
            test_path: None,
            vectors: None,
            model_path: None,
            log_path: None,
            allow_out_of_range: false,
            min_word_freq: 1,
            negative_relation: None,
            threads: 0,
            label_embeddings: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn optional_string(value: &str) -> Option<String> {
    (!value.is_empty() && value != "-").then(|| value.to_string())
}

impl RunConfig {
    /// Parses a configuration file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RunConfig::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| ConfigError::At { line: i + 1, source: Box::new(e) })?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let path = || optional_string(value).map(PathBuf::from);
        let (m, t) = (&mut self.model, &mut self.train);
        match key {
            "train" => self.train_path = path(),
            "dev" => self.dev_path = path(),
            "test" => self.test_path = path(),
            "vectors" => self.vectors = path(),
            "model" => self.model_path = path(),
            "log" => self.log_path = path(),
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "l2" => t.l2 = parse(key, value)?,
            "dropout" => t.dropout = parse(key, value)?,
            "clip" => t.clip = parse(key, value)?,
            "schedule_k" => t.schedule_k = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "pretrain_epochs" => t.pretrain_epochs = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "entity_weight" => t.entity_weight = parse(key, value)?,
            "relation_weight" => t.relation_weight = parse(key, value)?,
            "allow_out_of_range" => self.allow_out_of_range = parse(key, value)?,
            "word_dim" => m.dims.word = parse(key, value)?,
            "pos_dim" => m.dims.pos = parse(key, value)?,
            "dep_dim" => m.dims.dep = parse(key, value)?,
            "label_dim" => m.dims.label = parse(key, value)?,
            "seq_hidden" => m.dims.seq_hidden = parse(key, value)?,
            "tree_hidden" => m.dims.tree_hidden = parse(key, value)?,
            "entity_hidden" => m.dims.entity_hidden = parse(key, value)?,
            "relation_hidden" => m.dims.relation_hidden = parse(key, value)?,
            "structure" => m.structure = parse::<StructureKind>(key, value)?,
            "candidates" => m.candidates = parse::<CandidateMode>(key, value)?,
            "pair" => m.pair = parse(key, value)?,
            "label_embeddings" => self.label_embeddings = Some(parse(key, value)?),
            "shared" => m.shared = parse(key, value)?,
            "constrained_decoding" => m.constrained_decoding = parse(key, value)?,
            "relation_only" => m.relation_only = parse(key, value)?,
            "forget_bias" => m.forget_bias = parse(key, value)?,
            "min_word_freq" => self.min_word_freq = parse(key, value)?,
            "negative_relation" => self.negative_relation = optional_string(value),
            "threads" => self.threads = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        self.model.label_embeddings = self.label_embeddings.unwrap_or(!self.model.relation_only);
        Ok(())
    }

    /// The value of a model key in its canonical text form.
    pub fn model_value(model: &ModelConfig, key: &str) -> Option<String> {
        let d = &model.dims;
        Some(match key {
            "word_dim" => d.word.to_string(),
            "pos_dim" => d.pos.to_string(),
            "dep_dim" => d.dep.to_string(),
            "label_dim" => d.label.to_string(),
            "seq_hidden" => d.seq_hidden.to_string(),
            "tree_hidden" => d.tree_hidden.to_string(),
            "entity_hidden" => d.entity_hidden.to_string(),
            "relation_hidden" => d.relation_hidden.to_string(),
            "structure" => model.structure.to_string(),
            "candidates" => model.candidates.to_string(),
            "pair" => model.pair.to_string(),
            "label_embeddings" => model.label_embeddings.to_string(),
            "shared" => model.shared.to_string(),
            "constrained_decoding" => model.constrained_decoding.to_string(),
            "relation_only" => model.relation_only.to_string(),
            "forget_bias" => format!("{:e}", model.forget_bias),
            _ => return None,
        })
    }

    /// Hard checks on values and ranges (range checks can be waived with
    /// `allow_out_of_range`).
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = &self.model.dims;
        let widths = [
            ("word_dim", d.word),
            ("pos_dim", d.pos),
            ("dep_dim", d.dep),
            ("label_dim", d.label),
            ("seq_hidden", d.seq_hidden),
            ("tree_hidden", d.tree_hidden),
            ("entity_hidden", d.entity_hidden),
            ("relation_hidden", d.relation_hidden),
        ];
        if let Some((key, _)) = widths.iter().find(|(_, w)| *w == 0) {
            return Err(ConfigError::Invalid(format!("{key} must be positive")));
        }
        if !self.model.forget_bias.is_finite() {
            return Err(ConfigError::Invalid("forget_bias must be finite".into()));
        }
        if self.model.relation_only && self.model.label_embeddings {
            return Err(ConfigError::Invalid("relation_only models have no label embeddings".into()));
        }
        let out = self.train.out_of_range();
        if !out.is_empty() && !self.allow_out_of_range {
            return Err(ConfigError::Invalid(format!(
                "outside the tuning ranges: {} (set allow_out_of_range = true to accept)",
                out.join("; ")
            )));
        }
        Ok(())
    }

    /// Checks that input files exist and output directories are writable
    /// before any training starts.
    pub fn validate_paths(&self) -> Result<(), ConfigError> {
        let train = self.train_path.as_ref().ok_or_else(|| ConfigError::Invalid("no training corpus (key train)".into()))?;
        for p in [Some(train), self.dev_path.as_ref(), self.test_path.as_ref(), self.vectors.as_ref()].into_iter().flatten() {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("{} is not a readable file", p.display())));
            }
        }
        let model = self.model_path.as_ref().ok_or_else(|| ConfigError::Invalid("no model output path (key model)".into()))?;
        for p in [Some(model), self.log_path.as_ref()].into_iter().flatten() {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !dir.is_dir() {
                return Err(ConfigError::Invalid(format!("directory of {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
