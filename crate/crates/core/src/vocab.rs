//! String-to-id alphabets built from a training corpus.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::bilou::TagAlphabet;
use crate::sentence::Sentence;

pub const UNK: &str = "<unk>";
pub const ROOT: &str = "<root>";

/// Bijective map between strings and dense ids. The first `reserved`
/// entries are fixed markers such as [`UNK`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    items: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Alphabet {
    pub fn with_reserved(reserved: &[&str]) -> Self {
        let mut a = Alphabet { items: Vec::new(), index: BTreeMap::new() };
        for r in reserved {
            a.insert(r);
        }
        a
    }

    /// Id of `item`, adding it if new.
    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&id) = self.index.get(item) {
            return id;
        }
        let id = self.items.len();
        self.items.push(item.into());
        self.index.insert(item.into(), id);
        id
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Id of `item`, or 0 (UNK) when unknown.
    pub fn id_or_unk(&self, item: &str) -> usize {
        self.get(item).unwrap_or(0)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.items[id]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &str)> {
        self.items.iter().enumerate().map(|(i, s)| (i, s.as_str()))
    }
}

/// Relation label set: id 0 is the negative (no relation) label; every
/// relation type `k` gets `1 + 2k` for the candidate's own order
/// (first token is argument 1) and `2 + 2k` for the reversed order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationLabels {
    types: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// The candidate's first token is argument 1.
    Forward,
    /// The candidate's second token is argument 1.
    Reverse,
}

impl RelationLabels {
    pub const NEGATIVE: usize = 0;

    pub fn new(types: Vec<String>) -> Self {
        RelationLabels { types }
    }

    pub fn len(&self) -> usize {
        1 + 2 * self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn type_index(&self, ty: &str) -> Option<usize> {
        self.types.iter().position(|t| t == ty)
    }

    pub fn label(&self, ty: usize, direction: Direction) -> usize {
        1 + 2 * ty + (direction == Direction::Reverse) as usize
    }

    /// `(type index, direction)` of a positive label.
    pub fn decode(&self, label: usize) -> Option<(usize, Direction)> {
        if label == Self::NEGATIVE {
            return None;
        }
        let k = label - 1;
        Some((k / 2, if k % 2 == 0 { Direction::Forward } else { Direction::Reverse }))
    }

    pub fn name(&self, label: usize) -> String {
        match self.decode(label) {
            None => String::from("NEG"),
            Some((ty, Direction::Forward)) => alloc::format!("{}(e1,e2)", self.types[ty]),
            Some((ty, Direction::Reverse)) => alloc::format!("{}(e2,e1)", self.types[ty]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabOptions {
    /// Training words seen fewer times than this map to UNK.
    pub min_word_freq: usize,
    /// Relation type read as "no relation" (the SemEval `Other` class).
    pub negative_relation: Option<String>,
}

impl Default for VocabOptions {
    fn default() -> Self {
        VocabOptions { min_word_freq: 1, negative_relation: None }
    }
}

/// Every alphabet a model needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Alphabet,
    pub pos: Alphabet,
    /// Id 1 is the reserved ROOT dependency of the sentence root.
    pub deprels: Alphabet,
    pub tags: TagAlphabet,
    pub relations: RelationLabels,
    pub negative_relation: Option<String>,
}

impl Vocabulary {
    pub const ROOT_DEPREL: usize = 1;

    /// Builds the alphabets over a training corpus. Entity and relation
    /// types are sorted for stable ids.
    pub fn build(corpus: &[Sentence], options: &VocabOptions) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut pos_set = BTreeSet::new();
        let mut dep_set = BTreeSet::new();
        let mut ent_types = BTreeSet::new();
        let mut rel_types = BTreeSet::new();
        for s in corpus {
            for (t, tok) in s.tokens().iter().enumerate() {
                *counts.entry(tok.form.as_str()).or_default() += 1;
                pos_set.insert(tok.pos.as_str());
                if s.tree().parent(t).is_some() {
                    dep_set.insert(tok.deprel.as_str());
                }
            }
            for e in s.entities() {
                ent_types.insert(e.ty.as_str());
            }
            for r in s.relations() {
                if options.negative_relation.as_deref() != Some(r.ty.as_str()) {
                    rel_types.insert(r.ty.as_str());
                }
            }
        }
        let mut words = Alphabet::with_reserved(&[UNK]);
        // first-occurrence order keeps ids stable across equal corpora
        for s in corpus {
            for tok in s.tokens() {
                if counts[tok.form.as_str()] >= options.min_word_freq.max(1) {
                    words.insert(&tok.form);
                }
            }
        }
        let mut pos = Alphabet::with_reserved(&[UNK]);
        pos_set.into_iter().for_each(|p| {
            pos.insert(p);
        });
        let mut deprels = Alphabet::with_reserved(&[UNK, ROOT]);
        dep_set.into_iter().for_each(|d| {
            deprels.insert(d);
        });
        Vocabulary {
            words,
            pos,
            deprels,
            tags: TagAlphabet::new(ent_types),
            relations: RelationLabels::new(rel_types.into_iter().map(String::from).collect()),
            negative_relation: options.negative_relation.clone(),
        }
    }

    pub fn word_id(&self, form: &str) -> usize {
        self.words.id_or_unk(form)
    }

    pub fn pos_id(&self, pos: &str) -> usize {
        self.pos.id_or_unk(pos)
    }

    /// Dependency id of token `t`: its label to the parent, or ROOT.
    pub fn deprel_id(&self, sentence: &Sentence, t: usize) -> usize {
        if sentence.tree().parent(t).is_none() {
            Self::ROOT_DEPREL
        } else {
            self.deprels.id_or_unk(&sentence.tokens()[t].deprel)
        }
    }

    /// Whether a relation type string stands for "no relation".
    pub fn is_negative_relation(&self, ty: &str) -> bool {
        self.negative_relation.as_deref() == Some(ty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentence::{EntitySpan, RelationInstance, Token};
    use alloc::vec;

    fn sentence(words: &[&str]) -> Sentence {
        let n = words.len();
        let tokens = words
            .iter()
            .enumerate()
            .map(|(i, w)| Token::new(*w, "NN", if i + 1 == n { None } else { Some(n - 1) }, "dep"))
            .collect();
        Sentence::new(tokens, vec![EntitySpan::new("PER", 0, 0)], vec![]).unwrap()
    }

    #[test]
    fn min_freq_one_keeps_every_word() {
        let corpus = [sentence(&["a", "b", "c"]), sentence(&["a", "d"])];
        let v = Vocabulary::build(&corpus, &VocabOptions::default());
        for w in ["a", "b", "c", "d"] {
            assert_ne!(v.word_id(w), 0);
        }
        assert_eq!(v.word_id("unseen"), 0);
        assert_eq!(v.tags.types(), &[String::from("PER")]);
    }

    #[test]
    fn hapax_maps_to_unk_with_min_freq_two() {
        let corpus = [sentence(&["a", "b"]), sentence(&["a", "c"])];
        let v = Vocabulary::build(&corpus, &VocabOptions { min_word_freq: 2, ..Default::default() });
        assert_ne!(v.word_id("a"), 0);
        assert_eq!(v.word_id("b"), 0);
    }

    #[test]
    fn root_deprel_is_reserved() {
        let s = sentence(&["x", "y"]);
        let v = Vocabulary::build(core::slice::from_ref(&s), &VocabOptions::default());
        assert_eq!(v.deprel_id(&s, 1), Vocabulary::ROOT_DEPREL);
        assert_eq!(v.deprels.name(v.deprel_id(&s, 0)), "dep");
    }

    #[test]
    fn relation_labels_encode_direction() {
        let tokens = vec![Token::new("a", "NN", None, "root"), Token::new("b", "NN", Some(0), "dep")];
        let s = Sentence::new(
            tokens,
            vec![EntitySpan::new("X", 0, 0), EntitySpan::new("Y", 1, 1)],
            vec![RelationInstance::new(0, 1, "R"), RelationInstance::new(1, 0, "Other")],
        )
        .unwrap();
        let v = Vocabulary::build(
            &[s],
            &VocabOptions { negative_relation: Some("Other".into()), ..Default::default() },
        );
        let labels = &v.relations;
        assert_eq!(labels.len(), 3);
        assert_eq!(labels.decode(labels.label(0, Direction::Reverse)), Some((0, Direction::Reverse)));
        assert_eq!(labels.decode(0), None);
        assert!(v.is_negative_relation("Other"));
    }
}
