//! Tokens, gold entity spans and relation instances.
//!
//! All indices are 0-based here; the corpus file format is 1-based and the
//! conversion happens in the reader and writer.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::depstruct::{validate_tree, DepTree, TreeError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub pos: String,
    /// Parent token, `None` for the root.
    pub head: Option<usize>,
    pub deprel: String,
}

impl Token {
    pub fn new(form: impl Into<String>, pos: impl Into<String>, head: Option<usize>, deprel: impl Into<String>) -> Self {
        Token { form: form.into(), pos: pos.into(), head, deprel: deprel.into() }
    }
}

/// A typed entity over the inclusive token range `start..=end`. Spans
/// order by position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub ty: String,
}

impl EntitySpan {
    pub fn new(ty: impl Into<String>, start: usize, end: usize) -> Self {
        EntitySpan { ty: ty.into(), start, end }
    }

    pub fn tokens(&self) -> core::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// A directed relation between the entities whose last tokens are `arg1`
/// and `arg2`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationInstance {
    pub arg1: usize,
    pub arg2: usize,
    pub ty: String,
}

impl RelationInstance {
    pub fn new(arg1: usize, arg2: usize, ty: impl Into<String>) -> Self {
        RelationInstance { arg1, arg2, ty: ty.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SentenceError {
    Empty,
    SpanOutOfRange { start: usize, end: usize, len: usize },
    OverlappingSpans { span: usize, token: usize },
    UnknownEntityType(String),
    IllFormedTags { token: usize },
    RelationArgument { relation: usize, token: usize },
    SelfRelation { relation: usize },
    Tree(TreeError),
}

impl fmt::Display for SentenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SentenceError::Empty => f.write_str("sentence has no tokens"),
            SentenceError::SpanOutOfRange { start, end, len } => {
                write!(f, "entity span {}-{} outside sentence of length {len}", start + 1, end + 1)
            }
            SentenceError::OverlappingSpans { span, token } => {
                write!(f, "entity span #{} overlaps another span at token {}", span + 1, token + 1)
            }
            SentenceError::UnknownEntityType(t) => write!(f, "unknown entity type {t}"),
            SentenceError::IllFormedTags { token } => {
                write!(f, "ill-formed BILOU tag sequence at token {}", token + 1)
            }
            SentenceError::RelationArgument { relation, token } => write!(
                f,
                "relation #{} argument {} is not the last token of an entity",
                relation + 1,
                token + 1
            ),
            SentenceError::SelfRelation { relation } => {
                write!(f, "relation #{} has identical arguments", relation + 1)
            }
            SentenceError::Tree(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for SentenceError {}

impl From<TreeError> for SentenceError {
    fn from(e: TreeError) -> Self {
        SentenceError::Tree(e)
    }
}

/// A validated sentence: a single-rooted dependency tree, non-overlapping
/// entity spans sorted by position, and relations between span ends.
#[derive(Clone, Debug, PartialEq)]
pub struct Sentence {
    tokens: Vec<Token>,
    entities: Vec<EntitySpan>,
    relations: Vec<RelationInstance>,
    tree: DepTree,
}

impl Sentence {
    pub fn new(
        tokens: Vec<Token>,
        mut entities: Vec<EntitySpan>,
        relations: Vec<RelationInstance>,
    ) -> Result<Self, SentenceError> {
        if tokens.is_empty() {
            return Err(SentenceError::Empty);
        }
        let n = tokens.len();
        let heads: Vec<Option<usize>> = tokens.iter().map(|t| t.head).collect();
        let tree = validate_tree(&heads)?;

        entities.sort();
        let mut covered = alloc::vec![false; n];
        for (i, span) in entities.iter().enumerate() {
            if span.start > span.end || span.end >= n {
                return Err(SentenceError::SpanOutOfRange { start: span.start, end: span.end, len: n });
            }
            for t in span.tokens() {
                if covered[t] {
                    return Err(SentenceError::OverlappingSpans { span: i, token: t });
                }
                covered[t] = true;
            }
        }
        for (i, rel) in relations.iter().enumerate() {
            for arg in [rel.arg1, rel.arg2] {
                if !entities.iter().any(|e| e.end == arg) {
                    return Err(SentenceError::RelationArgument { relation: i, token: arg });
                }
            }
            if rel.arg1 == rel.arg2 {
                return Err(SentenceError::SelfRelation { relation: i });
            }
        }
        Ok(Sentence { tokens, entities, relations, tree })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn entities(&self) -> &[EntitySpan] {
        &self.entities
    }

    pub fn relations(&self) -> &[RelationInstance] {
        &self.relations
    }

    pub fn tree(&self) -> &DepTree {
        &self.tree
    }

    /// The entity whose last token is `token`.
    pub fn entity_ending_at(&self, token: usize) -> Option<&EntitySpan> {
        self.entities.iter().find(|e| e.end == token)
    }

    /// Same tokens with other annotations (used for predictions).
    pub fn with_annotations(
        &self,
        entities: Vec<EntitySpan>,
        relations: Vec<RelationInstance>,
    ) -> Result<Self, SentenceError> {
        Sentence::new(self.tokens.clone(), entities, relations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tokens() -> Vec<Token> {
        // Sidney Yates was born in Chicago
        vec![
            Token::new("Sidney", "NNP", Some(1), "nn"),
            Token::new("Yates", "NNP", Some(3), "nsubjpass"),
            Token::new("was", "VBD", Some(3), "auxpass"),
            Token::new("born", "VBN", None, "root"),
            Token::new("in", "IN", Some(3), "prep"),
            Token::new("Chicago", "NNP", Some(4), "pobj"),
        ]
    }

    #[test]
    fn accepts_valid_sentence() {
        let s = Sentence::new(
            tokens(),
            vec![EntitySpan::new("LOC", 5, 5), EntitySpan::new("PER", 0, 1)],
            vec![RelationInstance::new(1, 5, "PHYS")],
        )
        .unwrap();
        assert_eq!(s.entities()[0], EntitySpan::new("PER", 0, 1));
        assert_eq!(s.tree().root(), 3);
        assert_eq!(s.entity_ending_at(5).unwrap().ty, "LOC");
    }

    #[test]
    fn rejects_bad_annotations() {
        let overlap = Sentence::new(
            tokens(),
            vec![EntitySpan::new("PER", 0, 1), EntitySpan::new("PER", 1, 2)],
            vec![],
        );
        assert!(matches!(overlap, Err(SentenceError::OverlappingSpans { .. })));
        let nested = Sentence::new(
            tokens(),
            vec![EntitySpan::new("PER", 0, 2), EntitySpan::new("PER", 1, 1)],
            vec![],
        );
        assert!(matches!(nested, Err(SentenceError::OverlappingSpans { .. })));
        let not_end = Sentence::new(
            tokens(),
            vec![EntitySpan::new("PER", 0, 1), EntitySpan::new("LOC", 5, 5)],
            vec![RelationInstance::new(0, 5, "PHYS")],
        );
        assert_eq!(not_end.unwrap_err(), SentenceError::RelationArgument { relation: 0, token: 0 });
        let selfrel = Sentence::new(
            tokens(),
            vec![EntitySpan::new("PER", 0, 1)],
            vec![RelationInstance::new(1, 1, "PHYS")],
        );
        assert_eq!(selfrel.unwrap_err(), SentenceError::SelfRelation { relation: 0 });
        assert_eq!(Sentence::new(vec![], vec![], vec![]).unwrap_err(), SentenceError::Empty);
    }
}
