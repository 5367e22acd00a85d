//! BILOU entity tags: encoding spans, repair decoding and transition
//! legality.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::sentence::{EntitySpan, SentenceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Position {
    Begin,
    Inside,
    Last,
    Unit,
}

impl Position {
    const ALL: [Position; 4] = [Position::Begin, Position::Inside, Position::Last, Position::Unit];

    fn prefix(self) -> &'static str {
        match self {
            Position::Begin => "B",
            Position::Inside => "I",
            Position::Last => "L",
            Position::Unit => "U",
        }
    }
}

/// A decoded tag: `O`, or a position within an entity of type index `ty`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Outside,
    Entity { position: Position, ty: usize },
}

/// The tag set `{O} ∪ {B, I, L, U} × types`.
///
/// Id 0 is `O`; the tag `P-T` for the `t`-th type has id `1 + 4t + p` with
/// `p` the index of `P` in `B, I, L, U`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagAlphabet {
    types: Vec<String>,
}

impl TagAlphabet {
    pub const OUTSIDE: usize = 0;

    pub fn new<I, S>(types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TagAlphabet { types: types.into_iter().map(Into::into).collect() }
    }

    pub fn len(&self) -> usize {
        1 + 4 * self.types.len()
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

    pub fn id(&self, tag: Tag) -> usize {
        match tag {
            Tag::Outside => Self::OUTSIDE,
            Tag::Entity { position, ty } => 1 + 4 * ty + position as usize,
        }
    }

    pub fn tag(&self, id: usize) -> Tag {
        if id == Self::OUTSIDE {
            return Tag::Outside;
        }
        let k = id - 1;
        Tag::Entity { position: Position::ALL[k % 4], ty: k / 4 }
    }

    pub fn name(&self, id: usize) -> String {
        match self.tag(id) {
            Tag::Outside => String::from("O"),
            Tag::Entity { position, ty } => format!("{}-{}", position.prefix(), self.types[ty]),
        }
    }

    /// Parses `O` or `P-TYPE`. Unknown types yield `None`.
    pub fn parse(&self, name: &str) -> Option<usize> {
        if name == "O" {
            return Some(Self::OUTSIDE);
        }
        let (prefix, ty) = name.split_once('-')?;
        let position = Position::ALL.into_iter().find(|p| p.prefix() == prefix)?;
        let ty = self.type_index(ty)?;
        Some(self.id(Tag::Entity { position, ty }))
    }

    /// Tag ids for a sentence of length `n`. Spans are 0-based inclusive.
    pub fn encode(&self, spans: &[EntitySpan], n: usize) -> Result<Vec<usize>, SentenceError> {
        let mut tags = alloc::vec![Self::OUTSIDE; n];
        let mut covered = alloc::vec![false; n];
        for (i, span) in spans.iter().enumerate() {
            if span.start > span.end || span.end >= n {
                return Err(SentenceError::SpanOutOfRange { start: span.start, end: span.end, len: n });
            }
            let ty = self
                .type_index(&span.ty)
                .ok_or_else(|| SentenceError::UnknownEntityType(span.ty.clone()))?;
            for t in span.start..=span.end {
                if covered[t] {
                    return Err(SentenceError::OverlappingSpans { span: i, token: t });
                }
                covered[t] = true;
                let position = if span.start == span.end {
                    Position::Unit
                } else if t == span.start {
                    Position::Begin
                } else if t == span.end {
                    Position::Last
                } else {
                    Position::Inside
                };
                tags[t] = self.id(Tag::Entity { position, ty });
            }
        }
        Ok(tags)
    }

    /// Spans of every maximal well-formed `B I* L` or `U` run of a single
    /// type. Ill-formed fragments produce nothing.
    pub fn decode(&self, tags: &[usize]) -> Vec<EntitySpan> {
        let mut spans = Vec::new();
        let mut t = 0;
        while t < tags.len() {
            match self.tag(tags[t]) {
                Tag::Entity { position: Position::Unit, ty } => {
                    spans.push(EntitySpan::new(self.types[ty].clone(), t, t));
                    t += 1;
                }
                Tag::Entity { position: Position::Begin, ty } => {
                    let mut end = t + 1;
                    while end < tags.len()
                        && self.tag(tags[end]) == (Tag::Entity { position: Position::Inside, ty })
                    {
                        end += 1;
                    }
                    if end < tags.len()
                        && self.tag(tags[end]) == (Tag::Entity { position: Position::Last, ty })
                    {
                        spans.push(EntitySpan::new(self.types[ty].clone(), t, end));
                        t = end + 1;
                    } else {
                        // resume at the token that broke the run
                        t = end;
                    }
                }
                _ => t += 1,
            }
        }
        spans
    }

    /// Whether `next` may follow `prev`. Sentence start uses `prev = O`.
    /// With `is_last`, `B-*` and `I-*` are also rejected since they could
    /// never be closed.
    pub fn is_legal(&self, prev: usize, next: usize, is_last: bool) -> bool {
        let next_tag = self.tag(next);
        if is_last {
            if let Tag::Entity { position: Position::Begin | Position::Inside, .. } = next_tag {
                return false;
            }
        }
        match self.tag(prev) {
            Tag::Entity { position: Position::Begin | Position::Inside, ty } => matches!(
                next_tag,
                Tag::Entity { position: Position::Inside | Position::Last, ty: t } if t == ty
            ),
            _ => matches!(
                next_tag,
                Tag::Outside | Tag::Entity { position: Position::Begin | Position::Unit, .. }
            ),
        }
    }

    /// All tags that may follow `prev` (ignoring the sentence-final rule).
    pub fn legal_next(&self, prev: usize) -> Vec<usize> {
        (0..self.len()).filter(|&next| self.is_legal(prev, next, false)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;
    use rand::Rng;

    fn alphabet() -> TagAlphabet {
        TagAlphabet::new(["LOC", "ORG", "PER"])
    }

    fn ids(a: &TagAlphabet, names: &[&str]) -> Vec<usize> {
        names.iter().map(|n| a.parse(n).unwrap()).collect()
    }

    #[test]
    fn names_round_trip() {
        let a = alphabet();
        assert_eq!(a.len(), 13);
        for id in 0..a.len() {
            assert_eq!(a.parse(&a.name(id)), Some(id));
        }
        assert_eq!(a.parse("X-PER"), None);
        assert_eq!(a.parse("B-FOO"), None);
        let dashed = TagAlphabet::new(["ORG-AFF"]);
        assert_eq!(dashed.name(dashed.parse("L-ORG-AFF").unwrap()), "L-ORG-AFF");
    }

    #[test]
    fn encodes_two_token_person() {
        let a = alphabet();
        let tags = a.encode(&[EntitySpan::new("PER", 0, 1)], 2).unwrap();
        assert_eq!(tags, ids(&a, &["B-PER", "L-PER"]));
        assert_eq!(a.encode(&[], 3).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn encode_rejects_overlap() {
        let a = alphabet();
        let spans = [EntitySpan::new("PER", 0, 1), EntitySpan::new("LOC", 1, 2)];
        assert!(matches!(a.encode(&spans, 3), Err(SentenceError::OverlappingSpans { .. })));
    }

    #[test]
    fn decode_well_formed_and_repairs() {
        let a = alphabet();
        assert_eq!(
            a.decode(&ids(&a, &["B-PER", "L-PER", "O", "U-LOC"])),
            vec![EntitySpan::new("PER", 0, 1), EntitySpan::new("LOC", 3, 3)]
        );
        assert!(a.decode(&ids(&a, &["I-PER", "L-PER"])).is_empty());
        assert!(a.decode(&ids(&a, &["B-PER", "L-LOC"])).is_empty());
        assert_eq!(
            a.decode(&ids(&a, &["B-PER", "U-LOC", "B-ORG", "I-ORG", "L-ORG", "B-PER"])),
            vec![EntitySpan::new("LOC", 1, 1), EntitySpan::new("ORG", 2, 4)]
        );
    }

    fn random_spans(rng: &mut crate::SeededRng, a: &TagAlphabet, n: usize) -> Vec<EntitySpan> {
        let mut spans = Vec::new();
        let mut t = 0;
        while t < n {
            if rng.gen_bool(0.4) {
                let len = rng.gen_range(1..=4).min(n - t);
                let ty = a.types()[rng.gen_range(0..a.types().len())].clone();
                spans.push(EntitySpan::new(ty, t, t + len - 1));
                t += len;
            } else {
                t += 1;
            }
        }
        spans
    }

    #[test]
    fn round_trip_random_span_sets() {
        let a = alphabet();
        let mut rng = crate::seeded_rng(1000);
        for _ in 0..1000 {
            let n = rng.gen_range(1..25);
            let spans = random_spans(&mut rng, &a, n);
            let tags = a.encode(&spans, n).unwrap();
            assert_eq!(a.decode(&tags), spans);
        }
    }

    #[test]
    fn legal_next_examples() {
        let a = alphabet();
        assert_eq!(a.legal_next(a.parse("B-PER").unwrap()), ids(&a, &["I-PER", "L-PER"]));
        let after_o: BTreeSet<String> =
            a.legal_next(TagAlphabet::OUTSIDE).into_iter().map(|t| a.name(t)).collect();
        let expected: BTreeSet<String> =
            ["O", "B-LOC", "U-LOC", "B-ORG", "U-ORG", "B-PER", "U-PER"].iter().map(|s| (*s).into()).collect();
        assert_eq!(after_o, expected);
        assert!(a.is_legal(a.parse("U-LOC").unwrap(), a.parse("B-PER").unwrap(), false));
        assert!(!a.is_legal(0, a.parse("B-PER").unwrap(), true));
        assert!(!a.is_legal(0, a.parse("I-PER").unwrap(), false));
    }

    #[test]
    fn legal_transitions_equal_encoded_transitions() {
        // Every transition seen in encoded outputs (with a virtual O before the
        // first token) must be legal, and every legal transition must appear.
        let a = TagAlphabet::new(["A", "B"]);
        let mut seen = BTreeSet::new();
        let mut rng = crate::seeded_rng(7);
        for _ in 0..3000 {
            let n = rng.gen_range(1..10);
            let tags = a.encode(&random_spans(&mut rng, &a, n), n).unwrap();
            let mut prev = TagAlphabet::OUTSIDE;
            for (t, &tag) in tags.iter().enumerate() {
                assert!(a.is_legal(prev, tag, t + 1 == n));
                seen.insert((prev, tag));
                prev = tag;
            }
        }
        let mut legal = BTreeSet::new();
        for prev in 0..a.len() {
            for next in a.legal_next(prev) {
                legal.insert((prev, next));
            }
        }
        assert_eq!(seen, legal);
    }
}
