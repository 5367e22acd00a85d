//! The tab-separated corpus format.
//!
//! ```text
//! #doc any comment
//! 1	Sidney	NNP	2	nn	B-PER
//! 2	Yates	NNP	4	nsubjpass	L-PER
//! ...
//! #rel	2	6	PHYS
//! ```
//!
//! Token lines carry `INDEX FORM POS HEAD DEPREL TAG` with 1-based indices
//! and `HEAD = 0` for the root. `#rel` lines name the last tokens of the two
//! arguments in relation order. Sentences are separated by a blank line.

use std::fmt::Write as _;
use std::path::Path;

use relex_core::depstruct::TreeError;
use relex_core::sentence::{EntitySpan, RelationInstance, Sentence, SentenceError, Token};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError { line, column, message: message.into() }
    }
}

const COLUMNS: usize = 6;
const TAG_COLUMN: usize = 6;
const HEAD_COLUMN: usize = 4;

#[derive(Default)]
struct Block {
    first_line: usize,
    token_lines: Vec<usize>,
    tokens: Vec<Token>,
    tags: Vec<String>,
    rel_lines: Vec<usize>,
    relations: Vec<RelationInstance>,
}

impl Block {
    fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.relations.is_empty()
    }

    fn finish(self) -> Result<Sentence, ParseError> {
        if self.tokens.is_empty() {
            return Err(ParseError::new(self.first_line, 1, "relation lines without tokens"));
        }
        let entities = spans_from_tags(&self.tags).map_err(|token| {
            ParseError::new(self.token_lines[token], TAG_COLUMN, "ill-formed BILOU tag sequence")
        })?;
        Sentence::new(self.tokens, entities, self.relations.clone()).map_err(|e| {
            let (line, column) = match &e {
                SentenceError::RelationArgument { relation, token } => {
                    let col = if self.relations[*relation].arg1 == *token { 2 } else { 3 };
                    (self.rel_lines[*relation], col)
                }
                SentenceError::SelfRelation { relation } => (self.rel_lines[*relation], 2),
                SentenceError::OverlappingSpans { token, .. } => (self.token_lines[*token], TAG_COLUMN),
                SentenceError::Tree(
                    TreeError::HeadOutOfRange { token, .. }
                    | TreeError::SelfLoop { token }
                    | TreeError::Cycle { token }
                    | TreeError::MultipleRoots { second: token, .. },
                ) => (self.token_lines[*token], HEAD_COLUMN),
                SentenceError::Tree(_) => (self.first_line, HEAD_COLUMN),
                _ => (self.first_line, 1),
            };
            ParseError::new(line, column, e.to_string())
        })
    }
}

/// Decodes gold tags strictly. Returns the offending token on error.
fn spans_from_tags(tags: &[String]) -> Result<Vec<EntitySpan>, usize> {
    let mut spans = Vec::new();
    let mut open: Option<(&str, usize)> = None;
    for (t, tag) in tags.iter().enumerate() {
        if tag == "O" {
            if open.is_some() {
                return Err(t);
            }
            continue;
        }
        let (position, ty) = tag.split_once('-').ok_or(t)?;
        if ty.is_empty() {
            return Err(t);
        }
        match (position, open) {
            ("U", None) => spans.push(EntitySpan::new(ty, t, t)),
            ("B", None) => open = Some((ty, t)),
            ("I", Some((o, _))) if o == ty => {}
            ("L", Some((o, start))) if o == ty => {
                spans.push(EntitySpan::new(ty, start, t));
                open = None;
            }
            _ => return Err(t),
        }
    }
    match open {
        Some(_) => Err(tags.len() - 1),
        None => Ok(spans),
    }
}

fn parse_index(field: &str, line: usize, column: usize, what: &str) -> Result<usize, ParseError> {
    field
        .parse::<usize>()
        .map_err(|_| ParseError::new(line, column, format!("{what} {field:?} is not a non-negative integer")))
}

/// Parses a whole corpus file. Errors carry 1-based line and column
/// (tab-separated field) numbers.
pub fn parse_corpus(text: &str) -> Result<Vec<Sentence>, ParseError> {
    let mut sentences = Vec::new();
    let mut block = Block::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(std::mem::take(&mut block).finish()?);
            }
            continue;
        }
        if block.is_empty() {
            block.first_line = line_no;
        }
        if line.starts_with("#doc") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "#rel" {
            if fields.len() != 4 {
                return Err(ParseError::new(line_no, 1, format!("#rel line needs 4 columns, found {}", fields.len())));
            }
            let a1 = parse_index(fields[1], line_no, 2, "argument")?;
            let a2 = parse_index(fields[2], line_no, 3, "argument")?;
            let n = block.tokens.len();
            for (a, col) in [(a1, 2), (a2, 3)] {
                if a == 0 || a > n {
                    return Err(ParseError::new(line_no, col, format!("argument {a} outside sentence of length {n}")));
                }
            }
            if fields[3].is_empty() {
                return Err(ParseError::new(line_no, 4, "empty relation type"));
            }
            block.rel_lines.push(line_no);
            block.relations.push(RelationInstance::new(a1 - 1, a2 - 1, fields[3]));
            continue;
        }
        if line.starts_with('#') {
            return Err(ParseError::new(line_no, 1, format!("unknown directive {:?}", fields[0])));
        }
        if !block.relations.is_empty() {
            return Err(ParseError::new(line_no, 1, "token line after #rel lines"));
        }
        if fields.len() != COLUMNS {
            return Err(ParseError::new(
                line_no,
                fields.len().min(COLUMNS) + 1,
                format!("expected {COLUMNS} tab-separated columns, found {}", fields.len()),
            ));
        }
        let index = parse_index(fields[0], line_no, 1, "token index")?;
        if index != block.tokens.len() + 1 {
            return Err(ParseError::new(line_no, 1, format!("expected token index {}, found {index}", block.tokens.len() + 1)));
        }
        for (col, what) in [(1, "form"), (2, "POS tag"), (4, "dependency type"), (5, "entity tag")] {
            if fields[col].is_empty() {
                return Err(ParseError::new(line_no, col + 1, format!("empty {what}")));
            }
        }
        let head = parse_index(fields[3], line_no, HEAD_COLUMN, "head")?;
        block.token_lines.push(line_no);
        block.tokens.push(Token::new(fields[1], fields[2], head.checked_sub(1), fields[4]));
        block.tags.push(fields[5].to_string());
    }
    if !block.is_empty() {
        sentences.push(block.finish()?);
    }
    Ok(sentences)
}

fn tag_strings(sentence: &Sentence, entities: &[EntitySpan]) -> Vec<String> {
    let mut tags = vec![String::from("O"); sentence.len()];
    for e in entities {
        if e.start == e.end {
            tags[e.start] = format!("U-{}", e.ty);
        } else {
            tags[e.start] = format!("B-{}", e.ty);
            for tag in &mut tags[e.start + 1..e.end] {
                *tag = format!("I-{}", e.ty);
            }
            tags[e.end] = format!("L-{}", e.ty);
        }
    }
    tags
}

/// Writes one sentence block with the given annotations (each block ends
/// with a newline; blocks are joined by one blank line).
pub fn write_sentence(out: &mut String, sentence: &Sentence, entities: &[EntitySpan], relations: &[RelationInstance]) {
    let tags = tag_strings(sentence, entities);
    for (t, tok) in sentence.tokens().iter().enumerate() {
        let head = tok.head.map_or(0, |h| h + 1);
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", t + 1, tok.form, tok.pos, head, tok.deprel, tags[t]);
    }
    for r in relations {
        let _ = writeln!(out, "#rel\t{}\t{}\t{}", r.arg1 + 1, r.arg2 + 1, r.ty);
    }
}

/// The canonical text of a corpus; `parse_corpus` inverts it exactly.
pub fn write_corpus(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_sentence(&mut out, s, s.entities(), s.relations());
    }
    out
}

/// Reads and parses a corpus file; the path is part of the error.
pub fn read_corpus_file(path: &Path) -> anyhow::Result<Vec<Sentence>> {
    use anyhow::Context as _;
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_corpus(&text).with_context(|| format!("invalid corpus {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn strict_gold_tags() {
        assert_eq!(
            spans_from_tags(&tags(&["B-PER", "L-PER", "O", "U-LOC"])).unwrap(),
            vec![EntitySpan::new("PER", 0, 1), EntitySpan::new("LOC", 3, 3)]
        );
        assert_eq!(spans_from_tags(&tags(&["I-PER", "L-PER"])), Err(0));
        assert_eq!(spans_from_tags(&tags(&["B-PER", "L-LOC"])), Err(1));
        assert_eq!(spans_from_tags(&tags(&["O", "B-PER"])), Err(1));
        assert_eq!(spans_from_tags(&tags(&["X-PER"])), Err(0));
        assert_eq!(spans_from_tags(&tags(&["U-"])), Err(0));
        assert_eq!(spans_from_tags(&tags(&["PER"])), Err(0));
    }
}
