//! Pretrained word vectors in the word2vec text format.

use std::collections::HashMap;

use relex_core::vocab::Alphabet;
use relex_core::Tensor;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("line {line}: vector has {found} values, the model expects {expected}")]
    Dimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: {value:?} is not a number")]
    Number { line: usize, value: String },
    #[error("line {line}: missing word")]
    Missing { line: usize },
}

/// How many vocabulary rows a vector file filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Coverage {
    /// Rows copied from the file.
    pub rows: usize,
    /// Of those, rows found only through the lowercased form.
    pub lowercased: usize,
}

fn is_header(fields: &[&str]) -> bool {
    fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok())
}

/// Copies vectors for known words into `table` (one row per entry of
/// `words`). Words missing from the file keep their current row; a word
/// missing verbatim falls back to its lowercased form. An optional
/// `count dim` header line is skipped.
pub fn load_word_vectors(text: &str, words: &Alphabet, table: &mut Tensor) -> Result<Coverage, VectorError> {
    let dim = table.cols();
    let mut vectors: HashMap<&str, Vec<f64>> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() || (i == 0 && is_header(&fields)) {
            continue;
        }
        let line_no = i + 1;
        let (word, values) = fields.split_first().ok_or(VectorError::Missing { line: line_no })?;
        if values.len() != dim {
            return Err(VectorError::Dimension { line: line_no, expected: dim, found: values.len() });
        }
        let row = values
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| VectorError::Number { line: line_no, value: v.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        vectors.entry(word).or_insert(row);
    }
    let mut coverage = Coverage::default();
    for (id, word) in words.iter() {
        let (row, lowered) = match vectors.get(word) {
            Some(r) => (r, false),
            None => match vectors.get(word.to_lowercase().as_str()) {
                Some(r) => (r, true),
                None => continue,
            },
        };
        table.row_mut(id).copy_from_slice(row);
        coverage.rows += 1;
        coverage.lowercased += usize::from(lowered);
    }
    Ok(coverage)
}
