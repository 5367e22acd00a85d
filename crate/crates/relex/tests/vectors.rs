use relex::vectors::{load_word_vectors, Coverage, VectorError};
use relex_core::vocab::{Alphabet, UNK};
use relex_core::Tensor;

fn words(items: &[&str]) -> Alphabet {
    let mut a = Alphabet::with_reserved(&[UNK]);
    for w in items {
        a.insert(w);
    }
    a
}

fn table(rows: usize) -> Tensor {
    let data = (0..rows * 3).map(|v| v as f64 * 0.01).collect();
    Tensor::from_vec(rows, 3, data).unwrap()
}

#[test]
fn one_known_word() {
    let vocab = words(&["born", "in"]);
    let mut t = table(vocab.len());
    let before = t.clone();
    let c = load_word_vectors("2 3\nborn 1 2 3\nzebra 4 5 6\n", &vocab, &mut t).unwrap();
    assert_eq!(c, Coverage { rows: 1, lowercased: 0 });
    let born = vocab.get("born").unwrap();
    assert_eq!(t.row(born), &[1.0, 2.0, 3.0]);
    for r in (0..vocab.len()).filter(|&r| r != born) {
        assert_eq!(t.row(r), before.row(r));
    }
}

#[test]
fn no_known_words_leaves_the_table_alone() {
    let vocab = words(&["born", "in"]);
    let mut t = table(vocab.len());
    let before = t.clone();
    let c = load_word_vectors("zebra 4 5 6\nyak 1 1 1\n", &vocab, &mut t).unwrap();
    assert_eq!(c, Coverage::default());
    assert_eq!(t, before);
}

#[test]
fn capitalized_word_falls_back_to_lowercase_once() {
    let vocab = words(&["Chicago", "in"]);
    let mut t = table(vocab.len());
    let c = load_word_vectors("chicago 0.5 -0.5 0.25\n", &vocab, &mut t).unwrap();
    assert_eq!(c, Coverage { rows: 1, lowercased: 1 });
    assert_eq!(t.row(vocab.get("Chicago").unwrap()), &[0.5, -0.5, 0.25]);

    let mut t = table(vocab.len());
    let c = load_word_vectors("chicago 0 0 0\nChicago 1 1 1\n", &vocab, &mut t).unwrap();
    assert_eq!(c, Coverage { rows: 1, lowercased: 0 });
    assert_eq!(t.row(vocab.get("Chicago").unwrap()), &[1.0, 1.0, 1.0]);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let vocab = words(&["in"]);
    let mut t = table(vocab.len());
    let e = load_word_vectors("in 1 2 3\nborn 1 2\n", &vocab, &mut t).unwrap_err();
    assert_eq!(e, VectorError::Dimension { line: 2, expected: 3, found: 2 });
    let e = load_word_vectors("in 1 x 3\n", &vocab, &mut t).unwrap_err();
    assert!(matches!(e, VectorError::Number { line: 1, .. }));
}
