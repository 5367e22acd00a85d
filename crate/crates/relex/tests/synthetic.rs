use relex::corpus_io::{parse_corpus, write_corpus};
use relex::run::score_corpora;
use relex::synthetic::{gen_nominal_pairs, gen_synthetic, NOMINAL_NEGATIVE};

#[test]
fn same_seed_same_corpus() {
    assert_eq!(gen_synthetic(40, 42), gen_synthetic(40, 42));
    assert_ne!(gen_synthetic(40, 42), gen_synthetic(40, 43));
    assert_eq!(gen_nominal_pairs(40, 42), gen_nominal_pairs(40, 42));
}

#[test]
fn corpus_covers_every_type_and_direction() {
    let corpus = gen_synthetic(200, 42);
    let mut types = std::collections::BTreeSet::new();
    let (mut forward, mut backward, mut without) = (0, 0, 0);
    for s in &corpus {
        types.extend(s.entities().iter().map(|e| e.ty.clone()));
        for r in s.relations() {
            if r.arg1 < r.arg2 {
                forward += 1;
            } else {
                backward += 1;
            }
        }
        without += usize::from(s.relations().is_empty());
    }
    assert_eq!(types.into_iter().collect::<Vec<_>>(), ["LOC", "ORG", "PER"]);
    assert!(forward > 0 && backward > 0 && without > 0);
}

#[test]
fn output_parses_and_scores_perfectly_against_itself() {
    for corpus in [gen_synthetic(50, 1), gen_nominal_pairs(50, 1)] {
        let parsed = parse_corpus(&write_corpus(&corpus)).unwrap();
        let report = score_corpora(&parsed, &parsed, Some(NOMINAL_NEGATIVE)).unwrap();
        assert_eq!(report.machine_line(), "ENT 1.0000 1.0000 1.0000 REL 1.0000 1.0000 1.0000");
    }
}

#[test]
fn nominal_pairs_have_one_relation_each() {
    let corpus = gen_nominal_pairs(100, 5);
    assert!(corpus.iter().all(|s| s.relations().len() == 1 && s.entities().len() == 2));
    assert!(corpus.iter().any(|s| s.relations()[0].ty == NOMINAL_NEGATIVE));
    assert!(corpus.iter().any(|s| s.relations()[0].arg1 > s.relations()[0].arg2));
}
