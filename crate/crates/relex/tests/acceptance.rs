//! Acceptance criteria, one line each on stderr:
//!
//! ```text
//! PASS schedule: eps(0,1) exact true, strictly decreasing true, ...
//! INFO ablation: ...
//! ```
//!
//! `INFO` marks a criterion that is reported but not asserted.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use relex::config::RunConfig;
use relex::model_io::meta_path;
use relex::run::{build_model, train_from_config};
use relex::synthetic::{gen_nominal_pairs, gen_synthetic, NOMINAL_NEGATIVE};
use relex_core::bilou::TagAlphabet;
use relex_core::depstruct::{extract_structure, validate_tree, StructureKind};
use relex_core::gradcheck::{example_sentence, run_suite, TOLERANCE};
use relex_core::metrics::MetricReport;
use relex_core::model::encoder::lstm_step;
use relex_core::model::relation::TreeCell;
use relex_core::model::{Dims, Init, LstmCell, Model, ModelConfig};
use relex_core::sentence::{EntitySpan, RelationInstance, Sentence};
use relex_core::train::{epsilon, evaluate, Trainer};
use relex_core::vocab::{VocabOptions, Vocabulary};
use relex_core::{seeded_rng, Graph, ParamGroup, ParamStore, SeededRng};

enum Status {
    Pass,
    Fail,
    Info,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome { status: if ok { Status::Pass } else { Status::Fail }, detail }
}

fn train(config: &RunConfig, corpus: &[Sentence], dev: Option<&[Sentence]>) -> Model {
    let (model, _) = build_model(config, corpus).expect("model");
    let mut trainer = Trainer::new(model, config.train.clone()).expect("trainer");
    trainer.train(corpus, dev, &mut |_| {}).expect("training")
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let results = run_suite(Dims::small(), 7).expect("suite runs");
    let secs = start.elapsed().as_secs_f64();
    let worst = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    let elements: usize = results.iter().map(|r| r.elements).sum();
    check(
        failed.is_empty() && secs < 60.0,
        format!(
            "{} checks over {elements} elements, max rel err {worst:.1e} (limit {TOLERANCE:e}), {secs:.1} s, failing {failed:?}",
            results.len()
        ),
    )
}

fn overfit() -> Outcome {
    let corpus = gen_synthetic(20, 42);
    let config = RunConfig::default();
    let start = Instant::now();
    let model = train(&config, &corpus, None);
    let secs = start.elapsed().as_secs_f64();
    let report = evaluate(&model, &corpus).expect("evaluation");
    let (ent, rel) = (report.entity.f1(), report.relation.f1());
    check(
        ent == 1.0 && rel >= 0.95 && secs < 300.0 && config.train.epochs <= 100,
        format!("{} epochs, train entity F1 {ent:.4}, relation F1 {rel:.4}, {secs:.0} s", config.train.epochs),
    )
}

/// Reduced widths and epochs so ten runs fit a single core.
fn ablation() -> Outcome {
    let corpus = gen_synthetic(200, 42);
    let (train_set, dev) = corpus.split_at(150);
    let mut config = RunConfig::default();
    for (key, value) in [
        ("word_dim", "50"),
        ("seq_hidden", "50"),
        ("tree_hidden", "50"),
        ("entity_hidden", "50"),
        ("relation_hidden", "50"),
        ("epochs", "6"),
    ] {
        config.set(key, value).expect("key");
    }
    let mut mean = |pretrain_epochs: usize| {
        let scores: Vec<f64> = (1..=5)
            .map(|seed| {
                config.train.seed = seed;
                config.train.pretrain_epochs = pretrain_epochs;
                let model = train(&config, train_set, Some(dev));
                evaluate(&model, dev).expect("evaluation").relation.f1()
            })
            .collect();
        (scores.iter().sum::<f64>() / scores.len() as f64, scores)
    };
    let (with, with_scores) = mean(5);
    let (without, without_scores) = mean(0);
    let verdict = if with >= without { "holds" } else { "does not hold" };
    Outcome {
        status: Status::Info,
        detail: format!(
            "mean dev relation F1 with pretraining {with:.4} {with_scores:.3?}, without {without:.4} {without_scores:.3?}; direction {verdict}"
        ),
    }
}

fn schedule() -> Outcome {
    let exact = epsilon(0, 1.0).unwrap() == 0.5;
    let decreasing = [1.0, 5.0, 10.0, 100.0].iter().all(|&k| {
        let e: Vec<f64> = (0..=100).map(|i| epsilon(i, k).unwrap()).collect();
        e.windows(2).all(|w| w[1] < w[0])
    });
    let err = (epsilon(0, 100.0).unwrap() - 100.0 / 101.0).abs();
    check(
        exact && decreasing && err <= 1e-12,
        format!("eps(0,1) exact {exact}, strictly decreasing {decreasing}, |eps(0,100) - 100/101| = {err:.1e}"),
    )
}

fn random_spans(rng: &mut SeededRng, n: usize, types: &[&str]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut t = 0;
    while t < n {
        if rng.gen_bool(0.4) {
            let end = (t + rng.gen_range(0..4)).min(n - 1);
            spans.push(EntitySpan::new(types[rng.gen_range(0..types.len())], t, end));
            t = end + 1;
        } else {
            t += 1;
        }
    }
    spans
}

fn bilou() -> Outcome {
    let types = ["LOC", "ORG", "PER"];
    let alphabet = TagAlphabet::new(types);
    let mut rng = seeded_rng(1000);
    let mut round_trips = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=25);
        let spans = random_spans(&mut rng, n, &types);
        let tags = alphabet.encode(&spans, n).expect("valid spans");
        round_trips += usize::from(alphabet.decode(&tags) == spans);
    }

    let sentence = example_sentence();
    let mut vocab = Vocabulary::build(std::slice::from_ref(&sentence), &VocabOptions::default());
    vocab.tags = TagAlphabet::new(types);
    let mut illegal = 0;
    for seed in 0..1000 {
        let config = ModelConfig { dims: Dims::small(), constrained_decoding: true, ..ModelConfig::default() };
        let mut model = Model::new(config, vocab.clone(), seed).expect("model");
        for id in model.params.ids().collect::<Vec<_>>() {
            model.params.value_mut(id).data_mut().iter_mut().for_each(|v| *v *= 8.0);
        }
        let tags = model.predict(&sentence).expect("prediction").tags;
        let mut prev = TagAlphabet::OUTSIDE;
        for (t, &tag) in tags.iter().enumerate() {
            illegal += usize::from(!vocab.tags.is_legal(prev, tag, t + 1 == tags.len()));
            prev = tag;
        }
    }
    check(
        round_trips == 1000 && illegal == 0,
        format!("{round_trips}/1000 span sets round-trip, {illegal} ill-formed transitions in 1000 decodes"),
    )
}

fn random_heads(rng: &mut SeededRng, n: usize) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut heads = vec![None; n];
    for i in 1..n {
        heads[order[i]] = Some(order[rng.gen_range(0..i)]);
    }
    heads
}

fn ancestors(heads: &[Option<usize>], mut t: usize) -> Vec<usize> {
    let mut out = vec![t];
    while let Some(h) = heads[t] {
        out.push(h);
        t = h;
    }
    out
}

fn structures() -> Outcome {
    let mut rng = seeded_rng(30);
    let (mut mismatches, mut not_nested, mut pairs) = (0, 0, 0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=30);
        let heads = random_heads(&mut rng, n);
        let tree = validate_tree(&heads).expect("random tree");
        for _ in 0..5 {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            pairs += 1;
            let up_a = ancestors(&heads, a);
            let up_b = ancestors(&heads, b);
            let lca = *up_a.iter().find(|t| up_b.contains(t)).unwrap();
            let mut path: Vec<usize> = up_a.iter().copied().take_while(|&t| t != lca).collect();
            path.push(lca);
            path.extend(up_b.iter().copied().take_while(|&t| t != lca).collect::<Vec<_>>().into_iter().rev());
            mismatches += usize::from(tree.lca(a, b) != lca || tree.shortest_path(a, b) != path);
            let nodes = |kind| -> BTreeSet<usize> {
                extract_structure(&tree, a, b, kind).expect("structure").nodes().iter().copied().collect()
            };
            let (sp, sub, full) = (nodes(StructureKind::ShortestPath), nodes(StructureKind::SubTree), nodes(StructureKind::FullTree));
            not_nested += usize::from(!(sp.is_subset(&sub) && sub.is_subset(&full)));
        }
    }

    let mut store = ParamStore::new();
    let mut rng = seeded_rng(31);
    let mut init = Init { store: &mut store, rng: &mut rng };
    let seq = LstmCell::register(&mut init, "seq", 6, 4, 1.0, ParamGroup::Entity).unwrap();
    let tree = TreeCell::register(&mut init, "tree", 6, 4, 1.0).unwrap();
    let inputs = init.embedding("inputs", 3, 6, ParamGroup::Entity).unwrap();
    for k in 0..4 {
        let (w, b) = (store.value(tree.w[k]).clone(), store.value(tree.b[k]).clone());
        *store.value_mut(seq.w[k]) = w;
        *store.value_mut(seq.b[k]) = b;
    }
    let mut leaf_diff: f64 = 0.0;
    for token in 0..3 {
        let mut g = Graph::new(&store);
        let x = g.lookup(inputs, token).unwrap();
        let projected = tree.project(&mut g, x).unwrap();
        let (th, tc) = tree.node(&mut g, projected, &[]).unwrap();
        let (sh, sc) = lstm_step(&mut g, &seq, x, None).unwrap();
        for (a, b) in [(th, sh), (tc, sc)] {
            for (x, y) in g.value(a).data().iter().zip(g.value(b).data()) {
                leaf_diff = leaf_diff.max((x - y).abs());
            }
        }
    }
    check(
        mismatches == 0 && not_nested == 0 && leaf_diff <= 1e-12,
        format!(
            "{pairs} pairs on 200 trees: {mismatches} lca/path mismatches, {not_nested} nesting violations; leaf vs sequential cell {leaf_diff:.1e}"
        ),
    )
}

fn metric_fixture() -> Outcome {
    let e = EntitySpan::new;
    let gold_entities = [e("PER", 0, 0), e("ORG", 2, 2), e("LOC", 4, 4), e("PER", 6, 6)];
    let pred_entities = [e("PER", 0, 0), e("ORG", 2, 2), e("LOC", 4, 4), e("LOC", 6, 6), e("ORG", 8, 8)];
    let r = RelationInstance::new;
    let gold_relations = [r(0, 2, "EMP"), r(0, 4, "PHYS"), r(2, 4, "PHYS"), r(6, 4, "PHYS")];
    // the last two have a wrong argument: a mistyped span and a spurious one
    let pred_relations = [r(0, 2, "EMP"), r(0, 4, "PHYS"), r(2, 4, "PHYS"), r(6, 4, "PHYS"), r(8, 2, "EMP")];
    let mut report = MetricReport::default();
    report.add_sentence(&gold_entities, &gold_relations, &pred_entities, &pred_relations, None);
    let line = report.machine_line();
    check(line == "ENT 0.6000 0.7500 0.6667 REL 0.6000 0.7500 0.6667", line)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("train.txt");
    std::fs::write(&corpus, relex::corpus_io::write_corpus(&gen_synthetic(20, 42))).unwrap();
    let run = |name: &str| {
        let model = dir.path().join(name);
        let mut config = RunConfig::default();
        config.train_path = Some(corpus.clone());
        config.model_path = Some(model.clone());
        config.train.epochs = 1;
        config.train.pretrain_epochs = 0;
        train_from_config(&config, &mut std::io::sink()).expect("training");
        (std::fs::read(&model).unwrap(), std::fs::read(meta_path(&model)).unwrap())
    };
    let (a, b) = (run("a.model"), run("b.model"));
    check(a == b, format!("two 1-epoch runs wrote {} model bytes, identical: {}", a.0.len(), a == b))
}

fn relation_only() -> Outcome {
    let corpus = gen_nominal_pairs(32, 42);
    let mut config = RunConfig::default();
    config.set("relation_only", "true").unwrap();
    config.set("negative_relation", NOMINAL_NEGATIVE).unwrap();
    let start = Instant::now();
    let model = train(&config, &corpus, None);
    let secs = start.elapsed().as_secs_f64();
    let report = evaluate(&model, &corpus).expect("evaluation");
    let macro_f1 = report.macro_f1().unwrap_or(0.0);
    check(
        macro_f1 >= 0.95 && config.train.epochs <= 100,
        format!("{} nominal pairs, {} epochs, train macro-F1 {macro_f1:.4}, {secs:.0} s", corpus.len(), config.train.epochs),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradients", gradients),
        ("overfit", overfit),
        ("ablation", ablation),
        ("schedule", schedule),
        ("bilou", bilou),
        ("structures", structures),
        ("metric fixture", metric_fixture),
        ("determinism", determinism),
        ("relation-only smoke", relation_only),
    ];
    // written past the test harness capture so the lines land in the log
    let mut err = std::io::stderr();
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let outcome = run();
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                failed.push(name);
                "FAIL"
            }
            Status::Info => "INFO",
        };
        writeln!(err, "{tag} {name}: {}", outcome.detail).unwrap();
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
