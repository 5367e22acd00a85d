//! Central finite-difference checks of analytic gradients.
//!
//! [`check_gradients`] compares every selected parameter element against
//! `(L(θ + h) - L(θ - h)) / 2h`; [`run_suite`] applies it to each network
//! component and to the full joint sentence loss.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::depstruct::{extract_structure, validate_tree, NodeType, PathStructure, StructureKind};
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::model::encoder::lstm_step;
use crate::model::relation::{tree_bottom_up, tree_top_down, RelationCandidate, SentenceScorer, TreeCell};
use crate::model::{entity, Dims, Init, LstmCell, Mode, Model, ModelConfig, Parts};
use crate::params::{Param, ParamGroup, ParamId, ParamKind, ParamStore};
use crate::sentence::{EntitySpan, RelationInstance, Sentence, Token};
use crate::tensor::Tensor;
use crate::vocab::{VocabOptions, Vocabulary};
use crate::{seeded_rng, SeededRng};

/// Finite-difference step.
pub const STEP: f64 = 1e-5;
/// Largest accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error. Below it the comparison is
/// effectively absolute, which keeps round-off in near-zero gradients from
/// dominating.
pub const FLOOR: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    /// Parameter holding the worst element.
    pub worst: String,
    pub elements: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= TOLERANCE
    }
}

/// Compares analytic and numeric gradients of `loss` for every element of
/// the parameters accepted by `select`.
pub fn check_gradients(
    name: &str,
    store: &ParamStore,
    select: &dyn Fn(&Param) -> bool,
    loss: &dyn Fn(&mut Graph<'_>) -> Result<NodeId>,
) -> Result<CheckResult> {
    let grads = {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let l = loss(&mut g)?;
        Ok(g.scalar(l))
    };
    let mut work = store.clone();
    let mut result =
        CheckResult { name: name.into(), max_rel_error: 0.0, worst: String::new(), elements: 0 };
    let ids: Vec<ParamId> = store.ids().filter(|&id| select(store.get(id))).collect();
    for id in ids {
        for k in 0..store.value(id).len() {
            let orig = store.value(id).data()[k];
            work.value_mut(id).data_mut()[k] = orig + STEP;
            let plus = eval(&work)?;
            work.value_mut(id).data_mut()[k] = orig - STEP;
            let minus = eval(&work)?;
            work.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            let err = relative_error(grads.element(id, k), numeric);
            result.elements += 1;
            if err > result.max_rel_error || result.worst.is_empty() {
                result.max_rel_error = result.max_rel_error.max(err);
                result.worst = store.name(id).into();
            }
        }
    }
    Ok(result)
}

fn random_tensor(rng: &mut SeededRng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

fn add_input(store: &mut ParamStore, rng: &mut SeededRng, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
    store.add(name, ParamKind::Embedding, ParamGroup::Entity, random_tensor(rng, rows, cols, 1.0))
}

/// Scalarizes a list of vectors with a fixed random probe so that every
/// coordinate matters.
fn probe(g: &mut Graph<'_>, probe: ParamId, xs: &[NodeId]) -> Result<NodeId> {
    let all = g.concat(xs)?;
    let p = g.param(probe);
    let prod = g.hadamard(p, all)?;
    Ok(g.sum(prod))
}

/// Replaces every parameter with larger random values so that gradients
/// are not dominated by the near-zero initial regime.
fn randomize(store: &mut ParamStore, rng: &mut SeededRng) {
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let (r, c) = store.value(id).shape();
        *store.value_mut(id) = random_tensor(rng, r, c, 0.5);
    }
}

/// "Sidney Yates was born in Chicago ." with PER/LOC entities and a PHYS
/// relation.
pub fn example_sentence() -> Sentence {
    let tokens = vec![
        Token::new("Sidney", "NNP", Some(1), "nn"),
        Token::new("Yates", "NNP", Some(3), "nsubjpass"),
        Token::new("was", "VBD", Some(3), "auxpass"),
        Token::new("born", "VBN", None, "root"),
        Token::new("in", "IN", Some(3), "prep"),
        Token::new("Chicago", "NNP", Some(4), "pobj"),
        Token::new(".", ".", Some(3), "punct"),
    ];
    Sentence::new(
        tokens,
        vec![EntitySpan::new("PER", 0, 1), EntitySpan::new("LOC", 5, 5)],
        vec![RelationInstance::new(1, 5, "PHYS")],
    )
    .expect("valid example")
}

/// A random 7-node tree and target pair whose full-tree structure has a
/// node with both an on-path and an off-path child, so that every typed
/// matrix takes part.
fn mixed_structure(rng: &mut SeededRng) -> PathStructure {
    loop {
        let heads: Vec<Option<usize>> =
            (0..7).map(|i| if i == 0 { None } else { Some(rng.gen_range(0..i)) }).collect();
        let tree = validate_tree(&heads).expect("random recursive tree");
        let (a, b) = (rng.gen_range(0..7), rng.gen_range(0..7));
        if a == b {
            continue;
        }
        let s = extract_structure(&tree, a, b, StructureKind::FullTree).expect("valid targets");
        let mixed = s.nodes().iter().any(|&t| {
            let kinds: Vec<NodeType> = s.children(t).iter().map(|&c| s.node_type(c)).collect();
            kinds.contains(&NodeType::OnPath) && kinds.contains(&NodeType::OffPath)
        });
        if mixed {
            return s;
        }
    }
}

fn lstm_step_check(rng: &mut SeededRng) -> Result<CheckResult> {
    let (input, hidden) = (7, 5);
    let mut store = ParamStore::new();
    let cell = LstmCell::register(&mut Init { store: &mut store, rng }, "cell", input, hidden, 0.0, ParamGroup::Entity)?;
    randomize(&mut store, rng);
    let x = add_input(&mut store, rng, "x", input, 1)?;
    let h0 = add_input(&mut store, rng, "h0", hidden, 1)?;
    let c0 = add_input(&mut store, rng, "c0", hidden, 1)?;
    let p = add_input(&mut store, rng, "probe", 2 * hidden, 1)?;
    check_gradients("sequence LSTM step", &store, &|_| true, &|g| {
        let (x, h0, c0) = (g.param(x), g.param(h0), g.param(c0));
        let (h, c) = lstm_step(g, &cell, x, Some((h0, c0)))?;
        probe(g, p, &[h, c])
    })
}

fn small_model(dims: Dims, structure: StructureKind, seed: u64) -> Result<(Model, Sentence)> {
    let sentence = example_sentence();
    let vocab = Vocabulary::build(core::slice::from_ref(&sentence), &VocabOptions::default());
    let config = ModelConfig { dims, structure, ..ModelConfig::default() };
    let mut model = Model::new(config, vocab, seed)?;
    let mut rng = seeded_rng(seed ^ 0xabc);
    randomize(&mut model.params, &mut rng);
    Ok((model, sentence))
}

fn sequence_layer_check(dims: Dims, rng: &mut SeededRng) -> Result<CheckResult> {
    let (mut model, sentence) = small_model(dims, StructureKind::ShortestPath, rng.gen())?;
    let ids = model.token_ids(&sentence);
    let p = add_input(&mut model.params, rng, "probe", 2 * dims.seq_hidden * sentence.len(), 1)?;
    let encoder = model.net.encoder;
    check_gradients(
        "bidirectional sequence layer",
        &model.params,
        &|q| q.name.starts_with("seq.") || q.name.starts_with("emb.word") || q.name.starts_with("emb.pos"),
        &|g| {
            let states = encoder.sequence_layer(g, &ids, &mut Mode::Predict)?;
            probe(g, p, &states)
        },
    )
}

fn entity_head_check(dims: Dims, rng: &mut SeededRng) -> Result<CheckResult> {
    let (mut model, sentence) = small_model(dims, StructureKind::ShortestPath, rng.gen())?;
    let n = sentence.len();
    let states = add_input(&mut model.params, rng, "states", n, 2 * dims.seq_hidden)?;
    let gold = model.gold_tags(&sentence);
    let (head, label) = (model.net.entity, model.net.label);
    let tags = model.vocab.tags.clone();
    check_gradients(
        "entity head",
        &model.params,
        &|q| q.name.starts_with("ent.") || q.name == "emb.label" || q.name == "states",
        &|g| {
            let s: Vec<NodeId> = (0..n).map(|t| g.lookup(states, t)).collect::<Result<_>>()?;
            let d = entity::decode_entities(g, &head, &tags, label, &s, Some(&gold), true, &mut Mode::Predict)?;
            let losses: Vec<NodeId> = d.iter().filter_map(|d| d.loss).collect();
            g.add(&losses)
        },
    )
}

fn tree_check(dims: Dims, rng: &mut SeededRng, top_down: bool) -> Result<CheckResult> {
    let structure = mixed_structure(rng);
    let input = 2 * dims.seq_hidden + dims.dep + dims.label;
    let mut store = ParamStore::new();
    let cell = TreeCell::register(&mut Init { store: &mut store, rng }, "tree", input, dims.tree_hidden, 0.0)?;
    randomize(&mut store, rng);
    let xs = add_input(&mut store, rng, "inputs", 7, input)?;
    let p = add_input(&mut store, rng, "probe", 7 * dims.tree_hidden, 1)?;
    let name = if top_down { "top-down tree LSTM" } else { "bottom-up tree LSTM" };
    check_gradients(name, &store, &|_| true, &|g| {
        let mut proj = |g: &mut Graph<'_>, t: usize| {
            let x = g.lookup(xs, t)?;
            cell.project(g, x)
        };
        let states = if top_down {
            tree_top_down(g, &cell, &structure, structure.nodes(), &mut proj)?
        } else {
            tree_bottom_up(g, &cell, &structure, structure.root, &mut proj)?
        };
        let hs: Vec<NodeId> = (0..7).map(|t| states[&t].0).collect();
        probe(g, p, &hs)
    })
}

fn relation_head_check(dims: Dims, rng: &mut SeededRng) -> Result<CheckResult> {
    let (mut model, sentence) = small_model(dims, StructureKind::SubTree, rng.gen())?;
    let n = sentence.len();
    let states = add_input(&mut model.params, rng, "states", n, 2 * dims.seq_hidden)?;
    let tags = model.gold_tags(&sentence);
    let e = sentence.entities();
    let cand = RelationCandidate {
        first: e[1].end,
        second: e[0].end,
        first_span: e[1].clone(),
        second_span: e[0].clone(),
        gold: crate::model::relation::gold_label(&sentence, &model.vocab, &e[1], &e[0]),
    };
    let model = &model;
    check_gradients(
        "relation head with pair feature",
        &model.params,
        &|q| !q.name.starts_with("ent.") && !q.name.starts_with("seq.") && q.name != "emb.word" && q.name != "emb.pos",
        &|g| {
            let s: Vec<NodeId> = (0..n).map(|t| g.lookup(states, t)).collect::<Result<_>>()?;
            let mut scorer =
                SentenceScorer::new(&model.net.relation, &model.config, &model.vocab, &sentence, &s, &tags, model.net.label);
            let logits = scorer.score(g, &cand, &mut Mode::Predict)?;
            g.pick_neg_log_softmax(logits, cand.gold)
        },
    )
}

fn joint_check(dims: Dims, rng: &mut SeededRng) -> Result<CheckResult> {
    let (model, sentence) = small_model(dims, StructureKind::FullTree, rng.gen())?;
    check_gradients("joint sentence loss", &model.params, &|_| true, &|g| {
        // gold tags are always fed (ε = 1) and dropout is off, so the loss
        // is a deterministic smooth function of the parameters
        let mut rng = seeded_rng(0);
        let mut mode = Mode::Train { rng: &mut rng, dropout: 0.0, epsilon: 1.0 };
        let fwd = model.forward(g, &sentence, &mut mode, Parts::ALL)?;
        let parts: Vec<NodeId> = fwd.entity_loss.into_iter().chain(fwd.relation_loss).collect();
        g.add(&parts)
    })
}

/// Runs every check with parameters drawn from `seed`.
pub fn run_suite(dims: Dims, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = seeded_rng(seed);
    Ok(vec![
        lstm_step_check(&mut rng)?,
        sequence_layer_check(dims, &mut rng)?,
        entity_head_check(dims, &mut rng)?,
        tree_check(dims, &mut rng, false)?,
        tree_check(dims, &mut rng, true)?,
        relation_head_check(dims, &mut rng)?,
        joint_check(dims, &mut rng)?,
    ])
}
