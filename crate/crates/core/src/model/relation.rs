//! Bidirectional typed-children tree LSTM over dependency substructures,
//! relation candidates, the relation classifier and direction resolution.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::encoder::{combine_gates, project_input, GATES, FORGET};
use super::{Dense, Encoder, Init, Mode, ModelConfig};
use crate::depstruct::{extract_structure, NodeType, PathStructure};
use crate::error::Result;
use crate::graph::{softmax, Graph, NodeId};
use crate::params::{ParamGroup, ParamId};
use crate::sentence::{EntitySpan, RelationInstance, Sentence};
use crate::model::CandidateMode;
use crate::vocab::{Direction, RelationLabels, Vocabulary};

const TYPE_NAMES: [&str; 2] = ["on", "off"];

/// Parameters of one tree-LSTM direction.
///
/// `u[k][m]` is the recurrent matrix of gate `k` (input, output, update)
/// for predecessors of node type `m`; `u_f[mk][ml]` is the forget-gate
/// matrix applied to the state of a predecessor of type `ml` in the gate
/// of a predecessor of type `mk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeCell {
    pub w: [ParamId; 4],
    pub b: [ParamId; 4],
    pub u: [[ParamId; 2]; 3],
    pub u_f: [[ParamId; 2]; 2],
}

/// Gate slot of `u` for gate index `k` in input/forget/output/update order.
fn u_slot(k: usize) -> usize {
    match k {
        0 => 0,
        2 => 1,
        3 => 2,
        _ => unreachable!("forget gate uses u_f"),
    }
}

impl TreeCell {
    pub fn register(
        init: &mut Init<'_>,
        prefix: &str,
        input: usize,
        hidden: usize,
        forget_bias: f64,
    ) -> Result<Self> {
        let group = ParamGroup::Relation;
        let mut w = Vec::new();
        let mut b = Vec::new();
        for (k, gate) in GATES.iter().enumerate() {
            w.push(init.weight(&format!("{prefix}.W_{gate}"), hidden, input, group)?);
            let b0 = if k == FORGET { forget_bias } else { 0.0 };
            b.push(init.bias(&format!("{prefix}.b_{gate}"), hidden, group, b0)?);
        }
        let mut u = Vec::new();
        for gate in ["i", "o", "u"] {
            let mut per_type = Vec::new();
            for ty in TYPE_NAMES {
                per_type.push(init.weight(&format!("{prefix}.U_{gate}.{ty}"), hidden, hidden, group)?);
            }
            u.push(<[ParamId; 2]>::try_from(per_type).expect("two types"));
        }
        let mut u_f = Vec::new();
        for tk in TYPE_NAMES {
            let mut row = Vec::new();
            for tl in TYPE_NAMES {
                row.push(init.weight(&format!("{prefix}.U_f.{tk}_{tl}"), hidden, hidden, group)?);
            }
            u_f.push(<[ParamId; 2]>::try_from(row).expect("two types"));
        }
        Ok(TreeCell {
            w: w.try_into().expect("four gates"),
            b: b.try_into().expect("four gates"),
            u: u.try_into().expect("three gates"),
            u_f: u_f.try_into().expect("two types"),
        })
    }

    /// `W x + b` for each gate.
    pub fn project(&self, g: &mut Graph, x: NodeId) -> Result<[NodeId; 4]> {
        project_input(g, &self.w, &self.b, x)
    }

    /// One tree-LSTM node. `proj` are the input projections of the node and
    /// `preds` the `(h, c, type)` states of its predecessors (children
    /// bottom-up, the parent top-down). Hidden states of same-type
    /// predecessors are summed in the listed order before the shared
    /// matrix is applied; forget gates depend on a predecessor only
    /// through its type, so at most two are built.
    pub fn node(
        &self,
        g: &mut Graph,
        proj: [NodeId; 4],
        preds: &[(NodeId, NodeId, NodeType)],
    ) -> Result<(NodeId, NodeId)> {
        let mut sums: [Option<NodeId>; 2] = [None, None];
        for m in 0..2 {
            let hs: Vec<NodeId> = preds.iter().filter(|p| p.2.index() == m).map(|p| p.0).collect();
            sums[m] = match hs.len() {
                0 => None,
                1 => Some(hs[0]),
                _ => Some(g.add(&hs)?),
            };
        }
        let mut pre = proj;
        for k in [0, 2, 3] {
            let mut terms = alloc::vec![proj[k]];
            for (m, sum) in sums.iter().enumerate() {
                if let Some(hsum) = *sum {
                    let u = g.param(self.u[u_slot(k)][m]);
                    terms.push(g.affine(u, hsum, None)?);
                }
            }
            if terms.len() > 1 {
                pre[k] = g.add(&terms)?;
            }
        }
        let mut forget_pre: [Option<NodeId>; 2] = [None, None];
        let mut forgets = Vec::with_capacity(preds.len());
        for &(_, c, ty) in preds {
            let mk = ty.index();
            if forget_pre[mk].is_none() {
                let mut terms = alloc::vec![proj[FORGET]];
                for (ml, sum) in sums.iter().enumerate() {
                    if let Some(hsum) = *sum {
                        let u = g.param(self.u_f[mk][ml]);
                        terms.push(g.affine(u, hsum, None)?);
                    }
                }
                forget_pre[mk] = Some(g.add(&terms)?);
            }
            forgets.push((forget_pre[mk].expect("set above"), c));
        }
        combine_gates(g, pre, &forgets)
    }
}

/// Per-token `(h, c)` of a tree pass.
pub type TreeStates = BTreeMap<usize, (NodeId, NodeId)>;

/// Input projection provider: called once per visited token.
pub type Projector<'f> = dyn for<'a, 'b> FnMut(&'a mut Graph<'b>, usize) -> Result<[NodeId; 4]> + 'f;

/// Bottom-up pass over the part of `structure` below `top` (inclusive),
/// children before parents.
pub fn tree_bottom_up(
    g: &mut Graph,
    cell: &TreeCell,
    structure: &PathStructure,
    top: usize,
    proj: &mut Projector<'_>,
) -> Result<TreeStates> {
    let mut order = Vec::new();
    let mut stack = alloc::vec![top];
    while let Some(t) = stack.pop() {
        order.push(t);
        stack.extend(structure.children(t).iter().rev());
    }
    let mut states = TreeStates::new();
    for &t in order.iter().rev() {
        let preds: Vec<_> = structure
            .children(t)
            .iter()
            .map(|&c| {
                let (h, cc) = states[&c];
                (h, cc, structure.node_type(c))
            })
            .collect();
        let p = proj(g, t)?;
        let s = cell.node(g, p, &preds)?;
        states.insert(t, s);
    }
    Ok(states)
}

/// Top-down pass: every node's sole predecessor is its parent in the
/// structure; the structure root starts from a zero state. Only the
/// nodes on the root paths of `targets` are computed.
pub fn tree_top_down(
    g: &mut Graph,
    cell: &TreeCell,
    structure: &PathStructure,
    targets: &[usize],
    proj: &mut Projector<'_>,
) -> Result<TreeStates> {
    let mut states = TreeStates::new();
    for &target in targets {
        let mut chain = alloc::vec![target];
        let mut t = target;
        while let Some(p) = structure.parent(t) {
            chain.push(p);
            t = p;
        }
        for &t in chain.iter().rev() {
            if states.contains_key(&t) {
                continue;
            }
            let preds: Vec<_> = match structure.parent(t) {
                Some(p) => {
                    let (h, c) = states[&p];
                    alloc::vec![(h, c, structure.node_type(p))]
                }
                None => Vec::new(),
            };
            let pr = proj(g, t)?;
            let s = cell.node(g, pr, &preds)?;
            states.insert(t, s);
        }
    }
    Ok(states)
}

/// A hypothesized directed pair of detected entities, identified by their
/// last tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationCandidate {
    pub first: usize,
    pub second: usize,
    pub first_span: EntitySpan,
    pub second_span: EntitySpan,
    /// Gold label id (negative when the spans or the pair are wrong).
    pub gold: usize,
}

/// Label of the candidate `(first, second)` against the gold annotation:
/// the relation type and direction when both spans exactly match the gold
/// arguments, negative otherwise.
pub fn gold_label(sentence: &Sentence, vocab: &Vocabulary, first: &EntitySpan, second: &EntitySpan) -> usize {
    for r in sentence.relations() {
        if vocab.is_negative_relation(&r.ty) {
            continue;
        }
        let Some(ty) = vocab.relations.type_index(&r.ty) else { continue };
        let a1 = sentence.entity_ending_at(r.arg1);
        let a2 = sentence.entity_ending_at(r.arg2);
        if a1 == Some(first) && a2 == Some(second) {
            return vocab.relations.label(ty, Direction::Forward);
        }
        if a1 == Some(second) && a2 == Some(first) {
            return vocab.relations.label(ty, Direction::Reverse);
        }
    }
    RelationLabels::NEGATIVE
}

/// Candidates over every pair of detected entities (or, with
/// `annotated_pairs`, every pair listed in the sentence's relations).
/// Pairs come in sentence order; with [`CandidateMode::Both`] and
/// [`CandidateMode::NegativeSampling`] each is followed by its reverse.
pub fn build_candidates(
    sentence: &Sentence,
    vocab: &Vocabulary,
    spans: &[EntitySpan],
    mode: CandidateMode,
    annotated_pairs: bool,
) -> Vec<RelationCandidate> {
    let mut pairs: Vec<(&EntitySpan, &EntitySpan)> = Vec::new();
    if annotated_pairs {
        for r in sentence.relations() {
            let (lo, hi) = (r.arg1.min(r.arg2), r.arg1.max(r.arg2));
            let (Some(a), Some(b)) = (sentence.entity_ending_at(lo), sentence.entity_ending_at(hi)) else {
                continue;
            };
            if !pairs.iter().any(|(x, y)| x.end == lo && y.end == hi) {
                pairs.push((a, b));
            }
        }
    } else {
        let mut ends: Vec<&EntitySpan> = spans.iter().collect();
        ends.sort_by_key(|s| s.end);
        for i in 0..ends.len() {
            for j in i + 1..ends.len() {
                pairs.push((ends[i], ends[j]));
            }
        }
    }
    let mut out = Vec::new();
    for (a, b) in pairs {
        out.push(RelationCandidate {
            first: a.end,
            second: b.end,
            first_span: a.clone(),
            second_span: b.clone(),
            gold: gold_label(sentence, vocab, a, b),
        });
        if mode == CandidateMode::LeftToRight {
            continue;
        }
        let gold = if mode == CandidateMode::NegativeSampling {
            RelationLabels::NEGATIVE
        } else {
            gold_label(sentence, vocab, b, a)
        };
        out.push(RelationCandidate {
            first: b.end,
            second: a.end,
            first_span: b.clone(),
            second_span: a.clone(),
            gold,
        });
    }
    out
}

/// Highest-probability label of a logit vector (ties go to the lowest
/// label) with its probability.
pub fn best_label(logits: &[f64]) -> (usize, f64) {
    let probs = softmax(logits);
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = k;
        }
    }
    (best, probs[best])
}

/// Which ordering of an unordered pair carries the final relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Winner {
    SentenceOrder,
    Reversed,
}

/// Combines the `(label, confidence)` predictions for the sentence-order
/// candidate and its reverse: positive beats negative, and between two
/// positives the more confident wins (ties favour sentence order).
pub fn resolve_directions(
    ij: Option<(usize, f64)>,
    ji: Option<(usize, f64)>,
) -> Option<(Winner, usize)> {
    let pos = |p: Option<(usize, f64)>| p.filter(|&(l, _)| l != RelationLabels::NEGATIVE);
    match (pos(ij), pos(ji)) {
        (None, None) => None,
        (Some((l, _)), None) => Some((Winner::SentenceOrder, l)),
        (None, Some((l, _))) => Some((Winner::Reversed, l)),
        (Some((a, ca)), Some((b, cb))) => {
            if cb > ca {
                Some((Winner::Reversed, b))
            } else {
                Some((Winner::SentenceOrder, a))
            }
        }
    }
}

/// Turns scored candidates into relation instances, resolving the two
/// orderings of each pair. The result is sorted and free of duplicates.
pub fn resolve_candidates(
    candidates: &[RelationCandidate],
    scored: &[(usize, f64)],
    labels: &RelationLabels,
) -> Vec<RelationInstance> {
    let mut by_pair: BTreeMap<(usize, usize), [Option<usize>; 2]> = BTreeMap::new();
    for (k, c) in candidates.iter().enumerate() {
        let key = (c.first.min(c.second), c.first.max(c.second));
        let slot = usize::from(c.first > c.second);
        by_pair.entry(key).or_default()[slot] = Some(k);
    }
    let mut out = Vec::new();
    for slots in by_pair.values() {
        let get = |s: Option<usize>| s.map(|k| scored[k]);
        let Some((winner, label)) = resolve_directions(get(slots[0]), get(slots[1])) else { continue };
        let c = &candidates[slots[if winner == Winner::SentenceOrder { 0 } else { 1 }].expect("winner exists")];
        let (ty, dir) = labels.decode(label).expect("positive label");
        let (arg1, arg2) = match dir {
            Direction::Forward => (c.first, c.second),
            Direction::Reverse => (c.second, c.first),
        };
        out.push(RelationInstance::new(arg1, arg2, labels.types()[ty].clone()));
    }
    out.sort();
    out.dedup();
    out
}

/// Relation-side parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationNet {
    /// Separate embeddings and sequence layer in the unshared setup.
    pub encoder: Option<Encoder>,
    /// Separate label embeddings in the unshared setup.
    pub label: Option<ParamId>,
    pub dep: ParamId,
    pub up: TreeCell,
    pub down: TreeCell,
    pub hidden: Dense,
    pub out: Dense,
}

impl RelationNet {
    pub fn register(init: &mut Init<'_>, config: &ModelConfig, vocab: &Vocabulary) -> Result<Self> {
        let d = config.dims;
        let group = ParamGroup::Relation;
        let (encoder, label) = if config.shared {
            (None, None)
        } else {
            let enc = Encoder::register(init, "rel.", vocab, &d, config.forget_bias, group)?;
            let label = if config.label_embeddings {
                Some(init.embedding("rel.emb.label", vocab.tags.len(), d.label, group)?)
            } else {
                None
            };
            (Some(enc), label)
        };
        let dep = init.embedding("emb.dep", vocab.deprels.len(), d.dep, group)?;
        let input = 2 * d.seq_hidden + d.dep + if config.label_embeddings { d.label } else { 0 };
        let up = TreeCell::register(init, "tree.up", input, d.tree_hidden, config.forget_bias)?;
        let down = TreeCell::register(init, "tree.down", input, d.tree_hidden, config.forget_bias)?;
        let rel_input = 3 * d.tree_hidden + if config.pair { 4 * d.seq_hidden } else { 0 };
        let hidden = Dense::register(init, "rel.hidden", d.relation_hidden, rel_input, group)?;
        let out = Dense::register(init, "rel.out", vocab.relations.len(), d.relation_hidden, group)?;
        Ok(RelationNet { encoder, label, dep, up, down, hidden, out })
    }

    /// Tree-LSTM input `x_t = [s_t; v_dep; v_label]`; `label` is the
    /// label table and the fed tag id, absent without label embeddings.
    pub fn dependency_input(
        &self,
        g: &mut Graph,
        s_t: NodeId,
        dep: usize,
        label: Option<(ParamId, usize)>,
    ) -> Result<NodeId> {
        let mut parts = alloc::vec![s_t, g.lookup(self.dep, dep)?];
        if let Some((table, tag)) = label {
            parts.push(g.lookup(table, tag)?);
        }
        g.concat(&parts)
    }

    /// `d_p = [↑h_anchor; ↓h_first; ↓h_second]`, followed with `pair` by
    /// the mean sequence states of both entities.
    pub fn relation_vector(
        &self,
        g: &mut Graph,
        up_anchor: NodeId,
        down_first: NodeId,
        down_second: NodeId,
        pair: Option<(&[NodeId], &[NodeId])>,
    ) -> Result<NodeId> {
        let mut parts = alloc::vec![up_anchor, down_first, down_second];
        if let Some((a, b)) = pair {
            parts.push(g.mean(a)?);
            parts.push(g.mean(b)?);
        }
        g.concat(&parts)
    }

    /// Relation logits `W_y tanh(W_h d + b_h) + b_y`, hidden dropout in
    /// training mode.
    pub fn classify(&self, g: &mut Graph, d: NodeId, mode: &mut Mode<'_>) -> Result<NodeId> {
        let pre = self.hidden.apply(g, d)?;
        let h = g.tanh(pre);
        let h = mode.dropout(g, h)?;
        self.out.apply(g, h)
    }
}

/// Scores candidates of one sentence, sharing token inputs and input
/// projections between candidates.
pub(crate) struct SentenceScorer<'m> {
    net: &'m RelationNet,
    config: &'m ModelConfig,
    vocab: &'m Vocabulary,
    sentence: &'m Sentence,
    states: &'m [NodeId],
    tags: &'m [usize],
    label_table: Option<ParamId>,
    inputs: Vec<Option<NodeId>>,
    up: Vec<Option<[NodeId; 4]>>,
    down: Vec<Option<[NodeId; 4]>>,
}

impl<'m> SentenceScorer<'m> {
    pub fn new(
        net: &'m RelationNet,
        config: &'m ModelConfig,
        vocab: &'m Vocabulary,
        sentence: &'m Sentence,
        states: &'m [NodeId],
        tags: &'m [usize],
        label_table: Option<ParamId>,
    ) -> Self {
        let n = sentence.len();
        SentenceScorer {
            net,
            config,
            vocab,
            sentence,
            states,
            tags,
            label_table,
            inputs: alloc::vec![None; n],
            up: alloc::vec![None; n],
            down: alloc::vec![None; n],
        }
    }

    /// `x_t = [s_t; v_dep; v_label]`.
    fn input(&mut self, g: &mut Graph, t: usize) -> Result<NodeId> {
        if let Some(x) = self.inputs[t] {
            return Ok(x);
        }
        let dep = self.vocab.deprel_id(self.sentence, t);
        let label = self.label_table.map(|table| (table, self.tags[t]));
        let x = self.net.dependency_input(g, self.states[t], dep, label)?;
        self.inputs[t] = Some(x);
        Ok(x)
    }

    fn projection(&mut self, g: &mut Graph, t: usize, down: bool) -> Result<[NodeId; 4]> {
        let cached = if down { self.down[t] } else { self.up[t] };
        if let Some(p) = cached {
            return Ok(p);
        }
        let x = self.input(g, t)?;
        let cell = if down { self.net.down } else { self.net.up };
        let p = cell.project(g, x)?;
        if down {
            self.down[t] = Some(p);
        } else {
            self.up[t] = Some(p);
        }
        Ok(p)
    }

    pub fn score(&mut self, g: &mut Graph, cand: &RelationCandidate, mode: &mut Mode<'_>) -> Result<NodeId> {
        let structure = extract_structure(self.sentence.tree(), cand.first, cand.second, self.config.structure)?;
        let (up_cell, down_cell) = (self.net.up, self.net.down);
        let up = tree_bottom_up(g, &up_cell, &structure, structure.anchor, &mut |g, t| {
            self.projection(g, t, false)
        })?;
        let down = tree_top_down(g, &down_cell, &structure, &[cand.first, cand.second], &mut |g, t| {
            self.projection(g, t, true)
        })?;
        let pair_a: Vec<NodeId>;
        let pair_b: Vec<NodeId>;
        let pair = if self.config.pair {
            pair_a = cand.first_span.tokens().map(|t| self.states[t]).collect();
            pair_b = cand.second_span.tokens().map(|t| self.states[t]).collect();
            Some((pair_a.as_slice(), pair_b.as_slice()))
        } else {
            None
        };
        let d = self.net.relation_vector(
            g,
            up[&structure.anchor].0,
            down[&cand.first].0,
            down[&cand.second].0,
            pair,
        )?;
        self.net.classify(g, d, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_rules() {
        assert_eq!(resolve_directions(Some((0, 0.9)), Some((0, 0.8))), None);
        assert_eq!(resolve_directions(Some((1, 0.6)), Some((0, 0.99))), Some((Winner::SentenceOrder, 1)));
        assert_eq!(resolve_directions(Some((1, 0.6)), Some((3, 0.7))), Some((Winner::Reversed, 3)));
        assert_eq!(resolve_directions(Some((1, 0.5)), Some((3, 0.5))), Some((Winner::SentenceOrder, 1)));
        assert_eq!(resolve_directions(None, Some((2, 0.4))), Some((Winner::Reversed, 2)));
    }

    #[test]
    fn best_label_of_uniform_logits_is_negative() {
        let (l, p) = best_label(&[0.0; 5]);
        assert_eq!(l, 0);
        assert!((p - 0.2).abs() < 1e-15);
    }
}
