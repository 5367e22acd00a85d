//! Greedy left-to-right BILOU tagging with previous-label embeddings.

use alloc::vec::Vec;

use rand::Rng;

use super::{Dense, Init, Mode, ModelConfig};
use crate::bilou::TagAlphabet;
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::{ParamGroup, ParamId};

/// Two-layer tagger: `h = tanh(W_h [s_t; v_prev] + b_h)`, `y = W_y h + b_y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntityHead {
    pub hidden: Dense,
    pub out: Dense,
}

impl EntityHead {
    pub fn register(init: &mut Init<'_>, config: &ModelConfig, tags: usize) -> Result<Self> {
        let d = config.dims;
        let label = if config.label_embeddings { d.label } else { 0 };
        Ok(EntityHead {
            hidden: Dense::register(init, "ent.hidden", d.entity_hidden, 2 * d.seq_hidden + label, ParamGroup::Entity)?,
            out: Dense::register(init, "ent.out", tags, d.entity_hidden, ParamGroup::Entity)?,
        })
    }

    /// Hidden layer and tag logits for one token. `prev_label` is the
    /// embedding of the previously fed tag (absent without label
    /// embeddings).
    pub fn scores(
        &self,
        g: &mut Graph,
        s_t: NodeId,
        prev_label: Option<NodeId>,
        mode: &mut Mode<'_>,
    ) -> Result<(NodeId, NodeId)> {
        let input = match prev_label {
            Some(v) => g.concat(&[s_t, v])?,
            None => s_t,
        };
        let pre = self.hidden.apply(g, input)?;
        let h = g.tanh(pre);
        let h = mode.dropout(g, h)?;
        let logits = self.out.apply(g, h)?;
        Ok((h, logits))
    }
}

/// Outcome of tagging one token.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TagDecision {
    /// Argmax tag (over legal tags when constrained).
    pub predicted: usize,
    /// Tag fed to the next step and to the relation layer.
    pub fed: usize,
    /// `-log p(gold)` in training mode.
    pub loss: Option<NodeId>,
}

/// Index of the largest score among `allowed`; ties go to the lowest index.
pub fn argmax_allowed(scores: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &v) in scores.iter().enumerate() {
        if allowed(k) && best.is_none_or(|b| v > scores[b]) {
            best = Some(k);
        }
    }
    best
}

/// Tags a sentence greedily. In training mode (`gold` given) every token
/// contributes a loss against gold, and the fed label is the gold tag with
/// probability ε when it is legal after the previously fed tag, otherwise
/// the prediction. Training always decodes under the legality mask so the
/// fed sequence stays well formed.
#[allow(clippy::too_many_arguments)]
pub fn decode_entities(
    g: &mut Graph,
    head: &EntityHead,
    tags: &TagAlphabet,
    label_table: Option<ParamId>,
    states: &[NodeId],
    gold: Option<&[usize]>,
    constrained: bool,
    mode: &mut Mode<'_>,
) -> Result<Vec<TagDecision>> {
    let n = states.len();
    let constrained = constrained || gold.is_some();
    let mut prev = TagAlphabet::OUTSIDE;
    let mut decisions = Vec::with_capacity(n);
    for (t, &s_t) in states.iter().enumerate() {
        let is_last = t + 1 == n;
        let v_prev = match label_table {
            Some(table) => Some(g.lookup(table, prev)?),
            None => None,
        };
        let (_, logits) = head.scores(g, s_t, v_prev, mode)?;
        let predicted = argmax_allowed(g.value(logits).data(), |k| {
            !constrained || tags.is_legal(prev, k, is_last)
        })
        .expect("O is always legal");
        let mut fed = predicted;
        let mut loss = None;
        if let Some(gold) = gold {
            let gold_t = gold[t];
            loss = Some(g.pick_neg_log_softmax(logits, gold_t)?);
            let take_gold = match mode {
                Mode::Train { rng, epsilon, .. } => rng.gen::<f64>() < *epsilon,
                Mode::Predict => true,
            };
            if take_gold && tags.is_legal(prev, gold_t, is_last) {
                fed = gold_t;
            }
        }
        decisions.push(TagDecision { predicted, fed, loss });
        prev = fed;
    }
    Ok(decisions)
}
