//! Word/POS embeddings and the bidirectional sequence LSTM.

use alloc::format;
use alloc::vec::Vec;

use super::{Dims, Init, Mode};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamGroup, ParamId};
use crate::vocab::Vocabulary;

/// Gate order used for every per-gate array: input, forget, output, update.
pub const GATES: [&str; 4] = ["i", "f", "o", "u"];
pub(crate) const FORGET: usize = 1;
pub(crate) const UPDATE: usize = 3;

/// Parameters of one sequential LSTM direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub w: [ParamId; 4],
    pub u: [ParamId; 4],
    pub b: [ParamId; 4],
}

impl LstmCell {
    pub fn register(
        init: &mut Init<'_>,
        prefix: &str,
        input: usize,
        hidden: usize,
        forget_bias: f64,
        group: ParamGroup,
    ) -> Result<Self> {
        let mut w = Vec::new();
        let mut u = Vec::new();
        let mut b = Vec::new();
        for (k, gate) in GATES.iter().enumerate() {
            w.push(init.weight(&format!("{prefix}.W_{gate}"), hidden, input, group)?);
            u.push(init.weight(&format!("{prefix}.U_{gate}"), hidden, hidden, group)?);
            let b0 = if k == FORGET { forget_bias } else { 0.0 };
            b.push(init.bias(&format!("{prefix}.b_{gate}"), hidden, group, b0)?);
        }
        Ok(LstmCell {
            w: w.try_into().expect("four gates"),
            u: u.try_into().expect("four gates"),
            b: b.try_into().expect("four gates"),
        })
    }
}

/// `W x + b` for each gate. Tree LSTMs reuse these projections across
/// candidates, so they are built separately from the recurrent terms.
pub fn project_input(g: &mut Graph, w: &[ParamId; 4], b: &[ParamId; 4], x: NodeId) -> Result<[NodeId; 4]> {
    let mut out = [x; 4];
    for k in 0..4 {
        let (wk, bk) = (g.param(w[k]), g.param(b[k]));
        out[k] = g.affine(wk, x, Some(bk))?;
    }
    Ok(out)
}

/// Combines gate pre-activations into `(h, c)`:
/// `c = i ⊙ u + Σ f_k ⊙ c_k`, `h = o ⊙ tanh(c)`.
pub(crate) fn combine_gates(
    g: &mut Graph,
    pre: [NodeId; 4],
    forgets: &[(NodeId, NodeId)],
) -> Result<(NodeId, NodeId)> {
    let i = g.sigmoid(pre[0]);
    let o = g.sigmoid(pre[2]);
    let u = g.tanh(pre[UPDATE]);
    let mut terms = alloc::vec![g.hadamard(i, u)?];
    let mut activated: Vec<(NodeId, NodeId)> = Vec::new();
    for &(f_pre, c_prev) in forgets {
        let f = match activated.iter().find(|(p, _)| *p == f_pre) {
            Some(&(_, f)) => f,
            None => {
                let f = g.sigmoid(f_pre);
                activated.push((f_pre, f));
                f
            }
        };
        terms.push(g.hadamard(f, c_prev)?);
    }
    let c = if terms.len() == 1 { terms[0] } else { g.add(&terms)? };
    let tc = g.tanh(c);
    let h = g.hadamard(o, tc)?;
    Ok((h, c))
}

/// One LSTM step. `prev = None` means no recurrent input (the terms with
/// `h_prev` and `c_prev` are absent, as for a zero state).
pub fn lstm_step(
    g: &mut Graph,
    cell: &LstmCell,
    x: NodeId,
    prev: Option<(NodeId, NodeId)>,
) -> Result<(NodeId, NodeId)> {
    let proj = project_input(g, &cell.w, &cell.b, x)?;
    lstm_step_projected(g, cell, proj, prev)
}

pub(crate) fn lstm_step_projected(
    g: &mut Graph,
    cell: &LstmCell,
    proj: [NodeId; 4],
    prev: Option<(NodeId, NodeId)>,
) -> Result<(NodeId, NodeId)> {
    let Some((h_prev, c_prev)) = prev else {
        return combine_gates(g, proj, &[]);
    };
    let mut pre = proj;
    for k in 0..4 {
        let uk = g.param(cell.u[k]);
        let rec = g.affine(uk, h_prev, None)?;
        pre[k] = g.add(&[proj[k], rec])?;
    }
    combine_gates(g, pre, &[(pre[FORGET], c_prev)])
}

/// Embedding tables plus the two sequence-LSTM directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Encoder {
    pub word: ParamId,
    pub pos: ParamId,
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl Encoder {
    /// Registers `{prefix}emb.word`, `{prefix}emb.pos` and `{prefix}seq.*`.
    pub fn register(
        init: &mut Init<'_>,
        prefix: &str,
        vocab: &Vocabulary,
        d: &Dims,
        forget_bias: f64,
        group: ParamGroup,
    ) -> Result<Self> {
        let word = init.embedding(&format!("{prefix}emb.word"), vocab.words.len(), d.word, group)?;
        let pos = init.embedding(&format!("{prefix}emb.pos"), vocab.pos.len(), d.pos, group)?;
        let input = d.word + d.pos;
        let forward =
            LstmCell::register(init, &format!("{prefix}seq.fwd"), input, d.seq_hidden, forget_bias, group)?;
        let backward =
            LstmCell::register(init, &format!("{prefix}seq.bwd"), input, d.seq_hidden, forget_bias, group)?;
        Ok(Encoder { word, pos, forward, backward })
    }

    /// `x_t = [v_word; v_pos]`, with embedding dropout in training mode.
    pub fn embed_token(&self, g: &mut Graph, word: usize, pos: usize, mode: &mut Mode<'_>) -> Result<NodeId> {
        let w = g.lookup(self.word, word)?;
        let p = g.lookup(self.pos, pos)?;
        let x = g.concat(&[w, p])?;
        mode.dropout(g, x)
    }

    /// `s_t = [→h_t; ←h_t]` for every token, both directions starting
    /// from a zero state.
    pub fn sequence_layer(
        &self,
        g: &mut Graph,
        ids: &[(usize, usize)],
        mode: &mut Mode<'_>,
    ) -> Result<Vec<NodeId>> {
        if ids.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        let xs = ids
            .iter()
            .map(|&(w, p)| self.embed_token(g, w, p, mode))
            .collect::<Result<Vec<_>>>()?;
        let n = xs.len();
        let mut fwd = Vec::with_capacity(n);
        let mut state = None;
        for &x in &xs {
            let s = lstm_step(g, &self.forward, x, state)?;
            fwd.push(s.0);
            state = Some(s);
        }
        let mut bwd = alloc::vec![fwd[0]; n];
        state = None;
        for t in (0..n).rev() {
            let s = lstm_step(g, &self.backward, xs[t], state)?;
            bwd[t] = s.0;
            state = Some(s);
        }
        (0..n).map(|t| g.concat(&[fwd[t], bwd[t]])).collect()
    }
}
