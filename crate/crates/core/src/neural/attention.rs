//! Multi-head self-attention in two variants.
//!
//! Standard attention scores `q_i · k_j / sqrt(d)`. Disentangled attention
//! adds content-to-position and position-to-content terms built from a
//! relative position table: with `δ(i, j) = clip(i - j, -k, k) + k`,
//!
//! ```text
//! score(i, j) = (q_i·k_j + q_i·kr_δ(i,j) + k_j·qr_δ(j,i)) / sqrt(3d)
//! ```
//!
//! where `qr` and `kr` are the table projected by per-layer matrices and `d`
//! is the head width. Keys whose mask entry is `false` receive probability 0.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::layers::Linear;
use super::params::ParamStore;
use super::tensor::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AttentionVariant {
    Standard,
    Disentangled {
        max_distance: usize,
        /// Add absolute position embeddings just before the masked-token
        /// output projection.
        decoder_absolute_positions: bool,
    },
}

impl AttentionVariant {
    pub fn disentangled() -> Self {
        AttentionVariant::Disentangled { max_distance: 32, decoder_absolute_positions: true }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttentionVariant::Standard => "standard",
            AttentionVariant::Disentangled { .. } => "disentangled",
        }
    }
}

/// Row-major `n × n` table of `δ(i, j) = clip(i - j, -k, k) + k`.
pub fn relative_index(n: usize, max_distance: usize) -> Vec<usize> {
    let k = max_distance as i64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n as i64 {
        for j in 0..n as i64 {
            out.push(((i - j).clamp(-k, k) + k) as usize);
        }
    }
    out
}

/// Graph handles for one head's score terms.
#[derive(Debug, Clone, Copy)]
pub struct HeadTrace {
    pub probs: Var,
    pub scores: Var,
    pub c2c: Var,
    pub c2p: Option<Var>,
    pub p2c: Option<Var>,
}

/// Relative-position inputs for one head: projected tables (`(2k+1) × d`)
/// and the `δ` index.
pub struct RelativeTerms<'a> {
    pub rel_queries: Var,
    pub rel_keys: Var,
    pub index: &'a [usize],
}

/// Attention for one head over `n × d` queries, keys and values.
pub fn head_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    key_mask: &[bool],
    relative: Option<RelativeTerms<'_>>,
) -> (Var, HeadTrace) {
    let d = g.value(q).cols;
    let n = g.value(k).rows;
    let c2c = g.matmul_bt(q, k);
    let (scores, c2p, p2c) = match relative {
        None => {
            let s = g.scale(c2c, 1.0 / (d as f64).sqrt());
            (s, None, None)
        }
        Some(rel) => {
            let q_kr = g.matmul_bt(q, rel.rel_keys);
            let c2p = g.gather_cols(q_kr, rel.index, n);
            let k_qr = g.matmul_bt(k, rel.rel_queries);
            let gathered = g.gather_cols(k_qr, rel.index, n);
            let p2c = g.transpose(gathered);
            let sum = g.add(c2c, c2p);
            let sum = g.add(sum, p2c);
            let s = g.scale(sum, 1.0 / (3.0 * d as f64).sqrt());
            (s, Some(c2p), Some(p2c))
        }
    };
    let probs = g.softmax_rows(scores, Some(key_mask));
    let out = g.matmul(probs, v);
    (out, HeadTrace { probs, scores, c2c, c2p, p2c })
}

/// Result of [`attention`] on plain matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    pub output: Matrix,
    pub probs: Matrix,
    /// Scaled scores before the softmax.
    pub scores: Matrix,
    pub c2c: Matrix,
    pub c2p: Option<Matrix>,
    pub p2c: Option<Matrix>,
}

/// Projected relative tables for [`attention`].
pub struct RelativeInputs<'a> {
    pub rel_queries: &'a Matrix,
    pub rel_keys: &'a Matrix,
    pub max_distance: usize,
}

/// Single-head attention on concrete matrices; disentangled when
/// `relative` is given.
pub fn attention(
    queries: &Matrix,
    keys: &Matrix,
    values: &Matrix,
    key_mask: &[bool],
    relative: Option<RelativeInputs<'_>>,
) -> Result<AttentionOutput> {
    let n = keys.rows;
    if n == 0 || queries.rows == 0 {
        return Err(Error::Data("attention needs at least one position".into()));
    }
    if key_mask.len() != n || values.rows != n || queries.cols != keys.cols {
        return Err(Error::Data("attention input shapes do not agree".into()));
    }
    if !key_mask.iter().any(|&m| m) {
        return Err(Error::Data("attention over an all-padding sequence".into()));
    }
    let empty = ParamStore::new();
    let mut g = Graph::new(&empty);
    let q = g.input(queries.clone());
    let k = g.input(keys.clone());
    let v = g.input(values.clone());
    let index;
    let rel = match &relative {
        None => None,
        Some(r) => {
            if queries.rows != n {
                return Err(Error::Data("disentangled attention is self-attention only".into()));
            }
            let rows = 2 * r.max_distance + 1;
            if r.rel_queries.shape() != (rows, queries.cols) || r.rel_keys.shape() != (rows, queries.cols) {
                return Err(Error::Data(format!("relative tables must be {rows} x {}", queries.cols)));
            }
            index = relative_index(n, r.max_distance);
            Some(RelativeTerms {
                rel_queries: g.input(r.rel_queries.clone()),
                rel_keys: g.input(r.rel_keys.clone()),
                index: &index,
            })
        }
    };
    let (out, trace) = head_attention(&mut g, q, k, v, key_mask, rel);
    Ok(AttentionOutput {
        output: g.value(out).clone(),
        probs: g.value(trace.probs).clone(),
        scores: g.value(trace.scores).clone(),
        c2c: g.value(trace.c2c).clone(),
        c2p: trace.c2p.map(|v| g.value(v).clone()),
        p2c: trace.p2c.map(|v| g.value(v).clone()),
    })
}

/// Multi-head self-attention block with output projection.
#[derive(Debug, Clone)]
pub struct AttentionLayer {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    /// Bias-free projections of the shared relative table (disentangled only).
    pub relative: Option<(Linear, Linear)>,
    pub heads: usize,
}

/// Per-forward relative context shared by all layers.
pub struct RelativeContext {
    pub table: Var,
    pub index: Vec<usize>,
}

impl AttentionLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        heads: usize,
        variant: AttentionVariant,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        assert!(heads > 0 && d_model.is_multiple_of(heads), "d_model must be divisible by heads");
        let query = Linear::new(store, &format!("{name}.query"), d_model, d_model, true, rng);
        let key = Linear::new(store, &format!("{name}.key"), d_model, d_model, true, rng);
        let value = Linear::new(store, &format!("{name}.value"), d_model, d_model, true, rng);
        let relative = match variant {
            AttentionVariant::Standard => None,
            AttentionVariant::Disentangled { .. } => Some((
                Linear::new(store, &format!("{name}.rel_query"), d_model, d_model, false, rng),
                Linear::new(store, &format!("{name}.rel_key"), d_model, d_model, false, rng),
            )),
        };
        let output = Linear::new(store, &format!("{name}.output"), d_model, d_model, true, rng);
        AttentionLayer { query, key, value, output, relative, heads }
    }

    pub fn forward(
        &self,
        g: &mut Graph,
        x: Var,
        key_mask: &[bool],
        relative: Option<&RelativeContext>,
        mut trace: Option<&mut Vec<HeadTrace>>,
    ) -> Var {
        let d_model = g.value(x).cols;
        let dh = d_model / self.heads;
        let q = self.query.forward(g, x);
        let k = self.key.forward(g, x);
        let v = self.value.forward(g, x);
        let projected = match (&self.relative, relative) {
            (Some((rq, rk)), Some(ctx)) => Some((rq.forward(g, ctx.table), rk.forward(g, ctx.table))),
            _ => None,
        };
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let rel = match (projected, relative) {
                (Some((rq, rk)), Some(ctx)) => Some(RelativeTerms {
                    rel_queries: g.slice_cols(rq, h * dh, dh),
                    rel_keys: g.slice_cols(rk, h * dh, dh),
                    index: &ctx.index,
                }),
                _ => None,
            };
            let (out, head) = head_attention(g, qh, kh, vh, key_mask, rel);
            if let Some(t) = trace.as_deref_mut() {
                t.push(head);
            }
            outs.push(out);
        }
        let joined = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        self.output.forward(g, joined)
    }
}
