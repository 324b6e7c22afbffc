use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::layers::{Embedding, Linear};
use super::params::{NamedParam, ParamStore};
use super::tensor::Matrix;
use super::SequenceModel;
use crate::error::{Error, Result};
use crate::features::{ID_OFFSET, PAD_ID};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmConfig {
    pub d_emb: usize,
    pub hidden: usize,
    pub max_len: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig { d_emb: 64, hidden: 64, max_len: 256 }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_emb == 0 || self.hidden == 0 || self.max_len == 0 {
            return Err(Error::Config("LSTM sizes must be positive".into()));
        }
        Ok(())
    }
}

/// Single-layer LSTM over non-pad tokens, mean-pooled hidden states and a
/// 2-logit head. Gate pre-activations are laid out `[input, forget, cell,
/// output]`; the forget bias starts at 1.
#[derive(Debug, Clone)]
pub struct LstmClassifier {
    config: LstmConfig,
    vocab_size: usize,
    params: ParamStore,
    embedding: Embedding,
    input: Linear,
    recurrent: Linear,
    head: Linear,
}

/// Gate activations at one step, each `1 × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateValues {
    pub input: Matrix,
    pub forget: Matrix,
    pub cell: Matrix,
    pub output: Matrix,
}

impl LstmClassifier {
    pub fn new(config: LstmConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::derived_rng(seed, "lstm-init", 0);
        let mut store = ParamStore::new();
        let h = config.hidden;
        let embedding =
            Embedding::new(&mut store, "embed.tokens", vocab_size + ID_OFFSET as usize, config.d_emb, &mut rng);
        let input = Linear::new(&mut store, "lstm.input", config.d_emb, 4 * h, true, &mut rng);
        if let Some(b) = input.b {
            store.get_mut(b).data[h..2 * h].fill(1.0);
        }
        let recurrent = Linear::new(&mut store, "lstm.recurrent", h, 4 * h, false, &mut rng);
        let head = Linear::new(&mut store, "head.classifier", h, 2, true, &mut rng);
        Ok(LstmClassifier { config, vocab_size, params: store, embedding, input, recurrent, head })
    }

    pub fn from_named(config: LstmConfig, vocab_size: usize, params: &[NamedParam]) -> Result<Self> {
        let mut model = Self::new(config, vocab_size, 0)?;
        model.params.load_named(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &LstmConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Hidden states (`steps × hidden`) and per-step gate handles.
    fn run(&self, g: &mut Graph, ids: &[u32]) -> Result<(Var, Vec<[Var; 4]>)> {
        let rows = self.vocab_size + ID_OFFSET as usize;
        let tokens: Vec<usize> = ids.iter().filter(|&&t| t != PAD_ID).map(|&t| t as usize).collect();
        if tokens.is_empty() {
            return Err(Error::Data("cannot encode an all-padding sequence".into()));
        }
        if tokens.len() > self.config.max_len {
            return Err(Error::Data(format!(
                "sequence length {} exceeds max_len {}",
                tokens.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= rows) {
            return Err(Error::Data(format!("token id {bad} outside the embedding table ({rows} rows)")));
        }
        let h = self.config.hidden;
        let x = self.embedding.forward(g, &tokens);
        let projected = self.input.forward(g, x);
        let mut state: Option<(Var, Var)> = None;
        let mut hiddens = Vec::with_capacity(tokens.len());
        let mut gates = Vec::with_capacity(tokens.len());
        for t in 0..tokens.len() {
            let mut pre = g.slice_rows(projected, t, 1);
            if let Some((h_prev, _)) = state {
                let r = self.recurrent.forward(g, h_prev);
                pre = g.add(pre, r);
            }
            let i_pre = g.slice_cols(pre, 0, h);
            let f_pre = g.slice_cols(pre, h, h);
            let c_pre = g.slice_cols(pre, 2 * h, h);
            let o_pre = g.slice_cols(pre, 3 * h, h);
            let i = g.sigmoid(i_pre);
            let f = g.sigmoid(f_pre);
            let cand = g.tanh(c_pre);
            let o = g.sigmoid(o_pre);
            let new_in = g.mul(i, cand);
            let c = match state {
                Some((_, c_prev)) => {
                    let kept = g.mul(f, c_prev);
                    g.add(kept, new_in)
                }
                None => new_in,
            };
            let c_act = g.tanh(c);
            let h_t = g.mul(o, c_act);
            state = Some((h_t, c));
            hiddens.push(h_t);
            gates.push([i, f, cand, o]);
        }
        let stacked = if hiddens.len() == 1 { hiddens[0] } else { g.concat_rows(&hiddens) };
        Ok((stacked, gates))
    }

    pub fn gate_values(&self, ids: &[u32]) -> Result<Vec<GateValues>> {
        let mut g = Graph::new(&self.params);
        let (_, gates) = self.run(&mut g, ids)?;
        Ok(gates
            .iter()
            .map(|[i, f, c, o]| GateValues {
                input: g.value(*i).clone(),
                forget: g.value(*f).clone(),
                cell: g.value(*c).clone(),
                output: g.value(*o).clone(),
            })
            .collect())
    }
}

impl SequenceModel for LstmClassifier {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn logits(&self, g: &mut Graph, ids: &[u32], _rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let (hidden, _) = self.run(g, ids)?;
        let steps = g.value(hidden).rows;
        let pooled = g.masked_mean_rows(hidden, &vec![true; steps]);
        Ok(self.head.forward(g, pooled))
    }
}
