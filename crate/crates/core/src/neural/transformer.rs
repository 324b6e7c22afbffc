use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{relative_index, AttentionLayer, AttentionVariant, HeadTrace, RelativeContext};
use super::graph::{Graph, Var};
use super::layers::{dropout, Embedding, FeedForward, LayerNorm, Linear};
use super::params::{NamedParam, ParamId, ParamStore};
use super::tensor::Matrix;
use super::SequenceModel;
use crate::error::{Error, Result};
use crate::features::{ID_OFFSET, PAD_ID};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub attention: AttentionVariant,
    /// Allocate the masked-token and next-sentence heads.
    pub pretraining_heads: bool,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            d_model: 64,
            heads: 2,
            layers: 2,
            d_ff: 128,
            max_len: 256,
            dropout: 0.1,
            attention: AttentionVariant::Standard,
            pretraining_heads: false,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "d_model ({}) must be a positive multiple of heads ({})",
                self.d_model, self.heads
            )));
        }
        if self.layers == 0 || self.d_ff == 0 || self.max_len == 0 {
            return Err(Error::Config("layers, d_ff and max_len must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if let AttentionVariant::Disentangled { max_distance: 0, .. } = self.attention {
            return Err(Error::Config("max_distance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct EncoderLayer {
    attention: AttentionLayer,
    norm1: LayerNorm,
    ffn: FeedForward,
    norm2: LayerNorm,
}

#[derive(Debug, Clone)]
struct Layout {
    tokens: Embedding,
    positions: Option<Embedding>,
    relative: Option<ParamId>,
    embed_norm: LayerNorm,
    layers: Vec<EncoderLayer>,
    classifier: Linear,
    mlm: Option<Linear>,
    nsp: Option<Linear>,
}

/// Post-norm transformer encoder with mean pooling and a 2-logit head.
///
/// Token ids follow the sequence encoding (0 pad, 1 unknown, vocabulary from
/// 2) plus two reserved ids after the vocabulary: mask `V + 2` and separator
/// `V + 3`.
#[derive(Debug, Clone)]
pub struct TransformerClassifier {
    config: TransformerConfig,
    vocab_size: usize,
    params: ParamStore,
    layout: Layout,
}

impl TransformerClassifier {
    /// `vocab_size` counts regular vocabulary entries only.
    pub fn new(config: TransformerConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::derived_rng(seed, "transformer-init", 0);
        let mut store = ParamStore::new();
        let d = config.d_model;
        let rows = vocab_size + ID_OFFSET as usize + 2;
        let tokens = Embedding::new(&mut store, "embed.tokens", rows, d, &mut rng);
        let (positions, relative) = match config.attention {
            AttentionVariant::Standard => {
                (Some(Embedding::new(&mut store, "embed.positions", config.max_len, d, &mut rng)), None)
            }
            AttentionVariant::Disentangled { max_distance, decoder_absolute_positions } => {
                let positions = decoder_absolute_positions
                    .then(|| Embedding::new(&mut store, "embed.positions", config.max_len, d, &mut rng));
                let table = store.add("embed.relative", Matrix::uniform(2 * max_distance + 1, d, 0.1, &mut rng));
                (positions, Some(table))
            }
        };
        let embed_norm = LayerNorm::new(&mut store, "embed.norm", d);
        let layers = (0..config.layers)
            .map(|l| EncoderLayer {
                attention: AttentionLayer::new(
                    &mut store,
                    &format!("layer{l}.attention"),
                    d,
                    config.heads,
                    config.attention,
                    &mut rng,
                ),
                norm1: LayerNorm::new(&mut store, &format!("layer{l}.norm1"), d),
                ffn: FeedForward::new(&mut store, &format!("layer{l}.ffn"), d, config.d_ff, &mut rng),
                norm2: LayerNorm::new(&mut store, &format!("layer{l}.norm2"), d),
            })
            .collect();
        let classifier = Linear::new(&mut store, "head.classifier", d, 2, true, &mut rng);
        let (mlm, nsp) = if config.pretraining_heads {
            (
                Some(Linear::new(&mut store, "head.mlm", d, rows, true, &mut rng)),
                Some(Linear::new(&mut store, "head.nsp", d, 2, true, &mut rng)),
            )
        } else {
            (None, None)
        };
        Ok(TransformerClassifier {
            config,
            vocab_size,
            params: store,
            layout: Layout { tokens, positions, relative, embed_norm, layers, classifier, mlm, nsp },
        })
    }

    pub fn from_named(config: TransformerConfig, vocab_size: usize, params: &[NamedParam]) -> Result<Self> {
        let mut model = Self::new(config, vocab_size, 0)?;
        model.params.load_named(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn mask_id(&self) -> u32 {
        self.vocab_size as u32 + ID_OFFSET
    }

    pub fn sep_id(&self) -> u32 {
        self.vocab_size as u32 + ID_OFFSET + 1
    }

    pub fn embedding_rows(&self) -> usize {
        self.vocab_size + ID_OFFSET as usize + 2
    }

    pub fn has_pretraining_heads(&self) -> bool {
        self.layout.mlm.is_some()
    }

    /// Encoder output (`n × d`) and the non-pad mask.
    pub fn encode(
        &self,
        g: &mut Graph,
        ids: &[u32],
        mut rng: Option<&mut ChaCha8Rng>,
        mut trace: Option<&mut Vec<HeadTrace>>,
    ) -> Result<(Var, Vec<bool>)> {
        let n = ids.len();
        if n == 0 || ids.iter().all(|&t| t == PAD_ID) {
            return Err(Error::Data("cannot encode an all-padding sequence".into()));
        }
        if n > self.config.max_len {
            return Err(Error::Data(format!("sequence length {n} exceeds max_len {}", self.config.max_len)));
        }
        let rows = self.embedding_rows();
        if let Some(&bad) = ids.iter().find(|&&t| t as usize >= rows) {
            return Err(Error::Data(format!("token id {bad} outside the embedding table ({rows} rows)")));
        }
        let mask: Vec<bool> = ids.iter().map(|&t| t != PAD_ID).collect();
        let token_ids: Vec<usize> = ids.iter().map(|&t| t as usize).collect();
        let mut x = self.layout.tokens.forward(g, &token_ids);
        if let (AttentionVariant::Standard, Some(pos)) = (self.config.attention, self.layout.positions) {
            let p = pos.forward(g, &(0..n).collect::<Vec<_>>());
            x = g.add(x, p);
        }
        x = self.layout.embed_norm.forward(g, x);
        x = dropout(g, x, self.config.dropout, rng.as_deref_mut());
        let relative = match (self.config.attention, self.layout.relative) {
            (AttentionVariant::Disentangled { max_distance, .. }, Some(table)) => {
                Some(RelativeContext { table: g.param(table), index: relative_index(n, max_distance) })
            }
            _ => None,
        };
        for layer in &self.layout.layers {
            let a = layer.attention.forward(g, x, &mask, relative.as_ref(), trace.as_deref_mut());
            let a = dropout(g, a, self.config.dropout, rng.as_deref_mut());
            let sum = g.add(x, a);
            x = layer.norm1.forward(g, sum);
            let f = layer.ffn.forward(g, x);
            let f = dropout(g, f, self.config.dropout, rng.as_deref_mut());
            let sum = g.add(x, f);
            x = layer.norm2.forward(g, sum);
        }
        Ok((x, mask))
    }

    /// Masked-token logits (`positions.len() × rows`) from encoder output.
    pub fn mlm_logits(&self, g: &mut Graph, hidden: Var, positions: &[usize]) -> Result<Var> {
        let head = self.layout.mlm.ok_or_else(|| Error::Config("model was built without pretraining heads".into()))?;
        let mut h = g.gather_rows(hidden, positions);
        let decoder_positions =
            matches!(self.config.attention, AttentionVariant::Disentangled { decoder_absolute_positions: true, .. });
        if let (true, Some(pos)) = (decoder_positions, self.layout.positions) {
            let p = pos.forward(g, positions);
            h = g.add(h, p);
        }
        Ok(head.forward(g, h))
    }

    /// Next-sentence logits (`1 × 2`) for a packed pair.
    pub fn nsp_logits(&self, g: &mut Graph, ids: &[u32], rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let head = self.layout.nsp.ok_or_else(|| Error::Config("model was built without pretraining heads".into()))?;
        let (hidden, mask) = self.encode(g, ids, rng, None)?;
        let pooled = g.masked_mean_rows(hidden, &mask);
        Ok(head.forward(g, pooled))
    }

    /// Attention probability matrices of every head in every layer.
    pub fn attention_probs(&self, ids: &[u32]) -> Result<Vec<Matrix>> {
        let mut g = Graph::new(&self.params);
        let mut trace = Vec::new();
        self.encode(&mut g, ids, None, Some(&mut trace))?;
        Ok(trace.iter().map(|t| g.value(t.probs).clone()).collect())
    }
}

impl SequenceModel for TransformerClassifier {
    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn max_len(&self) -> usize {
        self.config.max_len
    }

    fn logits(&self, g: &mut Graph, ids: &[u32], rng: Option<&mut ChaCha8Rng>) -> Result<Var> {
        let (hidden, mask) = self.encode(g, ids, rng, None)?;
        let pooled = g.masked_mean_rows(hidden, &mask);
        Ok(self.layout.classifier.forward(g, pooled))
    }
}
