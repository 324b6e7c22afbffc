//! Toy-scale neural classifiers trained from scratch in double precision.

pub mod attention;
pub mod distill;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod pretrain;
pub mod tensor;
pub mod train;
pub mod transformer;

use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub use attention::{attention, relative_index, AttentionOutput, AttentionVariant, RelativeInputs};
pub use distill::{distill, distillation_loss, DistillConfig};
pub use graph::{Graph, Var};
pub use lstm::{LstmClassifier, LstmConfig};
pub use optim::{adamw_step, AdamWConfig, OptimizerState};
pub use params::{GradStore, NamedParam, ParamId, ParamStore};
pub use pretrain::{
    build_mlm_batch, build_nsp_pairs, pretrain, MlmBatch, MlmObjective, NspObjective, NspPair, PretrainConfig,
    PretrainObjective, PretrainTrace,
};
pub use tensor::Matrix;
pub use train::{train_classifier, Example, TrainConfig, TrainTrace};
pub use transformer::{TransformerClassifier, TransformerConfig};

/// A network mapping a token id sequence to two class logits.
pub trait SequenceModel: Send + Sync {
    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    fn max_len(&self) -> usize;

    /// `1 × 2` logits; dropout is active only when `rng` is given.
    fn logits(&self, g: &mut Graph, ids: &[u32], rng: Option<&mut ChaCha8Rng>) -> Result<Var>;

    fn predict_logits(&self, ids: &[u32]) -> Result<[f64; 2]> {
        let mut g = Graph::new(self.params());
        let v = self.logits(&mut g, ids, None)?;
        let m = g.value(v);
        Ok([m.data[0], m.data[1]])
    }
}
