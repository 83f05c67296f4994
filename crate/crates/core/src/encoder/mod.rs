//! Transformer encoder pre-trained with a masked-token objective.

mod config;
mod loss;
mod mask;
mod model;
mod params;
mod train;

pub use config::{Architecture, EncoderConfig};
pub use loss::{mlm_loss, mlm_loss_and_grad};
pub use mask::{apply_mask, mask_count, MaskedSequence};
pub use model::{backward, forward, forward_trace, mlm_head_backward, mlm_logits_row, ForwardOutput, Trace};
pub use params::{EncoderParams, LayerParams};
pub use train::{
    accumulate_mlm_grad, batch_mlm_grad, embed_all, train_mlm, train_mlm_from, EmbeddingVector,
    EpochLoss, PretrainOutcome,
};
pub(crate) use train::{with_cls, GRAD_CHUNK};
