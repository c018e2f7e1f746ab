//! Three-branch feed-forward ranker with hand-written gradients, pairwise
//! hinge training and the auxiliary name-match phase.

mod adam;
mod checkpoint;
mod config;
mod loss;
mod network;
mod params;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{
    checkpoint_bytes, params_from_bytes, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{AuxConfig, BranchMask, LayerSizes, TrainConfig};
pub use loss::{aux_loss_grad, batch_loss_grad, first_argmax, hinge_loss, AuxExample, TrainingExample};
pub use network::{
    backward, forward, match_backward, match_forward, score, score_pairs, ForwardTrace, MatchTrace, Mode,
    PairBatch,
};
pub use params::{init_bound, Dense, InputDims, ParamGroup, RankerParams};
pub use train::{sample_negatives, train, train_aux_epoch, write_loss_trace, EpochStats, TrainOutcome};
