//! Point-wise semantic segmentation with a variational point network.
//!
//! Every dense layer holds mean weights `μ` and two spread scalars `δ` (one
//! for the weights, one for the biases); a forward pass under noise `ε` uses
//! `μ ⊙ (1 + softplus(δ)·ε)`. Frequentist mode trains and predicts with the
//! means alone. Bayesian mode minimizes the negative ELBO and predicts by
//! averaging Monte Carlo weight draws.

mod checkpoint;
mod infer;
mod layer;
mod network;
mod train;

pub use checkpoint::{format_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint};
pub use infer::{
    block_features, labeled_blocks, predict_class, predict_mc, sample_noise_for, segment_cloud,
    PredictiveSamples, RoomFrame,
};
pub use layer::{
    kl_component, kl_component_grad, sigmoid, softplus, softplus_inv, LayerNoise, VariationalLayer,
    KL_VAR_FLOOR,
};
pub use network::{
    elbo_loss, elbo_loss_and_grad, LabeledBlock, Mode, Network, NetworkConfig, ParamGrads, Weights,
    DELTA_INIT,
};
pub use train::{metrics_csv, train, EpochMetrics, TrainConfig, TrainOutcome};

/// Per-point input width: block-centered `(x, y, z)` and room-normalized
/// `(x, y, z)`.
pub const FEATURES: usize = 6;
