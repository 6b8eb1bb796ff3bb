//! Minimal layer zoo with forward and backward passes.
//!
//! Layers own their parameters ([`ParamTensor`]) and cache whatever the
//! backward pass needs from the most recent forward call. Networks are trees
//! of layers and ShuffleNet-style split/merge branches built from a
//! [`SpecNode`] list.

pub mod checkpoint;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod loss;
pub mod network;
pub mod param;
pub mod spec;

pub use gradcheck::{gradient_check, GradCheckReport};
pub use init::rcpc_init;
pub use layers::{
    channel_shuffle, channel_split, concat, depthwise_conv3x3_forward, global_avg_pool, pointwise_conv_forward,
    relu_forward, transform_pc_backward, transform_pc_forward, Layer, Mode,
};
pub use loss::{accuracy, softmax_cross_entropy};
pub use network::Network;
pub use param::{Buffer, ParamTensor, DEFAULT_GROUP};
pub use spec::{LayerSpec, NamedLayer, Shape, SpecNode};
