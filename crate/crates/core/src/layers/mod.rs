//! Relation-aware layers, the fusing head and the full model.

mod components;
mod config;
mod model;

pub use components::{
    cross_relation_mp, fuse, relation_conv, relation_update, weighted_residual, ConvOutput,
    CrossRelationOutput, FuseOutput,
};
pub use config::{Ablation, ModelConfig};
pub use model::{
    AlphaTrace, AttentionTrace, BetaTrace, ForwardOutput, FuseHeadParams, GammaTrace,
    LayerHeadParams, Linear, Mode, Model,
};
