use alloc::format;

use crate::error::invalid;
use crate::Result;

/// Component switches for ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Ablation {
    /// Drop the weighted residual: `z = z_tilde`.
    pub no_wrc: bool,
    /// Skip cross-relation message passing: `h_{v,r} = z_{v,r}`.
    pub no_cmp: bool,
    /// Replace relation-aware fusing with a mean over relations.
    pub no_rrf: bool,
}

/// Architecture hyperparameters. All dimensions are totals across heads.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub heads: usize,
    /// Width of the per-type projection applied to raw features.
    pub input_dim: usize,
    /// Node representation width produced by every layer.
    pub hidden_dim: usize,
    /// Relation representation width produced by every layer.
    pub relation_dim: usize,
    /// Width of the fused node representation.
    pub fuse_dim: usize,
    pub dropout: f64,
    pub negative_slope: f64,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            heads: 8,
            input_dim: 64,
            hidden_dim: 64,
            relation_dim: 64,
            fuse_dim: 64,
            dropout: 0.6,
            negative_slope: 0.2,
            ablation: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(invalid("num_layers must be at least 1"));
        }
        if self.heads == 0 {
            return Err(invalid("heads must be at least 1"));
        }
        for (name, dim) in [
            ("hidden_dim", self.hidden_dim),
            ("relation_dim", self.relation_dim),
            ("fuse_dim", self.fuse_dim),
        ] {
            if dim == 0 || dim % self.heads != 0 {
                return Err(invalid(format!(
                    "{name} = {dim} must be a positive multiple of heads = {}",
                    self.heads
                )));
            }
        }
        if self.input_dim == 0 {
            return Err(invalid("input_dim must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(self.negative_slope > 0.0 && self.negative_slope < 1.0) {
            return Err(invalid(format!(
                "negative_slope {} not in (0, 1)",
                self.negative_slope
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    pub fn head_relation_dim(&self) -> usize {
        self.relation_dim / self.heads
    }

    pub fn head_fuse_dim(&self) -> usize {
        self.fuse_dim / self.heads
    }
}
