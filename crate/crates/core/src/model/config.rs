use serde::{Deserialize, Serialize};

use super::ModelError;

/// Shape and regularization of the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub num_heads: usize,
    pub ffn_size: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub num_segments: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Standard deviation of the normal weight initializer.
    pub init_std: f64,
    pub layer_norm_eps: f64,
    /// Use one bias for both span heads (the start bias).
    pub shared_bias: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden_size: 64,
            num_heads: 4,
            ffn_size: 128,
            vocab_size: 0,
            max_positions: 512,
            num_segments: 2,
            dropout_rate: 0.1,
            seed: 0,
            init_std: 0.02,
            layer_norm_eps: 1e-12,
            shared_bias: false,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes = [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("num_heads", self.num_heads),
            ("ffn_size", self.ffn_size),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
            ("num_segments", self.num_segments),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !self.hidden_size.is_multiple_of(self.num_heads) {
            return Err(ModelError::InvalidConfig("hidden_size must be divisible by num_heads".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidConfig("dropout_rate must be in [0, 1)".into()));
        }
        if !(self.init_std > 0.0 && self.layer_norm_eps > 0.0) {
            return Err(ModelError::InvalidConfig("init_std and layer_norm_eps must be positive".into()));
        }
        Ok(())
    }
}
