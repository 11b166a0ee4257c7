use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::Matrix;
use super::EncoderConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub query_w: Matrix<T>,
    pub query_b: Matrix<T>,
    pub key_w: Matrix<T>,
    pub key_b: Matrix<T>,
    pub value_w: Matrix<T>,
    pub value_b: Matrix<T>,
    pub attn_out_w: Matrix<T>,
    pub attn_out_b: Matrix<T>,
    pub attn_ln_gamma: Matrix<T>,
    pub attn_ln_beta: Matrix<T>,
    pub ffn_in_w: Matrix<T>,
    pub ffn_in_b: Matrix<T>,
    pub ffn_out_w: Matrix<T>,
    pub ffn_out_b: Matrix<T>,
    pub ffn_ln_gamma: Matrix<T>,
    pub ffn_ln_beta: Matrix<T>,
}

/// All trainable tensors. Gradients and optimizer moments use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub token_emb: Matrix<T>,
    pub position_emb: Matrix<T>,
    pub segment_emb: Matrix<T>,
    pub emb_ln_gamma: Matrix<T>,
    pub emb_ln_beta: Matrix<T>,
    pub layers: Vec<LayerParams<T>>,
    pub start_w: Matrix<T>,
    pub end_w: Matrix<T>,
    pub start_b: Matrix<T>,
    pub end_b: Matrix<T>,
}

const LAYER_TENSORS: [&str; 16] = [
    "attention.query.weight",
    "attention.query.bias",
    "attention.key.weight",
    "attention.key.bias",
    "attention.value.weight",
    "attention.value.bias",
    "attention.output.weight",
    "attention.output.bias",
    "attention.layer_norm.gamma",
    "attention.layer_norm.beta",
    "ffn.input.weight",
    "ffn.input.bias",
    "ffn.output.weight",
    "ffn.output.bias",
    "ffn.layer_norm.gamma",
    "ffn.layer_norm.beta",
];

impl<T: Scalar> LayerParams<T> {
    fn tensors(&self) -> [&Matrix<T>; 16] {
        [
            &self.query_w,
            &self.query_b,
            &self.key_w,
            &self.key_b,
            &self.value_w,
            &self.value_b,
            &self.attn_out_w,
            &self.attn_out_b,
            &self.attn_ln_gamma,
            &self.attn_ln_beta,
            &self.ffn_in_w,
            &self.ffn_in_b,
            &self.ffn_out_w,
            &self.ffn_out_b,
            &self.ffn_ln_gamma,
            &self.ffn_ln_beta,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix<T>; 16] {
        [
            &mut self.query_w,
            &mut self.query_b,
            &mut self.key_w,
            &mut self.key_b,
            &mut self.value_w,
            &mut self.value_b,
            &mut self.attn_out_w,
            &mut self.attn_out_b,
            &mut self.attn_ln_gamma,
            &mut self.attn_ln_beta,
            &mut self.ffn_in_w,
            &mut self.ffn_in_b,
            &mut self.ffn_out_w,
            &mut self.ffn_out_b,
            &mut self.ffn_ln_gamma,
            &mut self.ffn_ln_beta,
        ]
    }
}

impl<T: Scalar> ModelParams<T> {
    /// All-zero tensors shaped by `cfg`.
    pub fn zeros(cfg: &EncoderConfig) -> Self {
        let h = cfg.hidden_size;
        let f = cfg.ffn_size;
        let z = Matrix::zeros;
        let layer = || LayerParams {
            query_w: z(h, h),
            query_b: z(1, h),
            key_w: z(h, h),
            key_b: z(1, h),
            value_w: z(h, h),
            value_b: z(1, h),
            attn_out_w: z(h, h),
            attn_out_b: z(1, h),
            attn_ln_gamma: z(1, h),
            attn_ln_beta: z(1, h),
            ffn_in_w: z(h, f),
            ffn_in_b: z(1, f),
            ffn_out_w: z(f, h),
            ffn_out_b: z(1, h),
            ffn_ln_gamma: z(1, h),
            ffn_ln_beta: z(1, h),
        };
        Self {
            token_emb: z(cfg.vocab_size, h),
            position_emb: z(cfg.max_positions, h),
            segment_emb: z(cfg.num_segments, h),
            emb_ln_gamma: z(1, h),
            emb_ln_beta: z(1, h),
            layers: (0..cfg.num_layers).map(|_| layer()).collect(),
            start_w: z(1, h),
            end_w: z(1, h),
            start_b: z(1, 1),
            end_b: z(1, 1),
        }
    }

    /// Normal(0, init_std) weights and embeddings, zero biases, unit
    /// layer-norm gains; seeded from `cfg.seed`.
    pub fn init(cfg: &EncoderConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let normal = Normal::new(0.0, cfg.init_std).expect("valid init_std");
        let mut p = Self::zeros(cfg);
        let mut fill = |m: &mut Matrix<T>| {
            for x in &mut m.data {
                *x = T::lit(normal.sample(&mut rng));
            }
        };
        fill(&mut p.token_emb);
        fill(&mut p.position_emb);
        fill(&mut p.segment_emb);
        for l in &mut p.layers {
            fill(&mut l.query_w);
            fill(&mut l.key_w);
            fill(&mut l.value_w);
            fill(&mut l.attn_out_w);
            fill(&mut l.ffn_in_w);
            fill(&mut l.ffn_out_w);
        }
        fill(&mut p.start_w);
        fill(&mut p.end_w);
        let one = |m: &mut Matrix<T>| m.data.iter_mut().for_each(|x| *x = T::one());
        one(&mut p.emb_ln_gamma);
        for l in &mut p.layers {
            one(&mut l.attn_ln_gamma);
            one(&mut l.ffn_ln_gamma);
        }
        p
    }

    /// Tensors in a fixed canonical order (the checkpoint order).
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut v = vec![
            &self.token_emb,
            &self.position_emb,
            &self.segment_emb,
            &self.emb_ln_gamma,
            &self.emb_ln_beta,
        ];
        for l in &self.layers {
            v.extend(l.tensors());
        }
        v.extend([&self.start_w, &self.start_b, &self.end_w, &self.end_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v = vec![
            &mut self.token_emb,
            &mut self.position_emb,
            &mut self.segment_emb,
            &mut self.emb_ln_gamma,
            &mut self.emb_ln_beta,
        ];
        for l in &mut self.layers {
            v.extend(l.tensors_mut());
        }
        v.extend([&mut self.start_w, &mut self.start_b, &mut self.end_w, &mut self.end_b]);
        v
    }

    /// Names matching [`ModelParams::tensors`].
    pub fn names(num_layers: usize) -> Vec<String> {
        let mut v: Vec<String> = [
            "embeddings.token",
            "embeddings.position",
            "embeddings.segment",
            "embeddings.layer_norm.gamma",
            "embeddings.layer_norm.beta",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for i in 0..num_layers {
            v.extend(LAYER_TENSORS.iter().map(|n| format!("layer.{i}.{n}")));
        }
        v.extend(
            ["span_head.start.weight", "span_head.start.bias", "span_head.end.weight", "span_head.end.bias"]
                .iter()
                .map(|s| s.to_string()),
        );
        v
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Euclidean norm over every scalar.
    pub fn global_norm(&self) -> T {
        self.tensors()
            .iter()
            .flat_map(|t| t.data.iter())
            .fold(T::zero(), |s, &x| s + x * x)
            .sqrt()
    }
}
