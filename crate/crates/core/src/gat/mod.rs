//! A small GATv2 network with a logistic classification head.
//!
//! Each head scores an edge `v ← u` as `aᵀ · LeakyReLU(W_dst·h_v + W_src·h_u)`,
//! which is `aᵀ · LeakyReLU(W·[h_v ‖ h_u])` with `W = [W_dst | W_src]`. Scores
//! are softmax-normalized over `N(v) ∪ {v}` and the head output is
//! `Σ_u α_vu · W_src·h_u`. Hidden layers concatenate their heads and apply
//! ELU; the last layer averages its heads and feeds a single-logit affine
//! head. Gradients are derived by hand (see [`backward`]) and checked against
//! finite differences in the tests.

mod backward;
mod checkpoint;
mod forward;
mod train;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub use backward::{gradients, LossAndGradient};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use forward::{attention_coefficients, forward, ForwardOutput, Receptive};
pub use train::{bce_loss, train, train_resampled, TrainedModel};

pub(crate) const CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden_dim: usize,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GatConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 4,
            hidden_dim: 16,
            leaky_slope: 0.2,
            epochs: 200,
            learning_rate: 0.005,
            seed: 0,
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers < 1 {
            return Err(Error::param("gat.layers", "must be at least 1"));
        }
        if self.heads < 1 {
            return Err(Error::param("gat.heads", "must be at least 1"));
        }
        if self.hidden_dim < 1 {
            return Err(Error::param("gat.hidden_dim", "must be at least 1"));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::param("gat.learning_rate", "must be positive"));
        }
        if !self.leaky_slope.is_finite() {
            return Err(Error::param("gat.leaky_slope", "must be finite"));
        }
        Ok(())
    }

    /// Input width of `layer` given the feature width.
    pub fn layer_input_dim(&self, layer: usize, input_dim: usize) -> usize {
        if layer == 0 {
            input_dim
        } else {
            self.heads * self.hidden_dim
        }
    }

    pub fn is_last(&self, layer: usize) -> bool {
        layer + 1 == self.layers
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHead {
    /// `hidden_dim × in_dim`, applied to the neighbor (message and score).
    pub w_src: Array2<f64>,
    /// `hidden_dim × in_dim`, applied to the receiving node (score only).
    pub w_dst: Array2<f64>,
    pub attn: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatLayer {
    pub heads: Vec<AttentionHead>,
}

/// Every learnable tensor. Gradients share this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    pub layers: Vec<GatLayer>,
    pub fc_weight: Array1<f64>,
    pub fc_bias: f64,
}

impl GatParams {
    pub fn zeros(config: &GatConfig, input_dim: usize) -> Self {
        let layers = (0..config.layers)
            .map(|l| {
                let d_in = config.layer_input_dim(l, input_dim);
                GatLayer {
                    heads: (0..config.heads)
                        .map(|_| AttentionHead {
                            w_src: Array2::zeros((config.hidden_dim, d_in)),
                            w_dst: Array2::zeros((config.hidden_dim, d_in)),
                            attn: Array1::zeros(config.hidden_dim),
                        })
                        .collect(),
                }
            })
            .collect();
        Self {
            layers,
            fc_weight: Array1::zeros(config.hidden_dim),
            fc_bias: 0.0,
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.visit_mut(|s| s.fill(0.0));
        out
    }

    /// Visits every tensor as a flat slice in a fixed order.
    pub fn visit(&self, mut f: impl FnMut(&[f64])) {
        for layer in &self.layers {
            for head in &layer.heads {
                f(head.w_src.as_slice().expect("standard layout"));
                f(head.w_dst.as_slice().expect("standard layout"));
                f(head.attn.as_slice().expect("standard layout"));
            }
        }
        f(self.fc_weight.as_slice().expect("standard layout"));
        f(std::slice::from_ref(&self.fc_bias));
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            for head in &mut layer.heads {
                f(head.w_src.as_slice_mut().expect("standard layout"));
                f(head.w_dst.as_slice_mut().expect("standard layout"));
                f(head.attn.as_slice_mut().expect("standard layout"));
            }
        }
        f(self.fc_weight.as_slice_mut().expect("standard layout"));
        f(std::slice::from_mut(&mut self.fc_bias));
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(|s| out.extend_from_slice(s));
        out
    }

    pub fn len(&self) -> usize {
        let mut n = 0;
        self.visit(|s| n += s.len());
        n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Overwrites every parameter from a flat vector in [`visit`](Self::visit) order.
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} parameters",
                values.len(),
                self.len()
            )));
        }
        let mut offset = 0;
        self.visit_mut(|s| {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        });
        Ok(())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: f64, other: &GatParams) {
        let other = other.flatten();
        let mut offset = 0;
        self.visit_mut(|s| {
            let len = s.len();
            for (p, g) in s.iter_mut().zip(&other[offset..offset + len]) {
                *p += scale * g;
            }
            offset += len;
        });
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        self.visit(|s| s.iter().for_each(|v| m = m.max(v.abs())));
        m
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.visit(|s| ok &= s.iter().all(|v| v.is_finite()));
        ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatModel {
    pub config: GatConfig,
    pub input_dim: usize,
    pub params: GatParams,
}

impl GatModel {
    /// Seeded initialization: every entry uniform in `±1/√fan_in`, FC bias zero.
    pub fn init(config: GatConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim < 1 {
            return Err(Error::param("input dim", "must be at least 1"));
        }
        let mut params = GatParams::zeros(&config, input_dim);
        let mut rng = seed::rng(config.seed);
        let mut fill = |values: &mut [f64], fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in values {
                *v = rng.random_range(-bound..bound);
            }
        };
        for (l, layer) in params.layers.iter_mut().enumerate() {
            let d_in = config.layer_input_dim(l, input_dim);
            for head in &mut layer.heads {
                fill(head.w_src.as_slice_mut().expect("standard layout"), d_in);
                fill(head.w_dst.as_slice_mut().expect("standard layout"), d_in);
                fill(
                    head.attn.as_slice_mut().expect("standard layout"),
                    config.hidden_dim,
                );
            }
        }
        fill(
            params.fc_weight.as_slice_mut().expect("standard layout"),
            config.hidden_dim,
        );
        Ok(Self {
            config,
            input_dim,
            params,
        })
    }

    /// Logistic outputs for every node.
    pub fn predict(
        &self,
        graph: &dyn crate::graph::Neighborhoods,
        x: &crate::corpus::EmbeddingMatrix,
    ) -> Result<Vec<f64>> {
        Ok(forward(self, graph, x)?.predictions)
    }
}

/// Supervision over a subset of nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    nodes: Vec<usize>,
    labels: Vec<u8>,
}

impl TrainingSet {
    pub fn new(pairs: impl IntoIterator<Item = (usize, u8)>) -> Result<Self> {
        let mut pairs: Vec<(usize, u8)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::param("training set", "a node appears twice"));
        }
        if pairs.iter().any(|&(_, y)| y > 1) {
            return Err(Error::param("training set", "labels must be 0 or 1"));
        }
        if pairs.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let (nodes, labels) = pairs.into_iter().unzip();
        Ok(Self { nodes, labels })
    }

    /// Positives labeled 1, negatives labeled 0.
    pub fn from_classes(positive: &[usize], negative: &[usize]) -> Result<Self> {
        Self::new(
            positive
                .iter()
                .map(|&v| (v, 1))
                .chain(negative.iter().map(|&v| (v, 0))),
        )
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub(crate) fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}
