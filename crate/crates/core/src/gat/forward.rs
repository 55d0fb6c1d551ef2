use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView2};

use super::{elu, leaky_relu, sigmoid, AttentionHead, GatModel};
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::Neighborhoods;

/// Aggregation neighborhoods `N(v) ∪ {v}` in compressed rows, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receptive {
    offsets: Vec<usize>,
    sources: Vec<usize>,
}

impl Receptive {
    pub fn new(graph: &dyn Neighborhoods) -> Self {
        let n = graph.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut sources = Vec::new();
        offsets.push(0);
        for v in 0..n {
            let nbrs = graph.neighbors(v);
            let at = nbrs.partition_point(|&u| u < v);
            sources.extend_from_slice(&nbrs[..at]);
            sources.push(v);
            sources.extend(nbrs[at..].iter().copied().filter(|&u| u != v));
            offsets.push(sources.len());
        }
        Self { offsets, sources }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    pub fn of(&self, v: usize) -> &[usize] {
        &self.sources[self.range(v)]
    }

    pub(crate) fn range(&self, v: usize) -> Range<usize> {
        self.offsets[v]..self.offsets[v + 1]
    }

    pub(crate) fn source(&self, e: usize) -> usize {
        self.sources[e]
    }
}

pub(crate) struct HeadCache {
    /// `W_src · h_u` per node.
    pub m: Array2<f64>,
    /// `z_v + m_u` per receptive edge, before LeakyReLU.
    pub pre: Array2<f64>,
    pub alpha: Vec<f64>,
}

pub(crate) struct LayerCache {
    pub heads: Vec<HeadCache>,
    /// Concatenated (hidden) or averaged (last) head outputs.
    pub pre: Array2<f64>,
    pub out: Array2<f64>,
}

pub(crate) struct Cache {
    pub layers: Vec<LayerCache>,
    pub logits: Array1<f64>,
    pub predictions: Vec<f64>,
}

impl Cache {
    pub fn layer_input<'a>(&'a self, x: &'a Array2<f64>, layer: usize) -> ArrayView2<'a, f64> {
        if layer == 0 {
            x.view()
        } else {
            self.layers[layer - 1].out.view()
        }
    }
}

pub(crate) fn head_forward(
    head: &AttentionHead,
    input: ArrayView2<'_, f64>,
    rec: &Receptive,
    slope: f64,
) -> (HeadCache, Array2<f64>) {
    let n = input.nrows();
    let d = head.attn.len();
    let z = input.dot(&head.w_dst.t());
    let m = input.dot(&head.w_src.t());
    let attn = head.attn.as_slice().expect("standard layout");
    let mut pre = Array2::zeros((rec.edge_count(), d));
    let mut alpha = vec![0.0; rec.edge_count()];
    let mut out = Array2::zeros((n, d));
    for v in 0..n {
        let range = rec.range(v);
        let zv = z.row(v);
        for e in range.clone() {
            let mu = m.row(rec.source(e));
            let mut row = pre.row_mut(e);
            let mut score = 0.0;
            for k in 0..d {
                let s = zv[k] + mu[k];
                row[k] = s;
                score += attn[k] * leaky_relu(s, slope);
            }
            alpha[e] = score;
        }
        let max = alpha[range.clone()]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for a in &mut alpha[range.clone()] {
            *a = (*a - max).exp();
            total += *a;
        }
        let mut ov = out.row_mut(v);
        for e in range {
            alpha[e] /= total;
            let mu = m.row(rec.source(e));
            for k in 0..d {
                ov[k] += alpha[e] * mu[k];
            }
        }
    }
    (HeadCache { m, pre, alpha }, out)
}

pub(crate) fn forward_cached(model: &GatModel, rec: &Receptive, x: &Array2<f64>) -> Result<Cache> {
    let config = &model.config;
    if x.nrows() != rec.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} graph nodes",
            x.nrows(),
            rec.node_count()
        )));
    }
    if x.ncols() != model.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "features have width {}, model expects {}",
            x.ncols(),
            model.input_dim
        )));
    }
    let n = x.nrows();
    let d = config.hidden_dim;
    let mut cache = Cache {
        layers: Vec::with_capacity(config.layers),
        logits: Array1::zeros(0),
        predictions: Vec::new(),
    };
    for (l, layer) in model.params.layers.iter().enumerate() {
        let last = config.is_last(l);
        let input = cache.layer_input(x, l);
        let mut heads = Vec::with_capacity(layer.heads.len());
        let mut pre = if last {
            Array2::zeros((n, d))
        } else {
            Array2::zeros((n, d * config.heads))
        };
        for (h, head) in layer.heads.iter().enumerate() {
            let (hc, out) = head_forward(head, input, rec, config.leaky_slope);
            if last {
                pre.scaled_add(1.0 / config.heads as f64, &out);
            } else {
                pre.slice_mut(ndarray::s![.., h * d..(h + 1) * d])
                    .assign(&out);
            }
            heads.push(hc);
        }
        let out = if last { pre.clone() } else { pre.mapv(elu) };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: l + 1 });
        }
        cache.layers.push(LayerCache { heads, pre, out });
    }
    let last = &cache.layers.last().expect("at least one layer").out;
    let logits = last.dot(&model.params.fc_weight) + model.params.fc_bias;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            layer: config.layers + 1,
        });
    }
    cache.predictions = logits.iter().map(|&z| sigmoid(z)).collect();
    cache.logits = logits;
    Ok(cache)
}

/// Per-layer embeddings `H^1 … H^L` and the head's logistic outputs.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub embeddings: Vec<Array2<f64>>,
    pub logits: Vec<f64>,
    pub predictions: Vec<f64>,
}

pub fn forward(
    model: &GatModel,
    graph: &dyn Neighborhoods,
    x: &EmbeddingMatrix,
) -> Result<ForwardOutput> {
    let rec = Receptive::new(graph);
    let cache = forward_cached(model, &rec, x.as_array())?;
    Ok(ForwardOutput {
        logits: cache.logits.to_vec(),
        predictions: cache.predictions,
        embeddings: cache.layers.into_iter().map(|l| l.out).collect(),
    })
}

/// Softmax-normalized attention of one head, as `(source, α)` per receiving node.
pub fn attention_coefficients(
    model: &GatModel,
    layer: usize,
    head: usize,
    graph: &dyn Neighborhoods,
    h_prev: &Array2<f64>,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let params = model
        .params
        .layers
        .get(layer)
        .and_then(|l| l.heads.get(head))
        .ok_or_else(|| {
            Error::param(
                "attention head",
                format!("layer {layer}, head {head} does not exist"),
            )
        })?;
    if h_prev.ncols() != params.w_src.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "layer {layer} expects width {}, got {}",
            params.w_src.ncols(),
            h_prev.ncols()
        )));
    }
    if h_prev.nrows() != graph.node_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {} nodes",
            h_prev.nrows(),
            graph.node_count()
        )));
    }
    let rec = Receptive::new(graph);
    let (hc, _) = head_forward(params, h_prev.view(), &rec, model.config.leaky_slope);
    Ok((0..rec.node_count())
        .map(|v| rec.range(v).map(|e| (rec.source(e), hc.alpha[e])).collect())
        .collect())
}
