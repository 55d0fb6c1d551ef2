//! Reverse-mode gradients of the mean binary cross-entropy.
//!
//! For one head with upstream gradient `g_v = ∂L/∂out_v`:
//!
//! ```text
//! ∂L/∂α_vu = g_v · m_u
//! ∂L/∂e_vu = α_vu (∂L/∂α_vu − Σ_w α_vw ∂L/∂α_vw)          (softmax)
//! ∂L/∂a   += ∂L/∂e_vu · LeakyReLU(s_vu)
//! ∂L/∂s_vu = ∂L/∂e_vu · a ⊙ LeakyReLU'(s_vu)              (s_vu = z_v + m_u)
//! ∂L/∂z_v += ∂L/∂s_vu
//! ∂L/∂m_u += α_vu g_v + ∂L/∂s_vu
//! ```
//!
//! and `z = H W_dstᵀ`, `m = H W_srcᵀ` close the chain to the weights and to
//! the layer input.

use ndarray::{s, Array1, Array2, ArrayView2};

use super::forward::{forward_cached, Cache, HeadCache, Receptive};
use super::{bce_loss, AttentionHead, GatModel, GatParams, TrainingSet, CLAMP};
use crate::corpus::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::Neighborhoods;

#[derive(Debug, Clone)]
pub struct LossAndGradient {
    pub loss: f64,
    pub gradient: GatParams,
}

pub fn gradients(
    model: &GatModel,
    graph: &dyn Neighborhoods,
    x: &EmbeddingMatrix,
    train: &TrainingSet,
) -> Result<LossAndGradient> {
    loss_and_gradient(model, &Receptive::new(graph), x.as_array(), train)
}

pub(crate) fn training_loss(cache: &Cache, train: &TrainingSet) -> Result<f64> {
    let n = cache.predictions.len();
    if let Some(&bad) = train.nodes().iter().find(|&&v| v >= n) {
        return Err(Error::param(
            "training set",
            format!("node {bad} out of range for {n} nodes"),
        ));
    }
    let preds: Vec<f64> = train
        .nodes()
        .iter()
        .map(|&v| cache.predictions[v])
        .collect();
    bce_loss(&preds, train.labels())
}

pub(crate) fn loss_and_gradient(
    model: &GatModel,
    rec: &Receptive,
    x: &Array2<f64>,
    train: &TrainingSet,
) -> Result<LossAndGradient> {
    let config = &model.config;
    let cache = forward_cached(model, rec, x)?;
    let loss = training_loss(&cache, train)?;
    let n = x.nrows();

    let mut dlogit = Array1::zeros(n);
    let scale = 1.0 / train.len() as f64;
    for (&v, &y) in train.nodes().iter().zip(train.labels()) {
        let p = cache.predictions[v];
        // Clamped predictions contribute no gradient.
        if (CLAMP..=1.0 - CLAMP).contains(&p) {
            dlogit[v] = (p - f64::from(y)) * scale;
        }
    }

    let mut grad = model.params.zeros_like();
    let top = &cache.layers.last().expect("at least one layer").out;
    grad.fc_weight.assign(&top.t().dot(&dlogit));
    grad.fc_bias = dlogit.sum();

    let fc = &model.params.fc_weight;
    let mut d_out = Array2::from_shape_fn((n, fc.len()), |(v, k)| dlogit[v] * fc[k]);

    for l in (0..config.layers).rev() {
        let last = config.is_last(l);
        let lc = &cache.layers[l];
        let input = cache.layer_input(x, l);
        let d_pre = if last {
            d_out
        } else {
            // ELU'(x) = 1 for x > 0, e^x otherwise.
            let mut d = d_out;
            d.zip_mut_with(&lc.pre, |g, &p| {
                if p <= 0.0 {
                    *g *= p.exp();
                }
            });
            d
        };
        let mut d_input = (l > 0).then(|| Array2::zeros(input.raw_dim()));
        let width = config.hidden_dim;
        for (h, (head, hc)) in model.params.layers[l]
            .heads
            .iter()
            .zip(&lc.heads)
            .enumerate()
        {
            let d_head = if last {
                &d_pre / config.heads as f64
            } else {
                d_pre.slice(s![.., h * width..(h + 1) * width]).to_owned()
            };
            let head_grad = &mut grad.layers[l].heads[h];
            head_backward(
                head,
                hc,
                input,
                rec,
                &d_head,
                config.leaky_slope,
                head_grad,
                d_input.as_mut(),
            );
        }
        d_out = match d_input {
            Some(d) => d,
            None => break,
        };
    }

    Ok(LossAndGradient {
        loss,
        gradient: grad,
    })
}

#[allow(clippy::too_many_arguments)]
fn head_backward(
    head: &AttentionHead,
    hc: &HeadCache,
    input: ArrayView2<'_, f64>,
    rec: &Receptive,
    d_head: &Array2<f64>,
    slope: f64,
    grad: &mut AttentionHead,
    d_input: Option<&mut Array2<f64>>,
) {
    let n = input.nrows();
    let d = head.attn.len();
    let attn = &head.attn;
    let mut dz = Array2::<f64>::zeros((n, d));
    let mut dm = Array2::<f64>::zeros((n, d));
    let mut da = Array1::<f64>::zeros(d);
    let mut d_alpha = Vec::new();

    for v in 0..n {
        let g = d_head.row(v);
        let range = rec.range(v);
        d_alpha.clear();
        let mut weighted = 0.0;
        for e in range.clone() {
            let u = rec.source(e);
            let da_e = g.dot(&hc.m.row(u));
            weighted += hc.alpha[e] * da_e;
            d_alpha.push(da_e);
            dm.row_mut(u).scaled_add(hc.alpha[e], &g);
        }
        for (i, e) in range.enumerate() {
            let u = rec.source(e);
            let de = hc.alpha[e] * (d_alpha[i] - weighted);
            if de == 0.0 {
                continue;
            }
            let pre = hc.pre.row(e);
            for k in 0..d {
                let s = pre[k];
                let (act, slope_k) = if s > 0.0 {
                    (s, 1.0)
                } else {
                    (slope * s, slope)
                };
                da[k] += de * act;
                let ds = de * attn[k] * slope_k;
                dz[[v, k]] += ds;
                dm[[u, k]] += ds;
            }
        }
    }

    grad.w_dst.assign(&dz.t().dot(&input));
    grad.w_src.assign(&dm.t().dot(&input));
    grad.attn.assign(&da);
    if let Some(d_input) = d_input {
        *d_input += &dz.dot(&head.w_dst);
        *d_input += &dm.dot(&head.w_src);
    }
}
