//! Hand-written reverse-mode gradients for the fixed encoder architecture,
//! the training step, and a finite-difference gradient checker.

use super::adam::AdamState;
use super::forward::{forward_with_cache, ForwardCache, GnnError};
use super::loss::squared_distance;
use super::model::{EncoderModel, LayerParams};
use crate::featurize::BipartiteGraph;

#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub cons_self: Vec<f64>,
    pub cons_neigh: Vec<f64>,
    pub var_self: Vec<f64>,
    pub var_neigh: Vec<f64>,
}

/// Parameter gradients, same shapes and ordering as [`EncoderModel`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub norm_scale: Vec<f64>,
    pub norm_shift: Vec<f64>,
    pub attention: Vec<f64>,
    pub projection: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &EncoderModel) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrads {
                    cons_self: vec![0.0; l.cons_self.len()],
                    cons_neigh: vec![0.0; l.cons_neigh.len()],
                    var_self: vec![0.0; l.var_self.len()],
                    var_neigh: vec![0.0; l.var_neigh.len()],
                })
                .collect(),
            norm_scale: vec![0.0; model.norm_scale.len()],
            norm_shift: vec![0.0; model.norm_shift.len()],
            attention: vec![0.0; model.attention.len()],
            projection: vec![0.0; model.projection.len()],
        }
    }

    /// Same tensor order as [`EncoderModel::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            out.push(&layer.cons_self);
            out.push(&layer.cons_neigh);
            out.push(&layer.var_self);
            out.push(&layer.var_neigh);
        }
        out.push(&self.norm_scale);
        out.push(&self.norm_shift);
        out.push(&self.attention);
        out.push(&self.projection);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// grad_w[r, c] += g[r] * x[c]
#[inline]
fn outer_add(grad_w: &mut [f64], rows: usize, cols: usize, g: &[f64], x: &[f64]) {
    debug_assert_eq!(g.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let gr = g[r];
        if gr != 0.0 {
            let row = &mut grad_w[r * cols..(r + 1) * cols];
            for (slot, &xc) in row.iter_mut().zip(x) {
                *slot += gr * xc;
            }
        }
    }
}

/// y[c] += W^T[c, :] . g  (W row-major rows x cols)
#[inline]
fn matvec_t_add(w: &[f64], rows: usize, cols: usize, g: &[f64], y: &mut [f64]) {
    debug_assert_eq!(g.len(), rows);
    debug_assert_eq!(y.len(), cols);
    for r in 0..rows {
        let gr = g[r];
        if gr != 0.0 {
            let row = &w[r * cols..(r + 1) * cols];
            for (slot, &wc) in y.iter_mut().zip(row) {
                *slot += gr * wc;
            }
        }
    }
}

/// Accumulates into `grads` the gradient of `g_emb . embedding(graph)` with
/// respect to every model parameter, replaying the cached forward pass.
pub fn backward_graph(
    model: &EncoderModel,
    graph: &BipartiteGraph,
    cache: &ForwardCache,
    g_emb: &[f64],
    grads: &mut Gradients,
) {
    let dims = model.dims;
    let hidden = dims.hidden;
    let (n, m) = (cache.n, cache.m);
    let total = n + m;

    // Projection.
    outer_add(
        &mut grads.projection,
        dims.out,
        2 * hidden,
        g_emb,
        &cache.z,
    );
    let mut g_z = vec![0.0; 2 * hidden];
    matvec_t_add(&model.projection, dims.out, 2 * hidden, g_emb, &mut g_z);
    let (g_mx, g_attn) = g_z.split_at(hidden);

    // Pooling.
    let mut g_htilde = vec![0.0; total * hidden];
    for ch in 0..hidden {
        g_htilde[cache.argmax[ch] * hidden + ch] += g_mx[ch];
    }
    // Attention: attn[ch] = sum_i p_i htilde[i][ch], p = softmax(w . htilde_i).
    let mut g_p = vec![0.0; total];
    for i in 0..total {
        let row = &cache.htilde[i * hidden..(i + 1) * hidden];
        let p_i = cache.attn_p[i];
        let mut dot = 0.0;
        for ch in 0..hidden {
            g_htilde[i * hidden + ch] += p_i * g_attn[ch];
            dot += row[ch] * g_attn[ch];
        }
        g_p[i] = dot;
    }
    let sdot: f64 = (0..total).map(|i| cache.attn_p[i] * g_p[i]).sum();
    for i in 0..total {
        let g_score = cache.attn_p[i] * (g_p[i] - sdot);
        let row = &cache.htilde[i * hidden..(i + 1) * hidden];
        for ch in 0..hidden {
            grads.attention[ch] += g_score * row[ch];
            g_htilde[i * hidden + ch] += g_score * model.attention[ch];
        }
    }

    // Affine part of the normalization.
    let mut g_xhat = vec![0.0; total * hidden];
    for i in 0..total {
        for ch in 0..hidden {
            let g = g_htilde[i * hidden + ch];
            let xh = cache.xhat[i * hidden + ch];
            grads.norm_scale[ch] += g * xh;
            grads.norm_shift[ch] += g;
            g_xhat[i * hidden + ch] = g * model.norm_scale[ch];
        }
    }

    // Standardization over the node set.
    let mut g_h = vec![0.0; total * hidden];
    let nf = total as f64;
    for ch in 0..hidden {
        let mut mean_g = 0.0;
        let mut mean_gx = 0.0;
        for i in 0..total {
            mean_g += g_xhat[i * hidden + ch];
            mean_gx += g_xhat[i * hidden + ch] * cache.xhat[i * hidden + ch];
        }
        mean_g /= nf;
        mean_gx /= nf;
        let sd = cache.sd[ch];
        for i in 0..total {
            let g = g_xhat[i * hidden + ch];
            let xh = cache.xhat[i * hidden + ch];
            g_h[i * hidden + ch] = (g - mean_g - xh * mean_gx) / sd;
        }
    }

    // Split back into variable / constraint rows (variables stacked first).
    let mut g_v: Vec<f64> = g_h[..n * hidden].to_vec();
    let mut g_c: Vec<f64> = g_h[n * hidden..].to_vec();

    for l in (0..dims.layers).rev() {
        let params: &LayerParams = &model.layers[l];
        let lg = &mut grads.layers[l];
        let lc = &cache.layers[l];
        let wv_in = if l == 0 { dims.var_in } else { hidden };
        let wc_in = if l == 0 { dims.cons_in } else { hidden };
        let v_in: &[f64] = if l == 0 {
            &graph.var_features
        } else {
            &cache.layers[l - 1].v_out
        };
        let c_in: &[f64] = if l == 0 {
            &graph.cons_features
        } else {
            &cache.layers[l - 1].c_out
        };

        // Variable side (it ran last in the forward pass).
        let mut g_vin = vec![0.0; n * wv_in];
        {
            let mut g_sv = vec![0.0; hidden];
            for j in 0..n {
                let mut g_pre = vec![0.0; hidden];
                for r in 0..hidden {
                    if lc.v_pre[j * hidden + r] > 0.0 {
                        g_pre[r] = g_v[j * hidden + r];
                    }
                }
                outer_add(
                    &mut lg.var_self,
                    hidden,
                    wv_in,
                    &g_pre,
                    &v_in[j * wv_in..(j + 1) * wv_in],
                );
                outer_add(
                    &mut lg.var_neigh,
                    hidden,
                    hidden,
                    &g_pre,
                    &lc.s_v[j * hidden..(j + 1) * hidden],
                );
                matvec_t_add(
                    &params.var_self,
                    hidden,
                    wv_in,
                    &g_pre,
                    &mut g_vin[j * wv_in..(j + 1) * wv_in],
                );
                g_sv.iter_mut().for_each(|x| *x = 0.0);
                matvec_t_add(&params.var_neigh, hidden, hidden, &g_pre, &mut g_sv);
                // Scatter the aggregate gradient onto the updated constraint
                // features this variable aggregated from.
                for &(c, e) in cache.var_adj.neighbors(j) {
                    let row = &mut g_c[c * hidden..(c + 1) * hidden];
                    for (slot, &g) in row.iter_mut().zip(&g_sv) {
                        *slot += e * g;
                    }
                }
            }
        }

        // Constraint side.
        let mut g_cin = vec![0.0; m * wc_in];
        {
            let mut g_sc = vec![0.0; wv_in];
            for i in 0..m {
                let mut g_pre = vec![0.0; hidden];
                for r in 0..hidden {
                    if lc.c_pre[i * hidden + r] > 0.0 {
                        g_pre[r] = g_c[i * hidden + r];
                    }
                }
                outer_add(
                    &mut lg.cons_self,
                    hidden,
                    wc_in,
                    &g_pre,
                    &c_in[i * wc_in..(i + 1) * wc_in],
                );
                outer_add(
                    &mut lg.cons_neigh,
                    hidden,
                    wv_in,
                    &g_pre,
                    &lc.s_c[i * wv_in..(i + 1) * wv_in],
                );
                matvec_t_add(
                    &params.cons_self,
                    hidden,
                    wc_in,
                    &g_pre,
                    &mut g_cin[i * wc_in..(i + 1) * wc_in],
                );
                g_sc.iter_mut().for_each(|x| *x = 0.0);
                matvec_t_add(&params.cons_neigh, hidden, wv_in, &g_pre, &mut g_sc);
                for &(v, e) in cache.cons_adj.neighbors(i) {
                    let row = &mut g_vin[v * wv_in..(v + 1) * wv_in];
                    for (slot, &g) in row.iter_mut().zip(&g_sc) {
                        *slot += e * g;
                    }
                }
            }
        }

        g_v = g_vin;
        g_c = g_cin;
    }
}

/// One training triplet, borrowing featurized graphs.
#[derive(Debug, Clone, Copy)]
pub struct TripletRef<'a> {
    pub anchor: &'a BipartiteGraph,
    pub positive: &'a BipartiteGraph,
    pub negative: &'a BipartiteGraph,
}

/// Mean triplet loss over a batch and its exact parameter gradients.
pub fn compute_gradients(
    model: &EncoderModel,
    batch: &[TripletRef<'_>],
    alpha: f64,
) -> Result<(Gradients, f64), GnnError> {
    let mut grads = Gradients::zeros_like(model);
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for triplet in batch {
        let (ea, cache_a) = forward_with_cache(model, triplet.anchor)?;
        let (ep, cache_p) = forward_with_cache(model, triplet.positive)?;
        let (en, cache_n) = forward_with_cache(model, triplet.negative)?;
        let margin = squared_distance(&ea, &ep) - squared_distance(&ea, &en) + alpha;
        if margin > 0.0 {
            total += margin;
            let dim = ea.len();
            let mut g_a = vec![0.0; dim];
            let mut g_p = vec![0.0; dim];
            let mut g_n = vec![0.0; dim];
            for k in 0..dim {
                let dap = ea[k] - ep[k];
                let dan = ea[k] - en[k];
                g_a[k] = scale * 2.0 * (dap - dan);
                g_p[k] = scale * -2.0 * dap;
                g_n[k] = scale * 2.0 * dan;
            }
            backward_graph(model, triplet.anchor, &cache_a, &g_a, &mut grads);
            backward_graph(model, triplet.positive, &cache_p, &g_p, &mut grads);
            backward_graph(model, triplet.negative, &cache_n, &g_n, &mut grads);
        }
    }
    let mean = total * scale;
    if !mean.is_finite() || !grads.is_finite() {
        return Err(GnnError::NonFiniteLoss);
    }
    Ok((grads, mean))
}

/// Mean batch loss without gradients.
pub fn batch_loss(
    model: &EncoderModel,
    batch: &[TripletRef<'_>],
    alpha: f64,
) -> Result<f64, GnnError> {
    let mut total = 0.0;
    for triplet in batch {
        let ea = super::forward::forward_embed(model, triplet.anchor)?;
        let ep = super::forward::forward_embed(model, triplet.positive)?;
        let en = super::forward::forward_embed(model, triplet.negative)?;
        total += super::loss::triplet_loss(&ea, &ep, &en, alpha);
    }
    Ok(total / batch.len() as f64)
}

/// One Adam step on the mean batch loss. Returns the pre-update loss.
pub fn train_step(
    model: &mut EncoderModel,
    optimizer: &mut AdamState,
    batch: &[TripletRef<'_>],
    alpha: f64,
    lr: f64,
) -> Result<f64, GnnError> {
    let (grads, loss) = compute_gradients(model, batch, alpha)?;
    optimizer.step(model, &grads, lr);
    Ok(loss)
}

const FD_STEP: f64 = 1e-5;
const KINK_GUARD: f64 = 1e-3;
/// Rejection window around rectifier and max-pool kinks. A perturbation of
/// FD_STEP can move a pre-activation by roughly its input norm, so the
/// window is a comfortable multiple of the step.
const PIECEWISE_GUARD: f64 = 2e-4;

/// Compares every analytic partial derivative against a central finite
/// difference and returns the worst relative error (denominator floored at
/// 1e-3 so exactly-zero gradients compare in absolute terms).
///
/// Requires the batch to sit strictly inside one smooth piece of the loss:
/// every hinge strictly active with margin slack above the kink guard, and
/// no rectifier input or max-pool runner-up within the piecewise guard of a
/// switch. Near-kink batches would make the finite differences meaningless.
pub fn gradient_check(
    model: &EncoderModel,
    batch: &[TripletRef<'_>],
    alpha: f64,
) -> Result<f64, GnnError> {
    for triplet in batch {
        let mut embeddings = Vec::with_capacity(3);
        for graph in [triplet.anchor, triplet.positive, triplet.negative] {
            let (embedding, cache) = forward_with_cache(model, graph)?;
            let hidden = model.dims.hidden;
            for layer in &cache.layers {
                if layer
                    .c_pre
                    .iter()
                    .chain(&layer.v_pre)
                    .any(|&x| x.abs() < PIECEWISE_GUARD)
                {
                    return Err(GnnError::DegenerateBatch(PIECEWISE_GUARD));
                }
            }
            let total = cache.n + cache.m;
            for ch in 0..hidden {
                let mut top = f64::NEG_INFINITY;
                let mut second = f64::NEG_INFINITY;
                for i in 0..total {
                    let v = cache.htilde[i * hidden + ch];
                    if v > top {
                        second = top;
                        top = v;
                    } else if v > second {
                        second = v;
                    }
                }
                if total > 1 && top - second < PIECEWISE_GUARD {
                    return Err(GnnError::DegenerateBatch(PIECEWISE_GUARD));
                }
            }
            embeddings.push(embedding);
        }
        let margin = squared_distance(&embeddings[0], &embeddings[1])
            - squared_distance(&embeddings[0], &embeddings[2])
            + alpha;
        if margin <= KINK_GUARD {
            return Err(GnnError::DegenerateBatch(KINK_GUARD));
        }
    }

    let (grads, _) = compute_gradients(model, batch, alpha)?;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let num_tensors = probe.tensors().len();
    for t in 0..num_tensors {
        let len = probe.tensors()[t].len();
        for k in 0..len {
            let original = probe.tensors()[t][k];
            probe.tensors_mut()[t][k] = original + FD_STEP;
            let up = batch_loss(&probe, batch, alpha)?;
            probe.tensors_mut()[t][k] = original - FD_STEP;
            let down = batch_loss(&probe, batch, alpha)?;
            probe.tensors_mut()[t][k] = original;
            let fd = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.tensors()[t][k];
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-3);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}
