//! Encoder forward pass.
//!
//! Within each layer the constraint side updates first, then the variable
//! side aggregates the freshly updated constraint features; a rectifier
//! follows each side's update. After the last layer the variable and
//! constraint nodes are pooled together: per-graph channel standardization,
//! then elementwise max-pool concatenated with attention-pool, then the
//! projection to the embedding.
//!
//! Every reduction over a *node set* or *neighbor set* (aggregation, mean,
//! variance, softmax normalization, attention pooling, max) goes through
//! exact summation or max, so embeddings are invariant to variable and
//! constraint reordering down to the last bit.

use thiserror::Error;

use super::model::{Embedding, EncoderModel};
use crate::featurize::BipartiteGraph;
use crate::numeric::ExactSum;

pub const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum GnnError {
    #[error("ShapeMismatch: graph feature widths ({0}, {1}) do not match model ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("NonFiniteLoss: loss or gradient became non-finite")]
    NonFiniteLoss,
    #[error("DegenerateBatch: a triplet hinge is within {0} of its kink")]
    DegenerateBatch(f64),
}

/// Compressed adjacency: for every node, its incident (other node, coeff).
#[derive(Debug, Clone)]
pub struct Csr {
    pub offsets: Vec<usize>,
    pub items: Vec<(usize, f64)>,
}

impl Csr {
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.items[self.offsets[i]..self.offsets[i + 1]]
    }
}

fn build_adjacency(graph: &BipartiteGraph) -> (Csr, Csr) {
    let (n, m) = (graph.num_vars, graph.num_cons);
    let mut cons_counts = vec![0usize; m];
    let mut var_counts = vec![0usize; n];
    for &(v, c, _) in &graph.edges {
        cons_counts[c] += 1;
        var_counts[v] += 1;
    }
    let prefix = |counts: &[usize]| {
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &c in counts {
            acc += c;
            offsets.push(acc);
        }
        offsets
    };
    let cons_offsets = prefix(&cons_counts);
    let var_offsets = prefix(&var_counts);
    let mut cons_items = vec![(0usize, 0.0); graph.edges.len()];
    let mut var_items = vec![(0usize, 0.0); graph.edges.len()];
    let mut cons_fill = cons_offsets.clone();
    let mut var_fill = var_offsets.clone();
    for &(v, c, w) in &graph.edges {
        cons_items[cons_fill[c]] = (v, w);
        cons_fill[c] += 1;
        var_items[var_fill[v]] = (c, w);
        var_fill[v] += 1;
    }
    (
        Csr {
            offsets: cons_offsets,
            items: cons_items,
        },
        Csr {
            offsets: var_offsets,
            items: var_items,
        },
    )
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    /// m x cons_neigh_in: neighbor aggregate feeding the constraint update.
    pub s_c: Vec<f64>,
    pub c_pre: Vec<f64>,
    pub c_out: Vec<f64>,
    /// n x hidden: neighbor aggregate of *updated* constraint features.
    pub s_v: Vec<f64>,
    pub v_pre: Vec<f64>,
    pub v_out: Vec<f64>,
}

/// Every intermediate needed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub n: usize,
    pub m: usize,
    pub cons_adj: Csr,
    pub var_adj: Csr,
    pub layers: Vec<LayerCache>,
    /// (n+m) x hidden standardized features (variables first).
    pub xhat: Vec<f64>,
    /// Per-channel sqrt(variance + eps).
    pub sd: Vec<f64>,
    /// (n+m) x hidden affine-transformed features.
    pub htilde: Vec<f64>,
    /// Softmax attention weight per node.
    pub attn_p: Vec<f64>,
    /// Row index winning the max-pool per channel (first among ties).
    pub argmax: Vec<usize>,
    /// 2*hidden pooled vector (max ++ attention).
    pub z: Vec<f64>,
    pub embedding: Embedding,
}

/// y[r] += W[r, :] . x  for row-major W (rows x cols).
#[inline]
fn matvec_add(w: &[f64], rows: usize, cols: usize, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        y[r] += acc;
    }
}

/// Exact neighbor aggregation: out[i][ch] = sum over incident (j, e) of
/// e * feats[j][ch], order-independent.
fn aggregate(adj: &Csr, feats: &[f64], width: usize, out: &mut [f64], accs: &mut [ExactSum]) {
    let nodes = adj.offsets.len() - 1;
    debug_assert_eq!(out.len(), nodes * width);
    for i in 0..nodes {
        for acc in accs.iter_mut() {
            acc.reset();
        }
        for &(j, e) in adj.neighbors(i) {
            let row = &feats[j * width..(j + 1) * width];
            for (ch, &x) in row.iter().enumerate() {
                accs[ch].add(e * x);
            }
        }
        for ch in 0..width {
            out[i * width + ch] = accs[ch].value();
        }
    }
}

/// Runs the encoder and returns the embedding together with the cache the
/// backward pass consumes.
pub fn forward_with_cache(
    model: &EncoderModel,
    graph: &BipartiteGraph,
) -> Result<(Embedding, ForwardCache), GnnError> {
    let dims = model.dims;
    let (n, m) = (graph.num_vars, graph.num_cons);
    let graph_var_width = graph
        .var_features
        .len()
        .checked_div(n)
        .unwrap_or(dims.var_in);
    let graph_cons_width = graph
        .cons_features
        .len()
        .checked_div(m)
        .unwrap_or(dims.cons_in);
    if graph_var_width != dims.var_in || graph_cons_width != dims.cons_in {
        return Err(GnnError::ShapeMismatch(
            graph_var_width,
            graph_cons_width,
            dims.var_in,
            dims.cons_in,
        ));
    }

    let (cons_adj, var_adj) = build_adjacency(graph);
    let hidden = dims.hidden;
    let mut accs: Vec<ExactSum> = (0..hidden.max(dims.var_in)).map(|_| ExactSum::new()).collect();

    let mut v_in: Vec<f64> = graph.var_features.clone();
    let mut c_in: Vec<f64> = graph.cons_features.clone();
    let mut layers = Vec::with_capacity(dims.layers);

    for (l, params) in model.layers.iter().enumerate() {
        let wv_in = if l == 0 { dims.var_in } else { hidden };
        let wc_in = if l == 0 { dims.cons_in } else { hidden };

        // Constraint-side update.
        let mut s_c = vec![0.0; m * wv_in];
        aggregate(&cons_adj, &v_in, wv_in, &mut s_c, &mut accs[..wv_in]);
        let mut c_pre = vec![0.0; m * hidden];
        for i in 0..m {
            let out = &mut c_pre[i * hidden..(i + 1) * hidden];
            matvec_add(
                &params.cons_self,
                hidden,
                wc_in,
                &c_in[i * wc_in..(i + 1) * wc_in],
                out,
            );
            matvec_add(
                &params.cons_neigh,
                hidden,
                wv_in,
                &s_c[i * wv_in..(i + 1) * wv_in],
                out,
            );
        }
        let c_out: Vec<f64> = c_pre.iter().map(|&x| x.max(0.0)).collect();

        // Variable-side update against the updated constraint features.
        let mut s_v = vec![0.0; n * hidden];
        aggregate(&var_adj, &c_out, hidden, &mut s_v, &mut accs[..hidden]);
        let mut v_pre = vec![0.0; n * hidden];
        for j in 0..n {
            let out = &mut v_pre[j * hidden..(j + 1) * hidden];
            matvec_add(
                &params.var_self,
                hidden,
                wv_in,
                &v_in[j * wv_in..(j + 1) * wv_in],
                out,
            );
            matvec_add(
                &params.var_neigh,
                hidden,
                hidden,
                &s_v[j * hidden..(j + 1) * hidden],
                out,
            );
        }
        let v_out: Vec<f64> = v_pre.iter().map(|&x| x.max(0.0)).collect();

        layers.push(LayerCache {
            s_c,
            c_pre,
            c_out: c_out.clone(),
            s_v,
            v_pre,
            v_out: v_out.clone(),
        });
        v_in = v_out;
        c_in = c_out;
    }

    // Stack variables then constraints and standardize per channel.
    let total = n + m;
    let mut h = Vec::with_capacity(total * hidden);
    h.extend_from_slice(&v_in);
    h.extend_from_slice(&c_in);

    let mut xhat = vec![0.0; total * hidden];
    let mut sd = vec![0.0; hidden];
    for ch in 0..hidden {
        let mut acc = ExactSum::new();
        for i in 0..total {
            acc.add(h[i * hidden + ch]);
        }
        let mean = acc.value() / total as f64;
        acc.reset();
        for i in 0..total {
            let d = h[i * hidden + ch] - mean;
            acc.add(d * d);
        }
        let var = acc.value() / total as f64;
        let s = (var + NORM_EPS).sqrt();
        sd[ch] = s;
        for i in 0..total {
            xhat[i * hidden + ch] = (h[i * hidden + ch] - mean) / s;
        }
    }
    let mut htilde = vec![0.0; total * hidden];
    for i in 0..total {
        for ch in 0..hidden {
            htilde[i * hidden + ch] =
                model.norm_scale[ch] * xhat[i * hidden + ch] + model.norm_shift[ch];
        }
    }

    // Max pool (first row among exact ties wins; ties only matter for the
    // backward pass, the pooled value itself is order-free).
    let mut argmax = vec![0usize; hidden];
    let mut mx = vec![f64::NEG_INFINITY; hidden];
    for ch in 0..hidden {
        let mut best = f64::NEG_INFINITY;
        let mut best_i = 0;
        for i in 0..total {
            let v = htilde[i * hidden + ch];
            if v > best {
                best = v;
                best_i = i;
            }
        }
        mx[ch] = best;
        argmax[ch] = best_i;
    }

    // Attention pool.
    let mut scores = vec![0.0; total];
    for i in 0..total {
        let mut acc = 0.0;
        for ch in 0..hidden {
            acc += model.attention[ch] * htilde[i * hidden + ch];
        }
        scores[i] = acc;
    }
    let score_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| (s - score_max).exp()).collect();
    let denom = crate::numeric::fsum(exps.iter().copied());
    let attn_p: Vec<f64> = exps.iter().map(|&e| e / denom).collect();
    let mut attn = vec![0.0; hidden];
    for (ch, slot) in attn.iter_mut().enumerate() {
        let mut acc = ExactSum::new();
        for i in 0..total {
            acc.add(attn_p[i] * htilde[i * hidden + ch]);
        }
        *slot = acc.value();
    }

    let mut z = Vec::with_capacity(2 * hidden);
    z.extend_from_slice(&mx);
    z.extend_from_slice(&attn);

    let mut embedding = vec![0.0; dims.out];
    matvec_add(&model.projection, dims.out, 2 * hidden, &z, &mut embedding);

    let cache = ForwardCache {
        n,
        m,
        cons_adj,
        var_adj,
        layers,
        xhat,
        sd,
        htilde,
        attn_p,
        argmax,
        z,
        embedding: embedding.clone(),
    };
    Ok((embedding, cache))
}

/// Embeds a graph; output length is the model's `out` dimension.
pub fn forward_embed(model: &EncoderModel, graph: &BipartiteGraph) -> Result<Embedding, GnnError> {
    forward_with_cache(model, graph).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::extract_bipartite;
    use crate::gnn::model::{init_model, init_model_with_dims, ModelDims};
    use crate::milp::generate::{generate_instance, Family};
    use crate::milp::instance::{MilpInstance, VarKind};
    use crate::rng::SeededRng;

    fn permute_graph(graph: &BipartiteGraph, var_perm: &[usize], cons_perm: &[usize]) -> BipartiteGraph {
        // var_perm[new] = old
        let vw = crate::featurize::VAR_FEATURES;
        let cw = crate::featurize::CONS_FEATURES;
        let mut var_features = Vec::with_capacity(graph.var_features.len());
        for &old in var_perm {
            var_features.extend_from_slice(&graph.var_features[old * vw..(old + 1) * vw]);
        }
        let mut cons_features = Vec::with_capacity(graph.cons_features.len());
        for &old in cons_perm {
            cons_features.extend_from_slice(&graph.cons_features[old * cw..(old + 1) * cw]);
        }
        let var_new_of_old: Vec<usize> = {
            let mut v = vec![0; var_perm.len()];
            for (new, &old) in var_perm.iter().enumerate() {
                v[old] = new;
            }
            v
        };
        let cons_new_of_old: Vec<usize> = {
            let mut v = vec![0; cons_perm.len()];
            for (new, &old) in cons_perm.iter().enumerate() {
                v[old] = new;
            }
            v
        };
        let edges = graph
            .edges
            .iter()
            .map(|&(v, c, w)| (var_new_of_old[v], cons_new_of_old[c], w))
            .collect();
        BipartiteGraph {
            var_features,
            cons_features,
            edges,
            num_vars: graph.num_vars,
            num_cons: graph.num_cons,
        }
    }

    #[test]
    fn embedding_has_output_length_and_is_deterministic() {
        let model = init_model(5);
        let inst = generate_instance(Family::Placement, (12, 6), 1).unwrap();
        let graph = extract_bipartite(&inst);
        let a = forward_embed(&model, &graph).unwrap();
        let b = forward_embed(&model, &graph).unwrap();
        assert_eq!(a.len(), 256);
        assert!(a.iter().all(|v| v.is_finite()));
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn permutation_invariance_to_the_last_bit() {
        let model = init_model_with_dims(7, ModelDims { hidden: 16, out: 32, ..Default::default() });
        let mut rng = SeededRng::new(123);
        for seed in 0..10 {
            let inst = generate_instance(Family::Placement, (14, 7), seed).unwrap();
            let graph = extract_bipartite(&inst);
            let base = forward_embed(&model, &graph).unwrap();
            for _ in 0..3 {
                let mut var_perm: Vec<usize> = (0..graph.num_vars).collect();
                let mut cons_perm: Vec<usize> = (0..graph.num_cons).collect();
                rng.shuffle(&mut var_perm);
                rng.shuffle(&mut cons_perm);
                let shuffled = permute_graph(&graph, &var_perm, &cons_perm);
                let emb = forward_embed(&model, &shuffled).unwrap();
                for (x, y) in base.iter().zip(&emb) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn single_variable_no_constraints_is_total() {
        let inst = MilpInstance::new(
            "lonely",
            vec![1.0],
            vec![],
            vec![],
            vec![],
            vec![VarKind::Continuous],
            vec![(0.0, 1.0)],
        )
        .unwrap();
        let graph = extract_bipartite(&inst);
        let model = init_model(11);
        let emb = forward_embed(&model, &graph).unwrap();
        assert_eq!(emb.len(), 256);
        assert!(emb.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_mismatch_is_detected() {
        let inst = generate_instance(Family::Cover, (6, 3), 0).unwrap();
        let mut graph = extract_bipartite(&inst);
        // Truncate a feature column to fake a width mismatch.
        graph.var_features.truncate(graph.num_vars * 4);
        let model = init_model(1);
        match forward_embed(&model, &graph) {
            Err(GnnError::ShapeMismatch(4, _, 5, _)) => {}
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn matches_straight_line_reimplementation() {
        // Independent dense re-implementation of the update equations,
        // normalization, pooling and projection.
        let dims = ModelDims { hidden: 8, out: 16, ..Default::default() };
        let model = init_model_with_dims(21, dims);
        let inst = generate_instance(Family::Placement, (9, 5), 4).unwrap();
        let graph = extract_bipartite(&inst);
        let expected = reference_forward(&model, &graph);
        let got = forward_embed(&model, &graph).unwrap();
        assert_eq!(got.len(), expected.len());
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    /// Textbook-style dense forward used only as a test oracle.
    #[allow(clippy::needless_range_loop)]
    fn reference_forward(model: &EncoderModel, graph: &BipartiteGraph) -> Vec<f64> {
        let d = model.dims;
        let (n, m) = (graph.num_vars, graph.num_cons);
        let mat = |w: &[f64], rows: usize, cols: usize, x: &[f64]| -> Vec<f64> {
            (0..rows)
                .map(|r| (0..cols).map(|c| w[r * cols + c] * x[c]).sum::<f64>())
                .collect()
        };
        let mut vfeat: Vec<Vec<f64>> = (0..n).map(|i| graph.var_row(i).to_vec()).collect();
        let mut cfeat: Vec<Vec<f64>> = (0..m).map(|i| graph.cons_row(i).to_vec()).collect();
        for (l, p) in model.layers.iter().enumerate() {
            let wv = if l == 0 { d.var_in } else { d.hidden };
            let wc = if l == 0 { d.cons_in } else { d.hidden };
            let mut new_c = Vec::new();
            for i in 0..m {
                let mut agg = vec![0.0; wv];
                for &(v, c, e) in &graph.edges {
                    if c == i {
                        for ch in 0..wv {
                            agg[ch] += e * vfeat[v][ch];
                        }
                    }
                }
                let mut pre = mat(&p.cons_self, d.hidden, wc, &cfeat[i]);
                let neigh = mat(&p.cons_neigh, d.hidden, wv, &agg);
                for (a, b) in pre.iter_mut().zip(&neigh) {
                    *a += b;
                }
                new_c.push(pre.iter().map(|&x| x.max(0.0)).collect::<Vec<f64>>());
            }
            let mut new_v = Vec::new();
            for j in 0..n {
                let mut agg = vec![0.0; d.hidden];
                for &(v, c, e) in &graph.edges {
                    if v == j {
                        for ch in 0..d.hidden {
                            agg[ch] += e * new_c[c][ch];
                        }
                    }
                }
                let mut pre = mat(&p.var_self, d.hidden, wv, &vfeat[j]);
                let neigh = mat(&p.var_neigh, d.hidden, d.hidden, &agg);
                for (a, b) in pre.iter_mut().zip(&neigh) {
                    *a += b;
                }
                new_v.push(pre.iter().map(|&x| x.max(0.0)).collect::<Vec<f64>>());
            }
            vfeat = new_v;
            cfeat = new_c;
        }
        let mut rows = vfeat;
        rows.extend(cfeat);
        let total = rows.len();
        let mut htilde = vec![vec![0.0; d.hidden]; total];
        for ch in 0..d.hidden {
            let mean: f64 = rows.iter().map(|r| r[ch]).sum::<f64>() / total as f64;
            let var: f64 =
                rows.iter().map(|r| (r[ch] - mean) * (r[ch] - mean)).sum::<f64>() / total as f64;
            let sd = (var + NORM_EPS).sqrt();
            for i in 0..total {
                htilde[i][ch] =
                    model.norm_scale[ch] * ((rows[i][ch] - mean) / sd) + model.norm_shift[ch];
            }
        }
        let mx: Vec<f64> = (0..d.hidden)
            .map(|ch| htilde.iter().map(|r| r[ch]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let scores: Vec<f64> = htilde
            .iter()
            .map(|r| r.iter().zip(&model.attention).map(|(h, w)| h * w).sum())
            .collect();
        let smax = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - smax).exp()).collect();
        let denom: f64 = exps.iter().sum();
        let attn: Vec<f64> = (0..d.hidden)
            .map(|ch| {
                htilde
                    .iter()
                    .zip(&exps)
                    .map(|(r, e)| (e / denom) * r[ch])
                    .sum()
            })
            .collect();
        let mut z = mx;
        z.extend(attn);
        mat(&model.projection, d.out, 2 * d.hidden, &z)
    }
}
