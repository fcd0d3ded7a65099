//! Bipartite-graph and shallow aggregate features of a MILP instance.
//!
//! Both feature extractors are pure functions of the instance; nothing from
//! solver state is used, so a graph can be built once before any solve.

use thiserror::Error;

use crate::milp::instance::{MilpInstance, Sense, VarKind};

/// Width of a variable-node feature row: one-hot kind (3) + lower + upper.
pub const VAR_FEATURES: usize = 5;
/// Width of a constraint-node feature row: one-hot sense (3) + rhs.
pub const CONS_FEATURES: usize = 4;
/// Length of the shallow statistics vector.
pub const SHALLOW_FEATURES: usize = 14;

/// Variable nodes, constraint nodes and coefficient-weighted edges.
///
/// Infinite bounds are encoded as 0.0 in the bound slot; the kind one-hot
/// disambiguates (a binary variable really bounded at 0 versus a continuous
/// variable with an open bound).
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    /// Row-major n x VAR_FEATURES.
    pub var_features: Vec<f64>,
    /// Row-major m x CONS_FEATURES.
    pub cons_features: Vec<f64>,
    /// (variable index, constraint index, coefficient) per nonzero of A.
    pub edges: Vec<(usize, usize, f64)>,
    pub num_vars: usize,
    pub num_cons: usize,
}

impl BipartiteGraph {
    pub fn var_row(&self, i: usize) -> &[f64] {
        &self.var_features[i * VAR_FEATURES..(i + 1) * VAR_FEATURES]
    }

    pub fn cons_row(&self, i: usize) -> &[f64] {
        &self.cons_features[i * CONS_FEATURES..(i + 1) * CONS_FEATURES]
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Extracts the bipartite representation of an instance.
pub fn extract_bipartite(instance: &MilpInstance) -> BipartiteGraph {
    let n = instance.num_vars();
    let m = instance.num_constraints();
    let mut var_features = Vec::with_capacity(n * VAR_FEATURES);
    for j in 0..n {
        let kind = instance.var_kinds[j];
        var_features.push((kind == VarKind::Binary) as u8 as f64);
        var_features.push((kind == VarKind::Integer) as u8 as f64);
        var_features.push((kind == VarKind::Continuous) as u8 as f64);
        let (lo, up) = instance.var_bounds[j];
        var_features.push(finite_or_zero(lo));
        var_features.push(finite_or_zero(up));
    }
    let mut cons_features = Vec::with_capacity(m * CONS_FEATURES);
    for i in 0..m {
        let sense = instance.senses[i];
        cons_features.push((sense == Sense::Ge) as u8 as f64);
        cons_features.push((sense == Sense::Le) as u8 as f64);
        cons_features.push((sense == Sense::Eq) as u8 as f64);
        cons_features.push(instance.rhs[i]);
    }
    let edges = instance
        .constraints
        .iter()
        .map(|&(r, c, v)| (c, r, v))
        .collect();
    BipartiteGraph {
        var_features,
        cons_features,
        edges,
        num_vars: n,
        num_cons: m,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FeaturizeError {
    #[error("EmptyConstraints: shallow features need at least one constraint")]
    EmptyConstraints,
}

/// Shallow aggregate feature vector, fixed order:
/// `[n, m, nnz, obj min/max/mean/std, A-nonzero min/max/mean/std, rhs min/mean/std]`.
///
/// Statistics over A cover stored nonzeros only; std entries are population
/// standard deviations.
pub fn shallow_features(instance: &MilpInstance) -> Result<Vec<f64>, FeaturizeError> {
    if instance.num_constraints() == 0 {
        return Err(FeaturizeError::EmptyConstraints);
    }
    let mut out = Vec::with_capacity(SHALLOW_FEATURES);
    out.push(instance.num_vars() as f64);
    out.push(instance.num_constraints() as f64);
    out.push(instance.nnz() as f64);

    let stats = |values: &mut dyn Iterator<Item = f64>| -> (f64, f64, f64, f64) {
        let v: Vec<f64> = values.collect();
        if v.is_empty() {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
        (min, max, mean, var.sqrt())
    };

    let (omin, omax, omean, ostd) = stats(&mut instance.objective.iter().copied());
    out.extend([omin, omax, omean, ostd]);
    let (amin, amax, amean, astd) = stats(&mut instance.constraints.iter().map(|&(_, _, v)| v));
    out.extend([amin, amax, amean, astd]);
    let (bmin, _, bmean, bstd) = stats(&mut instance.rhs.iter().copied());
    out.extend([bmin, bmean, bstd]);
    debug_assert_eq!(out.len(), SHALLOW_FEATURES);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::generate::{generate_instance, Family};
    use crate::milp::instance::MilpInstance;

    #[test]
    fn counts_match_instance() {
        let inst = generate_instance(Family::Placement, (20, 10), 3).unwrap();
        let g = extract_bipartite(&inst);
        assert_eq!(g.num_vars, 20);
        assert_eq!(g.num_cons, 10);
        assert_eq!(g.edges.len(), inst.nnz());
        for i in 0..g.num_vars {
            let row = g.var_row(i);
            assert_eq!(row[0] + row[1] + row[2], 1.0);
        }
        for i in 0..g.num_cons {
            let row = g.cons_row(i);
            assert_eq!(row[0] + row[1] + row[2], 1.0);
        }
    }

    #[test]
    fn binary_unit_box_row() {
        let inst = MilpInstance::new(
            "b",
            vec![1.0],
            vec![(0, 0, 1.0)],
            vec![1.0],
            vec![Sense::Ge],
            vec![VarKind::Binary],
            vec![(0.0, 1.0)],
        )
        .unwrap();
        let g = extract_bipartite(&inst);
        assert_eq!(g.var_row(0), &[1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(g.cons_row(0), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn infinite_bound_becomes_zero() {
        let inst = MilpInstance::new(
            "c",
            vec![1.0],
            vec![(0, 0, 1.0)],
            vec![1.0],
            vec![Sense::Le],
            vec![VarKind::Continuous],
            vec![(f64::NEG_INFINITY, f64::INFINITY)],
        )
        .unwrap();
        let g = extract_bipartite(&inst);
        assert_eq!(g.var_row(0), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn permuted_variables_give_isomorphic_graph() {
        let inst = generate_instance(Family::Cover, (12, 6), 5).unwrap();
        let n = inst.num_vars();
        // Reverse the variable order.
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = MilpInstance::new(
            inst.name.clone(),
            perm.iter().map(|&j| inst.objective[j]).collect(),
            inst.constraints
                .iter()
                .map(|&(r, c, v)| (r, perm.iter().position(|&p| p == c).unwrap(), v))
                .collect(),
            inst.rhs.clone(),
            inst.senses.clone(),
            perm.iter().map(|&j| inst.var_kinds[j]).collect(),
            perm.iter().map(|&j| inst.var_bounds[j]).collect(),
        )
        .unwrap();
        let g = extract_bipartite(&inst);
        let gp = extract_bipartite(&permuted);
        // Relabeling the permuted graph's variable indices back must
        // reproduce the original node rows and edge set.
        for (new_idx, &old_idx) in perm.iter().enumerate() {
            assert_eq!(g.var_row(old_idx), gp.var_row(new_idx));
        }
        let mut edges: Vec<(usize, usize, u64)> = g
            .edges
            .iter()
            .map(|&(v, c, w)| (v, c, w.to_bits()))
            .collect();
        let mut back: Vec<(usize, usize, u64)> = gp
            .edges
            .iter()
            .map(|&(v, c, w)| (perm[v], c, w.to_bits()))
            .collect();
        edges.sort_unstable();
        back.sort_unstable();
        assert_eq!(edges, back);
    }

    #[test]
    fn constant_objective_stats() {
        let inst = MilpInstance::new(
            "s",
            vec![3.0, 3.0, 3.0],
            vec![(0, 0, 1.0), (0, 1, 2.0)],
            vec![1.0],
            vec![Sense::Ge],
            vec![VarKind::Continuous; 3],
            vec![(0.0, 1.0); 3],
        )
        .unwrap();
        let f = shallow_features(&inst).unwrap();
        assert_eq!(f.len(), SHALLOW_FEATURES);
        assert_eq!(&f[3..7], &[3.0, 3.0, 3.0, 0.0]);
    }

    #[test]
    fn matches_straight_line_recomputation() {
        // Independent recomputation of each statistic from its definition.
        let inst = generate_instance(Family::KnapsackMulti, (9, 4), 77).unwrap();
        let f = shallow_features(&inst).unwrap();

        let obj = &inst.objective;
        let nnz: Vec<f64> = inst.constraints.iter().map(|&(_, _, v)| v).collect();
        let rhs = &inst.rhs;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let std = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let minv = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let maxv = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let expected = vec![
            9.0,
            4.0,
            nnz.len() as f64,
            minv(obj),
            maxv(obj),
            mean(obj),
            std(obj),
            minv(&nnz),
            maxv(&nnz),
            mean(&nnz),
            std(&nnz),
            minv(rhs),
            mean(rhs),
            std(rhs),
        ];
        for (a, b) in f.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn shallow_vector_is_not_injective() {
        // Swapping two distinct A values preserves every aggregate statistic
        // but changes the instance.
        let inst = generate_instance(Family::Placement, (10, 5), 1).unwrap();
        let mut swapped = inst.clone();
        let (a, b) = (swapped.constraints[0], swapped.constraints[1]);
        swapped.constraints[0].2 = b.2;
        swapped.constraints[1].2 = a.2;
        assert_ne!(inst, swapped);
        assert_eq!(
            shallow_features(&inst).unwrap(),
            shallow_features(&swapped).unwrap()
        );
    }

    #[test]
    fn zero_constraints_is_an_error() {
        let inst = MilpInstance::new(
            "none",
            vec![1.0],
            vec![],
            vec![],
            vec![],
            vec![VarKind::Continuous],
            vec![(0.0, 1.0)],
        )
        .unwrap();
        assert_eq!(
            shallow_features(&inst).unwrap_err(),
            FeaturizeError::EmptyConstraints
        );
    }
}
