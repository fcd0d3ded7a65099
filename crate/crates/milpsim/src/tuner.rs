//! Offline per-instance configuration search.
//!
//! Evaluation 1 is always the default configuration; the remaining budget
//! alternates between uniform samples of the space and local perturbations
//! of the incumbent (one parameter redrawn per proposal). Random plus local
//! search keeps the module swappable for a model-based searcher without
//! touching the store contract.

use std::collections::HashMap;

use crate::milp::instance::MilpInstance;
use crate::rng::{derive_seed, SeededRng};
use crate::solver::{branch_and_bound, ConfigSpace, Limits, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub evaluations: usize,
    pub per_eval_limits: Limits,
    pub seed: u64,
}

impl SearchBudget {
    pub fn new(evaluations: usize, per_eval_limits: Limits, seed: u64) -> Self {
        assert!(evaluations >= 1, "budget needs at least one evaluation");
        SearchBudget {
            evaluations,
            per_eval_limits,
            seed,
        }
    }
}

/// Searches the configuration space of one instance. Returns every
/// evaluated (config, cost) pair sorted by non-descending cost (ties keep
/// evaluation order); deterministic under the budget seed.
pub fn search_configs(
    instance: &MilpInstance,
    space: &ConfigSpace,
    budget: &SearchBudget,
) -> Vec<(SolverConfig, f64)> {
    let solve_seed = derive_seed(budget.seed, 0x736f6c76);
    let mut proposal_rng = SeededRng::new(derive_seed(budget.seed, 0x70726f70));

    let mut evaluated: Vec<(SolverConfig, f64)> = Vec::with_capacity(budget.evaluations);
    let mut incumbent: (SolverConfig, f64) = {
        let result = branch_and_bound(
            instance,
            &space.default_config,
            &budget.per_eval_limits,
            solve_seed,
        );
        evaluated.push((space.default_config, result.best_cost));
        (space.default_config, result.best_cost)
    };

    for eval_idx in 1..budget.evaluations {
        let candidate = if eval_idx % 2 == 1 {
            space.sample_with(&mut proposal_rng)
        } else {
            space.perturb_with(&incumbent.0, &mut proposal_rng)
        };
        let result =
            branch_and_bound(instance, &candidate, &budget.per_eval_limits, solve_seed);
        evaluated.push((candidate, result.best_cost));
        if result.best_cost < incumbent.1 {
            incumbent = (candidate, result.best_cost);
        }
    }

    let mut order: Vec<usize> = (0..evaluated.len()).collect();
    order.sort_by(|&a, &b| evaluated[a].1.total_cmp(&evaluated[b].1).then(a.cmp(&b)));
    order.into_iter().map(|i| evaluated[i]).collect()
}

/// Key for grouping identical configurations across instances.
fn config_key(c: &SolverConfig) -> (u8, u8, u32, u64, u64) {
    let b = match c.branching_rule {
        crate::solver::BranchingRule::MostFractional => 0,
        crate::solver::BranchingRule::Pseudocost => 1,
        crate::solver::BranchingRule::Random => 2,
    };
    let s = match c.node_selection {
        crate::solver::NodeSelection::BestBound => 0,
        crate::solver::NodeSelection::Dfs => 1,
        crate::solver::NodeSelection::Hybrid => 2,
    };
    (
        b,
        s,
        c.plunge_depth,
        c.rounding_heuristic_freq.to_bits(),
        c.branching_score_factor.to_bits(),
    )
}

/// The per-distribution incumbent baseline: scores every distinct searched
/// configuration by its mean finite cost over the training instances where
/// it was evaluated and returns the best mean. Ties go to the configuration
/// seen first.
pub fn incumbent_config(
    search_results: &[Vec<(SolverConfig, f64)>],
) -> Option<SolverConfig> {
    // config -> (example, total cost, count, first-seen order)
    type Entry = (SolverConfig, f64, usize, usize);
    let mut stats: HashMap<(u8, u8, u32, u64, u64), Entry> = HashMap::new();
    let mut seen = 0usize;
    for per_instance in search_results {
        for (config, cost) in per_instance {
            if !cost.is_finite() {
                continue;
            }
            let entry = stats
                .entry(config_key(config))
                .or_insert_with(|| {
                    seen += 1;
                    (*config, 0.0, 0, seen)
                });
            entry.1 += cost;
            entry.2 += 1;
        }
    }
    stats
        .into_values()
        .map(|(config, total, count, order)| (total / count as f64, order, config))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, _, config)| config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::generate::{generate_instance, Family};

    fn instance() -> MilpInstance {
        generate_instance(Family::Placement, (12, 6), 3).unwrap()
    }

    #[test]
    fn single_evaluation_is_the_default_config() {
        let inst = instance();
        let space = ConfigSpace::default();
        let budget = SearchBudget::new(1, Limits::nodes(100), 5);
        let out = search_configs(&inst, &space, &budget);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, space.default_config);
    }

    #[test]
    fn results_are_sorted_and_bounded_by_budget() {
        let inst = instance();
        let space = ConfigSpace::default();
        let budget = SearchBudget::new(9, Limits::nodes(60), 5);
        let out = search_configs(&inst, &space, &budget);
        assert_eq!(out.len(), 9);
        for w in out.windows(2) {
            assert!(w[0].1 <= w[1].1 || w[1].1.is_nan());
        }
    }

    #[test]
    fn best_cost_never_exceeds_default_cost() {
        let inst = instance();
        let space = ConfigSpace::default();
        let budget = SearchBudget::new(8, Limits::nodes(60), 11);
        let out = search_configs(&inst, &space, &budget);
        let default_cost = out
            .iter()
            .find(|(c, _)| *c == space.default_config)
            .unwrap()
            .1;
        assert!(out[0].1 <= default_cost);
    }

    #[test]
    fn search_is_deterministic() {
        let inst = instance();
        let space = ConfigSpace::default();
        let budget = SearchBudget::new(7, Limits::nodes(60), 23);
        let a = search_configs(&inst, &space, &budget);
        let b = search_configs(&inst, &space, &budget);
        assert_eq!(a.len(), b.len());
        for ((ca, xa), (cb, xb)) in a.iter().zip(&b) {
            assert_eq!(ca, cb);
            assert_eq!(xa.to_bits(), xb.to_bits());
        }
    }

    #[test]
    fn larger_budgets_extend_the_proposal_prefix() {
        // Proposals are a deterministic stream, so a bigger budget evaluates
        // a superset and its best cost never worsens.
        let inst = instance();
        let space = ConfigSpace::default();
        let mut best = f64::INFINITY;
        for evals in [1usize, 3, 6, 12] {
            let budget = SearchBudget::new(evals, Limits::nodes(60), 17);
            let out = search_configs(&inst, &space, &budget);
            assert_eq!(out.len(), evals);
            assert!(out[0].1 <= best);
            best = out[0].1;
        }
    }

    #[test]
    fn incumbent_prefers_configs_with_lower_mean() {
        let space = ConfigSpace::default();
        let good = space.sample(1);
        let bad = space.sample(2);
        let results = vec![
            vec![(good, 1.0), (bad, 5.0)],
            vec![(good, 2.0), (bad, 6.0)],
        ];
        assert_eq!(incumbent_config(&results), Some(good));
        assert_eq!(incumbent_config(&[]), None);
    }
}
