//! Configurable branch-and-bound over the LP relaxation.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::config::{BranchingRule, NodeSelection, SolverConfig};
use super::simplex::{solve_lp_relaxation, LpError, LpOutcome};
use crate::milp::instance::{evaluate_assignment, Assignment, MilpInstance, FEASIBILITY_TOL};
use crate::rng::SeededRng;

const INTEGRALITY_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Tree exhausted with an incumbent: the cost is the proven optimum.
    Optimal,
    /// A limit stopped the search but a feasible solution is in hand.
    FeasibleLimit,
    /// A limit stopped the search before any feasible solution was found.
    NoSolution,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "OPTIMAL",
            SolveStatus::FeasibleLimit => "FEASIBLE_LIMIT",
            SolveStatus::NoSolution => "NO_SOLUTION",
            SolveStatus::Infeasible => "INFEASIBLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal bound: cost of the best feasible solution, `+inf` if none.
    pub best_cost: f64,
    pub best_assignment: Option<Assignment>,
    /// Global lower bound at termination.
    pub best_bound: f64,
    pub nodes_explored: u64,
    /// Measured wall time in seconds. Excluded from determinism comparisons.
    pub wall_time: f64,
    /// Count of LP relaxations abandoned for numerical reasons; such nodes
    /// are treated as infeasible (conservative for the primal bound).
    pub lp_warnings: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_nodes: u64,
    pub max_seconds: f64,
}

impl Limits {
    pub fn nodes(max_nodes: u64) -> Self {
        Limits {
            max_nodes,
            max_seconds: f64::INFINITY,
        }
    }
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_nodes: 10_000,
            max_seconds: f64::INFINITY,
        }
    }
}

/// Total-order wrapper so f64 bounds can key the best-bound heap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Node {
    id: u64,
    depth: u32,
    bounds: Vec<(f64, f64)>,
    /// Parent relaxation objective; the node's initial lower bound.
    bound: f64,
    /// (variable, parent fraction toward this child, parent objective) for
    /// the pseudocost update once this node's own LP is solved.
    parent_branch: Option<(usize, f64, f64)>,
}

struct OpenSet {
    selection: NodeSelection,
    plunge_depth: u32,
    heap: BinaryHeap<Reverse<(OrdF64, u64, usize)>>,
    stack: Vec<usize>,
    nodes: Vec<Option<Node>>,
    anchor_depth: u32,
}

impl OpenSet {
    fn new(selection: NodeSelection, plunge_depth: u32) -> Self {
        OpenSet {
            selection,
            plunge_depth,
            heap: BinaryHeap::new(),
            stack: Vec::new(),
            nodes: Vec::new(),
            anchor_depth: 0,
        }
    }

    fn push(&mut self, node: Node) {
        let slot = self.nodes.len();
        let key = (OrdF64(node.bound), node.id);
        let to_stack = match self.selection {
            NodeSelection::BestBound => false,
            NodeSelection::Dfs => true,
            NodeSelection::Hybrid => {
                node.depth.saturating_sub(self.anchor_depth) <= self.plunge_depth
            }
        };
        self.nodes.push(Some(node));
        if to_stack {
            self.stack.push(slot);
        } else {
            self.heap.push(Reverse((key.0, key.1, slot)));
        }
    }

    fn pop(&mut self) -> Option<Node> {
        if let Some(slot) = self.stack.pop() {
            return self.nodes[slot].take();
        }
        let Reverse((_, _, slot)) = self.heap.pop()?;
        let node = self.nodes[slot].take()?;
        if self.selection == NodeSelection::Hybrid {
            self.anchor_depth = node.depth;
        }
        Some(node)
    }

    fn is_empty(&self) -> bool {
        self.stack.is_empty() && self.heap.is_empty()
    }

    /// Minimum bound among open nodes.
    fn min_bound(&self) -> Option<f64> {
        self.nodes
            .iter()
            .flatten()
            .map(|n| n.bound)
            .min_by(f64::total_cmp)
    }
}

struct Pseudocost {
    down: Vec<f64>,
    up: Vec<f64>,
    down_count: Vec<u64>,
    up_count: Vec<u64>,
}

impl Pseudocost {
    fn new(instance: &MilpInstance) -> Self {
        let init: Vec<f64> = instance.objective.iter().map(|c| c.abs() + 1e-4).collect();
        let n = init.len();
        Pseudocost {
            down: init.clone(),
            up: init,
            down_count: vec![0; n],
            up_count: vec![0; n],
        }
    }

    /// Running mean of objective degradation per unit fraction.
    fn record(&mut self, var: usize, toward_down: bool, frac: f64, degradation: f64) {
        let per_unit = degradation.max(0.0) / frac.max(1e-6);
        if toward_down {
            self.down_count[var] += 1;
            let k = self.down_count[var] as f64;
            self.down[var] += (per_unit - self.down[var]) / k;
        } else {
            self.up_count[var] += 1;
            let k = self.up_count[var] as f64;
            self.up[var] += (per_unit - self.up[var]) / k;
        }
    }
}

/// Deterministic branch-and-bound solve of `instance` under `config`.
///
/// Any returned assignment is feasible per [`evaluate_assignment`] at the
/// default tolerance, and `best_cost` is that assignment's exact objective
/// dot product. Limits produce `FeasibleLimit` / `NoSolution`, never errors.
pub fn branch_and_bound(
    instance: &MilpInstance,
    config: &SolverConfig,
    limits: &Limits,
    seed: u64,
) -> SolveResult {
    let start = Instant::now();
    let mut rng = SeededRng::new(seed);
    let mut pseudo = Pseudocost::new(instance);
    let mut open = OpenSet::new(config.node_selection, config.plunge_depth);
    let mut next_id = 0u64;
    let mut nodes_explored = 0u64;
    let mut lp_warnings = 0u64;
    let mut incumbent: Option<(f64, Assignment)> = None;
    let mut saw_unbounded = false;

    open.push(Node {
        id: next_id,
        depth: 0,
        bounds: instance.var_bounds.clone(),
        bound: f64::NEG_INFINITY,
        parent_branch: None,
    });
    next_id += 1;

    let finish = |status: SolveStatus,
                  incumbent: Option<(f64, Assignment)>,
                  best_bound: f64,
                  nodes_explored: u64,
                  lp_warnings: u64| {
        let (best_cost, best_assignment) = match incumbent {
            Some((cost, a)) => (cost, Some(a)),
            None => (f64::INFINITY, None),
        };
        SolveResult {
            status,
            best_cost,
            best_assignment,
            best_bound,
            nodes_explored,
            wall_time: start.elapsed().as_secs_f64(),
            lp_warnings,
        }
    };

    loop {
        if open.is_empty() {
            // Tree exhausted.
            return match (&incumbent, saw_unbounded) {
                (Some((cost, _)), _) => {
                    let cost = *cost;
                    finish(
                        SolveStatus::Optimal,
                        incumbent,
                        cost,
                        nodes_explored,
                        lp_warnings,
                    )
                }
                (None, true) => finish(
                    SolveStatus::NoSolution,
                    None,
                    f64::NEG_INFINITY,
                    nodes_explored,
                    lp_warnings,
                ),
                (None, false) => finish(
                    SolveStatus::Infeasible,
                    None,
                    f64::INFINITY,
                    nodes_explored,
                    lp_warnings,
                ),
            };
        }

        if nodes_explored >= limits.max_nodes
            || start.elapsed().as_secs_f64() > limits.max_seconds
        {
            let bound = if saw_unbounded {
                f64::NEG_INFINITY
            } else {
                open.min_bound().unwrap_or(f64::INFINITY)
            };
            let status = if incumbent.is_some() {
                SolveStatus::FeasibleLimit
            } else {
                SolveStatus::NoSolution
            };
            return finish(status, incumbent, bound, nodes_explored, lp_warnings);
        }

        let node = match open.pop() {
            Some(n) => n,
            None => unreachable!("open set checked non-empty"),
        };

        // Bound-based pruning against the incumbent.
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - PRUNE_TOL {
                continue;
            }
        }

        nodes_explored += 1;
        let (lp_values, lp_obj) = match solve_lp_relaxation(instance, &node.bounds) {
            Ok(LpOutcome::Optimal { values, objective }) => (values, objective),
            Ok(LpOutcome::Infeasible) => continue,
            Ok(LpOutcome::Unbounded) => {
                saw_unbounded = true;
                continue;
            }
            Err(LpError::NumericalBreakdown(_)) => {
                lp_warnings += 1;
                continue;
            }
        };

        // The sign of the stored fraction encodes which side the parent
        // branched toward (negative = down child).
        if let Some((var, frac, parent_obj)) = node.parent_branch {
            if parent_obj.is_finite() {
                let (down, f) = if frac < 0.0 { (true, -frac) } else { (false, frac) };
                pseudo.record(var, down, f, lp_obj - parent_obj);
            }
        }

        if let Some((best, _)) = &incumbent {
            if lp_obj >= best - PRUNE_TOL {
                continue;
            }
        }

        // Fractional integer-kind variables are the branching candidates.
        let mut candidates: Vec<(usize, f64)> = Vec::new();
        for (j, kind) in instance.var_kinds.iter().enumerate() {
            if kind.is_integral() {
                let x = lp_values[j];
                let frac = x - x.floor();
                if frac.min(1.0 - frac) > INTEGRALITY_TOL {
                    candidates.push((j, frac));
                }
            }
        }

        if candidates.is_empty() {
            // Integer feasible: round integral variables exactly and accept
            // through the evaluator so the incumbent cost is an exact dot
            // product over the final assignment.
            let mut values = lp_values;
            for (j, kind) in instance.var_kinds.iter().enumerate() {
                if kind.is_integral() {
                    values[j] = values[j].round();
                }
            }
            let assignment = Assignment::new(values);
            if let Ok(report) = evaluate_assignment(instance, &assignment, FEASIBILITY_TOL) {
                if report.feasible
                    && incumbent
                        .as_ref()
                        .is_none_or(|(best, _)| report.cost < *best)
                {
                    incumbent = Some((report.cost, assignment));
                }
            }
            continue;
        }

        // Rounding heuristic.
        if config.rounding_heuristic_freq > 0.0 && rng.chance(config.rounding_heuristic_freq) {
            let mut values = lp_values.clone();
            for (j, kind) in instance.var_kinds.iter().enumerate() {
                if kind.is_integral() {
                    values[j] = values[j].round();
                }
                let (lo, up) = node.bounds[j];
                values[j] = values[j].clamp(lo, up);
            }
            let assignment = Assignment::new(values);
            if let Ok(report) = evaluate_assignment(instance, &assignment, FEASIBILITY_TOL) {
                if report.feasible
                    && incumbent
                        .as_ref()
                        .is_none_or(|(best, _)| report.cost < *best)
                {
                    incumbent = Some((report.cost, assignment));
                }
            }
        }

        // Variable selection.
        let factor = config.branching_score_factor;
        let mut best_var = candidates[0].0;
        let mut best_frac = candidates[0].1;
        let mut best_score = f64::NEG_INFINITY;
        for &(j, frac) in &candidates {
            let score = match config.branching_rule {
                BranchingRule::MostFractional => -(frac - 0.5).abs(),
                BranchingRule::Pseudocost => {
                    let s_down = pseudo.down[j] * frac;
                    let s_up = pseudo.up[j] * (1.0 - frac);
                    factor * s_down.min(s_up) + (1.0 - factor) * s_down.max(s_up)
                }
                BranchingRule::Random => rng.next_f64(),
            };
            if score > best_score {
                best_score = score;
                best_var = j;
                best_frac = frac;
            }
        }

        let x = lp_values[best_var];
        let (lo, up) = node.bounds[best_var];

        // Down child: x_j <= floor(x). Fraction stored negated to mark the
        // down direction for the pseudocost update.
        let down_upper = x.floor();
        if down_upper >= lo {
            let mut bounds = node.bounds.clone();
            bounds[best_var].1 = down_upper;
            open.push(Node {
                id: next_id,
                depth: node.depth + 1,
                bounds,
                bound: lp_obj,
                parent_branch: Some((best_var, -best_frac, lp_obj)),
            });
            next_id += 1;
        }
        // Up child: x_j >= ceil(x).
        let up_lower = x.ceil();
        if up_lower <= up {
            let mut bounds = node.bounds.clone();
            bounds[best_var].0 = up_lower;
            open.push(Node {
                id: next_id,
                depth: node.depth + 1,
                bounds,
                bound: lp_obj,
                parent_branch: Some((best_var, 1.0 - best_frac, lp_obj)),
            });
            next_id += 1;
        }
    }
}
