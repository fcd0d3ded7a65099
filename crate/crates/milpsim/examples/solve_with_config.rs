//! Solve one instance under different configurations and watch the node
//! counts and primal bounds move.
//!
//! ```bash
//! cargo run -p milpsim --example solve_with_config
//! ```

use milpsim::milp::{generate_instance, Family};
use milpsim::solver::{
    branch_and_bound, solve_lp_relaxation, BranchingRule, ConfigSpace, Limits, LpOutcome,
    NodeSelection, SolverConfig,
};

fn main() {
    let inst = generate_instance(Family::Placement, (20, 12), 7).unwrap();
    println!("instance {} ({} binaries)", inst.name, inst.num_integral());

    match solve_lp_relaxation(&inst, &inst.var_bounds).unwrap() {
        LpOutcome::Optimal { objective, .. } => println!("LP relaxation bound {objective:.4}"),
        other => println!("LP relaxation: {other:?}"),
    }

    let configs = [
        ("default", ConfigSpace::default().default_config),
        (
            "dfs+heuristic",
            SolverConfig::new(BranchingRule::MostFractional, NodeSelection::Dfs, 0, 0.8, 0.2),
        ),
        (
            "random+hybrid",
            SolverConfig::new(BranchingRule::Random, NodeSelection::Hybrid, 5, 0.3, 0.7),
        ),
    ];

    println!("\nfull solves (generous budget):");
    for (name, config) in &configs {
        let result = branch_and_bound(&inst, config, &Limits::nodes(50_000), 1);
        println!(
            "  {name:14} status {:13} cost {:9.4} nodes {:5}",
            result.status.as_str(),
            result.best_cost,
            result.nodes_explored
        );
    }

    println!("\ntight budget (60 nodes) - the configuration now matters:");
    for (name, config) in &configs {
        let result = branch_and_bound(&inst, config, &Limits::nodes(60), 1);
        println!(
            "  {name:14} status {:13} cost {:9.4} nodes {:5}",
            result.status.as_str(),
            result.best_cost,
            result.nodes_explored
        );
    }
}
