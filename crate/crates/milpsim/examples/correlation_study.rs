//! Cost-correlation study: do instances with similar default-config costs
//! stay similar under other configurations?
//!
//! ```bash
//! cargo run -p milpsim --example correlation_study
//! ```

use milpsim::bench::correlation_experiment;
use milpsim::milp::{generate_instance, Family};
use milpsim::solver::{BranchingRule::*, Limits, NodeSelection::*, SolverConfig};

fn main() {
    let pool: Vec<_> = (0..80)
        .map(|s| generate_instance(Family::KnapsackMulti, (28, 8), 1_234_000 + s).unwrap())
        .collect();
    let configs = vec![
        SolverConfig::new(Pseudocost, BestBound, 0, 0.0, 0.5),
        SolverConfig::new(Pseudocost, Dfs, 0, 0.9, 0.2),
        SolverConfig::new(MostFractional, Dfs, 0, 0.3, 0.8),
        SolverConfig::new(MostFractional, BestBound, 0, 0.6, 0.5),
        SolverConfig::new(Random, Hybrid, 5, 0.15, 0.3),
        SolverConfig::new(Random, Dfs, 0, 0.05, 0.9),
        SolverConfig::new(Pseudocost, Hybrid, 10, 0.45, 0.0),
        SolverConfig::new(MostFractional, Hybrid, 2, 0.75, 1.0),
    ];
    println!(
        "solving {} pool instances under {} configurations...",
        pool.len(),
        configs.len()
    );
    let outcome = correlation_experiment(
        &pool,
        &configs,
        1.0,  // similar pairs: normalized cost gap <= 1
        10.0, // dissimilar pairs: gap >= 10
        20,   // pairs per class
        &Limits::nodes(400),
        1234,
        2,
    )
    .unwrap();

    println!("\nper-pair correlations (first rows):");
    for row in outcome.report.rows.iter().take(8) {
        println!("  {:10} {}..{} r={}", row[0], &row[1][..8], &row[2][..8], row[3]);
    }
    println!(
        "\nmean r over similar pairs:    {:.3}\nmean r over dissimilar pairs: {:.3}",
        outcome.mean_r_similar, outcome.mean_r_dissimilar
    );
}
