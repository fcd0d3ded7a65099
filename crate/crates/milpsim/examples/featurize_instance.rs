//! Extract the bipartite graph and the shallow statistics vector from one
//! instance.
//!
//! ```bash
//! cargo run -p milpsim --example featurize_instance
//! ```

use milpsim::featurize::{extract_bipartite, shallow_features};
use milpsim::milp::{generate_instance, Family};

fn main() {
    let inst = generate_instance(Family::KnapsackMulti, (12, 4), 3).unwrap();
    let graph = extract_bipartite(&inst);
    println!(
        "bipartite graph: {} variable nodes, {} constraint nodes, {} edges",
        graph.num_vars, graph.num_cons, graph.edges.len()
    );
    println!("first variable rows (kind one-hot, lower, upper):");
    for i in 0..4 {
        println!("  x{i}: {:?}", graph.var_row(i));
    }
    println!("first constraint rows (sense one-hot, rhs):");
    for i in 0..2 {
        println!("  c{i}: {:?}", graph.cons_row(i));
    }

    let shallow = shallow_features(&inst).unwrap();
    println!("\nshallow vector (n, m, nnz, obj stats, A stats, rhs stats):");
    println!("  {shallow:.3?}");
}
