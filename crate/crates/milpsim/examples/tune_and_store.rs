//! Search the configuration space of a few instances, persist the results
//! in a config store, and query it back.
//!
//! ```bash
//! cargo run -p milpsim --example tune_and_store
//! ```

use milpsim::gnn::init_model;
use milpsim::milp::{generate_instance, Family};
use milpsim::pipeline::tune_into_store;
use milpsim::solver::{ConfigSpace, Limits};
use milpsim::store::ConfigStore;

fn main() {
    let instances: Vec<_> = (0..6)
        .map(|s| generate_instance(Family::Placement, (14, 8), s).unwrap())
        .collect();
    // An untrained encoder still provides usable keys for the store; swap in
    // a trained checkpoint for meaningful neighborhoods.
    let model = init_model(5);
    let space = ConfigSpace::default();
    let store = tune_into_store(&instances, &model, &space, 8, &Limits::nodes(100), 3, 2)
        .unwrap();

    println!("store holds {} records", store.len());
    for record in store.records().take(2) {
        println!("record {}:", &record.instance_id[..12]);
        for trial in record.trials.iter().take(3) {
            println!(
                "  cost {:9.4} source {:7} {}",
                trial.cost,
                trial.source.as_str(),
                trial.config.to_kv()
            );
        }
    }

    let dir = std::env::temp_dir().join("milpsim_example_store.txt");
    store.save(&dir).unwrap();
    let loaded = ConfigStore::load(&dir).unwrap();
    assert_eq!(store, loaded);
    println!("\nsaved and reloaded store bit-for-bit from {}", dir.display());

    let query = store.records().next().unwrap().embedding.clone();
    let neighbors = loaded.knn_query(&query, 3).unwrap();
    println!("3 nearest neighbors of the first record:");
    for (id, dist) in neighbors {
        println!("  {} at distance {dist:.4}", &id[..12]);
    }
    std::fs::remove_file(&dir).ok();
}
