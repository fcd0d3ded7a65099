//! Small end-to-end benchmark: default configuration vs per-distribution
//! incumbent vs shallow-embedding KNN vs deep-embedding KNN.
//!
//! ```bash
//! cargo run -p milpsim --example compare_baselines
//! ```

use milpsim::bench::{compare_baselines, prediction_accuracy};
use milpsim::milp::{generate_instance, Family};
use milpsim::pipeline::tune_into_store;
use milpsim::solver::{ConfigSpace, Limits};
use milpsim::train::{label_costs, train_metric_model, SamplingSchedule};

fn main() {
    let train: Vec<_> = (0..80)
        .map(|s| generate_instance(Family::Placement, (20, 12), s).unwrap())
        .collect();
    let test: Vec<_> = (0..15)
        .map(|s| generate_instance(Family::Placement, (20, 12), 100_000 + s).unwrap())
        .collect();

    println!("labeling and training on {} instances...", train.len());
    let table = label_costs(&train, &Limits::nodes(800), 777);
    let schedule = SamplingSchedule {
        epochs_hard: 15,
        epochs_total: 30,
        batch_size: 48,
        rng_seed: 2024,
        ..Default::default()
    };
    let trained = train_metric_model(&train, &table, &schedule).unwrap();

    println!("tuning 10 evaluations per training instance...");
    let store = tune_into_store(
        &train,
        &trained.model,
        &ConfigSpace::default(),
        10,
        &Limits::nodes(150),
        5,
        2,
    )
    .unwrap();

    let outcome = compare_baselines(
        &train,
        &test,
        &trained.model,
        &store,
        1,
        1,
        &Limits::nodes(150),
        31,
        2,
    )
    .unwrap();
    println!("\nwins over {} test instances:", test.len());
    for m in &outcome.methods {
        match m.improvement {
            Some((mean, half)) => println!(
                "  {:12} wins {:3}  improvement over default {:+.4} +/- {:.4}",
                m.name, m.wins, mean, half
            ),
            None => println!("  {:12} wins {:3}", m.name, m.wins),
        }
    }
    println!("  no solution found: {}", outcome.no_solution);

    let accuracy = prediction_accuracy(
        &test,
        &trained.model,
        &store,
        &table,
        1,
        1,
        &Limits::nodes(150),
        17,
        2,
    )
    .unwrap();
    println!(
        "\nprediction accuracy: mae {:.2} (random neighbor {:.2}), pearson r {:.3}",
        accuracy.mae, accuracy.mae_random, accuracy.pearson
    );
}
