//! The full inference path: embed an unseen instance, predict a
//! configuration from its nearest stored neighbor, solve with it, and feed
//! the outcome back into the store.
//!
//! ```bash
//! cargo run -p milpsim --example predict_config
//! ```

use milpsim::featurize::extract_bipartite;
use milpsim::gnn::forward_embed;
use milpsim::milp::{generate_instance, Family};
use milpsim::pipeline::tune_into_store;
use milpsim::solver::{branch_and_bound, ConfigSpace, Limits};
use milpsim::store::TrialSource;
use milpsim::train::{label_costs, train_metric_model, SamplingSchedule};

fn main() {
    // Offline: label, train, tune.
    let train: Vec<_> = (0..40)
        .map(|s| generate_instance(Family::Placement, (16, 8), s).unwrap())
        .collect();
    let table = label_costs(&train, &Limits::nodes(500), 1);
    let schedule = SamplingSchedule {
        epochs_hard: 6,
        epochs_total: 12,
        batch_size: 16,
        rng_seed: 2,
        ..Default::default()
    };
    println!("training the encoder on {} labeled instances...", table.labeled_ids().len());
    let trained = train_metric_model(&train, &table, &schedule).unwrap();
    let space = ConfigSpace::default();
    println!("searching configurations for the store...");
    let mut store =
        tune_into_store(&train, &trained.model, &space, 8, &Limits::nodes(120), 3, 2).unwrap();

    // Online: a fresh instance arrives.
    let unseen = generate_instance(Family::Placement, (16, 8), 9_999).unwrap();
    let embedding = forward_embed(&trained.model, &extract_bipartite(&unseen)).unwrap();
    let (config, (neighbor, stored_cost)) = store.predict_config(&embedding, 1, 1).unwrap();
    println!("\nunseen instance {}", &unseen.instance_id()[..12]);
    println!("nearest neighbor {} with stored cost {stored_cost:.4}", &neighbor[..12]);
    println!("predicted configuration: {}", config.to_kv());

    let default = branch_and_bound(&unseen, &space.default_config, &Limits::nodes(120), 3);
    let predicted = branch_and_bound(&unseen, &config, &Limits::nodes(120), 3);
    println!("\ncost with default config:   {:.4}", default.best_cost);
    println!("cost with predicted config: {:.4}", predicted.best_cost);

    // Close the loop: the deployment result becomes a stored trial.
    store
        .insert_trial(
            &unseen.instance_id(),
            &embedding,
            config,
            predicted.best_cost,
            TrialSource::Deployment,
        )
        .unwrap();
    println!(
        "\nfeedback recorded; store now holds {} records (no retraining needed)",
        store.len()
    );
}
