//! Train the similarity encoder on a small labeled set and check that
//! cost-similar instances land closer than cost-dissimilar ones.
//!
//! ```bash
//! cargo run -p milpsim --example train_metric
//! ```

use milpsim::featurize::extract_bipartite;
use milpsim::gnn::{forward_embed, squared_distance};
use milpsim::milp::{generate_instance, Family};
use milpsim::rng::SeededRng;
use milpsim::solver::Limits;
use milpsim::train::{label_costs, sample_triplet, train_metric_model, SamplingSchedule};

fn main() {
    let instances: Vec<_> = (0..60)
        .map(|s| generate_instance(Family::Placement, (16, 8), s).unwrap())
        .collect();
    println!("labeling {} instances with the default configuration...", instances.len());
    let table = label_costs(&instances, &Limits::nodes(500), 1);
    println!("labeled {} instances", table.labeled_ids().len());

    let schedule = SamplingSchedule {
        epochs_hard: 12,
        epochs_total: 30,
        batch_size: 24,
        rng_seed: 7,
        ..Default::default()
    };
    println!("training ({} epochs, hard negatives for {})...", schedule.epochs_total, schedule.epochs_hard);
    let trained = train_metric_model(&instances, &table, &schedule).unwrap();
    for (epoch, loss) in trained.loss_curve.iter().enumerate() {
        if epoch % 6 == 0 || epoch + 1 == trained.loss_curve.len() {
            println!("  epoch {epoch:3}: mean loss {loss:.4}");
        }
    }

    // Sample relaxed-phase triplets and measure the separation.
    let graphs: std::collections::BTreeMap<String, _> = instances
        .iter()
        .map(|i| (i.instance_id(), extract_bipartite(i)))
        .collect();
    let mut rng = SeededRng::new(11);
    let mut correct = 0;
    let draws = 200;
    for _ in 0..draws {
        let (a, p, n) =
            sample_triplet(&table, &schedule, schedule.epochs_total, &mut rng).unwrap();
        let ea = forward_embed(&trained.model, &graphs[&a]).unwrap();
        let ep = forward_embed(&trained.model, &graphs[&p]).unwrap();
        let en = forward_embed(&trained.model, &graphs[&n]).unwrap();
        if squared_distance(&ea, &ep) < squared_distance(&ea, &en) {
            correct += 1;
        }
    }
    println!(
        "\ntriplet separation on fresh draws: {}/{} = {:.2}",
        correct,
        draws,
        correct as f64 / draws as f64
    );
}
