//! Pipeline driver: every subcommand is a thin wrapper over the library.
//! All outputs are CSV files under --out-dir plus a summary table on stdout;
//! runs are deterministic under --seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use milpsim::bench::{cell, compare_baselines, correlation_experiment, prediction_accuracy};
use milpsim::featurize::extract_bipartite;
use milpsim::gnn::{forward_embed, load_model, save_model};
use milpsim::milp::{parse_mps, Family, MilpInstance};
use milpsim::pipeline::{
    embed_instances, read_cost_table_csv, read_instance_dir, tune_into_store,
    write_cost_table_csv, write_embeddings_csv, write_instance_dir, write_loss_curve_csv,
};
use milpsim::rng::derive_seed;
use milpsim::solver::{branch_and_bound, sample_config, ConfigSpace, Limits, SolverConfig};
use milpsim::store::{ConfigStore, TrialSource};
use milpsim::train::{label_costs, train_metric_model, SamplingSchedule};

#[derive(Parser)]
#[command(name = "milpsim", about = "Solver configuration by learned instance similarity")]
struct Cli {
    /// Base seed for every random draw in the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent solver runs.
    #[arg(long, global = true, default_value_t = 2)]
    workers: usize,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct LimitArgs {
    /// Node budget per solver run.
    #[arg(long, default_value_t = 800)]
    max_nodes: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a directory of synthetic instances.
    Generate {
        /// PLACEMENT, COVER or KNAPSACK_MULTI.
        #[arg(long)]
        family: String,
        #[arg(long)]
        count: usize,
        /// Number of decision variables.
        #[arg(long)]
        vars: usize,
        /// Number of constraints.
        #[arg(long)]
        cons: usize,
    },
    /// Solve every instance with the default configuration and write the
    /// cost table.
    Label {
        #[arg(long)]
        instances: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Train the similarity encoder from a labeled instance directory.
    Train {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        costs: PathBuf,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value_t = 50)]
        epochs_hard: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1.0)]
        c_thr: f64,
        #[arg(long, default_value_t = 10.0)]
        hard_factor: f64,
    },
    /// Offline configuration search per instance, writing trials into the
    /// config store.
    Tune {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 20)]
        evals: usize,
        #[arg(long, default_value_t = 150)]
        max_nodes: u64,
    },
    /// Embed instances with a trained model.
    Embed {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Optional cost table to attach raw costs to the CSV.
        #[arg(long)]
        costs: Option<PathBuf>,
    },
    /// Predict a configuration for one instance from the store.
    Predict {
        /// MPS file of the unseen instance.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Also solve with the predicted configuration.
        #[arg(long, default_value_t = false)]
        solve: bool,
        /// With --solve: record the result back into the store
        /// (the deployment feedback loop).
        #[arg(long, default_value_t = false)]
        feedback: bool,
        #[arg(long, default_value_t = 800)]
        max_nodes: u64,
    },
    /// Cost-correlation study over similar and dissimilar instance pairs.
    ValidateCorrelation {
        #[arg(long)]
        instances: PathBuf,
        /// Number of configurations sampled for the study.
        #[arg(long, default_value_t = 8)]
        configs: usize,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[arg(long, default_value_t = 1.0)]
        c_thr: f64,
        #[arg(long, default_value_t = 10.0)]
        dissimilar_factor: f64,
        #[arg(long, default_value_t = 400)]
        max_nodes: u64,
    },
    /// Predicted-vs-actual cost study at k nearest neighbors.
    Accuracy {
        #[arg(long)]
        test_instances: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        costs: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 150)]
        max_nodes: u64,
    },
    /// Baseline comparison: default, incumbent, shallow KNN, deep KNN.
    Compare {
        #[arg(long)]
        train_instances: PathBuf,
        #[arg(long)]
        test_instances: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 150)]
        max_nodes: u64,
    },
    /// Merge the records of several stores (for combining parallel search
    /// runs) into one file.
    MergeStores {
        /// Store files to merge, in order.
        #[arg(long, required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
    },
    /// Dump (instance_id, embedding, cost) rows for external projection.
    ExportEmbeddings {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        costs: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_instances(dir: &Path) -> Result<Vec<MilpInstance>, Box<dyn std::error::Error>> {
    let instances = read_instance_dir(dir)?;
    if instances.is_empty() {
        return Err(format!("no .mps instances under {}", dir.display()).into());
    }
    Ok(instances)
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let workers = cli.workers.max(1);
    match cli.command {
        Command::Generate {
            family,
            count,
            vars,
            cons,
        } => {
            let family = Family::parse(&family)
                .ok_or_else(|| format!("unknown family `{family}`"))?;
            let dir = cli.out_dir.join("instances");
            let ids = write_instance_dir(&dir, family, count, (vars, cons), cli.seed)?;
            println!(
                "wrote {} {} instances ({}x{}) under {}",
                ids.len(),
                family.as_str(),
                vars,
                cons,
                dir.display()
            );
        }
        Command::Label { instances, limits } => {
            let set = load_instances(&instances)?;
            let table = label_costs(&set, &Limits::nodes(limits.max_nodes), cli.seed);
            let path = cli.out_dir.join("costs.csv");
            write_cost_table_csv(&table, &path)?;
            let labeled = table.labeled_ids().len();
            println!(
                "labeled {labeled}/{} instances (max_nodes {}), costs -> {}",
                set.len(),
                limits.max_nodes,
                path.display()
            );
        }
        Command::Train {
            instances,
            costs,
            epochs,
            epochs_hard,
            batch_size,
            c_thr,
            hard_factor,
        } => {
            let set = load_instances(&instances)?;
            let table = read_cost_table_csv(&costs)?;
            let schedule = SamplingSchedule {
                c_thr,
                hard_factor,
                epochs_hard,
                epochs_total: epochs,
                batch_size,
                rng_seed: cli.seed,
            };
            let trained = train_metric_model(&set, &table, &schedule)?;
            let model_path = cli.out_dir.join("model.bin");
            save_model(&trained.model, &model_path)?;
            let curve_path = cli.out_dir.join("loss_curve.csv");
            write_loss_curve_csv(&trained.loss_curve, &curve_path)?;
            println!(
                "trained {} epochs: first-epoch loss {}, final {}; model -> {}, curve -> {}",
                epochs,
                cell(trained.loss_curve[0]),
                cell(*trained.loss_curve.last().unwrap()),
                model_path.display(),
                curve_path.display()
            );
        }
        Command::Tune {
            instances,
            model,
            evals,
            max_nodes,
        } => {
            let set = load_instances(&instances)?;
            let model = load_model(&model)?;
            let store = tune_into_store(
                &set,
                &model,
                &ConfigSpace::default(),
                evals,
                &Limits::nodes(max_nodes),
                cli.seed,
                workers,
            )?;
            let path = cli.out_dir.join("store.txt");
            store.save(&path)?;
            println!(
                "searched {} configs on {} instances, store -> {}",
                evals,
                set.len(),
                path.display()
            );
        }
        Command::Embed {
            instances,
            model,
            costs,
        } => {
            let set = load_instances(&instances)?;
            let model = load_model(&model)?;
            let table = costs.map(|p| read_cost_table_csv(&p)).transpose()?;
            let embeddings = embed_instances(&model, &set)?;
            let path = cli.out_dir.join("embeddings.csv");
            write_embeddings_csv(&embeddings, table.as_ref(), &path)?;
            println!("embedded {} instances -> {}", set.len(), path.display());
        }
        Command::Predict {
            instance,
            model,
            store,
            k,
            n,
            solve,
            feedback,
            max_nodes,
        } => {
            let text = std::fs::read_to_string(&instance)?;
            let inst = parse_mps(&text)?;
            let model = load_model(&model)?;
            let store_path = store;
            let mut store = ConfigStore::load(&store_path)?;
            let embedding = forward_embed(&model, &extract_bipartite(&inst))?;
            let (config, (neighbor, stored_cost)) = store.predict_config(&embedding, k, n)?;
            println!("instance_id {}", inst.instance_id());
            println!("predicted_config {}", config.to_kv());
            println!("from_neighbor {neighbor} stored_cost {}", cell(stored_cost));
            if solve {
                let result =
                    branch_and_bound(&inst, &config, &Limits::nodes(max_nodes), cli.seed);
                println!(
                    "solve status {} cost {} nodes {}",
                    result.status.as_str(),
                    cell(result.best_cost),
                    result.nodes_explored
                );
                if feedback {
                    store.insert_trial(
                        &inst.instance_id(),
                        &embedding,
                        config,
                        result.best_cost,
                        TrialSource::Deployment,
                    )?;
                    store.save(&store_path)?;
                    println!("feedback recorded to {}", store_path.display());
                }
            }
        }
        Command::ValidateCorrelation {
            instances,
            configs,
            pairs,
            c_thr,
            dissimilar_factor,
            max_nodes,
        } => {
            let set = load_instances(&instances)?;
            let space = ConfigSpace::default();
            let config_set: Vec<SolverConfig> = (0..configs as u64)
                .map(|i| sample_config(&space, derive_seed(cli.seed, 0xc0f + i)))
                .collect();
            let outcome = correlation_experiment(
                &set,
                &config_set,
                c_thr,
                dissimilar_factor,
                pairs,
                &Limits::nodes(max_nodes),
                cli.seed,
                workers,
            )?;
            let path = cli.out_dir.join("correlation.csv");
            outcome.report.write_csv(&path)?;
            print!("{}", outcome.report.summary());
            println!(
                "mean r: similar {} dissimilar {} -> {}",
                cell(outcome.mean_r_similar),
                cell(outcome.mean_r_dissimilar),
                path.display()
            );
        }
        Command::Accuracy {
            test_instances,
            model,
            store,
            costs,
            k,
            n,
            max_nodes,
        } => {
            let test = load_instances(&test_instances)?;
            let model = load_model(&model)?;
            let store = ConfigStore::load(&store)?;
            let table = read_cost_table_csv(&costs)?;
            let outcome = prediction_accuracy(
                &test,
                &model,
                &store,
                &table,
                k,
                n,
                &Limits::nodes(max_nodes),
                cli.seed,
                workers,
            )?;
            let path = cli.out_dir.join("accuracy.csv");
            outcome.report.write_csv(&path)?;
            print!("{}", outcome.report.summary());
            println!(
                "mae {} (random neighbor {}), pearson {} -> {}",
                cell(outcome.mae),
                cell(outcome.mae_random),
                cell(outcome.pearson),
                path.display()
            );
        }
        Command::Compare {
            train_instances,
            test_instances,
            model,
            store,
            k,
            n,
            max_nodes,
        } => {
            let train = load_instances(&train_instances)?;
            let test = load_instances(&test_instances)?;
            let model = load_model(&model)?;
            let store = ConfigStore::load(&store)?;
            let outcome = compare_baselines(
                &train,
                &test,
                &model,
                &store,
                k,
                n,
                &Limits::nodes(max_nodes),
                cli.seed,
                workers,
            )?;
            let path = cli.out_dir.join("compare.csv");
            outcome.report.write_csv(&path)?;
            print!("{}", outcome.report.summary());
            println!("no_solution_found {}", outcome.no_solution);
            for m in &outcome.methods {
                match m.improvement {
                    Some((mean, half)) => println!(
                        "{:12} wins {:4} improvement {}+/-{}",
                        m.name,
                        m.wins,
                        cell(mean),
                        cell(half)
                    ),
                    None => println!("{:12} wins {:4} improvement n/a", m.name, m.wins),
                }
            }
            println!("-> {}", path.display());
        }
        Command::MergeStores { inputs } => {
            let mut merged = ConfigStore::load(&inputs[0])?;
            for path in &inputs[1..] {
                merged.merge(&ConfigStore::load(path)?)?;
            }
            let path = cli.out_dir.join("store.txt");
            merged.save(&path)?;
            println!(
                "merged {} stores ({} records) -> {}",
                inputs.len(),
                merged.len(),
                path.display()
            );
        }
        Command::ExportEmbeddings {
            instances,
            model,
            costs,
        } => {
            let set = load_instances(&instances)?;
            let model = load_model(&model)?;
            let table = read_cost_table_csv(&costs)?;
            let embeddings = embed_instances(&model, &set)?;
            let path = cli.out_dir.join("embeddings_export.csv");
            write_embeddings_csv(&embeddings, Some(&table), &path)?;
            println!(
                "exported {} embedding rows with costs -> {}",
                set.len(),
                path.display()
            );
        }
    }
    Ok(())
}
