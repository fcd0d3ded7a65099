//! The validation studies: cost correlation of similar/dissimilar pairs,
//! baseline comparison, and prediction accuracy.

use thiserror::Error;

use super::parallel::parallel_map;
use super::report::{cell, ExperimentReport};
use super::stats::{confidence95, pearson_r, StatsError};
use crate::featurize::{extract_bipartite, shallow_features, FeaturizeError, SHALLOW_FEATURES};
use crate::gnn::{forward_embed, Embedding, EncoderModel, GnnError};
use crate::milp::instance::MilpInstance;
use crate::rng::{derive_seed, SeededRng};
use crate::solver::{branch_and_bound, ConfigSpace, Limits, SolverConfig};
use crate::store::{ConfigStore, StoreError, TrialSource};
use crate::train::CostTable;
use crate::tuner::incumbent_config;

/// Two method costs within this distance tie for a win.
pub const WIN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Featurize(#[from] FeaturizeError),
    #[error("InsufficientPairs: have {similar} similar / {dissimilar} dissimilar labeled pairs, need {requested} of each")]
    InsufficientPairs {
        similar: usize,
        dissimilar: usize,
        requested: usize,
    },
    #[error("MissingArtifacts: {0}")]
    MissingArtifacts(String),
    #[error("InsufficientData: {0}")]
    InsufficientData(&'static str),
}

/// Pair-level correlation with the degenerate-vector convention: identical
/// cost vectors correlate perfectly, a constant-but-different vector pair
/// carries no signal.
fn pair_r(xs: &[f64], ys: &[f64]) -> f64 {
    match pearson_r(xs, ys) {
        Ok(r) => r,
        Err(_) => {
            let identical = xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(a, b)| a.to_bits() == b.to_bits());
            if identical {
                1.0
            } else {
                0.0
            }
        }
    }
}

pub struct CorrelationOutcome {
    pub report: ExperimentReport,
    pub mean_r_similar: f64,
    pub mean_r_dissimilar: f64,
}

/// Labels the pool with the default configuration, draws similar pairs
/// (normalized cost gap <= c_thr) and dissimilar pairs (gap >=
/// dissimilar_factor * c_thr), solves each pair member under every config,
/// and reports the per-pair Pearson correlation of the two cost vectors.
#[allow(clippy::too_many_arguments)]
pub fn correlation_experiment(
    instances: &[MilpInstance],
    configs: &[SolverConfig],
    c_thr: f64,
    dissimilar_factor: f64,
    pairs_per_class: usize,
    limits: &Limits,
    seed: u64,
    workers: usize,
) -> Result<CorrelationOutcome, BenchError> {
    if configs.len() < 2 {
        return Err(BenchError::InsufficientData("need at least 2 configs"));
    }
    let space = ConfigSpace::default();
    let label_seed = derive_seed(seed, 0x6c6162);
    let raw: Vec<(String, f64)> = parallel_map(instances, workers, |inst| {
        let r = branch_and_bound(inst, &space.default_config, limits, label_seed);
        (inst.instance_id(), r.best_cost)
    });
    let table = CostTable::from_raw(raw);

    let labeled = table.labeled_ids();
    let cost_of = |id: &str| table.get(id).unwrap().normalized_cost.unwrap();
    let mut similar: Vec<(usize, usize)> = Vec::new();
    let mut dissimilar: Vec<(usize, usize)> = Vec::new();
    for i in 0..labeled.len() {
        for j in (i + 1)..labeled.len() {
            let gap = (cost_of(&labeled[i]) - cost_of(&labeled[j])).abs();
            if gap <= c_thr {
                similar.push((i, j));
            } else if gap >= dissimilar_factor * c_thr {
                dissimilar.push((i, j));
            }
        }
    }
    if similar.len() < pairs_per_class || dissimilar.len() < pairs_per_class {
        return Err(BenchError::InsufficientPairs {
            similar: similar.len(),
            dissimilar: dissimilar.len(),
            requested: pairs_per_class,
        });
    }
    let mut rng = SeededRng::new(derive_seed(seed, 0x70616972));
    rng.shuffle(&mut similar);
    rng.shuffle(&mut dissimilar);
    similar.truncate(pairs_per_class);
    dissimilar.truncate(pairs_per_class);

    // Cost vector of every distinct pair member under every config.
    let by_id: std::collections::BTreeMap<String, &MilpInstance> = instances
        .iter()
        .map(|inst| (inst.instance_id(), inst))
        .collect();
    let mut member_ids: Vec<&str> = similar
        .iter()
        .chain(&dissimilar)
        .flat_map(|&(i, j)| [labeled[i].as_str(), labeled[j].as_str()])
        .collect();
    member_ids.sort_unstable();
    member_ids.dedup();
    // Every run shares one solver seed: the fixed-environment protocol
    // (machine, limits and random seed held constant across runs).
    let solve_seed = derive_seed(seed, 0x72756e);
    let tasks: Vec<(usize, usize)> = (0..member_ids.len())
        .flat_map(|i| (0..configs.len()).map(move |c| (i, c)))
        .collect();
    let costs: Vec<f64> = parallel_map(&tasks, workers, |&(i, c)| {
        branch_and_bound(by_id[member_ids[i]], &configs[c], limits, solve_seed).best_cost
    });
    let vector_of = |id: &str| -> Vec<f64> {
        let base = member_ids.binary_search(&id).unwrap() * configs.len();
        costs[base..base + configs.len()].to_vec()
    };

    let mut report = ExperimentReport::new(
        "correlation",
        &["kind", "id_a", "id_b", "pearson_r"],
    );
    report.meta("seed", seed);
    report.meta("configs", configs.len());
    report.meta("pairs_per_class", pairs_per_class);
    report.meta("c_thr", c_thr);
    report.meta("dissimilar_factor", dissimilar_factor);
    report.meta("max_nodes", limits.max_nodes);

    let mut r_similar = Vec::new();
    let mut r_dissimilar = Vec::new();
    for (kind, pairs, sink) in [
        ("similar", &similar, &mut r_similar),
        ("dissimilar", &dissimilar, &mut r_dissimilar),
    ] {
        for &(i, j) in pairs {
            let (va, vb) = (vector_of(&labeled[i]), vector_of(&labeled[j]));
            // Restrict to configs where both members found a solution.
            let joint: Vec<(f64, f64)> = va
                .iter()
                .zip(&vb)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(&a, &b)| (a, b))
                .collect();
            if joint.len() < 2 {
                continue;
            }
            let xs: Vec<f64> = joint.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = joint.iter().map(|p| p.1).collect();
            let r = pair_r(&xs, &ys);
            sink.push(r);
            report.push_row(vec![
                kind.to_string(),
                labeled[i].clone(),
                labeled[j].clone(),
                cell(r),
            ]);
        }
    }
    if r_similar.is_empty() || r_dissimilar.is_empty() {
        return Err(BenchError::InsufficientData(
            "no pair produced a defined correlation",
        ));
    }
    let mean_r_similar = super::stats::mean(&r_similar);
    let mean_r_dissimilar = super::stats::mean(&r_dissimilar);
    report.meta("mean_r_similar", cell(mean_r_similar));
    report.meta("mean_r_dissimilar", cell(mean_r_dissimilar));
    Ok(CorrelationOutcome {
        report,
        mean_r_similar,
        mean_r_dissimilar,
    })
}

/// Per-dimension min/max scaling fitted on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowScaling {
    pub per_dim: Vec<(f64, f64)>, // (min, span)
}

impl ShallowScaling {
    pub fn fit(vectors: &[Vec<f64>]) -> Self {
        let dims = vectors.first().map_or(SHALLOW_FEATURES, Vec::len);
        let per_dim = (0..dims)
            .map(|d| {
                let min = vectors.iter().map(|v| v[d]).fold(f64::INFINITY, f64::min);
                let max = vectors
                    .iter()
                    .map(|v| v[d])
                    .fold(f64::NEG_INFINITY, f64::max);
                (min, max - min)
            })
            .collect();
        ShallowScaling { per_dim }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.per_dim)
            .map(|(&x, &(min, span))| if span > 0.0 { (x - min) / span } else { 0.0 })
            .collect()
    }
}

/// Builds the shallow-embedding analog of a deep store: same instance ids
/// and trials, keyed by min-max scaled shallow feature vectors.
pub fn build_shallow_store(
    train_instances: &[MilpInstance],
    deep_store: &ConfigStore,
) -> Result<(ConfigStore, ShallowScaling), BenchError> {
    let mut present: Vec<(&MilpInstance, String, Vec<f64>)> = Vec::new();
    for inst in train_instances {
        let id = inst.instance_id();
        if deep_store.get(&id).is_some() {
            let feats = shallow_features(inst)?;
            present.push((inst, id, feats));
        }
    }
    if present.is_empty() {
        return Err(BenchError::MissingArtifacts(
            "no training instance has a store record".into(),
        ));
    }
    let scaling = ShallowScaling::fit(
        &present
            .iter()
            .map(|(_, _, f)| f.clone())
            .collect::<Vec<_>>(),
    );
    let mut shallow = ConfigStore::with_dim(SHALLOW_FEATURES);
    for (_, id, feats) in &present {
        let scaled = scaling.apply(feats);
        let record = deep_store.get(id).unwrap();
        for trial in &record.trials {
            shallow.insert_trial(id, &scaled, trial.config, trial.cost, trial.source)?;
        }
    }
    Ok((shallow, scaling))
}

pub const METHOD_NAMES: [&str; 4] = ["default", "incumbent", "shallow_knn", "deep_knn"];

pub struct MethodSummary {
    pub name: &'static str,
    pub wins: usize,
    /// (mean relative improvement over default, 95% half-width); None when
    /// no instance had finite costs for both this method and the default.
    pub improvement: Option<(f64, f64)>,
}

pub struct BaselineOutcome {
    pub report: ExperimentReport,
    pub methods: Vec<MethodSummary>,
    pub no_solution: usize,
    /// Per-instance method costs in METHOD_NAMES order.
    pub cost_matrix: Vec<[f64; 4]>,
}

/// Evaluates default, per-distribution incumbent, shallow-embedding KNN and
/// deep-embedding KNN on every test instance. Wins go to every method within
/// [`WIN_TOL`] of the instance minimum; improvements are relative to the
/// default configuration's cost.
#[allow(clippy::too_many_arguments)]
pub fn compare_baselines(
    train_instances: &[MilpInstance],
    test_instances: &[MilpInstance],
    model: &EncoderModel,
    store: &ConfigStore,
    k: usize,
    n: usize,
    limits: &Limits,
    seed: u64,
    workers: usize,
) -> Result<BaselineOutcome, BenchError> {
    if store.is_empty() {
        return Err(BenchError::MissingArtifacts("config store is empty".into()));
    }
    let space = ConfigSpace::default();
    let search_results: Vec<Vec<(SolverConfig, f64)>> = store
        .records()
        .map(|r| r.trials.iter().map(|t| (t.config, t.cost)).collect())
        .collect();
    let incumbent = incumbent_config(&search_results).ok_or_else(|| {
        BenchError::MissingArtifacts("store has no finite trials".into())
    })?;
    let (shallow_store, scaling) = build_shallow_store(train_instances, store)?;

    // Predict configurations for every test instance.
    let mut configs_per_instance: Vec<[SolverConfig; 4]> = Vec::with_capacity(
        test_instances.len(),
    );
    for inst in test_instances {
        let deep_cfg = {
            let embedding = forward_embed(model, &extract_bipartite(inst))?;
            match store.predict_config(&embedding, k, n) {
                Ok((cfg, _)) => cfg,
                Err(StoreError::NoFiniteTrials) => space.default_config,
                Err(e) => return Err(e.into()),
            }
        };
        let shallow_cfg = {
            let scaled: Embedding = scaling.apply(&shallow_features(inst)?);
            match shallow_store.predict_config(&scaled, k, n) {
                Ok((cfg, _)) => cfg,
                Err(StoreError::NoFiniteTrials) => space.default_config,
                Err(e) => return Err(e.into()),
            }
        };
        configs_per_instance.push([space.default_config, incumbent, shallow_cfg, deep_cfg]);
    }

    let solve_seed = derive_seed(seed, 0x65766c);
    let tasks: Vec<(usize, usize)> = (0..test_instances.len())
        .flat_map(|i| (0..4).map(move |m| (i, m)))
        .collect();
    let costs: Vec<f64> = parallel_map(&tasks, workers, |&(i, m)| {
        branch_and_bound(
            &test_instances[i],
            &configs_per_instance[i][m],
            limits,
            solve_seed,
        )
        .best_cost
    });

    let mut report = ExperimentReport::new(
        "compare_baselines",
        &[
            "instance_id",
            "cost_default",
            "cost_incumbent",
            "cost_shallow_knn",
            "cost_deep_knn",
        ],
    );
    report.meta("seed", seed);
    report.meta("k", k);
    report.meta("n", n);
    report.meta("max_nodes", limits.max_nodes);
    report.meta("train_size", train_instances.len());
    report.meta("test_size", test_instances.len());
    report.meta("workers", workers);

    let mut wins = [0usize; 4];
    let mut no_solution = 0usize;
    let mut improvements: [Vec<f64>; 3] = Default::default();
    let mut cost_matrix = Vec::with_capacity(test_instances.len());
    for (i, inst) in test_instances.iter().enumerate() {
        let row: [f64; 4] = std::array::from_fn(|m| costs[i * 4 + m]);
        report.push_row(vec![
            inst.instance_id(),
            cell(row[0]),
            cell(row[1]),
            cell(row[2]),
            cell(row[3]),
        ]);
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        if best.is_finite() {
            for (m, &c) in row.iter().enumerate() {
                if c <= best + WIN_TOL {
                    wins[m] += 1;
                }
            }
        } else {
            no_solution += 1;
        }
        if row[0].is_finite() {
            for m in 1..4 {
                if row[m].is_finite() {
                    improvements[m - 1]
                        .push((row[0] - row[m]) / row[0].abs().max(1e-9));
                }
            }
        }
        cost_matrix.push(row);
    }

    let methods = METHOD_NAMES
        .iter()
        .enumerate()
        .map(|(m, &name)| MethodSummary {
            name,
            wins: wins[m],
            improvement: if m == 0 {
                Some((0.0, 0.0))
            } else if improvements[m - 1].is_empty() {
                None
            } else {
                Some(confidence95(&improvements[m - 1]))
            },
        })
        .collect();

    Ok(BaselineOutcome {
        report,
        methods,
        no_solution,
        cost_matrix,
    })
}

pub struct AccuracyOutcome {
    pub report: ExperimentReport,
    /// Mean absolute error between predicted (neighbor's stored) and actual
    /// normalized costs.
    pub mae: f64,
    /// Pearson correlation of predicted vs actual normalized costs.
    pub pearson: f64,
    /// Same MAE with the neighbor drawn uniformly instead of nearest.
    pub mae_random: f64,
}

/// For each test instance: predict a config from the nearest neighbor,
/// solve with it, and compare the neighbor's stored cost against the
/// realized cost on the train-set normalized scale.
#[allow(clippy::too_many_arguments)]
pub fn prediction_accuracy(
    test_instances: &[MilpInstance],
    model: &EncoderModel,
    store: &ConfigStore,
    cost_table: &CostTable,
    k: usize,
    n: usize,
    limits: &Limits,
    seed: u64,
    workers: usize,
) -> Result<AccuracyOutcome, BenchError> {
    if store.is_empty() {
        return Err(BenchError::MissingArtifacts("config store is empty".into()));
    }
    let record_ids: Vec<String> = store.records().map(|r| r.instance_id.clone()).collect();

    struct Prediction {
        instance_idx: usize,
        neighbor_id: String,
        stored_cost: f64,
        config: SolverConfig,
        random_cfg: Option<(String, f64, SolverConfig)>,
    }

    let mut predictions: Vec<Prediction> = Vec::new();
    let mut rng = SeededRng::new(derive_seed(seed, 0x726e6467));
    for (idx, inst) in test_instances.iter().enumerate() {
        let embedding = forward_embed(model, &extract_bipartite(inst))?;
        let predicted = match store.predict_config(&embedding, k, n) {
            Ok((config, (neighbor_id, stored_cost))) => Some((config, neighbor_id, stored_cost)),
            Err(StoreError::NoFiniteTrials) => None,
            Err(e) => return Err(e.into()),
        };
        // Random-neighbor baseline: uniform record, same lowest-cost rule.
        let random_record = &record_ids[rng.index(record_ids.len())];
        let random_cfg = store
            .get(random_record)
            .and_then(|r| {
                r.trials
                    .iter()
                    .filter(|t| t.cost.is_finite())
                    .min_by(|a, b| a.cost.total_cmp(&b.cost))
            })
            .map(|t| (random_record.clone(), t.cost, t.config));
        if let Some((config, neighbor_id, stored_cost)) = predicted {
            predictions.push(Prediction {
                instance_idx: idx,
                neighbor_id,
                stored_cost,
                config,
                random_cfg,
            });
        }
    }
    if predictions.len() < 2 {
        return Err(BenchError::InsufficientData(
            "fewer than two finite predictions",
        ));
    }

    let solve_seed = derive_seed(seed, 0x61636375);
    let actual: Vec<f64> = parallel_map(&predictions, workers, |p| {
        branch_and_bound(
            &test_instances[p.instance_idx],
            &p.config,
            limits,
            solve_seed,
        )
        .best_cost
    });
    let actual_random: Vec<Option<f64>> = parallel_map(&predictions, workers, |p| {
        p.random_cfg.as_ref().map(|(_, _, cfg)| {
            branch_and_bound(&test_instances[p.instance_idx], cfg, limits, solve_seed)
                .best_cost
        })
    });

    let mut report = ExperimentReport::new(
        "prediction_accuracy",
        &[
            "instance_id",
            "neighbor_id",
            "predicted_cost_norm",
            "actual_cost_norm",
        ],
    );
    report.meta("seed", seed);
    report.meta("k", k);
    report.meta("n", n);
    report.meta("max_nodes", limits.max_nodes);

    let mut predicted_norms = Vec::new();
    let mut actual_norms = Vec::new();
    let mut abs_errors = Vec::new();
    let mut abs_errors_random = Vec::new();
    for (i, p) in predictions.iter().enumerate() {
        let predicted_norm = cost_table.normalize_raw(p.stored_cost);
        let actual_norm = cost_table.normalize_raw(actual[i]);
        report.push_row(vec![
            test_instances[p.instance_idx].instance_id(),
            p.neighbor_id.clone(),
            cell(predicted_norm),
            cell(actual_norm),
        ]);
        if actual[i].is_finite() {
            predicted_norms.push(predicted_norm);
            actual_norms.push(actual_norm);
            abs_errors.push((predicted_norm - actual_norm).abs());
        }
        if let (Some((_, stored, _)), Some(Some(act))) =
            (p.random_cfg.as_ref(), actual_random.get(i))
        {
            if act.is_finite() {
                abs_errors_random.push(
                    (cost_table.normalize_raw(*stored) - cost_table.normalize_raw(*act)).abs(),
                );
            }
        }
    }
    if abs_errors.is_empty() || abs_errors_random.is_empty() {
        return Err(BenchError::InsufficientData(
            "no finite (predicted, actual) pairs",
        ));
    }
    let mae = super::stats::mean(&abs_errors);
    let mae_random = super::stats::mean(&abs_errors_random);
    let pearson = pearson_r(&predicted_norms, &actual_norms).unwrap_or(0.0);
    report.meta("mae", cell(mae));
    report.meta("mae_random_neighbor", cell(mae_random));
    report.meta("pearson_r", cell(pearson));
    Ok(AccuracyOutcome {
        report,
        mae,
        pearson,
        mae_random,
    })
}

/// Inserts all search results of a tuner run into a store under the SEARCH
/// source tag.
pub fn record_search_results(
    store: &mut ConfigStore,
    instance_id: &str,
    embedding: &Embedding,
    results: &[(SolverConfig, f64)],
) -> Result<(), StoreError> {
    for (config, cost) in results {
        store.insert_trial(instance_id, embedding, *config, *cost, TrialSource::Search)?;
    }
    Ok(())
}
