//! File-level workflows tying the pieces together: instance directories,
//! cost-table CSVs, training curves, embedding exports and store population.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::bench::parallel_map;
use crate::bench::record_search_results;
use crate::featurize::extract_bipartite;
use crate::gnn::{forward_embed, Embedding, EncoderModel, GnnError};
use crate::milp::{generate_instance, parse_mps, write_mps, Family, GenerateError, MilpInstance, MpsError};
use crate::rng::derive_seed;
use crate::solver::{ConfigSpace, Limits};
use crate::store::{ConfigStore, StoreError};
use crate::train::CostTable;
use crate::tuner::{search_configs, SearchBudget};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Mps {
        path: PathBuf,
        source: MpsError,
    },
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("malformed csv at {path} line {line}")]
    Csv { path: PathBuf, line: usize },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Generates `count` instances and writes them as `<instance_id>.mps` plus a
/// `manifest.csv` (generation order, so reruns are byte-identical).
pub fn write_instance_dir(
    dir: &Path,
    family: Family,
    count: usize,
    dims: (usize, usize),
    seed: u64,
) -> Result<Vec<String>, PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::from("instance_id,family,n,m,seed,file\n");
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let instance_seed = seed.wrapping_add(i as u64);
        let inst = generate_instance(family, dims, instance_seed)?;
        let text = write_mps(&inst);
        let id = inst.instance_id();
        let file = format!("{id}.mps");
        let path = dir.join(&file);
        fs::write(&path, text).map_err(io_err(&path))?;
        manifest.push_str(&format!(
            "{id},{},{},{},{instance_seed},{file}\n",
            family.as_str(),
            dims.0,
            dims.1
        ));
        ids.push(id);
    }
    let manifest_path = dir.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))?;
    Ok(ids)
}

/// Reads every `*.mps` file in a directory, sorted by file name.
pub fn read_instance_dir(dir: &Path) -> Result<Vec<MilpInstance>, PipelineError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "mps"))
        .collect();
    paths.sort();
    let mut instances = Vec::with_capacity(paths.len());
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let inst = parse_mps(&text).map_err(|source| PipelineError::Mps {
            path: path.clone(),
            source,
        })?;
        instances.push(inst);
    }
    Ok(instances)
}

/// CSV columns: instance_id, raw_cost, normalized_cost.
pub fn write_cost_table_csv(table: &CostTable, path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from("instance_id,raw_cost,normalized_cost\n");
    for (id, entry) in table.iter() {
        out.push_str(&format!(
            "{id},{},{}\n",
            crate::bench::cell(entry.raw_cost),
            entry
                .normalized_cost
                .map(crate::bench::cell)
                .unwrap_or_else(|| "inf".to_string()),
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Rebuilds a table from the raw-cost column (normalization is a pure
/// function of the raw costs, so the result matches the saved table).
pub fn read_cost_table_csv(path: &Path) -> Result<CostTable, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(id), Some(raw_s)) = (fields.next(), fields.next()) else {
            return Err(PipelineError::Csv {
                path: path.to_path_buf(),
                line: idx + 1,
            });
        };
        let cost = match raw_s {
            "inf" => f64::INFINITY,
            _ => raw_s.parse().map_err(|_| PipelineError::Csv {
                path: path.to_path_buf(),
                line: idx + 1,
            })?,
        };
        raw.push((id.to_string(), cost));
    }
    Ok(CostTable::from_raw(raw))
}

/// CSV columns: epoch, mean_loss.
pub fn write_loss_curve_csv(curve: &[f64], path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from("epoch,mean_loss\n");
    for (epoch, loss) in curve.iter().enumerate() {
        out.push_str(&format!("{epoch},{}\n", crate::bench::cell(*loss)));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Embeds every instance with the trained model.
pub fn embed_instances(
    model: &EncoderModel,
    instances: &[MilpInstance],
) -> Result<Vec<(String, Embedding)>, PipelineError> {
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        let embedding = forward_embed(model, &extract_bipartite(inst))?;
        out.push((inst.instance_id(), embedding));
    }
    Ok(out)
}

/// CSV: instance_id, e0..e{dim-1}[, cost]; the cost column (from the cost
/// table) supports external projection plots colored by cost.
pub fn write_embeddings_csv(
    embeddings: &[(String, Embedding)],
    costs: Option<&CostTable>,
    path: &Path,
) -> Result<(), PipelineError> {
    let dim = embeddings.first().map_or(0, |(_, e)| e.len());
    let mut header: Vec<String> = vec!["instance_id".into()];
    header.extend((0..dim).map(|i| format!("e{i}")));
    if costs.is_some() {
        header.push("raw_cost".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for (id, embedding) in embeddings {
        let mut row: Vec<String> = vec![id.clone()];
        row.extend(embedding.iter().map(|v| crate::bench::cell(*v)));
        if let Some(table) = costs {
            row.push(
                table
                    .get(id)
                    .map(|e| crate::bench::cell(e.raw_cost))
                    .unwrap_or_else(|| "inf".to_string()),
            );
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Runs the offline configuration search on every instance and fills a
/// store with its trials (source SEARCH). Searches run concurrently across
/// instances; insertion order is the instance order, so the store is
/// deterministic.
pub fn tune_into_store(
    instances: &[MilpInstance],
    model: &EncoderModel,
    space: &ConfigSpace,
    evaluations: usize,
    per_eval_limits: &Limits,
    seed: u64,
    workers: usize,
) -> Result<ConfigStore, PipelineError> {
    let embeddings = embed_instances(model, instances)?;
    let indexed: Vec<usize> = (0..instances.len()).collect();
    let results = parallel_map(&indexed, workers, |&i| {
        let budget = SearchBudget::new(
            evaluations,
            *per_eval_limits,
            derive_seed(seed, i as u64),
        );
        search_configs(&instances[i], space, &budget)
    });
    let mut store = ConfigStore::new();
    for (i, result) in results.iter().enumerate() {
        let (id, embedding) = &embeddings[i];
        record_search_results(&mut store, id, embedding, result)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Limits;
    use crate::train::label_costs;

    #[test]
    fn instance_dir_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ids =
            write_instance_dir(dir.path(), Family::Cover, 5, (10, 4), 11).unwrap();
        assert_eq!(ids.len(), 5);
        let instances = read_instance_dir(dir.path()).unwrap();
        assert_eq!(instances.len(), 5);
        let mut read_ids: Vec<String> =
            instances.iter().map(|i| i.instance_id()).collect();
        read_ids.sort();
        let mut expected = ids.clone();
        expected.sort();
        assert_eq!(read_ids, expected);
        assert!(dir.path().join("manifest.csv").exists());
    }

    #[test]
    fn cost_table_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("costs.csv");
        let instances: Vec<MilpInstance> = (0..6)
            .map(|s| generate_instance(Family::Placement, (10, 5), s).unwrap())
            .collect();
        let table = label_costs(&instances, &Limits::nodes(50), 3);
        write_cost_table_csv(&table, &path).unwrap();
        let loaded = read_cost_table_csv(&path).unwrap();
        assert_eq!(table, loaded);
    }

    #[test]
    fn tuned_store_is_deterministic_and_worker_independent() {
        let instances: Vec<MilpInstance> = (0..4)
            .map(|s| generate_instance(Family::Placement, (10, 5), s).unwrap())
            .collect();
        let model = crate::gnn::init_model(1);
        let space = ConfigSpace::default();
        let a = tune_into_store(&instances, &model, &space, 3, &Limits::nodes(40), 5, 1)
            .unwrap();
        let b = tune_into_store(&instances, &model, &space, 3, &Limits::nodes(40), 5, 2)
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        for record in a.records() {
            assert_eq!(record.trials.len(), 3);
        }
    }
}
