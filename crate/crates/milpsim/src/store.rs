//! Persistent store of (embedding, explored configurations, costs) per
//! instance, with exact KNN search and the nearest-neighbor configuration
//! prediction rule.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::gnn::{Embedding, OUTPUT_DIM};
use crate::solver::SolverConfig;

/// Where a stored trial came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialSource {
    Default,
    Search,
    Deployment,
}

impl TrialSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialSource::Default => "DEFAULT",
            TrialSource::Search => "SEARCH",
            TrialSource::Deployment => "DEPLOYMENT",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "DEFAULT" => Some(TrialSource::Default),
            "SEARCH" => Some(TrialSource::Search),
            "DEPLOYMENT" => Some(TrialSource::Deployment),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub config: SolverConfig,
    /// `+inf` marks a run that found no solution; kept in history, never
    /// used for prediction.
    pub cost: f64,
    pub source: TrialSource,
}

/// One stored instance: its embedding and every explored trial, in
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigRecord {
    pub instance_id: String,
    pub embedding: Embedding,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("EmbeddingMismatch: record `{0}` already stores a different embedding")]
    EmbeddingMismatch(String),
    #[error("EmbeddingDimension: expected {expected}, got {got}")]
    EmbeddingDimension { expected: usize, got: usize },
    #[error("EmptyStore")]
    EmptyStore,
    #[error("NoFiniteTrials: every candidate trial has infinite cost")]
    NoFiniteTrials,
    #[error("store parse error (line {line}): {detail}")]
    Parse { line: usize, detail: String },
}

/// In-memory store keyed by instance id; persisted as one record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigStore {
    dim: usize,
    records: BTreeMap<String, ConfigRecord>,
}

impl Default for ConfigStore {
    fn default() -> Self {
        ConfigStore::new()
    }
}

impl ConfigStore {
    /// Store over standard 256-dim encoder embeddings.
    pub fn new() -> Self {
        ConfigStore::with_dim(OUTPUT_DIM)
    }

    /// Store over another embedding dimension (the shallow-feature baseline
    /// uses 14).
    pub fn with_dim(dim: usize) -> Self {
        ConfigStore {
            dim,
            records: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ConfigRecord> {
        self.records.get(id)
    }

    pub fn records(&self) -> impl Iterator<Item = &ConfigRecord> {
        self.records.values()
    }

    /// Appends a trial, creating the record on first insert. The embedding
    /// of an existing record must match the provided one exactly.
    pub fn insert_trial(
        &mut self,
        instance_id: &str,
        embedding: &Embedding,
        config: SolverConfig,
        cost: f64,
        source: TrialSource,
    ) -> Result<(), StoreError> {
        if embedding.len() != self.dim {
            return Err(StoreError::EmbeddingDimension {
                expected: self.dim,
                got: embedding.len(),
            });
        }
        match self.records.get_mut(instance_id) {
            Some(record) => {
                let same = record.embedding.len() == embedding.len()
                    && record
                        .embedding
                        .iter()
                        .zip(embedding)
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    return Err(StoreError::EmbeddingMismatch(instance_id.to_string()));
                }
                record.trials.push(Trial {
                    config,
                    cost,
                    source,
                });
            }
            None => {
                self.records.insert(
                    instance_id.to_string(),
                    ConfigRecord {
                        instance_id: instance_id.to_string(),
                        embedding: embedding.clone(),
                        trials: vec![Trial {
                            config,
                            cost,
                            source,
                        }],
                    },
                );
            }
        }
        Ok(())
    }

    /// Exact k-nearest records by Euclidean distance, non-descending, ties
    /// broken by instance id; returns all records when the store holds
    /// fewer than `k`.
    pub fn knn_query(&self, query: &Embedding, k: usize) -> Result<Vec<(String, f64)>, StoreError> {
        if self.records.is_empty() {
            return Err(StoreError::EmptyStore);
        }
        debug_assert!(k >= 1);
        let mut scored: Vec<(String, f64)> = self
            .records
            .values()
            .map(|r| (r.instance_id.clone(), euclidean(query, &r.embedding)))
            .collect();
        scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// The prediction rule: fetch the k nearest records, take each one's n
    /// cheapest finite-cost trials, and return the overall cheapest
    /// configuration. Ties go to the nearer neighbor, then the smaller
    /// instance id, then earlier insertion.
    pub fn predict_config(
        &self,
        query: &Embedding,
        k: usize,
        n: usize,
    ) -> Result<(SolverConfig, (String, f64)), StoreError> {
        let neighbors = self.knn_query(query, k)?;
        let mut best: Option<(f64, usize, SolverConfig, String)> = None;
        for (rank, (id, _dist)) in neighbors.iter().enumerate() {
            let record = &self.records[id];
            let mut ordered: Vec<(usize, &Trial)> = record
                .trials
                .iter()
                .enumerate()
                .filter(|(_, t)| t.cost.is_finite())
                .collect();
            ordered.sort_by(|a, b| a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)));
            for (_, trial) in ordered.into_iter().take(n) {
                let better = match &best {
                    None => true,
                    Some((cost, brank, _, _)) => {
                        trial.cost < *cost || (trial.cost == *cost && rank < *brank)
                    }
                };
                if better {
                    best = Some((trial.cost, rank, trial.config, id.clone()));
                }
            }
        }
        match best {
            Some((cost, _, config, id)) => Ok((config, (id, cost))),
            None => Err(StoreError::NoFiniteTrials),
        }
    }

    /// Merges another store's records (for combining parallel search runs).
    /// Existing records must agree on the embedding; trials are appended.
    pub fn merge(&mut self, other: &ConfigStore) -> Result<(), StoreError> {
        for record in other.records() {
            for trial in &record.trials {
                self.insert_trial(
                    &record.instance_id,
                    &record.embedding,
                    trial.config,
                    trial.cost,
                    trial.source,
                )?;
            }
        }
        Ok(())
    }

    /// One record per line:
    /// `id <tab> v0,v1,... <tab> trial;trial;...` with each trial as
    /// `<config kv>|cost|source`. Floats use 17 significant digits, so a
    /// save/load round trip is bit-exact.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "milpsim-store v1 dim={}", self.dim);
        for record in self.records.values() {
            let emb = record
                .embedding
                .iter()
                .map(|v| format_f64(*v))
                .collect::<Vec<_>>()
                .join(",");
            let trials = record
                .trials
                .iter()
                .map(|t| {
                    format!(
                        "{}|{}|{}",
                        t.config.to_kv(),
                        format_f64(t.cost),
                        t.source.as_str()
                    )
                })
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(out, "{}\t{}\t{}", record.instance_id, emb, trials);
        }
        out
    }

    pub fn deserialize(text: &str) -> Result<Self, StoreError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(StoreError::Parse {
            line: 1,
            detail: "empty store file".into(),
        })?;
        let dim: usize = header
            .strip_prefix("milpsim-store v1 dim=")
            .and_then(|d| d.parse().ok())
            .ok_or(StoreError::Parse {
                line: 1,
                detail: "bad header".into(),
            })?;
        let mut store = ConfigStore::with_dim(dim);
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().ok_or_else(|| StoreError::Parse {
                line: line_no,
                detail: "missing id".into(),
            })?;
            let emb_str = fields.next().ok_or_else(|| StoreError::Parse {
                line: line_no,
                detail: "missing embedding".into(),
            })?;
            let trials_str = fields.next().ok_or_else(|| StoreError::Parse {
                line: line_no,
                detail: "missing trials".into(),
            })?;
            let embedding: Embedding = emb_str
                .split(',')
                .map(parse_f64)
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| StoreError::Parse {
                    line: line_no,
                    detail: "bad embedding value".into(),
                })?;
            for trial_str in trials_str.split(';') {
                let mut parts = trial_str.split('|');
                let (Some(kv), Some(cost_s), Some(source_s)) =
                    (parts.next(), parts.next(), parts.next())
                else {
                    return Err(StoreError::Parse {
                        line: line_no,
                        detail: "bad trial".into(),
                    });
                };
                let config = SolverConfig::from_kv(kv).map_err(|e| StoreError::Parse {
                    line: line_no,
                    detail: e.to_string(),
                })?;
                let cost = parse_f64(cost_s).ok_or_else(|| StoreError::Parse {
                    line: line_no,
                    detail: "bad cost".into(),
                })?;
                let source = TrialSource::parse(source_s).ok_or_else(|| StoreError::Parse {
                    line: line_no,
                    detail: format!("bad source `{source_s}`"),
                })?;
                store.insert_trial(id, &embedding, config, cost, source)?;
            }
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.serialize())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let text = fs::read_to_string(path).map_err(|e| StoreError::Parse {
            line: 0,
            detail: e.to_string(),
        })?;
        ConfigStore::deserialize(&text)
    }
}

fn format_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.17e}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// Euclidean distance in fixed channel order.
pub fn euclidean(a: &Embedding, b: &Embedding) -> f64 {
    crate::gnn::squared_distance(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use crate::solver::ConfigSpace;

    fn emb(dim: usize, rng: &mut SeededRng) -> Embedding {
        (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()
    }

    fn cfg(seed: u64) -> SolverConfig {
        ConfigSpace::default().sample(seed)
    }

    #[test]
    fn insert_creates_then_appends() {
        let mut store = ConfigStore::with_dim(4);
        let e = vec![0.1, 0.2, 0.3, 0.4];
        store.insert_trial("a", &e, cfg(0), 1.0, TrialSource::Search).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.get("a").unwrap().trials.len(), 1);
        store.insert_trial("a", &e, cfg(1), 2.0, TrialSource::Search).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.get("a").unwrap().trials.len(), 2);
    }

    #[test]
    fn embedding_mismatch_is_rejected() {
        let mut store = ConfigStore::with_dim(2);
        store
            .insert_trial("a", &vec![0.0, 1.0], cfg(0), 1.0, TrialSource::Default)
            .unwrap();
        let err = store
            .insert_trial("a", &vec![0.0, 1.0 + 1e-15], cfg(1), 2.0, TrialSource::Search)
            .unwrap_err();
        assert!(matches!(err, StoreError::EmbeddingMismatch(_)));
    }

    #[test]
    fn knn_single_record() {
        let mut store = ConfigStore::with_dim(2);
        store
            .insert_trial("a", &vec![3.0, 4.0], cfg(0), 1.0, TrialSource::Search)
            .unwrap();
        let out = store.knn_query(&vec![0.0, 0.0], 1).unwrap();
        assert_eq!(out, vec![("a".to_string(), 5.0)]);
    }

    #[test]
    fn knn_matches_brute_force_with_ties() {
        let mut store = ConfigStore::with_dim(8);
        let mut rng = SeededRng::new(2);
        let mut embeddings: Vec<(String, Embedding)> = Vec::new();
        for i in 0..300 {
            let e = emb(8, &mut rng);
            let id = format!("r{i:04}");
            store.insert_trial(&id, &e, cfg(i as u64), 1.0, TrialSource::Search).unwrap();
            embeddings.push((id, e.clone()));
            if i % 50 == 0 {
                // Duplicate embeddings force distance ties resolved by id.
                let id2 = format!("r{i:04}dup");
                store.insert_trial(&id2, &e, cfg(i as u64), 1.0, TrialSource::Search).unwrap();
                embeddings.push((id2, e));
            }
        }
        for q in 0..30 {
            let query = emb(8, &mut rng);
            let mut oracle: Vec<(String, f64)> = embeddings
                .iter()
                .map(|(id, e)| (id.clone(), euclidean(&query, e)))
                .collect();
            oracle.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            let k = 1 + (q % 7);
            oracle.truncate(k);
            let got = store.knn_query(&query, k).unwrap();
            assert_eq!(got.len(), oracle.len());
            for ((gi, gd), (oi, od)) in got.iter().zip(&oracle) {
                assert_eq!(gi, oi);
                assert_eq!(gd.to_bits(), od.to_bits());
            }
        }
    }

    #[test]
    fn query_equal_to_stored_embedding_is_first_at_zero() {
        let mut store = ConfigStore::with_dim(3);
        let mut rng = SeededRng::new(9);
        for i in 0..20 {
            let e = emb(3, &mut rng);
            store.insert_trial(&format!("x{i}"), &e, cfg(0), 1.0, TrialSource::Search).unwrap();
        }
        let target = store.get("x7").unwrap().embedding.clone();
        let out = store.knn_query(&target, 3).unwrap();
        assert_eq!(out[0].0, "x7");
        assert_eq!(out[0].1, 0.0);
    }

    #[test]
    fn empty_store_query_errors() {
        let store = ConfigStore::new();
        assert_eq!(
            store.knn_query(&vec![0.0; 256], 1).unwrap_err(),
            StoreError::EmptyStore
        );
    }

    #[test]
    fn predict_takes_min_cost_trial_of_nearest() {
        let mut store = ConfigStore::with_dim(1);
        let e = vec![0.0];
        let (c7, c35, c91) = (cfg(1), cfg(2), cfg(3));
        store.insert_trial("a", &e, c7, 7.0, TrialSource::Search).unwrap();
        store.insert_trial("a", &e, c35, 3.5, TrialSource::Search).unwrap();
        store.insert_trial("a", &e, c91, 9.1, TrialSource::Search).unwrap();
        let (config, (id, cost)) = store.predict_config(&vec![0.1], 1, 1).unwrap();
        assert_eq!(config, c35);
        assert_eq!(id, "a");
        assert_eq!(cost, 3.5);
    }

    #[test]
    fn farther_neighbor_with_cheaper_trial_wins_global_min() {
        let mut store = ConfigStore::with_dim(1);
        let near_cfg = cfg(4);
        let far_cfg = cfg(5);
        store.insert_trial("near", &vec![0.0], near_cfg, 5.0, TrialSource::Search).unwrap();
        store.insert_trial("far", &vec![1.0], far_cfg, 4.0, TrialSource::Search).unwrap();
        let (config, (id, cost)) = store.predict_config(&vec![0.1], 2, 1).unwrap();
        assert_eq!(config, far_cfg);
        assert_eq!(id, "far");
        assert_eq!(cost, 4.0);
    }

    #[test]
    fn infinite_trials_never_predict() {
        let mut store = ConfigStore::with_dim(1);
        store.insert_trial("a", &vec![0.0], cfg(0), f64::INFINITY, TrialSource::Search).unwrap();
        assert_eq!(
            store.predict_config(&vec![0.0], 1, 1).unwrap_err(),
            StoreError::NoFiniteTrials
        );
        store.insert_trial("b", &vec![2.0], cfg(1), 8.0, TrialSource::Search).unwrap();
        let (_, (id, _)) = store.predict_config(&vec![0.0], 2, 2).unwrap();
        assert_eq!(id, "b");
    }

    #[test]
    fn persistence_round_trips_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.txt");
        let mut store = ConfigStore::with_dim(6);
        let mut rng = SeededRng::new(4);
        for i in 0..25 {
            let e = emb(6, &mut rng);
            let k = 1 + (i % 3);
            for t in 0..k {
                let cost = if t == 2 { f64::INFINITY } else { rng.uniform(-5.0, 5.0) };
                store
                    .insert_trial(
                        &format!("inst{i:03}"),
                        &e,
                        cfg(i as u64 * 10 + t as u64),
                        cost,
                        [TrialSource::Default, TrialSource::Search, TrialSource::Deployment]
                            [t % 3],
                    )
                    .unwrap();
            }
        }
        store.save(&path).unwrap();
        let loaded = ConfigStore::load(&path).unwrap();
        assert_eq!(store, loaded);
        // Byte-level stability of a rewrite.
        let again = loaded.serialize();
        assert_eq!(store.serialize(), again);
    }

    #[test]
    fn merge_appends_trials_and_rejects_conflicts() {
        let mut a = ConfigStore::with_dim(2);
        let mut b = ConfigStore::with_dim(2);
        a.insert_trial("x", &vec![0.0, 0.0], cfg(0), 1.0, TrialSource::Search).unwrap();
        b.insert_trial("x", &vec![0.0, 0.0], cfg(1), 2.0, TrialSource::Search).unwrap();
        b.insert_trial("y", &vec![1.0, 1.0], cfg(2), 3.0, TrialSource::Search).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.get("x").unwrap().trials.len(), 2);

        let mut c = ConfigStore::with_dim(2);
        c.insert_trial("x", &vec![9.0, 9.0], cfg(3), 1.0, TrialSource::Search).unwrap();
        assert!(matches!(a.merge(&c), Err(StoreError::EmbeddingMismatch(_))));
    }

    #[test]
    fn new_far_record_does_not_change_near_prediction() {
        let mut store = ConfigStore::with_dim(1);
        let cfg_near = cfg(6);
        store.insert_trial("near", &vec![0.0], cfg_near, 2.0, TrialSource::Search).unwrap();
        let before = store.predict_config(&vec![0.05], 1, 1).unwrap();
        store.insert_trial("far", &vec![100.0], cfg(7), 0.5, TrialSource::Search).unwrap();
        let after = store.predict_config(&vec![0.05], 1, 1).unwrap();
        assert_eq!(before, after);
    }
}
