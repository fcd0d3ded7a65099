//! Cost labeling, the two-phase triplet sampling schedule, and the metric
//! training loop.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::featurize::{extract_bipartite, BipartiteGraph};
use crate::gnn::{
    init_model, train_step, AdamState, EncoderModel, GnnError, TripletRef,
};
use crate::milp::instance::MilpInstance;
use crate::rng::{derive_seed, SeededRng};
use crate::solver::{branch_and_bound, ConfigSpace, Limits};

/// Margin of the triplet loss.
pub const ALPHA: f64 = 0.1;
/// Adam step size of the metric training loop.
pub const LEARNING_RATE: f64 = 1e-3;
/// Normalized costs live on this scale.
pub const COST_SCALE: f64 = 100.0;

/// Per-instance solve cost under the default configuration, raw and
/// normalized. Unsolved instances carry `+inf` raw cost and no normalized
/// value; they are kept for bookkeeping but never sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    entries: BTreeMap<String, CostEntry>,
    /// Affine map raw -> normalized: (min, span) over finite raw costs.
    norm: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEntry {
    pub raw_cost: f64,
    pub normalized_cost: Option<f64>,
}

impl CostTable {
    /// Builds the table from raw costs, normalizing finite entries affinely
    /// onto [0, 100] (a constant cost set maps to all zeros).
    pub fn from_raw(raw: impl IntoIterator<Item = (String, f64)>) -> Self {
        let raw: BTreeMap<String, f64> = raw.into_iter().collect();
        let finite: Vec<f64> = raw.values().copied().filter(|c| c.is_finite()).collect();
        let norm = if finite.is_empty() {
            None
        } else {
            let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some((min, max - min))
        };
        let entries = raw
            .into_iter()
            .map(|(id, raw_cost)| {
                let normalized_cost = if raw_cost.is_finite() {
                    Some(normalize_with(norm, raw_cost))
                } else {
                    None
                };
                (
                    id,
                    CostEntry {
                        raw_cost,
                        normalized_cost,
                    },
                )
            })
            .collect();
        CostTable { entries, norm }
    }

    pub fn get(&self, id: &str) -> Option<&CostEntry> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &CostEntry)> {
        self.entries.iter()
    }

    /// Ids with finite cost, in id order.
    pub fn labeled_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.normalized_cost.is_some())
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Maps a raw cost through this table's affine normalization (values
    /// outside the labeling range extend beyond [0, 100]).
    pub fn normalize_raw(&self, raw: f64) -> f64 {
        normalize_with(self.norm, raw)
    }
}

fn normalize_with(norm: Option<(f64, f64)>, raw: f64) -> f64 {
    match norm {
        Some((min, span)) if span > 0.0 => (raw - min) / span * COST_SCALE,
        Some((min, _)) => {
            if raw == min {
                0.0
            } else {
                (raw - min) * COST_SCALE
            }
        }
        None => 0.0,
    }
}

/// Labels every instance by one default-configuration solve; deterministic
/// because every solve uses the same seed (the fixed "solving environment").
pub fn label_costs(instances: &[MilpInstance], limits: &Limits, seed: u64) -> CostTable {
    let space = ConfigSpace::default();
    let raw: Vec<(String, f64)> = instances
        .iter()
        .map(|inst| {
            let result = branch_and_bound(inst, &space.default_config, limits, seed);
            (inst.instance_id(), result.best_cost)
        })
        .collect();
    CostTable::from_raw(raw)
}

/// The Algorithm-1 sampling schedule: hard negatives (cost gap at least
/// `hard_factor * c_thr`) for the first `epochs_hard` epochs, then any
/// negative with gap above `c_thr`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    pub c_thr: f64,
    pub hard_factor: f64,
    pub epochs_hard: usize,
    pub epochs_total: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for SamplingSchedule {
    fn default() -> Self {
        SamplingSchedule {
            c_thr: 1.0,
            hard_factor: 10.0,
            epochs_hard: 50,
            epochs_total: 100,
            batch_size: 32,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("NoValidTriplet: no anchor admits both a positive and a phase-valid negative")]
    NoValidTriplet,
    #[error("schedule invariant violated: {0}")]
    BadSchedule(&'static str),
}

impl SamplingSchedule {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.c_thr <= 0.0 {
            return Err(SamplingError::BadSchedule("c_thr must be positive"));
        }
        if self.hard_factor <= 1.0 {
            return Err(SamplingError::BadSchedule("hard_factor must exceed 1"));
        }
        if self.epochs_hard > self.epochs_total {
            return Err(SamplingError::BadSchedule(
                "epochs_hard must not exceed epochs_total",
            ));
        }
        if self.hard_factor * self.c_thr > COST_SCALE {
            return Err(SamplingError::BadSchedule(
                "hard threshold exceeds the normalized cost scale",
            ));
        }
        if self.batch_size == 0 {
            return Err(SamplingError::BadSchedule("batch_size must be positive"));
        }
        Ok(())
    }

    fn negative_gap(&self, epoch: usize, gap: f64) -> bool {
        if epoch < self.epochs_hard {
            gap >= self.hard_factor * self.c_thr
        } else {
            gap > self.c_thr
        }
    }
}

/// Draws one (anchor, positive, negative) id triple. The anchor is uniform
/// among labeled instances that admit both a positive (cost gap below
/// `c_thr`) and a phase-valid negative; positive and negative are uniform
/// over their candidate sets; all three are distinct.
pub fn sample_triplet(
    table: &CostTable,
    schedule: &SamplingSchedule,
    epoch: usize,
    rng: &mut SeededRng,
) -> Result<(String, String, String), SamplingError> {
    let ids = table.labeled_ids();
    let costs: Vec<f64> = ids
        .iter()
        .map(|id| table.get(id).unwrap().normalized_cost.unwrap())
        .collect();

    let mut anchors: Vec<usize> = Vec::new();
    for (a, &ca) in costs.iter().enumerate() {
        let mut has_pos = false;
        let mut has_neg = false;
        for (j, &cj) in costs.iter().enumerate() {
            if j == a {
                continue;
            }
            let gap = (ca - cj).abs();
            has_pos |= gap < schedule.c_thr;
            has_neg |= schedule.negative_gap(epoch, gap);
            if has_pos && has_neg {
                break;
            }
        }
        if has_pos && has_neg {
            anchors.push(a);
        }
    }
    if anchors.is_empty() {
        return Err(SamplingError::NoValidTriplet);
    }
    let a = anchors[rng.index(anchors.len())];
    let ca = costs[a];
    let positives: Vec<usize> = (0..ids.len())
        .filter(|&j| j != a && (ca - costs[j]).abs() < schedule.c_thr)
        .collect();
    let negatives: Vec<usize> = (0..ids.len())
        .filter(|&j| j != a && schedule.negative_gap(epoch, (ca - costs[j]).abs()))
        .collect();
    let p = positives[rng.index(positives.len())];
    let n = negatives[rng.index(negatives.len())];
    // The positive window (< c_thr) and negative threshold (> c_thr) are
    // disjoint, so p != n always.
    debug_assert_ne!(p, n);
    Ok((ids[a].clone(), ids[p].clone(), ids[n].clone()))
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error("unknown instance id `{0}` in cost table")]
    UnknownInstance(String),
}

/// Output of the training loop.
pub struct TrainedMetric {
    pub model: EncoderModel,
    /// Mean triplet loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Trains the encoder per the sampling schedule: `ceil(labeled/batch)`
/// steps per epoch, one batch of `batch_size` sampled triplets per step,
/// margin [`ALPHA`], Adam at [`LEARNING_RATE`].
pub fn train_metric_model(
    instances: &[MilpInstance],
    table: &CostTable,
    schedule: &SamplingSchedule,
) -> Result<TrainedMetric, TrainError> {
    schedule.validate()?;
    let graphs: BTreeMap<String, BipartiteGraph> = instances
        .iter()
        .map(|inst| (inst.instance_id(), extract_bipartite(inst)))
        .collect();
    for id in table.labeled_ids() {
        if !graphs.contains_key(&id) {
            return Err(TrainError::UnknownInstance(id));
        }
    }

    let mut model = init_model(derive_seed(schedule.rng_seed, 0x6d6f64));
    let mut adam = AdamState::new(&model);
    let mut rng = SeededRng::new(derive_seed(schedule.rng_seed, 0x747269));
    let labeled = table.labeled_ids().len();
    let steps_per_epoch = labeled.div_ceil(schedule.batch_size).max(1);

    let mut loss_curve = Vec::with_capacity(schedule.epochs_total);
    for epoch in 0..schedule.epochs_total {
        let mut epoch_loss = 0.0;
        for _ in 0..steps_per_epoch {
            let mut batch_ids = Vec::with_capacity(schedule.batch_size);
            for _ in 0..schedule.batch_size {
                batch_ids.push(sample_triplet(table, schedule, epoch, &mut rng)?);
            }
            let batch: Vec<TripletRef<'_>> = batch_ids
                .iter()
                .map(|(a, p, n)| TripletRef {
                    anchor: &graphs[a],
                    positive: &graphs[p],
                    negative: &graphs[n],
                })
                .collect();
            epoch_loss += train_step(&mut model, &mut adam, &batch, ALPHA, LEARNING_RATE)?;
        }
        loss_curve.push(epoch_loss / steps_per_epoch as f64);
    }
    Ok(TrainedMetric { model, loss_curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::generate::{generate_instance, Family};
    use std::collections::BTreeSet;

    fn table_of(costs: &[(&str, f64)]) -> CostTable {
        CostTable::from_raw(costs.iter().map(|&(id, c)| (id.to_string(), c)))
    }

    #[test]
    fn normalization_maps_endpoints() {
        let t = table_of(&[("a", 10.0), ("b", 20.0)]);
        assert_eq!(t.get("a").unwrap().normalized_cost, Some(0.0));
        assert_eq!(t.get("b").unwrap().normalized_cost, Some(100.0));
    }

    #[test]
    fn constant_costs_normalize_to_zero() {
        let t = table_of(&[("a", 5.0), ("b", 5.0), ("c", 5.0)]);
        for (_, e) in t.iter() {
            assert_eq!(e.normalized_cost, Some(0.0));
        }
    }

    #[test]
    fn unsolved_instances_have_no_normalized_cost() {
        let t = table_of(&[("a", 1.0), ("b", f64::INFINITY), ("c", 3.0)]);
        assert_eq!(t.get("b").unwrap().normalized_cost, None);
        assert_eq!(t.labeled_ids(), vec!["a".to_string(), "c".to_string()]);
    }

    #[test]
    fn renormalizing_is_idempotent() {
        let t = table_of(&[("a", 10.0), ("b", 30.0), ("c", 20.0)]);
        let renorm = CostTable::from_raw(
            t.iter()
                .map(|(id, e)| (id.clone(), e.normalized_cost.unwrap())),
        );
        for (id, e) in t.iter() {
            assert_eq!(
                renorm.get(id).unwrap().normalized_cost,
                e.normalized_cost,
                "id {id}"
            );
        }
    }

    #[test]
    fn labeling_is_deterministic() {
        let instances: Vec<_> = (0..10)
            .map(|s| generate_instance(Family::Placement, (10, 5), s).unwrap())
            .collect();
        let limits = Limits::nodes(50);
        let a = label_costs(&instances, &limits, 7);
        let b = label_costs(&instances, &limits, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn hard_phase_accepts_only_wide_gaps() {
        // Anchoring 0 and 100 keeps the remaining raw values equal to their
        // normalized values.
        let t = table_of(&[
            ("lo", 0.0),
            ("hi", 100.0),
            ("a", 50.0),
            ("p", 50.5),
            ("n", 95.0),
            ("near", 52.0),
        ]);
        let schedule = SamplingSchedule::default();
        let mut rng = SeededRng::new(1);
        for _ in 0..200 {
            let (a, p, n) = sample_triplet(&t, &schedule, 0, &mut rng).unwrap();
            let ca = t.get(&a).unwrap().normalized_cost.unwrap();
            let cp = t.get(&p).unwrap().normalized_cost.unwrap();
            let cn = t.get(&n).unwrap().normalized_cost.unwrap();
            assert!((ca - cp).abs() < 1.0);
            assert!((ca - cn).abs() >= 10.0);
            assert_ne!(n, "near", "2-unit gap returned as hard negative");
        }
    }

    #[test]
    fn drawn_triplets_match_enumerated_valid_set() {
        // Five entries; enumerate every (a, p, n) satisfying the phase
        // predicate directly from the definition and compare.
        let entries = [
            ("e0", 0.0),
            ("e1", 0.4),
            ("e2", 30.0),
            ("e3", 30.5),
            ("e4", 100.0),
        ];
        let t = table_of(&entries);
        let schedule = SamplingSchedule::default();
        for epoch in [0usize, 75] {
            let mut expected: BTreeSet<(String, String, String)> = BTreeSet::new();
            for (ai, &(aid, ac)) in entries.iter().enumerate() {
                let has_pos = entries
                    .iter()
                    .enumerate()
                    .any(|(j, &(_, c))| j != ai && (ac - c).abs() < 1.0);
                let has_neg = entries.iter().enumerate().any(|(j, &(_, c))| {
                    j != ai && schedule.negative_gap(epoch, (ac - c).abs())
                });
                if !(has_pos && has_neg) {
                    continue;
                }
                for (pi, &(pid, pc)) in entries.iter().enumerate() {
                    if pi == ai || (ac - pc).abs() >= 1.0 {
                        continue;
                    }
                    for (ni, &(nid, nc)) in entries.iter().enumerate() {
                        if ni == ai || !schedule.negative_gap(epoch, (ac - nc).abs()) {
                            continue;
                        }
                        expected.insert((aid.into(), pid.into(), nid.into()));
                    }
                }
            }
            let mut drawn: BTreeSet<(String, String, String)> = BTreeSet::new();
            let mut rng = SeededRng::new(3);
            for _ in 0..10_000 {
                drawn.insert(sample_triplet(&t, &schedule, epoch, &mut rng).unwrap());
            }
            assert_eq!(drawn, expected, "epoch {epoch}");
        }
    }

    #[test]
    fn no_valid_triplet_is_an_error() {
        // All costs far apart: no positives anywhere.
        let t = table_of(&[("a", 0.0), ("b", 50.0), ("c", 100.0)]);
        let schedule = SamplingSchedule::default();
        let mut rng = SeededRng::new(5);
        assert_eq!(
            sample_triplet(&t, &schedule, 0, &mut rng).unwrap_err(),
            SamplingError::NoValidTriplet
        );
    }

    #[test]
    fn tiny_training_run_is_deterministic_and_complete() {
        let instances: Vec<_> = (0..12)
            .map(|s| generate_instance(Family::Placement, (10, 5), s).unwrap())
            .collect();
        let table = label_costs(&instances, &Limits::nodes(60), 11);
        let schedule = SamplingSchedule {
            epochs_hard: 2,
            epochs_total: 4,
            batch_size: 4,
            rng_seed: 9,
            ..Default::default()
        };
        let a = train_metric_model(&instances, &table, &schedule).unwrap();
        let b = train_metric_model(&instances, &table, &schedule).unwrap();
        assert_eq!(a.loss_curve.len(), 4);
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.model, b.model);
        assert!(a.loss_curve.iter().all(|l| *l >= 0.0));
    }
}
