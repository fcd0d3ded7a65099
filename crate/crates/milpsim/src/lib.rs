//! Learn a cost-correlated similarity metric over MILP instances and use
//! nearest-neighbor lookup in the learned space to predict solver
//! configurations for unseen instances.
//!
//! The pipeline, end to end:
//!
//! 1. [`milp`] — define, parse (MPS subset), generate and evaluate MILP
//!    instances.
//! 2. [`solver`] — a deterministic, configurable branch-and-bound solver
//!    whose solution cost varies meaningfully with its configuration.
//! 3. [`featurize`] — bipartite variable/constraint graph features plus a
//!    shallow aggregate-statistics baseline vector.
//! 4. [`gnn`] — a fixed-architecture graph encoder with exact reverse-mode
//!    gradients, triplet loss and Adam updates.
//! 5. [`train`] — cost labeling, the two-phase triplet sampling schedule
//!    and the metric training loop.
//! 6. [`store`] — a persistent store of (embedding, configuration, cost)
//!    records with exact KNN search and configuration prediction.
//! 7. [`tuner`] — offline per-instance configuration search that populates
//!    the store.
//! 8. [`bench`] — validation studies: cost correlation of similar pairs,
//!    prediction accuracy, and baseline comparison.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bench;
pub mod featurize;
pub mod gnn;
pub mod milp;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod solver;
pub mod store;
pub mod train;
pub mod tuner;
