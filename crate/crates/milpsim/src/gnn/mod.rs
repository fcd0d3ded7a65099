//! Fixed-architecture graph encoder: forward pass, exact reverse-mode
//! gradients, triplet loss, Adam updates and checkpointing.

pub mod adam;
pub mod backward;
pub mod forward;
pub mod loss;
pub mod model;

pub use adam::AdamState;
pub use backward::{
    batch_loss, compute_gradients, gradient_check, train_step, Gradients, TripletRef,
};
pub use forward::{forward_embed, forward_with_cache, GnnError};
pub use loss::{squared_distance, triplet_loss};
pub use model::{
    init_model, init_model_with_dims, load_model, save_model, CheckpointError, Embedding,
    EncoderModel, ModelDims, HIDDEN_DIM, NUM_LAYERS, OUTPUT_DIM,
};
