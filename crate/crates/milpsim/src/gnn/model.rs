//! Encoder parameters, initialization and checkpoint IO.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::featurize::{CONS_FEATURES, VAR_FEATURES};
use crate::rng::SeededRng;

/// Embedding produced by the encoder.
pub type Embedding = Vec<f64>;

/// Standard encoder dimensions.
pub const HIDDEN_DIM: usize = 64;
pub const OUTPUT_DIM: usize = 256;
pub const NUM_LAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub var_in: usize,
    pub cons_in: usize,
    pub hidden: usize,
    pub out: usize,
    pub layers: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            var_in: VAR_FEATURES,
            cons_in: CONS_FEATURES,
            hidden: HIDDEN_DIM,
            out: OUTPUT_DIM,
            layers: NUM_LAYERS,
        }
    }
}

impl ModelDims {
    /// Input width of the constraint-side self weight at layer `l`.
    pub fn cons_self_in(&self, l: usize) -> usize {
        if l == 0 {
            self.cons_in
        } else {
            self.hidden
        }
    }

    /// Input width of the constraint-side neighbor weight at layer `l`
    /// (neighbors are variable nodes, not yet updated within the layer).
    pub fn cons_neigh_in(&self, l: usize) -> usize {
        if l == 0 {
            self.var_in
        } else {
            self.hidden
        }
    }

    /// Input width of the variable-side self weight at layer `l`.
    pub fn var_self_in(&self, l: usize) -> usize {
        if l == 0 {
            self.var_in
        } else {
            self.hidden
        }
    }

    /// Variable-side neighbors are the *updated* constraint features, so the
    /// width is always `hidden`.
    pub fn var_neigh_in(&self) -> usize {
        self.hidden
    }
}

/// One convolution layer: a (self, neighbor) weight pair per side. The
/// constraint side updates first, then the variable side sees the updated
/// constraint features.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// hidden x cons_self_in, row-major.
    pub cons_self: Vec<f64>,
    /// hidden x cons_neigh_in.
    pub cons_neigh: Vec<f64>,
    /// hidden x var_self_in.
    pub var_self: Vec<f64>,
    /// hidden x hidden.
    pub var_neigh: Vec<f64>,
}

/// The graph encoder: four convolution layers, per-graph normalization
/// scale/shift, an attention score vector, and a projection onto the
/// embedding space (applied to max-pool ++ attention-pool).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub dims: ModelDims,
    pub layers: Vec<LayerParams>,
    pub norm_scale: Vec<f64>,
    pub norm_shift: Vec<f64>,
    /// Attention score vector w; node scores are w . h_i.
    pub attention: Vec<f64>,
    /// out x (2 * hidden), row-major.
    pub projection: Vec<f64>,
}

fn xavier(rng: &mut SeededRng, rows: usize, cols: usize) -> Vec<f64> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.uniform(-s, s)).collect()
}

/// Deterministic model initialization at the standard dimensions.
pub fn init_model(seed: u64) -> EncoderModel {
    init_model_with_dims(seed, ModelDims::default())
}

/// Initialization at caller-chosen dimensions (small models for gradient
/// checks); weight matrices uniform in [-s, s], s = sqrt(6/(fan_in+fan_out)),
/// normalization at identity.
pub fn init_model_with_dims(seed: u64, dims: ModelDims) -> EncoderModel {
    let mut rng = SeededRng::new(seed);
    let layers = (0..dims.layers)
        .map(|l| LayerParams {
            cons_self: xavier(&mut rng, dims.hidden, dims.cons_self_in(l)),
            cons_neigh: xavier(&mut rng, dims.hidden, dims.cons_neigh_in(l)),
            var_self: xavier(&mut rng, dims.hidden, dims.var_self_in(l)),
            var_neigh: xavier(&mut rng, dims.hidden, dims.var_neigh_in()),
        })
        .collect();
    EncoderModel {
        dims,
        layers,
        norm_scale: vec![1.0; dims.hidden],
        norm_shift: vec![0.0; dims.hidden],
        attention: xavier(&mut rng, 1, dims.hidden),
        projection: xavier(&mut rng, dims.out, 2 * dims.hidden),
    }
}

impl EncoderModel {
    /// Visits every parameter tensor in the fixed serialization order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            out.push(&layer.cons_self);
            out.push(&layer.cons_neigh);
            out.push(&layer.var_self);
            out.push(&layer.var_neigh);
        }
        out.push(&self.norm_scale);
        out.push(&self.norm_shift);
        out.push(&self.attention);
        out.push(&self.projection);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.cons_self);
            out.push(&mut layer.cons_neigh);
            out.push(&mut layer.var_self);
            out.push(&mut layer.var_neigh);
        }
        out.push(&mut self.norm_scale);
        out.push(&mut self.norm_shift);
        out.push(&mut self.attention);
        out.push(&mut self.projection);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

const MAGIC: &[u8; 8] = b"MSIMENC\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint magic")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("checkpoint shape mismatch")]
    ShapeMismatch,
}

/// Binary layout: magic, version, five u32 dims, then every tensor in
/// [`EncoderModel::tensors`] order as little-endian f64. Bit-exact round trip.
pub fn save_model(model: &EncoderModel, path: &Path) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for d in [
        model.dims.var_in,
        model.dims.cons_in,
        model.dims.hidden,
        model.dims.out,
        model.dims.layers,
    ] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for tensor in model.tensors() {
        for &v in tensor {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<EncoderModel, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let mut dims_raw = [0usize; 5];
    for d in &mut dims_raw {
        r.read_exact(&mut u32buf)?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let dims = ModelDims {
        var_in: dims_raw[0],
        cons_in: dims_raw[1],
        hidden: dims_raw[2],
        out: dims_raw[3],
        layers: dims_raw[4],
    };
    if dims.hidden == 0 || dims.out == 0 || dims.layers == 0 {
        return Err(CheckpointError::ShapeMismatch);
    }
    // Build an empty model with the right shapes, then fill.
    let mut model = init_model_with_dims(0, dims);
    let mut f64buf = [0u8; 8];
    for tensor in model.tensors_mut() {
        for v in tensor.iter_mut() {
            r.read_exact(&mut f64buf)?;
            *v = f64::from_le_bytes(f64buf);
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(CheckpointError::ShapeMismatch);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = init_model(9);
        let b = init_model(9);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = init_model(1);
        let b = init_model(2);
        assert_ne!(a, b);
    }

    #[test]
    fn shapes_are_documented() {
        let m = init_model(3);
        let d = m.dims;
        assert_eq!(m.layers.len(), NUM_LAYERS);
        assert_eq!(m.layers[0].cons_self.len(), d.hidden * d.cons_in);
        assert_eq!(m.layers[0].cons_neigh.len(), d.hidden * d.var_in);
        assert_eq!(m.layers[0].var_self.len(), d.hidden * d.var_in);
        assert_eq!(m.layers[0].var_neigh.len(), d.hidden * d.hidden);
        for l in 1..NUM_LAYERS {
            assert_eq!(m.layers[l].cons_self.len(), d.hidden * d.hidden);
        }
        assert_eq!(m.norm_scale, vec![1.0; d.hidden]);
        assert_eq!(m.norm_shift, vec![0.0; d.hidden]);
        assert_eq!(m.attention.len(), d.hidden);
        assert_eq!(m.projection.len(), d.out * 2 * d.hidden);
        assert!(m.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn checkpoint_round_trips_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        let model = init_model(42);
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model.dims, loaded.dims);
        for (a, b) in model.tensors().iter().zip(loaded.tensors()) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn load_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTAMODEL-------").unwrap();
        assert!(matches!(load_model(&path), Err(CheckpointError::BadMagic)));
    }
}
