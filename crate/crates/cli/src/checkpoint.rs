//! Self-describing checkpoint archive.
//!
//! Layout: 8-byte magic, little-endian u64 header length, JSON header, then a
//! flat little-endian f64 blob. The header names every tensor with shape and
//! offset, carries the model configuration, the vocabulary (tokens in index
//! order) and its hash, RNG state, train counters, and optional optimizer
//! moments — everything needed to resume or evaluate without guesswork.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tanntm_core::adam::Adam;
use tanntm_core::train::TrainState;
use tanntm_core::{ModelConfig, ModelParams, Rng, Variant};

pub const MAGIC: &[u8; 8] = b"TANNTM\x01\n";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format {0}")]
    UnsupportedFormat(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

#[derive(Clone, Serialize, Deserialize)]
struct ModelConfigSer {
    vocab_size: usize,
    topics: usize,
    embed_dim: usize,
    hidden_dim: usize,
    attn_dim: usize,
    variant: String,
    dropout_rate: f64,
    prior_alpha: f64,
}

impl From<&ModelConfig> for ModelConfigSer {
    fn from(cfg: &ModelConfig) -> Self {
        Self {
            vocab_size: cfg.vocab_size,
            topics: cfg.topics,
            embed_dim: cfg.embed_dim,
            hidden_dim: cfg.hidden_dim,
            attn_dim: cfg.attn_dim,
            variant: cfg.variant.as_str().to_string(),
            dropout_rate: cfg.dropout_rate,
            prior_alpha: cfg.prior_alpha,
        }
    }
}

impl ModelConfigSer {
    fn to_config(&self) -> Result<ModelConfig, CheckpointError> {
        let variant = Variant::parse(&self.variant)
            .ok_or_else(|| CheckpointError::Corrupt(format!("unknown variant {}", self.variant)))?;
        Ok(ModelConfig {
            vocab_size: self.vocab_size,
            topics: self.topics,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            attn_dim: self.attn_dim,
            variant,
            dropout_rate: self.dropout_rate,
            prior_alpha: self.prior_alpha,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: u64, // element offset into the f64 blob
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: u32,
    #[serde(default)]
    created_by: String,
    model: ModelConfigSer,
    dataset: Option<String>,
    vocab_sha256: String,
    vocab_tokens: Vec<String>,
    max_seq_len: usize,
    epoch: usize,
    step: u64,
    rng_state: [u64; 4],
    adam_step: Option<u64>,
    tensors: Vec<TensorEntry>,
}

/// Optimizer moments as checkpointed: `(step, m, v)` in trainable order.
pub type AdamMoments = (u64, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Everything a checkpoint round-trips.
pub struct Checkpoint {
    pub model: ModelConfig,
    pub params: ModelParams,
    pub dataset: Option<String>,
    pub vocab_sha256: String,
    pub vocab_tokens: Vec<String>,
    pub max_seq_len: usize,
    pub state: TrainState,
    pub rng_state: [u64; 4],
    /// Moment tensors, when saved mid-training.
    pub adam: Option<AdamMoments>,
}

impl Checkpoint {
    pub fn restore_optimizer(&self, beta1: f64, beta2: f64, eps: f64) -> Option<Adam> {
        let (t, m, v) = self.adam.as_ref()?;
        let sizes: Vec<usize> = m.iter().map(|g| g.len()).collect();
        Some(Adam::restore(
            &sizes,
            beta1,
            beta2,
            eps,
            *t,
            m.clone(),
            v.clone(),
        ))
    }
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<(), CheckpointError> {
    let mut tensors = Vec::new();
    let mut blob_len: u64 = 0;
    let mut blobs: Vec<&[f64]> = Vec::new();
    for (name, rows, cols, data) in ckpt.params.state_tensors() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            rows,
            cols,
            offset: blob_len,
            len: data.len() as u64,
        });
        blob_len += data.len() as u64;
        blobs.push(data);
    }
    if let Some((_, m, v)) = &ckpt.adam {
        let names: Vec<&'static str> = ckpt.params.trainable().iter().map(|t| t.0).collect();
        for (prefix, group) in [("adam.m.", m), ("adam.v.", v)] {
            for (name, data) in names.iter().zip(group.iter()) {
                tensors.push(TensorEntry {
                    name: format!("{prefix}{name}"),
                    rows: 1,
                    cols: data.len(),
                    offset: blob_len,
                    len: data.len() as u64,
                });
                blob_len += data.len() as u64;
                blobs.push(data);
            }
        }
    }

    let header = Header {
        format: FORMAT_VERSION,
        created_by: concat!("tanntm ", env!("CARGO_PKG_VERSION")).to_string(),
        model: ModelConfigSer::from(&ckpt.model),
        dataset: ckpt.dataset.clone(),
        vocab_sha256: ckpt.vocab_sha256.clone(),
        vocab_tokens: ckpt.vocab_tokens.clone(),
        max_seq_len: ckpt.max_seq_len,
        epoch: ckpt.state.epoch,
        step: ckpt.state.step,
        rng_state: ckpt.rng_state,
        adam_step: ckpt.adam.as_ref().map(|(t, _, _)| *t),
        tensors,
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;

    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        out.write_all(MAGIC)?;
        out.write_all(&(header_json.len() as u64).to_le_bytes())?;
        out.write_all(&header_json)?;
        for blob in blobs {
            // Little-endian f64, tensor by tensor.
            let mut bytes = Vec::with_capacity(blob.len() * 8);
            for &x in blob {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            out.write_all(&bytes)?;
        }
        out.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut len_bytes = [0u8; 8];
    reader.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    reader.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    if header.format != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedFormat(header.format));
    }
    let model = header.model.to_config()?;

    let mut blob_bytes = Vec::new();
    reader.read_to_end(&mut blob_bytes)?;
    if blob_bytes.len() % 8 != 0 {
        return Err(CheckpointError::Corrupt("blob not a multiple of 8".into()));
    }
    let blob: Vec<f64> = blob_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let read_tensor = |name: &str| -> Result<&[f64], CheckpointError> {
        let entry = header
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CheckpointError::Corrupt(format!("missing tensor {name}")))?;
        let start = entry.offset as usize;
        let end = start + entry.len as usize;
        blob.get(start..end)
            .ok_or_else(|| CheckpointError::Corrupt(format!("tensor {name} out of bounds")))
    };

    // Shape the parameter container, then overwrite every state tensor.
    let mut params = ModelParams::init(&model, &mut Rng::seed_from_u64(0));
    for (name, slot) in params.state_tensors_mut() {
        let data = read_tensor(name)?;
        if data.len() != slot.len() {
            return Err(CheckpointError::Corrupt(format!(
                "tensor {name}: expected {} values, found {}",
                slot.len(),
                data.len()
            )));
        }
        slot.copy_from_slice(data);
    }

    let adam = if let Some(t) = header.adam_step {
        let names: Vec<&'static str> = params.trainable().iter().map(|p| p.0).collect();
        let mut m = Vec::with_capacity(names.len());
        let mut v = Vec::with_capacity(names.len());
        for name in &names {
            m.push(read_tensor(&format!("adam.m.{name}"))?.to_vec());
            v.push(read_tensor(&format!("adam.v.{name}"))?.to_vec());
        }
        Some((t, m, v))
    } else {
        None
    };

    if header.vocab_tokens.len() != model.vocab_size {
        return Err(CheckpointError::Corrupt(format!(
            "vocabulary carries {} tokens but the model expects {}",
            header.vocab_tokens.len(),
            model.vocab_size
        )));
    }

    Ok(Checkpoint {
        model,
        params,
        dataset: header.dataset,
        vocab_sha256: header.vocab_sha256,
        vocab_tokens: header.vocab_tokens,
        max_seq_len: header.max_seq_len,
        state: TrainState {
            epoch: header.epoch,
            step: header.step,
        },
        rng_state: header.rng_state,
        adam,
    })
}
