//! Checkpoint file: magic `INRTCK01`, a u64 header length, a TOML header
//! (spec, history, tensor table) and the tensor payload from
//! [`crate::nn::encode_tensors`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_model, EpochStats, ModelSpec, TrainedModel};
use crate::error::{Error, Result};
use crate::nn::{decode_tensors, encode_tensors};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"INRTCK01";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    epoch: usize,
    best_val_mse: f64,
    initial_val_mse: f64,
    skipped_batches: usize,
    normalization_hash: u32,
    tensors: Vec<TensorEntry>,
    history: Vec<EpochStats>,
}

pub fn save_checkpoint(trained: &TrainedModel, path: &Path) -> Result<()> {
    let net = &trained.model.net;
    let header = Header {
        spec: trained.model.spec.clone(),
        epoch: trained.best_epoch,
        best_val_mse: trained.best_val_mse,
        initial_val_mse: trained.initial_val_mse,
        skipped_batches: trained.skipped_batches,
        normalization_hash: trained.normalization_hash,
        tensors: net
            .params
            .iter()
            .enumerate()
            .map(|(i, p)| TensorEntry { name: format!("layer{i}"), len: p.len() })
            .collect(),
        history: trained.history.clone(),
    };
    let text = toml::to_string(&header).map_err(|e| Error::Parse(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&encode_tensors(&net.params));
    fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let buf = fs::read(path)?;
    if buf.len() < 16 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(format!("{} is not a checkpoint", path.display())));
    }
    let len = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    let body = &buf[16..];
    if body.len() < len {
        return Err(Error::Truncated("checkpoint header".into()));
    }
    let text = std::str::from_utf8(&body[..len]).map_err(|e| Error::Parse(e.to_string()))?;
    let header: Header = toml::from_str(text).map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
    let names: Vec<String> = header.tensors.iter().map(|t| t.name.clone()).collect();
    let params = decode_tensors(&body[len..], &names)?;
    let mut model = build_model(&header.spec)?;
    for ((p, entry), target) in params.iter().zip(&header.tensors).zip(&model.net.params) {
        if p.len() != entry.len || p.len() != target.len() {
            return Err(Error::Shape { expected: target.len().to_string(), got: format!("{} ({})", p.len(), entry.name) });
        }
    }
    if params.len() != model.net.params.len() {
        return Err(Error::Shape { expected: model.net.params.len().to_string(), got: params.len().to_string() });
    }
    model.net.params = params;
    Ok(TrainedModel {
        model,
        history: header.history,
        initial_val_mse: header.initial_val_mse,
        best_epoch: header.epoch,
        best_val_mse: header.best_val_mse,
        skipped_batches: header.skipped_batches,
        normalization_hash: header.normalization_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Family;
    use crate::grid::build_ieee24;
    use crate::estimators::induced_adjacency;

    #[test]
    fn round_trip_and_corruption() {
        let sys = build_ieee24();
        let gens = sys.generator_buses();
        let mut spec = ModelSpec::new(Family::Gcn, [gens.len(), 2, 20], 3);
        spec.adjacency = Some(induced_adjacency(&sys, &gens));
        let trained = TrainedModel {
            model: build_model(&spec).unwrap(),
            history: vec![EpochStats { epoch: 1, train_mse: 0.5, val_mse: 0.25, lr: 1e-3 }],
            initial_val_mse: 1.0,
            best_epoch: 1,
            best_val_mse: 0.25,
            skipped_batches: 0,
            normalization_hash: 77,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&trained, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), trained);

        let mut bytes = fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 20] ^= 0xff;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checksum { .. })));
        fs::write(&path, b"").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::BadMagic(_))));
    }
}
