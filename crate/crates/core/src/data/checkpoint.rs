//! Checkpoint container: a directory holding `manifest.json` and one tensor
//! blob per parameter. The manifest's content hash is SHA-256 over the blob
//! bytes in manifest order.

use std::fs;
use std::path::Path;

use dagr_tensor::io::{decode, encode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::saliency::{SaliencyConfig, SaliencyNet};
use crate::vqa::{VqaConfig, VqaModel};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tensors: Vec<ManifestEntry>,
    pub content_hash: String,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub metadata: serde_json::Value,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a new checkpoint directory. Refuses to overwrite an existing one.
pub fn save_checkpoint(dir: &Path, params: &ParamStore, metadata: &serde_json::Value) -> Result<Manifest> {
    if dir.join(MANIFEST).exists() {
        return Err(Error::Config(format!("checkpoint already exists at {}", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut hasher = Sha256::new();
    let mut tensors = Vec::with_capacity(params.len());
    for (name, t) in params.iter() {
        let file = format!("{name}.bin");
        let bytes = encode(name, t);
        hasher.update(&bytes);
        write(&dir.join(&file), &bytes)?;
        tensors.push(ManifestEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            file,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        tensors,
        content_hash: hex::encode(hasher.finalize()),
        metadata: metadata.clone(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::format("manifest", e))?;
    write(&dir.join(MANIFEST), &json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::format("manifest", e))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: manifest.format_version,
        });
    }
    Ok(manifest)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let manifest = read_manifest(dir)?;
    let mut hasher = Sha256::new();
    let mut blobs = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let path = dir.join(&entry.file);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingTensor(entry.name.clone()))
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        hasher.update(&bytes);
        blobs.push(bytes);
    }
    let found = hex::encode(hasher.finalize());
    if found != manifest.content_hash {
        return Err(Error::HashMismatch {
            expected: manifest.content_hash,
            found,
        });
    }
    let mut params = ParamStore::new();
    for (entry, bytes) in manifest.tensors.iter().zip(blobs) {
        let (header, t) = decode(&bytes)?;
        if header.name != entry.name || header.shape != entry.shape {
            return Err(Error::format(
                "checkpoint",
                format!("blob {} does not match manifest entry {}", header.name, entry.name),
            ));
        }
        params.insert(entry.name.clone(), t);
    }
    Ok(Checkpoint {
        params,
        metadata: manifest.metadata,
    })
}

pub const KIND_SALIENCY: &str = "saliency";
pub const KIND_VQA: &str = "vqa";

fn model_metadata(kind: &str, model: &impl Serialize, extra: serde_json::Value) -> Result<serde_json::Value> {
    let model = serde_json::to_value(model).map_err(|e| Error::format("model config", e))?;
    Ok(serde_json::json!({"kind": kind, "model": model, "extra": extra}))
}

fn model_config<T: serde::de::DeserializeOwned>(ck: &Checkpoint, kind: &str) -> Result<T> {
    let found = ck.metadata.get("kind").and_then(|k| k.as_str()).unwrap_or("");
    if found != kind {
        return Err(Error::format("checkpoint", format!("holds a {found:?} model, expected {kind:?}")));
    }
    let model = ck.metadata.get("model").cloned().unwrap_or_default();
    serde_json::from_value(model).map_err(|e| Error::format("checkpoint model config", e))
}

pub fn save_saliency_net(dir: &Path, net: &SaliencyNet, extra: serde_json::Value) -> Result<Manifest> {
    save_checkpoint(dir, &net.params, &model_metadata(KIND_SALIENCY, &net.cfg, extra)?)
}

pub fn load_saliency_net(dir: &Path) -> Result<SaliencyNet> {
    let ck = load_checkpoint(dir)?;
    let cfg: SaliencyConfig = model_config(&ck, KIND_SALIENCY)?;
    SaliencyNet::from_params(cfg, ck.params)
}

pub fn save_vqa_model(dir: &Path, model: &VqaModel, extra: serde_json::Value) -> Result<Manifest> {
    save_checkpoint(dir, &model.params, &model_metadata(KIND_VQA, &model.cfg, extra)?)
}

pub fn load_vqa_model(dir: &Path) -> Result<VqaModel> {
    let ck = load_checkpoint(dir)?;
    let cfg: VqaConfig = model_config(&ck, KIND_VQA)?;
    VqaModel::from_params(cfg, ck.params)
}
