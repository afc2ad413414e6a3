#![allow(dead_code)]

use std::path::PathBuf;

use fibquant::codebook::{init_codebook, serialize_codebook};
use fibquant::codec::{EncodedCache, VectorCodec};
use fibquant::eval::gaussian_rows;
use fibquant::source::haar_rotation;
use fibquant::Codebook;

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}

pub fn golden_codebook() -> Codebook {
    init_codebook(64, 2, 16).unwrap()
}

pub fn golden_codec() -> VectorCodec<Codebook> {
    VectorCodec::new(golden_codebook(), haar_rotation(64, 2024).unwrap()).unwrap()
}

pub fn golden_cache() -> EncodedCache {
    golden_codec().encode_cache(&gaussian_rows(8, 64, 77).unwrap()).unwrap()
}

/// Compares `bytes` with the stored golden file, rewriting it instead when
/// `FIBQUANT_BLESS` is set.
pub fn check_golden(name: &str, bytes: &[u8]) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("FIBQUANT_BLESS").is_some() {
        std::fs::write(&path, bytes).map_err(|e| e.to_string())?;
    }
    let stored = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if stored == bytes {
        Ok(())
    } else {
        let first = stored.iter().zip(bytes).position(|(a, b)| a != b).unwrap_or(stored.len().min(bytes.len()));
        Err(format!(
            "{name}: {} stored bytes vs {} generated, first difference at byte {first}",
            stored.len(),
            bytes.len()
        ))
    }
}

pub fn golden_codebook_bytes() -> Vec<u8> {
    serialize_codebook(&golden_codebook())
}
