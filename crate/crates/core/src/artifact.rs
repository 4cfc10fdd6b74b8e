//! Versioned JSON envelopes for persisted models.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    kind: String,
    version: u32,
    payload: T,
}

#[derive(Deserialize)]
struct Header {
    kind: String,
    version: u32,
}

/// Serialises `payload` under a `{kind, version, payload}` envelope.
pub fn to_json<T: Serialize>(kind: &str, payload: &T) -> String {
    let env = Envelope {
        kind: kind.to_string(),
        version: FORMAT_VERSION,
        payload,
    };
    serde_json::to_string_pretty(&env).expect("artifact types always serialise")
}

pub fn save<T: Serialize>(path: &Path, kind: &str, payload: &T) -> Result<()> {
    fs::write(path, to_json(kind, payload)).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let incompatible = |message: String| Error::IncompatibleArtifact {
        path: path.to_path_buf(),
        message,
    };
    let header: Header =
        serde_json::from_str(&text).map_err(|e| incompatible(format!("unreadable header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(incompatible(format!(
            "format version {} (expected {FORMAT_VERSION})",
            header.version
        )));
    }
    if header.kind != kind {
        return Err(incompatible(format!(
            "artifact kind `{}` (expected `{kind}`)",
            header.kind
        )));
    }
    let env: Envelope<T> =
        serde_json::from_str(&text).map_err(|e| incompatible(format!("bad payload: {e}")))?;
    Ok(env.payload)
}
