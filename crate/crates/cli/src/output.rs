//! Output documents. Every JSON artifact embeds the resolved run
//! configuration and a content hash of each input file, so any result can be
//! traced back to exactly what produced it. Nothing time-dependent goes into
//! an output: rerunning with the same inputs and configuration reproduces
//! the files byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Document<T: Serialize> {
    pub run: RunConfig,
    pub inputs: Vec<InputDigest>,
    pub body: T,
}

pub fn digest_inputs(config: &RunConfig) -> Result<Vec<InputDigest>> {
    let mut paths: Vec<&PathBuf> = config.trips.iter().collect();
    if let Some(stations) = &config.stations {
        paths.push(stations);
    }
    paths
        .into_iter()
        .map(|path| {
            let bytes =
                fs::read(path).with_context(|| format!("hashing input {}", path.display()))?;
            Ok(InputDigest { path: path.clone(), sha256: hex::encode(Sha256::digest(&bytes)) })
        })
        .collect()
}

pub fn write_json<T: Serialize>(path: &Path, document: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(document)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_document<T: Serialize>(
    dir: &Path,
    name: &str,
    config: &RunConfig,
    inputs: &[InputDigest],
    body: T,
) -> Result<()> {
    let document =
        Document { run: config.clone(), inputs: inputs.to_vec(), body };
    write_json(&dir.join(name), &document)
}
