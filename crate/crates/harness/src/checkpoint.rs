//! Particle-system checkpoints: a CSV matrix with one particle per row
//! (`w0,...,w{d-1},b,c`) plus a JSON sidecar with the scale, input
//! dimension and provenance.

use std::fs;
use std::path::Path;

use mfld_core::data::sidecar_path;
use mfld_core::textfmt::push_g17;
use mfld_core::ParticleSystem64;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub scale: f64,
    pub input_dim: usize,
    pub particles: usize,
    pub provenance: String,
}

fn format_err(path: &Path, message: impl Into<String>) -> HarnessError {
    HarnessError::Core(mfld_core::Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    })
}

pub fn write_checkpoint(system: &ParticleSystem64, path: &Path) -> Result<()> {
    let d = system.input_dim();
    let mut out = String::new();
    let mut header: Vec<String> = (0..d).map(|i| format!("w{i}")).collect();
    header.push("b".into());
    header.push("c".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for p in system.particles() {
        for (i, &v) in p.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            push_g17(&mut out, v);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| HarnessError::io(path, e))?;

    let meta = CheckpointMeta {
        scale: system.scale(),
        input_dim: d,
        particles: system.len(),
        provenance: system.provenance().to_string(),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).expect("checkpoint metadata serializes");
    fs::write(&side, text + "\n").map_err(|e| HarnessError::io(&side, e))
}

pub fn read_checkpoint(path: &Path) -> Result<ParticleSystem64> {
    let side = sidecar_path(path);
    let meta_text = fs::read_to_string(&side).map_err(|e| HarnessError::io(&side, e))?;
    let meta: CheckpointMeta =
        serde_json::from_str(&meta_text).map_err(|e| format_err(&side, e.to_string()))?;

    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?;
    if header.len() != meta.input_dim + 2 {
        return Err(format_err(
            path,
            format!(
                "{} columns but input_dim {} needs {}",
                header.len(),
                meta.input_dim,
                meta.input_dim + 2
            ),
        ));
    }
    let mut params = Vec::new();
    let mut rows = 0;
    for row in reader.records() {
        let row = row.map_err(|e| format_err(path, e.to_string()))?;
        for field in row.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| format_err(path, format!("row {}: bad number `{field}`", rows + 1)))?;
            params.push(v);
        }
        rows += 1;
    }
    if rows != meta.particles {
        return Err(format_err(
            path,
            format!(
                "sidecar lists {} particles but file has {rows}",
                meta.particles
            ),
        ));
    }
    Ok(ParticleSystem64::new(meta.input_dim, meta.scale, params)?.with_provenance(meta.provenance))
}
