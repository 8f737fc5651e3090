use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExternalContextVector;
use crate::error::{Error, Result};

/// One line of an ec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcRecord {
    pub id: String,
    pub n_ext_tokens: usize,
    pub scale_factor: f64,
    pub ec: Vec<f64>,
}

impl EcRecord {
    pub fn new(id: impl Into<String>, ec: &ExternalContextVector) -> Self {
        Self {
            id: id.into(),
            n_ext_tokens: ec.n_ext_tokens,
            scale_factor: ec.scale_factor,
            ec: ec.values.clone(),
        }
    }

    pub fn to_vector(&self) -> ExternalContextVector {
        ExternalContextVector {
            values: self.ec.clone(),
            n_ext_tokens: self.n_ext_tokens,
            scaled: self.n_ext_tokens > 0 && self.scale_factor != 1.0,
            scale_factor: self.scale_factor,
        }
    }
}

/// External context vectors keyed by pair id.
pub type EcMap = HashMap<String, ExternalContextVector>;

/// Serializes records as JSON lines. Floats use shortest round-trip
/// formatting, so reading back restores every value exactly.
pub fn ec_records_to_string(records: &[EcRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("ec record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_ec_file(path: &Path, records: &[EcRecord]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(ec_records_to_string(records).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_ec_file(path: &Path) -> Result<Vec<EcRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EcRecord = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Records as a lookup map; duplicate ids are rejected.
pub fn ec_map(records: &[EcRecord]) -> Result<EcMap> {
    let mut map = EcMap::with_capacity(records.len());
    for r in records {
        if map.insert(r.id.clone(), r.to_vector()).is_some() {
            return Err(Error::Input(format!("duplicate ec record id {:?}", r.id)));
        }
    }
    Ok(map)
}
