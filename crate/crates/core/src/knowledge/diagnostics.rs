use serde::{Deserialize, Serialize};

use super::ExternalContextVector;
use crate::error::{Error, Result};

/// Spread of a set of external context vectors around their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_vectors: usize,
    /// Mean Euclidean distance from the mean vector.
    pub mean_distance: f64,
    /// Population variance of those distances.
    pub distance_variance: f64,
}

pub fn knowledge_diagnostics(vectors: &[ExternalContextVector]) -> Result<DiagnosticsReport> {
    if vectors.len() < 2 {
        return Err(Error::Input(format!(
            "diagnostics need at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].dim();
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(Error::Dimension {
            op: "knowledge_diagnostics",
            lhs: (dim, 1),
            rhs: (bad.dim(), 1),
        });
    }
    let n = vectors.len() as f64;
    let mut centre = vec![0.0; dim];
    for v in vectors {
        for (c, x) in centre.iter_mut().zip(&v.values) {
            *c += x;
        }
    }
    centre.iter_mut().for_each(|c| *c /= n);

    // Welford over the distances.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for (k, v) in vectors.iter().enumerate() {
        let d = v
            .values
            .iter()
            .zip(&centre)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            .sqrt();
        let delta = d - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (d - mean);
    }
    Ok(DiagnosticsReport {
        n_vectors: vectors.len(),
        mean_distance: mean,
        distance_variance: (m2 / n).max(0.0),
    })
}
