//! Evaluation reports written by the CLI.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::trainer::crc32;

/// Aggregated result of one evaluation task; `value` is the mean of the
/// per-seed values, and the digest fingerprints the exact configuration the
/// numbers came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub seeds: Vec<f64>,
    pub config_digest: String,
}

impl EvalReport {
    pub fn new<C: Serialize>(
        task: &str,
        metric: &str,
        seeds: Vec<f64>,
        config: &C,
    ) -> Result<Self> {
        let value = seeds.iter().sum::<f64>() / seeds.len().max(1) as f64;
        Ok(EvalReport {
            task: task.to_string(),
            metric: metric.to_string(),
            value,
            seeds,
            config_digest: config_digest(config)?,
        })
    }
}

/// CRC-32 of the canonical JSON encoding, as 8 hex digits.
pub fn config_digest<C: Serialize>(config: &C) -> Result<String> {
    let json = serde_json::to_string(config)?;
    Ok(format!("{:08x}", crc32(json.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_is_mean_of_seeds() {
        let report = EvalReport::new("t", "m", vec![1.0, 2.0, 3.0], &42u32).unwrap();
        assert_eq!(report.value, 2.0);
        assert_eq!(report.config_digest.len(), 8);
    }

    #[test]
    fn digest_tracks_config() {
        let a = config_digest(&("x", 1)).unwrap();
        let b = config_digest(&("x", 2)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, config_digest(&("x", 1)).unwrap());
    }
}
