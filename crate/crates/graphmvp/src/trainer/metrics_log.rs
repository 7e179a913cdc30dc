//! Per-step training metrics, serialized as JSONL.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the metrics stream. `secs` is measured wall time and is the
/// only field exempt from the byte-determinism guarantee; everything else is
/// fully determined by (seed, config, dataset).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: u64,
    pub loss: f64,
    pub terms: BTreeMap<String, f64>,
    pub secs: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    records: Vec<MetricRecord>,
}

impl MetricsLog {
    pub fn new() -> Self {
        MetricsLog::default()
    }

    pub fn push(&mut self, record: MetricRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::Invariant(format!(
                    "metrics steps must increase: {} after {}",
                    record.step, last.step
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut log = MetricsLog::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: MetricRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            log.push(record)?;
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: u64, loss: f64) -> MetricRecord {
        MetricRecord {
            step,
            loss,
            terms: BTreeMap::new(),
            secs: 0.0,
        }
    }

    #[test]
    fn steps_must_increase() {
        let mut log = MetricsLog::new();
        log.push(record(1, 0.5)).unwrap();
        log.push(record(2, 0.4)).unwrap();
        assert!(log.push(record(2, 0.3)).is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut log = MetricsLog::new();
        let mut terms = BTreeMap::new();
        terms.insert("ebm_nce".to_string(), 1.25);
        terms.insert("vrr".to_string(), 0.75);
        log.push(MetricRecord {
            step: 1,
            loss: 2.0,
            terms,
            secs: 0.01,
        })
        .unwrap();
        let path = std::env::temp_dir().join("graphmvp-metrics-test.jsonl");
        log.write(&path).unwrap();
        let back = MetricsLog::read(&path).unwrap();
        assert_eq!(log, back);
    }
}
