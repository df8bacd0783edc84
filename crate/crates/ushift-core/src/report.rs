//! Experiment output: per-replication rows plus an ordered key/value summary.
//! Identical seeds reproduce every statistic bit-exactly; wall-clock runtime
//! is carried for logging but is not part of the reproducible payload.

use std::time::Duration;

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub kind: &'static str,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Vec<(String, String)>,
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn new(kind: &'static str, seed: u64, columns: Vec<String>) -> Self {
        ExperimentReport {
            kind,
            seed,
            columns,
            rows: Vec::new(),
            summary: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    pub fn push_summary(&mut self, key: &str, value: impl std::fmt::Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary_value(key)?.parse().ok()
    }

    /// Everything that must be bit-identical across reruns and worker counts.
    pub fn reproducible_payload(&self) -> (u64, &Vec<String>, &Vec<Vec<f64>>, &Vec<(String, String)>) {
        (self.seed, &self.columns, &self.rows, &self.summary)
    }
}
