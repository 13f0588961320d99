//! Weighted sampling of training records from a dataset manifest.
//!
//! A manifest nests tasks → datasets → records. Draws are hierarchical:
//! the task uniformly, the dataset by normalized weight within the task,
//! the record uniformly within the dataset. So a dataset's overall
//! probability is `(1/num_tasks) * weight / sum(task weights)` and does not
//! depend on its record count.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// File paths for one training example; mask and depth are optional
/// auxiliary channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub input: String,
    pub gt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dataset_name: String,
    pub weight: f64,
    pub records: Vec<SampleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_name: String,
    pub datasets: Vec<Dataset>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tasks: Vec<Task>,
}

/// One sampled example with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub task: String,
    pub dataset: String,
    pub record: SampleRecord,
}

/// A validated manifest whose dataset weights are normalized per task.
#[derive(Clone, Debug)]
pub struct Sampler {
    manifest: DatasetManifest,
    /// Per task: cumulative weight boundaries, parallel to its datasets.
    cumulative: Vec<Vec<f64>>,
}

impl Sampler {
    /// Validates and normalizes. Zero-weight and empty datasets are dropped
    /// with a warning; negative weights and structurally empty manifests
    /// are errors.
    pub fn new(mut manifest: DatasetManifest) -> Result<Self> {
        if manifest.tasks.is_empty() {
            return Err(Error::InvalidArgument(
                "manifest declares no tasks".to_string(),
            ));
        }
        for task in &mut manifest.tasks {
            for ds in &task.datasets {
                if ds.weight < 0.0 || !ds.weight.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "dataset '{}' in task '{}' has invalid weight {}",
                        ds.dataset_name, task.task_name, ds.weight
                    )));
                }
            }
            task.datasets.retain(|ds| {
                if ds.weight == 0.0 {
                    log::warn!(
                        "dropping zero-weight dataset '{}' from task '{}'",
                        ds.dataset_name,
                        task.task_name
                    );
                    return false;
                }
                if ds.records.is_empty() {
                    log::warn!(
                        "dropping empty dataset '{}' from task '{}'",
                        ds.dataset_name,
                        task.task_name
                    );
                    return false;
                }
                true
            });
            if task.datasets.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "task '{}' has no usable datasets",
                    task.task_name
                )));
            }
        }
        let cumulative = manifest
            .tasks
            .iter()
            .map(|task| {
                let total: f64 = task.datasets.iter().map(|d| d.weight).sum();
                let mut acc = 0.0;
                task.datasets
                    .iter()
                    .map(|d| {
                        acc += d.weight / total;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Sampler {
            manifest,
            cumulative,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let manifest: DatasetManifest = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("manifest does not parse: {e}")))?;
        Sampler::new(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Sampler::from_json_str(&text).map_err(|e| match e {
            Error::InvalidArgument(detail) => Error::Malformed {
                path: path.to_path_buf(),
                detail,
            },
            other => other,
        })
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    /// Normalized weight of a dataset within its task.
    pub fn normalized_weight(&self, task: usize, dataset: usize) -> f64 {
        let prev = if dataset == 0 {
            0.0
        } else {
            self.cumulative[task][dataset - 1]
        };
        self.cumulative[task][dataset] - prev
    }

    fn draw_indices(&self, rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
        let t = rng.random_range(0..self.manifest.tasks.len());
        let u: f64 = rng.random();
        let bounds = &self.cumulative[t];
        // Cumulative inversion; the final bucket absorbs u ~ 1.0 edge cases.
        let d = bounds
            .iter()
            .position(|&b| u < b)
            .unwrap_or(bounds.len() - 1);
        let r = rng.random_range(0..self.manifest.tasks[t].datasets[d].records.len());
        (t, d, r)
    }

    /// Index triples (task, dataset, record) for `n` seeded draws.
    pub fn sample_indices(&self, seed: u64, n: usize) -> Vec<(usize, usize, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw_indices(&mut rng)).collect()
    }

    /// `n` seeded draws resolved to names and records.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<SampleDraw> {
        self.sample_indices(seed, n)
            .into_iter()
            .map(|(t, d, r)| {
                let task = &self.manifest.tasks[t];
                let ds = &task.datasets[d];
                SampleDraw {
                    task: task.task_name.clone(),
                    dataset: ds.dataset_name.clone(),
                    record: ds.records[r].clone(),
                }
            })
            .collect()
    }
}
