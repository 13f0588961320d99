//! Fixed worker pool over a shared item queue.
//!
//! Items are claimed with an atomic cursor, so scheduling order varies from
//! run to run — which is exactly why item code must never depend on it.
//! Every command keeps per-item outputs independent (own files, own seeds),
//! making output bytes a pure function of the item and the configuration.

use std::panic::AssertUnwindSafe;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

/// Runs `work(index, item)` over every item on `workers` threads and
/// returns one error slot per item, indexed like the input. A panicking
/// item is captured as a failure instead of tearing down the batch.
pub fn run_parallel<T, F>(items: &[T], workers: usize, work: F) -> Vec<Option<String>>
where
    T: Sync,
    F: Fn(usize, &T) -> Result<(), String> + Sync,
{
    let n = items.len();
    let errors = Mutex::new(vec![None; n]);
    if n == 0 {
        return errors.into_inner().unwrap();
    }
    let next = AtomicUsize::new(0);
    let threads = workers.clamp(1, n);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let outcome = std::panic::catch_unwind(AssertUnwindSafe(|| work(i, &items[i])));
                let failure = match outcome {
                    Ok(Ok(())) => None,
                    Ok(Err(e)) => Some(e),
                    Err(payload) => Some(panic_text(payload)),
                };
                if let Some(e) = failure {
                    errors.lock().unwrap()[i] = Some(e);
                }
            });
        }
    });
    errors.into_inner().unwrap()
}

fn panic_text(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic: <non-string payload>".to_string()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ItemFailure {
    pub item: String,
    pub error: String,
}

/// End-of-batch summary printed to stdout. Wall time lives here — and only
/// here — so files on disk stay byte-identical across reruns.
#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
    pub failures: Vec<ItemFailure>,
    pub wall_ms: u128,
}

impl BatchReport {
    /// Folds per-item error slots into a report; `names` must be indexed
    /// like the items that produced `errors`.
    pub fn collect(names: &[String], errors: Vec<Option<String>>, wall_ms: u128) -> Self {
        let failures: Vec<ItemFailure> = errors
            .into_iter()
            .enumerate()
            .filter_map(|(i, e)| {
                e.map(|error| ItemFailure {
                    item: names[i].clone(),
                    error,
                })
            })
            .collect();
        BatchReport {
            total: names.len(),
            succeeded: names.len() - failures.len(),
            failed: failures.len(),
            skipped: Vec::new(),
            failures,
            wall_ms,
        }
    }

    pub fn print(&self) {
        println!(
            "{}",
            serde_json::to_string_pretty(self).expect("report json")
        );
    }
}
