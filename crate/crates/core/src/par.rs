//! Data-parallel fan-out over independent runs.
//!
//! Without the `parallel` feature every mode runs sequentially, so callers
//! never need to branch on the feature themselves.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    #[default]
    Parallel,
    Sequential,
}

impl ExecutionMode {
    /// The mode that will actually run, given how the crate was built.
    pub fn effective(self) -> ExecutionMode {
        if cfg!(feature = "parallel") {
            self
        } else {
            ExecutionMode::Sequential
        }
    }
}

/// Applies `f` to every item, preserving input order in the output.
pub fn map<T, R, F>(mode: ExecutionMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode.effective() {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}
