//! Accuracy oracles.
//!
//! The search never touches weights or data: it hands compressed-model plans
//! to an [`AccuracyOracle`] and gets accuracies back, order-aligned with the
//! input. Two implementations live here: a deterministic in-process
//! [`SurrogateOracle`] and a [`WorkerPool`] that fans batches out to external
//! workers over the line-delimited JSON protocol in [`protocol`].

pub mod pool;
pub mod protocol;
pub mod surrogate;

pub use pool::{WorkerConnection, WorkerPool, WorkerPoolConfig};
pub use surrogate::{compression_intensities, surrogate_accuracy, SurrogateModel, SurrogateOracle};

use crate::error::Result;
use crate::genotype::CompressedModelSpec;
use crate::scoring::Accuracy;

pub trait AccuracyOracle: Send {
    /// Accuracies for `specs`, in the same order.
    fn evaluate_batch(&mut self, specs: &[CompressedModelSpec]) -> Result<Vec<Accuracy>>;
}

impl<T: AccuracyOracle + ?Sized> AccuracyOracle for Box<T> {
    fn evaluate_batch(&mut self, specs: &[CompressedModelSpec]) -> Result<Vec<Accuracy>> {
        (**self).evaluate_batch(specs)
    }
}

impl<T: AccuracyOracle + ?Sized> AccuracyOracle for &mut T {
    fn evaluate_batch(&mut self, specs: &[CompressedModelSpec]) -> Result<Vec<Accuracy>> {
        (**self).evaluate_batch(specs)
    }
}
