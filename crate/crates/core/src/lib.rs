//! Instance attributions for multiple instance learning classifiers.
//!
//! A MIL classifier maps a bag of instances to a class distribution. This crate
//! explains such a prediction by scoring every instance for every class, treating
//! the classifier as a black box.

pub mod attribution;
pub mod bag;
mod cache;
pub mod classifier;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod methods;
pub mod metrics;
pub mod models;
pub mod pointwise;
pub mod surrogate;

pub use attribution::AttributionMatrix;
pub use bag::{Bag, Coalition, InstanceTag};
pub use classifier::{BagClassifier, ClassDistribution, Counted, FnClassifier};
pub use error::{Error, Result};
pub use methods::{explain, explain_black_box, Method, MethodSettings};

// The book's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/bags.md")]
    mod bags {}
    #[doc = include_str!("../../../book/src/methods.md")]
    mod methods {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
