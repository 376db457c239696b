//! Explaining labeled tabular data with Jumping Emerging Patterns.
//!
//! Patterns are read off the decision paths of many unpruned random trees,
//! reduced to a disjoint set of class-pure patterns, summarized as a matrix
//! of histograms, and used to build pattern-aware similarity maps.

pub mod dataset;
pub mod embed;
pub mod error;
pub mod explain;
pub mod forest;
pub mod jep;
pub mod pipeline;
pub mod scalar;
pub mod synthetic;

pub use error::{Result, VaxError};
pub use scalar::Scalar;

pub type Dataset = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type RawPattern = forest::RawPattern<f64>;
pub type TreeModel = forest::TreeModel<f64>;
pub type Pattern = jep::Pattern<f64>;
pub type JepSet = jep::JepSet<f64>;
pub type Interval = jep::selector::Interval<f64>;
pub type Conjunction = jep::selector::Conjunction<f64>;

pub use embed::EmbeddingResult;
pub use explain::ExplanationModel;
