//! Classification of drifting data streams whose labels stop arriving after
//! a short supervised prefix.
//!
//! A growing neural gas summarises the feature distribution with labeled
//! prototypes. After every unlabeled batch the updated prototypes are
//! matched to the previous ones by minimum-cost assignment, a rigid
//! transform is fitted to the matched pairs, and the prototypes are pushed
//! one step further along that transform before classifying the next batch.
//!
//! With the default `parallel` feature, batch k-NN prediction and distance
//! matrices run on the rayon pool; results are identical either way.

pub mod assignment;
pub mod datasets;
mod error;
pub mod gng;
pub mod knn;
pub mod metrics;
pub mod pipeline;
pub mod registration;
pub mod stream;

pub use error::{Error, Result};
pub use pipeline::{run_aigas, run_baseline, run_method, Method, PredictionTrace};
pub use stream::{split_stream, ClassId, ClassSet, LabeledInstance, RunConfig, StreamSplit};
