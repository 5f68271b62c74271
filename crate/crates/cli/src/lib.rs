//! IO, file formats, and experiment plumbing around `tanntm-core`: corpus
//! preprocessing, checkpoints, GloVe initialization, coherence/classification
//! reports, the timing harness, and the recipe runner behind the `tanntm`
//! binary.

pub mod checkpoint;
pub mod commands;
pub mod corpus;
pub mod features;
pub mod glove;
pub mod recipe;
pub mod report;
pub mod timing;
