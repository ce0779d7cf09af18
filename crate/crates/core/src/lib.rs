//! Neural topic modeling trained by maximizing mutual information between
//! documents and a categorical topic representation.
//!
//! The pipeline: [`corpus`] turns raw text into bag-of-words vectors over a
//! bounded vocabulary; [`model`] holds the document-topic encoder (with batch
//! normalization and Gumbel-Softmax sampling), the linear topic-word decoder
//! and the global/local pair discriminators; [`objective`] assembles the
//! Jensen-Shannon mutual-information bounds, the KL regularizer and the
//! reconstruction loss into one differentiable total; [`negatives`] supplies
//! negative documents and words for the discriminators; [`trainer`] runs the
//! seeded end-to-end loop; [`metrics`] scores the result (NPMI coherence,
//! topic uniqueness, clustering accuracy).
//!
//! All arithmetic is 64-bit and single-threaded, so identical seeds give
//! bit-identical runs.

pub mod corpus;
pub mod metrics;
pub mod model;
pub mod negatives;
pub mod numkernel;
pub mod objective;
pub mod trainer;

pub use corpus::{BowDocument, Corpus, PreprocessConfig, Vocabulary};
pub use metrics::{CooccurrenceTable, MetricsConfig, MetricsReport};
pub use model::{
    DecoderParams, DenseLayer, DiscriminatorParams, EncoderParams, GumbelConfig, ModelDims,
    ModelParams,
};
pub use negatives::{NegStrategyKind, NegativeStrategy};
pub use objective::{Ablation, LossBreakdown, LossWeights};
pub use trainer::{TrainConfig, TrainReport};
