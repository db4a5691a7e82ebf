//! Empirical checks of the theoretical quantities.

pub mod dimension;
pub mod experiments;
pub mod init;
pub mod projectors;

pub use dimension::{correlation_dimension, DimensionEstimate, EstimatorOptions};
pub use experiments::{
    absorbing_experiment, contraction_experiment, dimension_estimate, gronwall_envelope,
    AbsorbingOptions, AbsorbingReport, ContractionOptions, ContractionReport, DimensionOptions,
    DimensionReport,
};
pub use init::{random_segment, stream_rng, HistoryShape, RandomSegmentSpec};
pub use projectors::{project_components, ComponentNorms, ProjectorSet};
