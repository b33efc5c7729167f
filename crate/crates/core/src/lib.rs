//! Distortion-aware contrastive representation learning for fisheye-style
//! imagery.
//!
//! Wide field-of-view lenses exhibit radial distortion that grows with
//! distance from the image center, so two objects of the same semantic
//! class can look very different depending on where they sit in the
//! frame. This crate builds the full desk-scale pipeline around that
//! observation:
//!
//! - [`geometry`]: radial distances, the quartic distortion polynomial,
//!   and region schemes mapping position to a distortion level.
//! - [`dataset`]: annotation parsing, patch extraction, and the binary
//!   patch-pool format carrying joint semantic/distortion labels.
//! - [`synthgen`]: a deterministic synthetic scene generator whose
//!   distortion-semantic interaction exists by construction.
//! - [`quality`]: MSCN/generalized-Gaussian naturalness features,
//!   Gaussian overlap coefficients, and dataset statistics.
//! - [`contrastive`]: supervised contrastive losses over semantic and
//!   distortion-class labels, their alpha-weighted combination, and an
//!   InfoNCE baseline, all with analytic gradients.
//! - [`model`]: MLP encoder + projection head with exact hand-written
//!   backprop, SGD with momentum, augmentation, and checkpointing.
//! - [`eval`]: linear/kNN probes on frozen representations, center/edge
//!   accuracy gaps, embedding geometry metrics, and the alpha sweep.

pub mod contrastive;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod model;
pub mod pixels;
pub mod quality;
pub mod seeding;
pub mod synthgen;

pub use contrastive::{
    combined_loss, infonce_loss, similarity_matrix, supcon_loss, EmbeddingBatch, LabelKind,
    LossConfig, LossOutput,
};
pub use dataset::{
    build_patch_pool, derive_distortion_class, extract_patch, parse_annotation_file, read_pool,
    write_pool, DatasetManifest, LabeledPatch, ManifestEntry, ObjectAnnotation, PatchPool,
};
pub use error::{Error, Result};
pub use eval::{
    alpha_sweep, embed_pool, geometry_metrics, knn_probe, linear_probe, probe_model, GeometryReport,
    PoolEmbeddings, ProbeConfig, ProbeData, ProbeReport, SweepRow,
};
pub use geometry::{
    region_boundary_presets, FisheyeCalibration, NormalizedPoint, RegionScheme,
    MAX_RADIAL_DISTANCE,
};
pub use model::{
    augment_pair, load_checkpoint, pretrain, save_checkpoint, AugmentationConfig, CheckpointMeta,
    EncoderModel, LossKind, ModelConfig, OptimizerConfig, OptimizerState, TrainConfig, TrainResult,
};
pub use pixels::PixelBuffer;
pub use quality::{
    aggd_fit, brisque_features, gaussian_overlap, ggd_fit, mscn_map, pool_statistics, AggdFit,
    GaussianSummary, GgdFit, NaturalnessFeatures, StatsReport,
};
pub use seeding::stream_rng;
pub use synthgen::{
    generate_patch_pool, generate_scene_annotations, render_patch, sample_scenes, GeneratorConfig,
    PlacedObject, PlacementTally, NUM_SHAPE_CLASSES, SHAPE_CLASS_NAMES,
};
