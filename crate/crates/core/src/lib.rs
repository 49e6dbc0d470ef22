//! Modelling, inversion and correction of radar penetration bias in InSAR
//! elevation data.
//!
//! The crate combines parametric vertical scattering profiles (exponential
//! and Weibull) with a small neural network that predicts profile parameters
//! and is trained through the physical forward model. A purely data-driven
//! network, a training-free uniform-volume inversion, synthetic scene
//! generation and the evaluation metrics used to compare them are included.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod forward;
pub mod geometry;
pub mod inversion;
pub mod models;
pub mod neural;
pub mod profiles;
pub mod quadrature;

pub use dataset::{
    hold_out_validation, load_samples, save_samples, scenario_split, synthesize_scene, PixelSample,
    Scenario, ScenarioSpec, Split, SyntheticScene, SyntheticSceneConfig,
};
pub use error::{Error, Result};
pub use evaluation::{
    comparison_report, compute_metrics, dem_error_stats, elevation_binned_errors, error_histogram,
    ComparisonReport, MetricsReport, ReportRow,
};
pub use forward::{
    gamma_vol_exponential, gamma_vol_numeric, gamma_vol_weibull, phase_to_bias, ForwardOptions,
    VolumeCoherence,
};
pub use geometry::{compute_kz, hoa_to_kz, kz_to_hoa, AcquisitionGeometry};
pub use inversion::{correct_elevation, uv_bias, uv_bias_batch};
pub use models::{
    train, ModelFile, ModelKind, PredictionModel, SplitRecord, TrainConfig, TrainedModel,
    TrainingRecord,
};
pub use neural::{FeatureStats, NetworkParams};
pub use profiles::{
    ExponentialProfile, ParamRange, ProfileKind, ScatteringProfile, WeibullProfile,
};
