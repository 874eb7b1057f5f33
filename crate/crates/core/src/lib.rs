//! Global visual salience of competing stimuli and salience-driven image
//! identification from cortical responses.
//!
//! The crate is organised around four analysis pipelines plus their file
//! formats:
//!
//! - [`pairwise`]: encode two-image gaze trials into sparse design rows and
//!   fit an L2-regularised Bradley-Terry-Luce logistic model with task,
//!   familiarity and per-subject lateral-bias coefficients.
//! - [`evaluation`]: AUC, Tjur R², accuracy, participant-wise cross
//!   validation and percentile bootstrap.
//! - [`fixation`]: fixation pre-filtering, first-fixation densities, KL
//!   divergence against salience maps and left/right salience mass.
//! - [`prf`]: population-receptive-field response prediction, image
//!   identification, confidence scores and RDM/Kendall-τ comparison.
//! - [`io`] and [`cli`]: CSV schemas, the grid and model text formats and the
//!   `salience` command line.
//!
//! Every example under `examples/` exercises one of these capabilities:
//!
//! ```bash
//! cargo run --release --example fit_global_salience
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod fixation;
pub mod io;
pub mod pairwise;
pub mod prf;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use evaluation::{
    accuracy, auc, cross_evaluate, cv_select_c, default_c_grid, make_leave2out_plan,
    percentile_bootstrap, tjur_r2, BootstrapResult, CvSelection, FoldPlan, MetricReport,
};
pub use fixation::{
    delta_series, filter_fixations, fixation_density, kld, salience_mass, Fixation,
    FixationFilter, MassSplit, Rect, SalienceGrid,
};
pub use pairwise::{
    encode_trial, fit, rank_images, DesignRow, FitConfig, FitOutcome, GlobalSalienceModel, Outcome,
    Side, Trial,
};
pub use prf::{
    confidence, correlation_matrix, filter_voxels, identify, kendall_tau, predict_profile,
    predict_profiles, prf_weight, rdm, rms_contrast_map, CorrMatrix, FeatureMap, PrfConfig,
    PrfVoxel, Rdm, ResponseProfile, StimulusGeometry, VisualArea,
};
