//! Accuracy evaluation for nonnegative cross-sectional predictions.
//!
//! The crate is organized around the component loss family
//! `L(P; A) = |P - A|^p * A^q`:
//!
//! - [`loss`] — the loss family, admissibility checks, total loss, the
//!   share-based variant, and signed-loss bias measures.
//! - [`metrics`] — comparison metrics (MAPE, MedAPE, RMSE, RMSPE, 90PE,
//!   apportionment-rule losses) with per-metric admissibility flags, plus
//!   the built-in three-scenario demonstration table.
//! - [`elicitation`] — recovery of (p, q) from a decision-maker's
//!   satisfaction scores by log-linear least squares, with specification
//!   tests.
//! - [`blend`] — grid search over the weight simplex for the total-loss
//!   minimizing convex combination of prediction sets, with optional
//!   rescaling to control totals.

pub mod blend;
pub mod elicitation;
pub mod error;
pub mod loss;
pub mod metrics;

pub use error::{Error, Result};
pub use loss::{LossParams, Observation, PredictionSet, SignedLossRecord};
