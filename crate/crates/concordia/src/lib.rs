//! Measurement toolkit for noisy rating studies.
//!
//! `concordia` measures how well rating sources (human panels, models,
//! ensembles, baselines) agree with each other and with downstream outcomes,
//! in settings where every instrument involved is noisy. It provides:
//!
//! * rank concordance via antisymmetric sign matrices ([`concordance`]),
//!   with Fieller confidence intervals, permutation baselines, and quartile
//!   gap tests;
//! * bias-corrected squared distance correlation between sources
//!   ([`dependence`]), with Fisher-z aggregation, Bonferroni masking, and
//!   complete-linkage clustering;
//! * robust slope estimators and a seven-test robustness battery
//!   ([`slopes`], [`robustness`]);
//! * disattenuation of alignment correlations against noisy criteria
//!   ([`attenuation`]);
//! * weighted and unanimous-vote ensemble rating sources ([`ensemble`]);
//! * generalizability-style variance decomposition of misalignment error
//!   over crossed designs, by closed-form expected mean squares and by a
//!   Gibbs sampler with half-t priors ([`decompose`]);
//! * seeded synthetic generators with planted ground truth ([`synth`]).
//!
//! Everything randomized takes an explicit seed and derives per-iteration
//! substreams ([`seeding`]), so results are reproducible and independent of
//! thread count.

pub mod attenuation;
pub mod cluster;
pub mod concordance;
pub mod data;
pub mod decompose;
pub mod dependence;
pub mod ensemble;
pub mod error;
pub mod robustness;
pub mod seeding;
pub mod slopes;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
