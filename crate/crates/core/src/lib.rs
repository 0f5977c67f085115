//! Level-loading scheduler for elective surgical admissions.
//!
//! Surgeries are booked onto the feasible day with the fewest admissions
//! already scheduled into the patient's post-op unit. The crate carries the
//! ledger model, the recommendation engine, table ingestion, a patient-flow
//! simulator, evaluation metrics, an HTTP service and the `beds` CLI.

pub mod cli;
pub mod engine;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod service;
pub mod simulator;
pub mod synth;
