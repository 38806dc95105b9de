//! Rule-compliant lane-merge planning for highway on-ramps.
//!
//! The crate combines responsibility-sensitive safe distances, merge
//! feasibility rules with an optional V2V negotiation, a potential-field cost
//! and sigmoid merge paths, and runs them in a deterministic simulator.

pub mod domain;
pub mod error;
pub mod merge_rules;
pub mod potential_field;
pub mod rss;
pub mod sigmoid_planner;
pub mod sim;
pub mod vehicle_model;

pub use error::{Error, FieldIssue, Result};
