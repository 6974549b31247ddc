//! Seeded simulator for co-evolving opinion and follow-graph dynamics with
//! stubborn, popular, and strategic influencer controllers.

pub mod cli;
pub mod config;
pub mod controllers;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod network;
pub mod output;

pub use error::{Result, SimError};
