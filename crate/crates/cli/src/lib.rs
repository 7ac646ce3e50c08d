//! Command-line front end for `lifeplan`: JSON configs in, CSV out.

pub mod catalog;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod validate;
