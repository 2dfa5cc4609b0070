//! Command-line front end and HTTP service for the adaptq engine.

pub mod commands;
pub mod service;
