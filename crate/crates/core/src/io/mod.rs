//! Configuration parsing and artifact formats.

pub mod config;
pub mod floats;
pub mod history;
pub mod obj;
pub mod profile_csv;
