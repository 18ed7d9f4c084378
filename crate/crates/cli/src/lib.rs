//! Command-line tool and HTTP service around `entdetect-core`.

pub mod api;
pub mod cli;
pub mod store;
