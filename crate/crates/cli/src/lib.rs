//! Library surface of the experiment harness; the `congame` binary is a
//! thin clap dispatcher over this. Exposed so integration tests can exercise
//! config parsing and validation directly.

pub mod config;
