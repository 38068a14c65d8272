//! Library surface of the batch driver, exposed so integration tests and
//! fuzz targets can exercise config parsing and the command bodies
//! without spawning a process.

pub mod commands;
pub mod config;
pub mod output;
