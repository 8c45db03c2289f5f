//! Configuration, file formats, result records, sweeps and the command
//! layer behind the `acceptorloss` binary.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod record;
pub mod sweep;
