#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod acceptor;
pub mod constants;
pub mod lindblad;
pub mod resonator;
pub mod spectrum;
