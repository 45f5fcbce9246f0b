//! Landau-Ginzburg models, dual and open prepotentials, and numerical
//! verification of the open WDVV system and its companions.

#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod cli;
pub mod error;
pub mod exprcore;
pub mod geometry;
pub mod periods;
pub mod series;
pub mod specfn;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
