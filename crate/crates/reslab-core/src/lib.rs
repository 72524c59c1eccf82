//! Core algorithms of the resonance laboratory.
//!
//! Everything here is pure computation over `alloc` collections: prime
//! tables and Dirichlet characters, Hecke eigenvalue sources, critical-line
//! evaluators, resonator construction, moment quadrature and Euler-product
//! predictions, exponential block decompositions, and family searches over
//! character twists. IO, configuration, and the command-line driver live in
//! the companion `reslab` crate.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod arith;
pub mod coeffs;
pub mod families;
pub mod harper;
pub mod leval;
pub mod moments;
pub mod resonator;
pub mod special;
pub mod util;

use alloc::string::String;
use core::fmt;

/// Complex double shorthand used throughout.
pub type C64 = num_complex::Complex<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter combination violates a documented precondition.
    Config(String),
    /// A computation would exceed a resource cap; `needed` is a lower bound.
    Resource { what: String, needed: u64, cap: u64 },
    /// External data failed validation.
    Input(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Resource { what, needed, cap } => {
                write!(f, "resource cap exceeded: {what} needs at least {needed}, cap is {cap}")
            }
            Error::Input(msg) => write!(f, "input error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
