//! Lossy compression of non-uniform i.i.d. binary sources with GF(q)-quantized
//! LDGM codes.
//!
//! A source block `s ∈ {0,1}^n` is quantized to free symbols `z ∈ GF(q)^m`
//! whose codeword `x = Gz` maps through a threshold quantizer `Q` to a binary
//! reconstruction close to `s` in Hamming distance. The encoder runs belief
//! propagation over an augmented alphabet `GF(q) ∪ {*}` interleaved with
//! decimation of the most biased variables.

pub mod bounds;
pub mod bp;
pub mod code;
pub mod decimation;
pub mod error;
pub mod experiment;
pub mod gf;
pub mod graph;
pub mod oracle;

pub use error::{Error, Result};
