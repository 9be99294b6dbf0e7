//! Sparse stochastic processes driven by Levy white noise.
//!
//! The crate covers the innovation model `L s = w` end to end: Levy
//! exponents and measures ([`levy`]), characteristic functionals and their
//! continuity bounds ([`charfunc`]), left inverses of fractional Laplacians
//! ([`frac`]) and directional derivative operators ([`dir`]), grid synthesis
//! ([`synth`]), statistical validation ([`valid`]) and the command-line
//! front end ([`cli`]).

pub mod charfunc;
pub mod cli;
pub mod dir;
pub mod frac;
pub mod grid;
pub mod levy;
pub mod quad;
pub mod spectral;
pub mod synth;
pub mod valid;
