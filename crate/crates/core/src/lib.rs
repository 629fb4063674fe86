//! Numerical toolkit for the refined Sobolev scale `H^{s,φ}`.
//!
//! The scale consists of Hörmander inner-product spaces whose Fourier weight
//! is `⟨ξ⟩^{2s} φ²(⟨ξ⟩)` with `φ` slowly varying at infinity. Everything here
//! is finite dimensional: the torus stands in for a closed manifold, vector
//! bundles live over the circle, and Hilbert couples are pairs of Gram forms.
//!
//! * [`weights`]: slowly varying weights `φ` and interpolation parameters `ψ`.
//! * [`spectral`]: weighted Fourier norms on truncated lattices of `𝕋ⁿ`.
//! * [`interp`]: interpolation with a function parameter between Gram forms.
//! * [`bundle`]: atlases, partitions of unity, flattening and sewing of sections.
//! * [`pseudo`]: classical pseudodifferential operators, Fredholm analysis.
//! * [`harness`]: named experiment suites with CSV/JSON/SVG reports.

pub mod bundle;
pub mod error;
pub mod harness;
pub mod interp;
pub mod linalg;
pub mod pseudo;
pub mod spectral;
pub mod weights;

pub use error::{Error, Result};
pub use num_complex::Complex64;
