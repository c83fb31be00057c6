//! Numerical verification of weighted norm inequalities on finite measure
//! spaces and finite abelian groups.
//!
//! The crate computes two-weight characteristics, basis maximal operators and
//! their weighted norms, builds Rubio de Francia majorants, and replays the
//! extrapolation argument trial by trial with explicit constants. A separate
//! module handles Fourier multipliers and transference on finite groups.

pub mod exponents;
pub mod extrapolate;
pub mod maximal;
pub mod norms;
pub mod rdf;
pub mod rng;
pub mod space;
pub mod transfer;
pub mod weights;
