//! Concave tents for robust quadratic objectives over sign vectors.
//!
//! The library evaluates the optimal-value-function extension g of a robust
//! quadratic f from the feasible sign vectors to their convex hull, extracts
//! supergradients from conic duals, and uses both inside a branch-and-bound
//! scheme with semidefinite bounding.

pub mod bnb;
pub mod conic;
pub mod generator;
pub mod lifted;
pub mod model;
pub mod objective;
pub mod relaxation;
pub mod rounding;
pub mod tent;
