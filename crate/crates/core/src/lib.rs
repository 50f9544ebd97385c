//! Projected Riemannian gradient descent on compact embedded submanifolds,
//! with step-size certificates for the immersion property of the iteration
//! map, fixed-point stability classification, and a reproduction of the
//! stereographic chart-switch discontinuity of `det(Dg)`.

// `!(a < b)` is used on purpose so NaN fails every bound check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod counterexample;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod manifolds;
pub mod numerics;
pub mod objectives;
pub mod sampling;
mod serde_ext;

pub use error::{Error, Result};
