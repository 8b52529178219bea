//! Computations in quotients of Euclidean space by finite matrix groups:
//! invariant inner products, slice charts, equivariant lifting of maps
//! between quotients, and validation of orbifold atlas presentations.

pub mod atlas;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod group;
pub mod lifting;
pub mod linalg;
pub mod quotient;
pub mod report;
pub mod scalar;
pub mod schema;

pub use error::{Error, Result};
