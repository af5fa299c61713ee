//! Tree-indexed random walks, target percolation, capacity and random walk in
//! random environment on trees.

pub mod error;
pub mod gauge;
pub mod network;
pub mod par;
pub mod percolation;
pub mod rng;
pub mod rwre;
pub mod law;
pub mod scalar;
pub mod tree;
pub mod walk1d;

pub use error::{Error, Result};
