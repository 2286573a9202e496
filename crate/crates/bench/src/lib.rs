//! Shared fixtures for the criterion benches.

use sysid_core::numerics::{random_symmetric, RngStream};
use sysid_core::Matrix;

/// Symmetric test matrix of size `d` from a fixed seed.
pub fn symmetric_fixture(d: usize) -> Matrix {
    random_symmetric(&mut RngStream::new(0xBE7C, d as u64), d)
}
