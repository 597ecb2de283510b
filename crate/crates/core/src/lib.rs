//! Connectivity optimization for multi-RIS-assisted device-to-device networks.
//!
//! The crate links four pieces:
//!
//! - [`graph`]: Laplacians, algebraic connectivity, Fiedler vectors, node reliability.
//! - [`radio`]: geometry, path loss, array responses, PDAF and SINR models.
//! - [`ga`]: genetic-algorithm synthesis of multi-beam RIS phase profiles.
//! - [`selection`] and [`placement`]: greedy RIS-aided link selection and
//!   Adam-based RIS positioning, alternated by [`solve`].
//!
//! [`experiments`] holds the sweep, beam-pattern and sum-rate harnesses used
//! by the command-line tool.

pub mod error;
pub mod experiments;
pub mod ga;
pub mod graph;
pub mod placement;
pub mod radio;
pub mod selection;
pub mod solve;

pub use error::{Error, Result};
