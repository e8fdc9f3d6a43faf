//! Random walks in random scenery: simulation of transient heavy-tailed
//! walks, stationary sceneries, the rescaled exceedance point process, and
//! statistical checks of its Poisson limit.

pub mod diagnostics;
pub mod error;
pub mod evt_norming;
pub mod exceedance;
pub mod scenery;
pub mod poisson_tests;
pub mod simkit;
pub mod stable_walk;

pub use error::{Error, Result};
pub use simkit::{Execution, McEstimate, RngKey};
