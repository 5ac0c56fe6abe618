//! Two-stage anti-jamming beam pattern synthesis for distributed phased arrays.
//!
//! Each access point designs phase-only analog weights for its local view of the
//! scene ([`analog`]); a central node then combines the AP outputs with a digital
//! weight vector ([`digital`]). The w-subproblem of the analog stage runs Riemannian
//! gradient descent on the complex circle manifold ([`manifold`]), either with Armijo
//! backtracking or with step sizes predicted by a small complex network ([`unfold`]).

pub mod analog;
pub mod digital;
pub mod array;
pub mod config;
pub mod error;
pub mod impairments;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod pipeline;
pub mod studies;
pub mod unfold;

pub use error::{Error, Result};
pub use num_complex::Complex64;
