//! Iterative slice-matching schemes for transferring one discrete probability
//! measure into another.
//!
//! The building blocks are the closed-form one-dimensional optimal transport
//! map ([`ot1d`]), random projections and sliced Wasserstein estimation
//! ([`slicing`]), and the j-slice matching map ([`matching`]) that applies the
//! 1D transport along the first j columns of an orthogonal frame. The
//! stochastic iteration σ_{k+1} = ((1−γ_k)id + γ_k T^j)♯σ_k with i.i.d. Haar
//! frames lives in [`scheme`]. A brute-force exact Wasserstein solver for
//! small instances ([`oracle`]) backs the test suites, and [`imageio`]
//! converts grayscale images to point clouds and back for morphing
//! experiments.

pub mod error;
pub mod imageio;
pub mod matching;
pub mod measure;
pub mod oracle;
pub mod ot1d;
pub mod scheme;
pub mod slicing;

pub use error::{Error, Result};
pub use matching::SliceMatchingMap;
pub use measure::DiscreteMeasure;
pub use ot1d::SliceTransport1D;
pub use scheme::{Schedule, Trajectory};
pub use slicing::{DirectionSampler, Estimate, OrthogonalFrame};
