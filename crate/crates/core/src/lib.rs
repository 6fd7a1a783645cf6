//! Numerics for gluing Delaunay-type ends onto constant scalar curvature
//! metrics: Fowler orbits and the `u_{eps,R,a}` family, spherical harmonic
//! projections, harmonic extension operators, weighted Holder norms, the
//! mode-wise linearized solver with the flat interior fixed point, product
//! sphere spectra, and the finite-dimensional Cauchy-data matching.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity,
    clippy::manual_is_multiple_of
)]

pub mod delaunay_family;
pub mod delaunay_ode;
pub mod error;
pub mod harmonics;
pub mod linearized;
pub mod matching;
pub mod poisson;
pub mod quadrature;
pub mod spectrum;
pub mod weighted_norms;

pub use delaunay_ode::{DelaunayOrbit, Dimension};
pub use error::{GluingError, Result};
