//! Face-by-face spline parameterisation of plane graphs with harmonic maps:
//! graph preprocessing, quad-layout templatisation, B-spline curve fitting,
//! multipatch PDE solvers and quality post-processing.

pub mod controlmap;
pub mod error;
pub mod geom;
pub mod linalg;
pub mod plane_graph;
pub mod splines;
pub mod surrogate;
pub mod templates;

pub use error::{Error, Result};
