//! Random walks on quasi-1d lattices built from a periodic cell: sampling,
//! first-passage MGFs, rate functions by two routes, and fluctuation-symmetry
//! checks.

pub mod error;
pub mod ext;
pub mod fixtures;
pub mod gc;
pub mod graph;
pub mod io;
pub mod law;
pub mod linalg;
pub mod mc;
pub mod mgf;
pub mod paths;
pub mod ratefn;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use graph::{GraphSpec, LatticeVertex, RatedCell};
pub use law::CycleLaw;
