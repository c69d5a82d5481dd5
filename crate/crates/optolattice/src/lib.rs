pub mod error;
pub mod gaussian;
pub mod lattice;
pub mod linalg;
pub mod par;
pub mod spectra;
pub mod topology;
pub mod twosite;

pub use error::{Error, Result};
pub use lattice::{Boundary, ChainParams, DisorderKind, DisorderSpec, NHOperator};
pub use par::Exec;
