pub mod error;
pub mod geometry;
pub mod instances;
pub mod io;
pub mod lowner;
pub mod optimality;
pub mod oracle;
pub mod projpsd;
pub mod rank;
pub mod scalarfun;
pub mod selftest;
pub mod spectral;
pub mod symmat;

pub use error::{Error, Result};
pub use spectral::Spectral;
pub use symmat::SymMat;
