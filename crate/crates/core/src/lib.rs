pub mod decomp;
pub mod error;
pub mod gns;
pub mod linalg;
pub mod prep;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
