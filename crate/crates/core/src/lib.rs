pub mod quantities;
pub mod rng;
pub mod massdist;
pub mod quadrature;
pub mod dpcriterion;
pub mod snsolver;
pub mod collapsesim;
pub mod error;
pub mod cli;

pub use error::Error;
