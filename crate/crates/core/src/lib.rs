pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod discriminator;
pub mod error;
pub mod eval;
pub mod lang;
pub mod metrics;
pub mod schedule;
pub mod seq2seq;

pub use error::{Error, Result};
pub use lang::{Direction, Lang};
