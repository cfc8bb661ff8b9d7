pub mod cli;
pub mod error;
pub mod symcore;

pub use error::{Error, Result};
pub mod dsl;
pub mod fptcore;
pub mod numeric;
pub mod pencil;
