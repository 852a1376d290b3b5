pub mod cli;
pub mod data_io;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod infotheory;
pub mod kvtext;
pub mod numerics;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
