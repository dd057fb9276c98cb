pub mod algorithms;
pub mod design;
pub mod environments;
pub mod error;
pub mod harness;
pub mod estimators;
pub mod lifted;
pub mod linalg;
pub mod meta;
pub mod seeding;

pub use error::{BanditError, Result};
