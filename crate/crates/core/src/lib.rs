pub mod assemble;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod ofe;
pub mod pathkit;
pub mod quad;
pub mod transform;

pub use error::{Error, Result};
