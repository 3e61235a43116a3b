pub mod bloch;
pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod model;
pub mod parallel;
pub mod pmp;
pub mod quantum;
pub mod smpc;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
