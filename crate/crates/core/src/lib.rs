pub mod biorth;
pub mod cli;
pub mod error;
pub mod measure;
pub mod numerics;
pub mod oracle;
pub mod pencil;
pub mod quadrature;
pub mod recurrence;
pub mod schur;

pub use error::{Error, Result};
pub use numerics::{c64, Complex64};
