//! Small numerical kernels shared by the physics modules.

pub mod eigen;
pub mod lm;
pub mod quad;
pub mod roots;

pub use eigen::symmetric_eigenvalues_3x3;
pub use lm::{levenberg_marquardt, LmOptions, LmReport};
pub use quad::{integrate, QuadOptions};
pub use roots::bisect;
