pub mod cli;
pub mod crandall_fagin;
pub mod dft;
pub mod error;
pub mod ext_field;
pub mod kronecker;
pub mod multiplier;
mod linalg;
pub mod smooth;
pub mod prime_field;
