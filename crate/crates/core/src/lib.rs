pub mod lattice;
pub mod operator;
pub mod par;
pub mod potential;
pub mod linalg;
pub mod numrange;
pub mod classify;
pub mod one_dim;
pub mod criteria;
pub mod construct;
pub mod report;
pub use num_complex;
