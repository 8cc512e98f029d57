pub mod ablate;
pub mod bench;
pub mod eval;
pub mod gen;
pub mod landscape;
pub mod probe;
pub mod solve;
