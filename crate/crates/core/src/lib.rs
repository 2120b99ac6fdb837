pub mod coupling;
pub mod effective;
pub mod experiments;
pub mod lattice;
pub mod limit;
pub mod output;
pub mod prudent;
pub mod rng;
pub mod stats;
