pub mod dataset;
pub mod dist;
pub mod error;
pub mod geometry;
pub mod nn;
pub mod rng;
pub mod tape;
