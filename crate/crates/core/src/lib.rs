pub mod cli;
pub mod estimation;
pub mod mechanisms;
pub mod privacy;
pub mod rng;
pub mod simulation;
