pub mod aoi;
pub mod error;
pub mod experiments;
pub mod network;
pub mod sca;
pub mod sim;
pub mod solver;
