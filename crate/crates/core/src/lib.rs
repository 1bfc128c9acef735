pub mod blrm;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod ffl;
pub mod formats;
pub mod gausscov;
pub mod linalg;
pub mod measures;
pub mod network;
pub mod plot;
pub mod simulate;
pub mod special;
pub mod tolerance;
pub mod verify;
