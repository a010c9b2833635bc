pub mod augment;
pub mod eval;
pub mod image;
pub mod morphometrics;
pub mod persistence;
pub mod synth;
pub mod train;
