pub use rustfft::num_complex::Complex64;

pub mod average;
pub mod embed;
pub mod error;
pub mod fourier;
pub mod gridset;
pub mod outer;
pub mod packet;
pub mod signal;
pub mod sparse;
pub mod tiles;
pub mod varcar;
pub mod weights;
