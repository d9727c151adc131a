pub mod cli;
pub mod features;
pub mod fourier;
pub mod geometry;
pub mod kcf;
pub mod foreground;
pub mod metrics;
pub mod synth;
pub mod tracking;
