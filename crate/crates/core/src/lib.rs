pub mod eigen;
pub mod error;
pub mod eval;
pub mod image;
pub mod measures;
pub mod morphology;
pub mod synth;
pub mod tensor;
pub mod io;
pub mod experiment;
