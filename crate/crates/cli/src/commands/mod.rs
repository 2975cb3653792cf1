pub mod compare;
pub mod detect;
pub mod reconstruct;
pub mod sample;
pub mod synth;
