//! Dense numeric substrate shared by every model component.

pub mod activation;
pub mod adam;
pub mod gradcheck;
pub mod init;
pub mod matrix;
pub mod params;
pub mod rng;
pub mod softmax;

pub use activation::{sigmoid, tanh};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_difference_gradcheck, relative_error, GradCheckReport};
pub use init::glorot_init;
pub use matrix::{axpy, dot, linear_map, Matrix, Vector};
pub use params::{ParamBlock, ParamSet};
pub use rng::{stream_rng, PipelineRng, Stream};
pub use softmax::softmax_stable;
