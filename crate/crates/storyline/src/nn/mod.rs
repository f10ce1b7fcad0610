//! Neural building blocks shared by every trainable model in the crate:
//! tape autodiff, LSTM encoders, attention pooling, Adam, gradient checking,
//! and checkpoint serialization.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod tape;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use attention::AttentionPool;
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{BiLstm, LstmCell};
pub use tape::{sigmoid, softmax_slice, Tape, Var, PROB_EPS};
pub use tensor::{Init, ParamId, ParamSet, Parameter, Tensor};

/// Weight initialization half-width shared by all models.
pub const INIT_SCALE: f64 = 0.08;

/// Finite-difference step for gradient checks. Central differences on a
/// loss of magnitude O(1) carry rounding noise proportional to 1/eps, which
/// dominates near-zero recurrent-gate gradients below roughly 3e-4; this
/// step keeps both rounding and truncation under the 1e-4 tolerance.
pub const GRAD_CHECK_EPS: f64 = 5e-4;

/// Shared ceiling on|analytic - numeric| / max(1e-8, |analytic| + |numeric|).
pub const GRAD_CHECK_TOL: f64 = 1e-4;
