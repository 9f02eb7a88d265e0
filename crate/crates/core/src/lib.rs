//! Accelerated primal-dual solvers for bilinear saddle-point problems
//!
//! ```text
//! min_x max_y  f(x) + ⟨Ax, y⟩ − g(y)
//! ```
//!
//! Two iterations are provided. [`ldpd`] linearizes a smooth `f` and takes
//! (optionally θ-blended) gradient steps; [`edpd`] uses an exact prox of `f`.
//! Both update the dual by a prox step and over-relax it by extrapolation.
//! Each ships with the step-size schedules that carry non-asymptotic gap
//! bounds, and [`diagnostics`] evaluates those bounds next to the measured gap.
//!
//! [`imaging`] builds total-variation deblurring models on top of the
//! operators in [`linops`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod diagnostics;
pub mod edpd;
pub mod error;
pub mod imaging;
pub mod ldpd;
pub mod linops;
pub mod model;
pub mod prox;
pub mod synth;
pub mod vector;

pub use diagnostics::{BoundConstants, BoundRegime, GapReference, HistoryRecord, StepParams};
pub use edpd::{EdpdRegime, EdpdState};
pub use error::{DpdError, Result};
pub use imaging::{GaussianDeblurSpec, ImageGrid, SaltPepperDeblurSpec};
pub use ldpd::{LdpdParams, LdpdRegime, LdpdState};
pub use linops::{
    ConvolutionOperator, DenseMatrix, DifferenceOperator, IdentityOperator, Kernel2D, LinearOperator, StackedOperator,
};
pub use model::{DualOracle, PrimalOracle, ProblemConstants, SaddleProblem};

/// Per-iteration view handed to solver observers.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    /// Iteration index `t` that was just completed (produces `x_{t+1}`).
    pub t: usize,
    pub params: StepParams,
    /// Latest iterates `x_{t+1}`, `y_{t+1}`.
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// The aggregate point the regime's rate is stated for.
    pub x_agg: &'a [f64],
    pub y_agg: &'a [f64],
}

/// Result of a full solver run.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x_agg: Vec<f64>,
    pub y_agg: Vec<f64>,
    pub x_last: Vec<f64>,
    pub y_last: Vec<f64>,
    pub iterations: usize,
    /// Parameters used at each iteration, in order.
    pub params: Vec<StepParams>,
}

/// The project-wide generator: ChaCha8 seeded from a `u64`.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
