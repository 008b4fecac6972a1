//! A small laboratory for comparing additive (MLP) and multiplicative (MMLP)
//! single-hidden-layer networks on 2D targets with localized singular
//! structure.
//!
//! The crate is organised bottom-up:
//!
//! - [`targets`]: the mollified circle and the cone, plus deterministic
//!   uniform sampling on `[-1, 1]^2`.
//! - [`network`]: forward evaluation and analytic parameter gradients for
//!   both architectures, with `tanh` and Gaussian-bump activations.
//! - [`fdgrid`]: uniform grids and the 5-point discrete Laplacian.
//! - [`training`]: the L2 and H²₂-type losses, Adam, and the training loop.
//! - [`metrics`]: discrete Zygmund seminorm, H²₂-type error, error fields and
//!   localization ratios.
//! - [`mollifier`]: the single-block product kernel as an approximate
//!   identity.
//! - [`harness`]: JSON configs, checkpoints, CSV artifacts and experiment
//!   orchestration used by the `mmlp-lab` binary.
//!
//! Every capability has a runnable example under `examples/`:
//!
//! ```bash
//! cargo run --release -p mmlp-lab --example targets
//! cargo run --release -p mmlp-lab --example network_gradients
//! cargo run --release -p mmlp-lab --example laplacian_stencil
//! cargo run --release -p mmlp-lab --example zygmund_seminorm
//! cargo run --release -p mmlp-lab --example mollifier
//! cargo run --release -p mmlp-lab --example matched_pair
//! cargo run --release -p mmlp-lab --example experiment
//! ```

pub mod fdgrid;
pub mod harness;
pub mod metrics;
pub mod mollifier;
pub mod network;
pub mod targets;
pub mod training;

mod rng;

/// A point in the plane.
pub type Point = [f64; 2];

/// Anything that can be evaluated pointwise on the whole plane.
///
/// Targets, networks and plain closures all implement this, so the grid
/// operators and metrics can be applied to any of them.
pub trait Evaluable {
    fn eval(&self, p: Point) -> f64;
}

impl<F> Evaluable for F
where
    F: Fn(Point) -> f64,
{
    fn eval(&self, p: Point) -> f64 {
        self(p)
    }
}

pub use fdgrid::{Grid2D, ScalarField};
pub use network::{Activation, Architecture, Network, ParamVector};
pub use targets::{Sample, TargetFunction};
