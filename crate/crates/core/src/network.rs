//! Single-hidden-layer networks with scalar output.
//!
//! Additive MLP with `n` neurons:
//!
//! ```text
//! F(x) = c + sum_j alpha_j * sigma(w_j . x + b_j)
//! ```
//!
//! Multiplicative MMLP with `n_b` axis-aligned blocks:
//!
//! ```text
//! F(x) = c + sum_j alpha_j * prod_i sigma(w_ij * x_i + b_ij)
//! ```
//!
//! Parameters live in one flat [`ParamVector`]. Layout, unit by unit:
//!
//! - MLP neuron `j`: `[w_j1 .. w_jm, b_j, alpha_j]` (stride `m + 2`)
//! - MMLP block `j`: `[w_1j .. w_mj, b_1j .. b_mj, alpha_j]` (stride `2m + 1`)
//!
//! followed by the shared output bias `c` as the last entry.

use std::ops::{Deref, DerefMut};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{bits_to_symmetric_unit, stream_rng, Stream};
use crate::{Evaluable, Point};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("architecture needs at least one input and one unit (got m={inputs}, units={units})")]
    EmptyArchitecture { inputs: usize, units: usize },
    #[error("parameter vector has length {got}, architecture {arch} needs {expected}")]
    LengthMismatch { arch: String, expected: usize, got: usize },
    #[error("parameter vector contains a non-finite value at index {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    /// `exp(-t^2)`.
    Gaussian,
}

impl Activation {
    #[inline]
    pub fn value(self, t: f64) -> f64 {
        match self {
            Self::Tanh => t.tanh(),
            Self::Gaussian => (-t * t).exp(),
        }
    }

    #[inline]
    pub fn derivative(self, t: f64) -> f64 {
        match self {
            Self::Tanh => {
                let th = t.tanh();
                1.0 - th * th
            }
            Self::Gaussian => -2.0 * t * (-t * t).exp(),
        }
    }

    /// Value and derivative sharing one transcendental call.
    #[inline]
    pub fn value_and_derivative(self, t: f64) -> (f64, f64) {
        match self {
            Self::Tanh => {
                let th = t.tanh();
                (th, 1.0 - th * th)
            }
            Self::Gaussian => {
                let e = (-t * t).exp();
                (e, -2.0 * t * e)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Tanh => "tanh",
            Self::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Mlp { inputs: usize, neurons: usize },
    Mmlp { inputs: usize, blocks: usize },
}

impl Architecture {
    pub fn mlp(inputs: usize, neurons: usize) -> Result<Self, NetworkError> {
        Self::Mlp { inputs, neurons }.validated()
    }

    pub fn mmlp(inputs: usize, blocks: usize) -> Result<Self, NetworkError> {
        Self::Mmlp { inputs, blocks }.validated()
    }

    pub fn validated(self) -> Result<Self, NetworkError> {
        if self.inputs() == 0 || self.units() == 0 {
            return Err(NetworkError::EmptyArchitecture {
                inputs: self.inputs(),
                units: self.units(),
            });
        }
        Ok(self)
    }

    pub fn inputs(&self) -> usize {
        match *self {
            Self::Mlp { inputs, .. } | Self::Mmlp { inputs, .. } => inputs,
        }
    }

    /// Hidden neurons (MLP) or multiplicative blocks (MMLP).
    pub fn units(&self) -> usize {
        match *self {
            Self::Mlp { neurons, .. } => neurons,
            Self::Mmlp { blocks, .. } => blocks,
        }
    }

    /// Parameters per hidden unit.
    pub fn stride(&self) -> usize {
        match *self {
            Self::Mlp { inputs, .. } => inputs + 2,
            Self::Mmlp { inputs, .. } => 2 * inputs + 1,
        }
    }

    /// `(m + 2) n + 1` for the MLP, `(2m + 1) n_b + 1` for the MMLP.
    pub fn param_count(&self) -> usize {
        self.stride() * self.units() + 1
    }

    pub fn is_multiplicative(&self) -> bool {
        matches!(self, Self::Mmlp { .. })
    }

    /// Short label used in artifact file names, e.g. `mmlp256`.
    pub fn label(&self) -> String {
        match *self {
            Self::Mlp { neurons, .. } => format!("mlp{neurons}"),
            Self::Mmlp { blocks, .. } => format!("mmlp{blocks}"),
        }
    }

    /// The other architecture with exactly the same parameter count, if one
    /// exists.
    pub fn matched_counterpart(&self) -> Option<Self> {
        let (m, total) = (self.inputs(), self.param_count() - 1);
        let other = match self {
            Self::Mlp { .. } => (2 * m + 1, true),
            Self::Mmlp { .. } => (m + 2, false),
        };
        if total % other.0 != 0 {
            return None;
        }
        let units = total / other.0;
        Some(if other.1 {
            Self::Mmlp {
                inputs: m,
                blocks: units,
            }
        } else {
            Self::Mlp {
                inputs: m,
                neurons: units,
            }
        })
    }
}

/// Flat trainable state of one network; see the module docs for the layout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// An architecture, its activation and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: Architecture,
    activation: Activation,
    params: ParamVector,
}

impl Network {
    pub fn new(arch: Architecture, activation: Activation, params: ParamVector) -> Result<Self, NetworkError> {
        let arch = arch.validated()?;
        if params.len() != arch.param_count() {
            return Err(NetworkError::LengthMismatch {
                arch: arch.label(),
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFinite(i));
        }
        Ok(Self {
            arch,
            activation,
            params,
        })
    }

    /// Deterministic initialization for `seed`.
    ///
    /// Hidden weights and biases are uniform on `[-1, 1)`, output weights
    /// uniform on `[-1, 1)` scaled by `1/sqrt(units)`, output bias zero.
    pub fn init(arch: Architecture, activation: Activation, seed: u64) -> Result<Self, NetworkError> {
        let arch = arch.validated()?;
        let mut rng = stream_rng(seed, Stream::Init);
        let stride = arch.stride();
        let out_scale = 1.0 / (arch.units() as f64).sqrt();
        let mut params = Vec::with_capacity(arch.param_count());
        for _ in 0..arch.units() {
            for _ in 0..stride - 1 {
                params.push(bits_to_symmetric_unit(rng.next_u64()));
            }
            params.push(out_scale * bits_to_symmetric_unit(rng.next_u64()));
        }
        params.push(0.0);
        Ok(Self {
            arch,
            activation,
            params: params.into(),
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn into_params(self) -> ParamVector {
        self.params
    }

    pub fn output_bias(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    /// Parameters of hidden unit `j`.
    pub fn unit(&self, j: usize) -> &[f64] {
        let s = self.arch.stride();
        &self.params[j * s..(j + 1) * s]
    }

    /// Number of MMLP factor weights with `|w_ij| < tol`. Such a block has a
    /// singular weight matrix; training does not prevent this.
    pub fn near_zero_factor_weights(&self, tol: f64) -> usize {
        match self.arch {
            Architecture::Mlp { .. } => 0,
            Architecture::Mmlp { inputs, blocks } => (0..blocks)
                .map(|j| self.unit(j)[..inputs].iter().filter(|w| w.abs() < tol).count())
                .sum(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let m = self.arch.inputs();
        assert_eq!(x.len(), m, "input dimension mismatch");
        let act = self.activation;
        let stride = self.arch.stride();
        let hidden = &self.params[..self.params.len() - 1];
        let mut sum = 0.0;
        match self.arch {
            Architecture::Mlp { .. } => {
                for unit in hidden.chunks_exact(stride) {
                    let z = dot(&unit[..m], x) + unit[m];
                    sum += unit[m + 1] * act.value(z);
                }
            }
            Architecture::Mmlp { .. } => {
                for unit in hidden.chunks_exact(stride) {
                    let (w, rest) = unit.split_at(m);
                    let (b, alpha) = rest.split_at(m);
                    let mut prod = 1.0;
                    for i in 0..m {
                        prod *= act.value(w[i] * x[i] + b[i]);
                    }
                    sum += alpha[0] * prod;
                }
            }
        }
        sum + self.output_bias()
    }

    /// Writes `dF(x)/dtheta` into `grad` (overwriting it) and returns `F(x)`.
    pub fn grad_params_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let m = self.arch.inputs();
        assert_eq!(x.len(), m, "input dimension mismatch");
        assert_eq!(grad.len(), self.params.len(), "gradient length mismatch");
        let act = self.activation;
        let stride = self.arch.stride();
        let n_hidden = self.params.len() - 1;
        let hidden = &self.params[..n_hidden];
        let mut sum = 0.0;
        match self.arch {
            Architecture::Mlp { .. } => {
                for (unit, g) in hidden
                    .chunks_exact(stride)
                    .zip(grad[..n_hidden].chunks_exact_mut(stride))
                {
                    let z = dot(&unit[..m], x) + unit[m];
                    let alpha = unit[m + 1];
                    let (s, ds) = act.value_and_derivative(z);
                    let dz = alpha * ds;
                    for i in 0..m {
                        g[i] = dz * x[i];
                    }
                    g[m] = dz;
                    g[m + 1] = s;
                    sum += alpha * s;
                }
            }
            Architecture::Mmlp { .. } => {
                let mut s = vec![0.0; m];
                let mut ds = vec![0.0; m];
                let mut suffix = vec![1.0; m + 1];
                for (unit, g) in hidden
                    .chunks_exact(stride)
                    .zip(grad[..n_hidden].chunks_exact_mut(stride))
                {
                    let alpha = unit[2 * m];
                    for i in 0..m {
                        let (v, d) = act.value_and_derivative(unit[i] * x[i] + unit[m + i]);
                        s[i] = v;
                        ds[i] = d;
                    }
                    // product of the other factors via prefix/suffix products
                    for i in (0..m).rev() {
                        suffix[i] = suffix[i + 1] * s[i];
                    }
                    let mut prefix = 1.0;
                    for i in 0..m {
                        let others = prefix * suffix[i + 1];
                        let db = alpha * ds[i] * others;
                        g[i] = db * x[i];
                        g[m + i] = db;
                        prefix *= s[i];
                    }
                    g[2 * m] = suffix[0];
                    sum += alpha * suffix[0];
                }
            }
        }
        grad[n_hidden] = 1.0;
        sum + self.output_bias()
    }

    pub fn grad_params(&self, x: &[f64]) -> ParamVector {
        let mut g = ParamVector::zeros(self.params.len());
        self.grad_params_into(x, &mut g);
        g
    }
}

impl Evaluable for Network {
    fn eval(&self, p: Point) -> f64 {
        self.forward(&p)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
