//! Product mollifiers built from an activation.
//!
//! ```text
//! xi(x)     = ||sigma||_{L1}^{-m} prod_i sigma(x_i)
//! xi_eps(x) = eps^{-m} xi(x / eps)
//! ```
//!
//! For fixed `y`, `x -> xi_eps(y - x)` is a single MMLP block with diagonal
//! weights `-1/eps`, biases `y_i / eps` and output weight
//! `||sigma||_{L1}^{-m} eps^{-m}` (see [`MollifierKernel::as_block`]).

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::network::NetworkError;
use crate::{Activation, Architecture, Evaluable, Grid2D, Network};

/// Activation magnitude treated as zero when choosing the kernel window.
const TAIL: f64 = 1e-16;
/// Windows wider than this mean the activation does not decay.
const MAX_WINDOW: f64 = 1024.0;

pub const DEFAULT_RESOLUTION: usize = 512;

#[derive(Debug, Error, PartialEq)]
pub enum MollifierError {
    #[error("kernel scale eps must be positive and finite, got {0}")]
    BadScale(f64),
    #[error("kernel dimension must be at least 1")]
    ZeroDimension,
    #[error("quadrature needs at least 2 points per axis, got {0}")]
    BadResolution(usize),
    #[error("activation {0} does not decay below {TAIL:e}; its L1 norm is not finite")]
    NotIntegrable(&'static str),
    #[error("activation has vanishing L1 norm on its window")]
    VanishingNorm,
    #[error("eps list must be nonempty, positive and strictly decreasing")]
    BadScaleList,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MollifierKernel {
    activation: Activation,
    dim: usize,
    eps: f64,
    l1_norm: f64,
    /// Half-width `T` of the unscaled window: `|sigma(t)| < 1e-16` for
    /// `|t| >= T`.
    window: f64,
}

/// Smallest `T` (to bisection accuracy) beyond which `|sigma|` stays below
/// the tail threshold, assuming monotone decay there.
fn decay_window(act: Activation) -> Result<f64, MollifierError> {
    let small = |t: f64| act.value(t).abs() < TAIL && act.value(-t).abs() < TAIL;
    let mut hi = 1.0;
    while !small(hi) {
        hi *= 2.0;
        if hi > MAX_WINDOW {
            return Err(MollifierError::NotIntegrable(act.name()));
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if small(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Composite trapezoid nodes and weights on `[-half, half]`.
fn trapezoid(half: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let step = 2.0 * half / (points - 1) as f64;
    let nodes = (0..points).map(|k| -half + k as f64 * step).collect();
    let weights = (0..points)
        .map(|k| if k == 0 || k == points - 1 { 0.5 * step } else { step })
        .collect();
    (nodes, weights)
}

/// `||sigma||_{L1(R)}` by composite trapezoid over the decay window.
pub fn activation_l1_norm(act: Activation, resolution: usize) -> Result<f64, MollifierError> {
    if resolution < 2 {
        return Err(MollifierError::BadResolution(resolution));
    }
    let window = decay_window(act)?;
    let (nodes, weights) = trapezoid(window, resolution);
    Ok(nodes.iter().zip(&weights).map(|(t, w)| w * act.value(*t).abs()).sum())
}

impl MollifierKernel {
    pub fn build(act: Activation, dim: usize, eps: f64, resolution: usize) -> Result<Self, MollifierError> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(MollifierError::BadScale(eps));
        }
        if dim == 0 {
            return Err(MollifierError::ZeroDimension);
        }
        let l1_norm = activation_l1_norm(act, resolution)?;
        if l1_norm.is_nan() || l1_norm <= f64::MIN_POSITIVE {
            return Err(MollifierError::VanishingNorm);
        }
        Ok(Self {
            activation: act,
            dim,
            eps,
            l1_norm,
            window: decay_window(act)?,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// Half-width of the support window in `x` units, `eps * T`.
    pub fn radius(&self) -> f64 {
        self.eps * self.window
    }

    fn amplitude(&self) -> f64 {
        (self.l1_norm * self.eps).powi(-(self.dim as i32))
    }

    /// `xi_eps(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let prod: f64 = x.iter().map(|&xi| self.activation.value(xi / self.eps)).product();
        self.amplitude() * prod
    }

    /// The one-block MMLP computing `x -> xi_eps(center - x)`.
    pub fn as_block(&self, center: &[f64]) -> Result<Network, MollifierError> {
        assert_eq!(center.len(), self.dim);
        let m = self.dim;
        let mut params = vec![-1.0 / self.eps; m];
        params.extend(center.iter().map(|y| y / self.eps));
        params.push(self.amplitude());
        params.push(0.0);
        Ok(Network::new(Architecture::mmlp(m, 1)?, self.activation, params.into())?)
    }

    /// `(f * xi_eps)(x)` by tensor-product trapezoid over the kernel window.
    pub fn mollify(&self, f: &dyn Fn(&[f64]) -> f64, x: &[f64], resolution: usize) -> Result<f64, MollifierError> {
        assert_eq!(x.len(), self.dim);
        if resolution < 2 {
            return Err(MollifierError::BadResolution(resolution));
        }
        let (nodes, weights) = trapezoid(self.radius(), resolution);
        // weighted 1D kernel factors
        let factor: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(z, w)| w * self.activation.value(z / self.eps) / (self.l1_norm * self.eps))
            .collect();
        let m = self.dim;
        let mut idx = vec![0usize; m];
        let mut y = vec![0.0; m];
        let mut total = 0.0;
        loop {
            let mut weight = 1.0;
            for i in 0..m {
                weight *= factor[idx[i]];
                y[i] = x[i] - nodes[idx[i]];
            }
            if weight != 0.0 {
                total += weight * f(&y);
            }
            // odometer over the multi-index
            let mut axis = 0;
            loop {
                if axis == m {
                    return Ok(total);
                }
                idx[axis] += 1;
                if idx[axis] < resolution {
                    break;
                }
                idx[axis] = 0;
                axis += 1;
            }
        }
    }
}

/// Free-function form of [`MollifierKernel::mollify`].
pub fn mollify(
    kernel: &MollifierKernel,
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    resolution: usize,
) -> Result<f64, MollifierError> {
    kernel.mollify(f, x, resolution)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub sup_error: f64,
    /// Root mean square over the grid nodes.
    pub l2_error: f64,
}

/// Errors of `f * xi_eps` against `f` over the nodes of `grid`, one row per
/// `eps`.
pub fn convergence_report<F: Evaluable + Sync + ?Sized>(
    act: Activation,
    eps_list: &[f64],
    f: &F,
    grid: Grid2D,
    resolution: usize,
) -> Result<Vec<ConvergenceRow>, MollifierError> {
    let decreasing = eps_list.windows(2).all(|w| w[1] < w[0]);
    if eps_list.is_empty() || !decreasing || eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(MollifierError::BadScaleList);
    }
    let as_slice_fn = |y: &[f64]| f.eval([y[0], y[1]]);
    eps_list
        .iter()
        .map(|&eps| {
            let kernel = MollifierKernel::build(act, 2, eps, resolution)?;
            let errors: Vec<f64> = (0..grid.node_count())
                .into_par_iter()
                .map(|k| {
                    let p = grid.node_at(k);
                    kernel
                        .mollify(&as_slice_fn, &p, resolution)
                        .map(|v| (v - f.eval(p)).abs())
                })
                .collect::<Result<_, _>>()?;
            let sup_error = errors.iter().fold(0.0f64, |m, &e| m.max(e));
            let l2_error = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
            Ok(ConvergenceRow {
                eps,
                sup_error,
                l2_error,
            })
        })
        .collect()
}

/// Writes `eps,sup_error,l2_error`.
pub fn write_report_csv<W: std::io::Write>(rows: &[ConvergenceRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
