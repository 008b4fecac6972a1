//! Closed-form radial targets on the plane.
//!
//! Both targets are total functions on `R^2`; the training domain
//! `[-1, 1]^2` only matters for sampling.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{bits_to_symmetric_unit, stream_rng, Stream};
use crate::{Evaluable, Point};

pub const DEFAULT_CIRCLE_RADIUS: f64 = 0.5;
pub const DEFAULT_CIRCLE_WIDTH: f64 = 0.05;
pub const DEFAULT_CONE_EXPONENT: f64 = 1.8;

#[derive(Debug, Error, PartialEq)]
pub enum TargetError {
    #[error("circle transition width eps must be positive and finite, got {0}")]
    BadWidth(f64),
    #[error("circle radius r0 must be finite, got {0}")]
    BadRadius(f64),
    #[error("cone exponent beta must be finite and > 1, got {0}")]
    BadExponent(f64),
}

/// One of the two singular targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum TargetFunction {
    /// `0.5 * (1 + tanh((r0 - |x|) / eps))`: smooth, with a thin transition
    /// layer around the circle of radius `r0`.
    #[serde(rename = "circle")]
    MollifiedCircle { r0: f64, eps: f64 },
    /// `max(1 - |x|, 0)^beta`: C¹ with a second-order singularity at the
    /// origin (and a milder one on the unit circle).
    #[serde(rename = "cone")]
    MollifiedCone { beta: f64 },
}

impl TargetFunction {
    pub fn circle(r0: f64, eps: f64) -> Result<Self, TargetError> {
        if !r0.is_finite() {
            return Err(TargetError::BadRadius(r0));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(TargetError::BadWidth(eps));
        }
        Ok(Self::MollifiedCircle { r0, eps })
    }

    pub fn cone(beta: f64) -> Result<Self, TargetError> {
        if !(beta.is_finite() && beta > 1.0) {
            return Err(TargetError::BadExponent(beta));
        }
        Ok(Self::MollifiedCone { beta })
    }

    pub fn default_circle() -> Self {
        Self::MollifiedCircle {
            r0: DEFAULT_CIRCLE_RADIUS,
            eps: DEFAULT_CIRCLE_WIDTH,
        }
    }

    pub fn default_cone() -> Self {
        Self::MollifiedCone {
            beta: DEFAULT_CONE_EXPONENT,
        }
    }

    /// Re-checks the invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), TargetError> {
        match *self {
            Self::MollifiedCircle { r0, eps } => Self::circle(r0, eps).map(|_| ()),
            Self::MollifiedCone { beta } => Self::cone(beta).map(|_| ()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MollifiedCircle { .. } => "circle",
            Self::MollifiedCone { .. } => "cone",
        }
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        match *self {
            Self::MollifiedCircle { r0, eps } => 0.5 * (1.0 + ((r0 - r) / eps).tanh()),
            Self::MollifiedCone { beta } => (1.0 - r).max(0.0).powf(beta),
        }
    }

    pub fn eval_target(&self, p: Point) -> f64 {
        self.eval_radius(p[0].hypot(p[1]))
    }

    /// Whether `p` lies in the region where this target is hard to
    /// approximate: the annulus `|r - r0| < 3 eps` for the circle, the disk
    /// `r < 0.25` for the cone.
    pub fn in_singular_region(&self, p: Point) -> bool {
        let r = p[0].hypot(p[1]);
        match *self {
            Self::MollifiedCircle { r0, eps } => (r - r0).abs() < 3.0 * eps,
            Self::MollifiedCone { .. } => r < 0.25,
        }
    }
}

impl Evaluable for TargetFunction {
    fn eval(&self, p: Point) -> f64 {
        self.eval_target(p)
    }
}

/// A training pair `(x, f(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub point: Point,
    pub value: f64,
}

/// The `index`-th point of the uniform stream keyed by `seed`.
///
/// Point `i` occupies words `4i..4i+4` of a ChaCha8 keystream, so any point
/// can be regenerated without replaying the ones before it.
pub fn uniform_point(seed: u64, index: u64) -> Point {
    let mut rng = stream_rng(seed, Stream::Samples);
    rng.set_word_pos(4 * u128::from(index));
    let x = bits_to_symmetric_unit(rng.next_u64());
    let y = bits_to_symmetric_unit(rng.next_u64());
    [x, y]
}

/// `n` i.i.d. uniform points on `[-1, 1]^2` paired with target values.
pub fn sample_uniform(t: &TargetFunction, n: usize, seed: u64) -> Vec<Sample> {
    // Sequential draws walk the same keystream as `uniform_point`.
    let mut rng = stream_rng(seed, Stream::Samples);
    (0..n)
        .map(|_| {
            let x = bits_to_symmetric_unit(rng.next_u64());
            let y = bits_to_symmetric_unit(rng.next_u64());
            let point = [x, y];
            Sample {
                point,
                value: t.eval_target(point),
            }
        })
        .collect()
}
