//! Regularity-sensitive error measures on a uniform grid.
//!
//! The discrete Zygmund seminorm of `u` with exponent `alpha` is
//!
//! ```text
//! max over nodes x and increments d of |u(x + d) + u(x - d) - 2 u(x)| / |d|^alpha
//! ```
//!
//! where the increments are `k h e` for `k = 1..=K` and `e` a coordinate
//! axis (optionally also the two diagonals).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fdgrid::{LatticeSamples, ScalarField};
use crate::{Evaluable, Grid2D, Point};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("Zygmund exponent alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("Zygmund increment set needs at least one multiple")]
    NoIncrements,
    #[error("region contains no grid nodes")]
    EmptyRegion,
    #[error("region contains every grid node")]
    FullRegion,
}

/// Denominator exponent of the second-difference quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuotientExponent {
    /// `|d|^alpha`, the Zygmund seminorm proper.
    #[default]
    Alpha,
    /// `|d|^(1 + alpha)`.
    OnePlusAlpha,
}

/// What to do with increments whose stencil leaves the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Skip increments for which `x + d` or `x - d` is not a grid node.
    #[default]
    Restrict,
    /// Evaluate the function outside the square.
    Extend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZygmundSpec {
    pub alpha: f64,
    /// Largest increment multiple `K`.
    pub max_multiple: usize,
    pub diagonals: bool,
    pub exponent: QuotientExponent,
    pub boundary: BoundaryPolicy,
}

impl Default for ZygmundSpec {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            max_multiple: 8,
            diagonals: false,
            exponent: QuotientExponent::Alpha,
            boundary: BoundaryPolicy::Restrict,
        }
    }
}

impl ZygmundSpec {
    pub fn validate(&self) -> Result<(), MetricError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MetricError::BadAlpha(self.alpha));
        }
        if self.max_multiple == 0 {
            return Err(MetricError::NoIncrements);
        }
        Ok(())
    }

    /// Lattice padding needed to evaluate every increment.
    pub fn padding(&self) -> usize {
        match self.boundary {
            BoundaryPolicy::Restrict => 0,
            BoundaryPolicy::Extend => self.max_multiple,
        }
    }

    fn power(&self) -> f64 {
        match self.exponent {
            QuotientExponent::Alpha => self.alpha,
            QuotientExponent::OnePlusAlpha => 1.0 + self.alpha,
        }
    }

    /// Lattice directions `(di, dj)` in use.
    pub fn directions(&self) -> &'static [(isize, isize)] {
        if self.diagonals {
            &[(1, 0), (0, 1), (1, 1), (1, -1)]
        } else {
            &[(1, 0), (0, 1)]
        }
    }
}

/// Discrete Zygmund seminorm of `u` on `grid`.
pub fn zygmund_seminorm<U: Evaluable + Sync + ?Sized>(u: &U, spec: &ZygmundSpec, grid: Grid2D) -> f64 {
    let samples = LatticeSamples::sample(grid, spec.padding(), u);
    zygmund_from_samples(&samples, spec)
}

/// Same as [`zygmund_seminorm`], from precomputed lattice samples.
///
/// Panics if the samples are padded less than `spec.padding()`.
pub fn zygmund_from_samples(u: &LatticeSamples, spec: &ZygmundSpec) -> f64 {
    assert!(u.pad() >= spec.padding(), "lattice padding too small");
    let grid = u.grid();
    let n = grid.cells() as isize;
    let h = grid.spacing();
    let power = spec.power();
    let restrict = spec.boundary == BoundaryPolicy::Restrict;
    let in_grid = |i: isize| (0..=n).contains(&i);
    let mut best = 0.0f64;
    for &(di, dj) in spec.directions() {
        let unit_len = ((di * di + dj * dj) as f64).sqrt();
        for k in 1..=spec.max_multiple as isize {
            let denom = (k as f64 * unit_len * h).powf(power);
            let (oi, oj) = (k * di, k * dj);
            for j in 0..=n {
                if restrict && !(in_grid(j + oj) && in_grid(j - oj)) {
                    continue;
                }
                for i in 0..=n {
                    if restrict && !(in_grid(i + oi) && in_grid(i - oi)) {
                        continue;
                    }
                    let second = u.at(i + oi, j + oj) + u.at(i - oi, j - oj) - 2.0 * u.at(i, j);
                    best = best.max(second.abs() / denom);
                }
            }
        }
    }
    best
}

/// `sqrt(mean |F - f|^2 + mean |lap_h F - lap_h f|^2)` over the grid nodes,
/// with the Laplacian at the grid's own spacing.
pub fn h2_error<A, B>(model: &A, target: &B, grid: Grid2D) -> f64
where
    A: Evaluable + Sync + ?Sized,
    B: Evaluable + Sync + ?Sized,
{
    let a = LatticeSamples::sample(grid, 1, model);
    let b = LatticeSamples::sample(grid, 1, target);
    let diff = a.difference(&b);
    let (l2, lap) = mean_square_terms(&diff);
    (l2 + lap).sqrt()
}

/// Node means of `d^2` and `(lap_h d)^2`.
fn mean_square_terms(diff: &LatticeSamples) -> (f64, f64) {
    let nodes = diff.nodes();
    let lap = diff.laplacian();
    (mean_square(nodes.values()), mean_square(lap.values()))
}

fn mean_square(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
}

/// Nodewise `|F - f|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorField(ScalarField);

impl ErrorField {
    pub fn from_field(field: ScalarField) -> Self {
        Self(field.map(f64::abs))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    /// Sum of squared node errors.
    pub fn squared_mass(&self) -> f64 {
        self.0.values().iter().map(|e| e * e).sum()
    }
}

pub fn error_field<A, B>(model: &A, target: &B, grid: Grid2D) -> ErrorField
where
    A: Evaluable + Sync + ?Sized,
    B: Evaluable + Sync + ?Sized,
{
    let diff = move |p: Point| model.eval(p) - target.eval(p);
    ErrorField::from_field(crate::fdgrid::sample_field(grid, &diff))
}

/// Outcome of [`localization_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localization {
    /// Share of squared error inside the region divided by its share of
    /// nodes. Above 1 means the error concentrates there.
    Ratio(f64),
    /// The error field is identically zero.
    NoError,
}

impl Localization {
    pub fn ratio(&self) -> Option<f64> {
        match *self {
            Self::Ratio(r) => Some(r),
            Self::NoError => None,
        }
    }
}

pub fn localization_ratio(e: &ErrorField, region: impl Fn(Point) -> bool) -> Result<Localization, MetricError> {
    let field = e.field();
    let grid = field.grid();
    let (mut inside_mass, mut total_mass, mut inside_nodes) = (0.0, 0.0, 0usize);
    for (p, v) in grid.nodes().zip(field.values()) {
        let sq = v * v;
        total_mass += sq;
        if region(p) {
            inside_mass += sq;
            inside_nodes += 1;
        }
    }
    let total_nodes = grid.node_count();
    if inside_nodes == 0 {
        return Err(MetricError::EmptyRegion);
    }
    if inside_nodes == total_nodes {
        return Err(MetricError::FullRegion);
    }
    if total_mass == 0.0 {
        return Ok(Localization::NoError);
    }
    let area_fraction = inside_nodes as f64 / total_nodes as f64;
    Ok(Localization::Ratio(inside_mass / total_mass / area_fraction))
}

/// The three error measures tracked during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Node mean of `|F - f|^2`.
    pub l2_error: f64,
    pub h2_error: f64,
    pub zygmund_error: f64,
}

/// Evaluates [`ErrorMetrics`] of many models against one target on a fixed
/// grid, sampling the target only once.
#[derive(Debug, Clone)]
pub struct MetricEvaluator {
    grid: Grid2D,
    zygmund: ZygmundSpec,
    target: LatticeSamples,
}

impl MetricEvaluator {
    pub fn new<T: Evaluable + Sync + ?Sized>(target: &T, grid: Grid2D, zygmund: ZygmundSpec) -> Self {
        let pad = zygmund.padding().max(1);
        Self {
            grid,
            zygmund,
            target: LatticeSamples::sample(grid, pad, target),
        }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    fn difference<M: Evaluable + Sync + ?Sized>(&self, model: &M) -> LatticeSamples {
        LatticeSamples::sample(self.grid, self.target.pad(), model).difference(&self.target)
    }

    pub fn evaluate<M: Evaluable + Sync + ?Sized>(&self, model: &M) -> ErrorMetrics {
        let diff = self.difference(model);
        let (l2, lap) = mean_square_terms(&diff);
        ErrorMetrics {
            l2_error: l2,
            h2_error: (l2 + lap).sqrt(),
            zygmund_error: zygmund_from_samples(&diff, &self.zygmund),
        }
    }

    pub fn error_field<M: Evaluable + Sync + ?Sized>(&self, model: &M) -> ErrorField {
        ErrorField::from_field(self.difference(model).nodes())
    }
}
