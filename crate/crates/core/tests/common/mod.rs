//! Independent oracles shared by the integration suites.
//!
//! Nothing here calls into the code it checks except to obtain the values
//! under test.
#![allow(dead_code)]

use mmlp_lab::training::{loss, loss_grad, LossSpec};
use mmlp_lab::{Activation, Architecture, Network, ParamVector, Point, Sample, TargetFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// A network with parameters drawn uniformly from `[-scale, scale]`.
pub fn random_network(rng: &mut ChaCha8Rng, arch: Architecture, act: Activation, scale: f64) -> Network {
    let params: Vec<f64> = (0..arch.param_count()).map(|_| uniform(rng, -scale, scale)).collect();
    Network::new(arch, act, ParamVector::from(params)).unwrap()
}

pub fn sigma(act: Activation, t: f64) -> f64 {
    match act {
        Activation::Tanh => t.tanh(),
        Activation::Gaussian => (-t * t).exp(),
    }
}

/// Forward pass written from the definitions with explicit loops.
pub fn naive_forward(net: &Network, x: &[f64]) -> f64 {
    let p = net.params();
    let act = net.activation();
    match net.architecture() {
        Architecture::Mlp { inputs, neurons } => {
            let mut total = p[p.len() - 1];
            for j in 0..neurons {
                let base = j * (inputs + 2);
                let mut z = 0.0;
                for i in 0..inputs {
                    z += p[base + i] * x[i];
                }
                z += p[base + inputs];
                total += p[base + inputs + 1] * sigma(act, z);
            }
            total
        }
        Architecture::Mmlp { inputs, blocks } => {
            let mut total = p[p.len() - 1];
            for j in 0..blocks {
                let base = j * (2 * inputs + 1);
                let mut prod = 1.0;
                for i in 0..inputs {
                    let w = p[base + i];
                    let b = p[base + inputs + i];
                    prod *= sigma(act, w * x[i] + b);
                }
                total += p[base + 2 * inputs] * prod;
            }
            total
        }
    }
}

/// Relative error with a floor on the denominator so that components which
/// are zero up to rounding compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Central-difference derivative of `f` at 0 refined by Richardson
/// extrapolation over a shrinking step sequence (Ridders' scheme).
///
/// Plain central differences lose about `eps_mach * |f| / (h^2 step)`
/// digits when `f` contains a 1/h^2 stencil; extrapolation lets the step
/// stay large enough for that noise to vanish.
pub fn ridders(mut f: impl FnMut(f64) -> f64, step: f64) -> f64 {
    const SHRINK: f64 = 1.4;
    const LEVELS: usize = 10;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut h = step;
    table[0][0] = (f(h) - f(-h)) / (2.0 * h);
    let mut best = table[0][0];
    let mut best_err = f64::INFINITY;
    for i in 1..LEVELS {
        h /= SHRINK;
        table[0][i] = (f(h) - f(-h)) / (2.0 * h);
        let mut fac = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let err = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if err <= best_err {
                best_err = err;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * best_err {
            break;
        }
    }
    best
}

/// Finite-difference gradient of `f` at `params`, one [`ridders`] call per
/// coordinate.
pub fn fd_gradient(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|k| {
            let orig = params[k];
            let d = ridders(
                |t| {
                    p[k] = orig + t;
                    f(&p)
                },
                0.05 * orig.abs().max(1.0),
            );
            p[k] = orig;
            d
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Exhaustive second-difference quotient over every node of the
/// `(cells+1)^2` lattice on `[-1,1]^2` and every axis increment `k h`,
/// `k = 1..=max_k`, keeping only increments whose endpoints stay on the
/// lattice.
pub fn zygmund_oracle(u: impl Fn(Point) -> f64, cells: usize, max_k: usize, alpha: f64, diagonals: bool) -> f64 {
    let h = 2.0 / cells as f64;
    let n = cells as i64;
    let at = |i: i64, j: i64| u([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
    let mut dirs: Vec<(i64, i64)> = vec![(1, 0), (0, 1)];
    if diagonals {
        dirs.push((1, 1));
        dirs.push((1, -1));
    }
    let mut best = 0.0f64;
    for j in 0..=n {
        for i in 0..=n {
            for &(dx, dy) in &dirs {
                for k in 1..=max_k as i64 {
                    let (ip, jp, im, jm) = (i + k * dx, j + k * dy, i - k * dx, j - k * dy);
                    let inside = |a: i64| (0..=n).contains(&a);
                    if !(inside(ip) && inside(jp) && inside(im) && inside(jm)) {
                        continue;
                    }
                    let len = k as f64 * h * ((dx * dx + dy * dy) as f64).sqrt();
                    let q = (at(ip, jp) + at(im, jm) - 2.0 * at(i, j)).abs() / len.powf(alpha);
                    best = best.max(q);
                }
            }
        }
    }
    best
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Tensor Simpson rule on `[a, b]^2`.
pub fn simpson_2d(f: impl Fn(f64, f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    simpson(|y| simpson(|x| f(x, y), a, b, n), a, b, n)
}

pub fn architecture(multiplicative: bool, inputs: usize, units: usize) -> Architecture {
    if multiplicative {
        Architecture::mmlp(inputs, units).unwrap()
    } else {
        Architecture::mlp(inputs, units).unwrap()
    }
}

fn with_params(net: &Network, p: &[f64]) -> Network {
    Network::new(net.architecture(), net.activation(), ParamVector::from(p.to_vec())).unwrap()
}

/// Worst componentwise relative error of `grad_params` against finite
/// differences over `instances` random (network, input) pairs.
pub fn forward_gradient_worst(act: Activation, multiplicative: bool, instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let inputs = r.gen_range(1..4);
        let units = r.gen_range(1..7);
        let net = random_network(&mut r, architecture(multiplicative, inputs, units), act, 1.5);
        let x: Vec<f64> = (0..inputs).map(|_| uniform(&mut r, -1.0, 1.0)).collect();
        let analytic = net.grad_params(&x);
        let numeric = fd_gradient(net.params(), |p| with_params(&net, p).forward(&x));
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }
    worst
}

/// As [`forward_gradient_worst`] for `loss_grad`, alternating cone and
/// circle targets, with 8 samples and 4 stencil centers per instance.
/// Also checks that the value returned alongside the gradient is the loss.
pub fn loss_gradient_worst(act: Activation, multiplicative: bool, spec: &LossSpec, instances: usize, seed: u64) -> f64 {
    let targets = [TargetFunction::default_cone(), TargetFunction::default_circle()];
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let target = targets[i % 2];
        let units = r.gen_range(1..6);
        let net = random_network(&mut r, architecture(multiplicative, 2, units), act, 1.5);
        let batch: Vec<Sample> = (0..8)
            .map(|_| {
                let point = [uniform(&mut r, -1.0, 1.0), uniform(&mut r, -1.0, 1.0)];
                Sample {
                    point,
                    value: target.eval_target(point),
                }
            })
            .collect();
        let centers: Vec<Point> = (0..4)
            .map(|_| [uniform(&mut r, -1.0, 1.0), uniform(&mut r, -1.0, 1.0)])
            .collect();
        let (value, analytic) = loss_grad(&net, &batch, &centers, &target, spec).unwrap();
        let direct = loss(&net, &batch, &centers, &target, spec).unwrap();
        worst = worst.max(rel_err(value, direct));
        let numeric = fd_gradient(net.params(), |p| {
            loss(&with_params(&net, p), &batch, &centers, &target, spec).unwrap()
        });
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }
    worst
}
