//! Builds an MLP and an MMLP with the same parameter budget and checks the
//! analytic gradient against a central difference.

use mmlp_lab::{Activation, Architecture, Network, ParamVector};

fn central_difference(net: &Network, x: &[f64], k: usize) -> f64 {
    let step = 1e-6;
    let mut p = net.params().to_vec();
    p[k] += step;
    let up = Network::new(net.architecture(), net.activation(), ParamVector::from(p.clone())).unwrap();
    p[k] -= 2.0 * step;
    let down = Network::new(net.architecture(), net.activation(), ParamVector::from(p)).unwrap();
    (up.forward(x) - down.forward(x)) / (2.0 * step)
}

fn main() {
    let mmlp = Architecture::mmlp(2, 64).unwrap();
    let mlp = mmlp.matched_counterpart().unwrap();
    println!("{} has {} parameters", mmlp.label(), mmlp.param_count());
    println!("{} has {} parameters", mlp.label(), mlp.param_count());

    let x = [0.3, -0.4];
    for arch in [mlp, mmlp] {
        for act in [Activation::Tanh, Activation::Gaussian] {
            let net = Network::init(arch, act, 7).unwrap();
            let grad = net.grad_params(&x);
            let worst = (0..grad.len())
                .map(|k| (grad[k] - central_difference(&net, &x, k)).abs())
                .fold(0.0, f64::max);
            println!(
                "{:>7} {:>8}: F(x) = {:+.6}, max |grad - fd| = {worst:.2e}",
                arch.label(),
                act.name(),
                net.forward(&x)
            );
        }
    }
}
