//! A Gaussian product mollifier, its rendering as one MMLP block, and the
//! convergence of `f * xi_eps` to `f` for the circle target.

use mmlp_lab::mollifier::{convergence_report, write_report_csv, MollifierKernel, DEFAULT_RESOLUTION};
use mmlp_lab::{Activation, Grid2D, TargetFunction};

fn main() {
    let eps = 0.1;
    let kernel = MollifierKernel::build(Activation::Gaussian, 2, eps, DEFAULT_RESOLUTION).unwrap();
    println!(
        "||sigma||_L1 = {} (sqrt(pi) = {})",
        kernel.l1_norm(),
        std::f64::consts::PI.sqrt()
    );

    let center = [0.2, -0.1];
    let block = kernel.as_block(&center).unwrap();
    println!("as a block: {:?}", &block.params()[..]);
    let x = [0.25, -0.05];
    println!(
        "kernel {} vs block {}",
        kernel.eval(&[center[0] - x[0], center[1] - x[1]]),
        block.forward(&x)
    );

    let smoothed = kernel
        .mollify(&|y: &[f64]| y[0] * y[0], &[0.5, 0.0], DEFAULT_RESOLUTION)
        .unwrap();
    println!("(x^2 * xi)(0.5, 0) = {smoothed} (expected {})", 0.25 + eps * eps / 2.0);

    println!();
    let rows = convergence_report(
        Activation::Gaussian,
        &[0.2, 0.1, 0.05, 0.025],
        &TargetFunction::default_circle(),
        Grid2D::with_cells(16).unwrap(),
        256,
    )
    .unwrap();
    write_report_csv(&rows, std::io::stdout().lock()).unwrap();
}
