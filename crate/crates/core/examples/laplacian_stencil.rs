//! The 5-point Laplacian: exact on low-degree polynomials, second order on
//! smooth functions, large inside the circle's transition layer.

use mmlp_lab::fdgrid::{discrete_laplacian_at, laplacian_field};
use mmlp_lab::{Grid2D, Point, TargetFunction};

fn main() {
    let paraboloid = |p: Point| p[0] * p[0] + p[1] * p[1];
    println!(
        "lap_h(x^2 + y^2) at (0.25, -0.5): {}",
        discrete_laplacian_at(&paraboloid, [0.25, -0.5], 1.0 / 128.0)
    );

    let wave = |p: Point| p[0].sin() * p[1].cos();
    println!("\ncells,h,max error vs -2 sin x cos y");
    for cells in [16, 32, 64, 128] {
        let g = Grid2D::with_cells(cells).unwrap();
        let h = g.spacing();
        let err = g
            .nodes()
            .map(|p| (discrete_laplacian_at(&wave, p, h) + 2.0 * wave(p)).abs())
            .fold(0.0, f64::max);
        println!("{cells},{h},{err:.3e}");
    }

    let g = Grid2D::default_grid();
    let lap = laplacian_field(g, &TargetFunction::default_circle());
    let (k, v) = lap
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    let p = g.node_at(k);
    println!(
        "\ncircle: |lap_h f| peaks at {v:.1} at ({:.4}, {:.4}), radius {:.4}",
        p[0],
        p[1],
        p[0].hypot(p[1])
    );
}
