//! The discrete Zygmund seminorm of the two targets and of |x| under the
//! available increment sets and exponents.

use mmlp_lab::metrics::{zygmund_seminorm, BoundaryPolicy, QuotientExponent, ZygmundSpec};
use mmlp_lab::{Grid2D, Point, TargetFunction};

fn main() {
    let grid = Grid2D::default_grid();
    let h = grid.spacing();

    let abs_x = |p: Point| p[0].abs();
    let single = ZygmundSpec {
        max_multiple: 1,
        ..ZygmundSpec::default()
    };
    println!(
        "|x|, single increment: {} (2 h^0.2 = {})",
        zygmund_seminorm(&abs_x, &single, grid),
        2.0 * h.powf(0.2)
    );

    let specs = [
        ("default", ZygmundSpec::default()),
        (
            "with diagonals",
            ZygmundSpec {
                diagonals: true,
                ..ZygmundSpec::default()
            },
        ),
        (
            "exponent 1 + alpha",
            ZygmundSpec {
                exponent: QuotientExponent::OnePlusAlpha,
                ..ZygmundSpec::default()
            },
        ),
        (
            "extend past boundary",
            ZygmundSpec {
                boundary: BoundaryPolicy::Extend,
                ..ZygmundSpec::default()
            },
        ),
    ];
    for target in [TargetFunction::default_circle(), TargetFunction::default_cone()] {
        for (label, spec) in &specs {
            println!(
                "{:>6} {label:>22}: {:.6}",
                target.name(),
                zygmund_seminorm(&target, spec, grid)
            );
        }
    }
}
