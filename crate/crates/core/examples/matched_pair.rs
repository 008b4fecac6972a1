//! Trains an MLP and an MMLP with equal parameter counts on the cone under
//! the same data stream and compares their error metrics.

use mmlp_lab::metrics::{localization_ratio, MetricEvaluator, ZygmundSpec};
use mmlp_lab::training::{train, LossSpec, TrainConfig};
use mmlp_lab::{Activation, Architecture, Grid2D, TargetFunction};

fn main() {
    let target = TargetFunction::default_cone();
    let cfg = TrainConfig {
        iterations: 1000,
        batch_size: 512,
        samples: 10_000,
        checkpoint_interval: 250,
        seed: 1,
        ..TrainConfig::default()
    };
    let evaluator = MetricEvaluator::new(&target, Grid2D::with_cells(64).unwrap(), ZygmundSpec::default());
    let loss = LossSpec::h2(1e-2, 1.0 / 128.0);

    let mmlp = Architecture::mmlp(2, 64).unwrap();
    for arch in [mmlp.matched_counterpart().unwrap(), mmlp] {
        let out = train(arch, Activation::Gaussian, &target, &loss, &cfg, &evaluator).unwrap();
        println!("{} ({} parameters)", arch.label(), arch.param_count());
        for r in &out.trace.records {
            println!(
                "  iter {:>5}: l2 {:.3e}  h2 {:.4}  zygmund {:.4}",
                r.iteration, r.metrics.l2_error, r.metrics.h2_error, r.metrics.zygmund_error
            );
        }
        let field = evaluator.error_field(&out.network);
        let loc = localization_ratio(&field, |p| target.in_singular_region(p)).unwrap();
        println!("  localization ratio near the apex: {:?}", loc);
    }
}
