//! Evaluates both targets along a ray and draws a few uniform samples.

use mmlp_lab::targets::{sample_uniform, uniform_point};
use mmlp_lab::TargetFunction;

fn main() {
    let circle = TargetFunction::default_circle();
    let cone = TargetFunction::default_cone();

    println!("r,circle,cone");
    for k in 0..=10 {
        let r = k as f64 / 10.0;
        println!("{r},{},{}", circle.eval_radius(r), cone.eval_radius(r));
    }

    let samples = sample_uniform(&cone, 5, 42);
    println!("\nfirst samples of the cone stream, seed 42:");
    for (i, s) in samples.iter().enumerate() {
        println!("  #{i} ({:+.6}, {:+.6}) -> {:.6}", s.point[0], s.point[1], s.value);
    }
    // Any point of the stream can be regenerated directly.
    assert_eq!(uniform_point(42, 3), samples[3].point);

    let custom = TargetFunction::circle(0.3, 0.02).unwrap();
    println!("\nnarrow circle at the origin: {}", custom.eval_target([0.0, 0.0]));
    println!("rejected cone exponent: {}", TargetFunction::cone(0.9).unwrap_err());
}
