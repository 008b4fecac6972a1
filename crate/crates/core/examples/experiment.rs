//! Runs a shipped config through the harness, then reloads a checkpoint and
//! exports its error field.
//!
//! ```bash
//! cargo run --release -p mmlp-lab --example experiment -- configs/desk_cone_l2.json
//! ```

use std::path::PathBuf;

use mmlp_lab::harness::{eval_checkpoint, export_field, run_experiment, ExperimentConfig};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk_cone_l2.json"));
    let mut cfg = ExperimentConfig::load(&path).unwrap();
    // Keep the example quick; the shipped config runs 3 seeds.
    cfg.seeds.truncate(1);

    let root = std::env::temp_dir().join("mmlp-lab-example");
    let report = run_experiment(&cfg, &root).unwrap();
    println!("artifacts in {}", report.directory.display());
    for m in &report.medians {
        println!(
            "{:>7}: l2 {:.3e}  h2 {:.4}  zygmund {:.4}  localization {:.3}",
            m.arch.label(),
            m.l2_error.unwrap_or(f64::NAN),
            m.h2_error.unwrap_or(f64::NAN),
            m.zygmund_error.unwrap_or(f64::NAN),
            m.localization_ratio.unwrap_or(f64::NAN),
        );
    }

    let run = &report.runs[0];
    let ckpt = report.directory.join(format!("checkpoint_{}.json", run.run));
    let again = eval_checkpoint(&ckpt, None, Some(&cfg)).unwrap();
    assert_eq!(Some(again), run.final_eval);
    let out = report.directory.join("field_export.csv");
    let field = export_field(&ckpt, None, &out).unwrap();
    println!(
        "{}: {} nodes, squared mass {:.6e}",
        out.display(),
        field.field().values().len(),
        field.squared_mass()
    );
}
