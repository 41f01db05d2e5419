//! Prints fusion quality and the bytes-vs-AUC table for the built-in
//! four-room environment.
//!
//! ```text
//! cargo run --release --example sweep
//! ```

use fbhm::eval::mean_std;
use fbhm::ingest::flatten;
use fbhm::simulate::{kfold_auc, quadrant_agents, run_simulation, size_auc_sweep, Experiment, SimulationPlan};

fn main() -> fbhm::Result<()> {
    let exp = Experiment::default();
    let data = exp.prepare()?;
    let basis = exp.basis(data.extent)?;
    println!(
        "{} samples in {} train / {} test scans, {} weights",
        flatten(&data.train).len() + flatten(&data.test).len(),
        data.train.len(),
        data.test.len(),
        basis.dim()
    );

    for (name, plan) in [
        ("fuse once", SimulationPlan::fuse_once(&exp.train)),
        ("repeated", SimulationPlan::repeated(&exp.train)),
    ] {
        let agents = quadrant_agents(&data.train, data.center, &basis, &exp.train);
        let report = run_simulation(agents, &plan, &basis, &exp.train, &data.test)?;
        let auc = |m: &Option<fbhm::eval::Metrics>| m.as_ref().map_or(f64::NAN, |m| m.auc);
        println!(
            "{name:<10} fused AUC {:.4}  joint AUC {:.4}",
            auc(&report.metrics.fused),
            auc(&report.metrics.joint)
        );
    }

    if let Some((mean, sd)) = mean_std(&kfold_auc(&exp)?) {
        println!("{}-fold joint AUC {mean:.4} +/- {sd:.4}", exp.folds);
    }

    println!(
        "\n{:<14} {:>10} {:>10} {:>8}",
        "representation", "parameter", "bytes", "AUC"
    );
    for r in size_auc_sweep(&exp, &data, &[100, 196, 289, 441, 625], &[0.1, 0.2, 0.4])? {
        println!(
            "{:<14} {:>10} {:>10} {:>8.4}",
            r.representation, r.parameter, r.bytes, r.auc
        );
    }
    Ok(())
}
