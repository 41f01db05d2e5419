//! Experiment-level checks on the synthetic four-room environment.

use fbhm::eval::mean_std;
use fbhm::gridmap::GRID_HEADER_BYTES;
use fbhm::simulate::{
    kfold_auc, quadrant_agents, run_simulation, size_auc_sweep, train_joint, Experiment, SimulationPlan,
};

#[test]
fn sweep_rows_are_consistent() {
    let exp = Experiment::default();
    let data = exp.prepare().unwrap();
    let rows = size_auc_sweep(&exp, &data, &[100, 289, 441, 625], &[0.1, 0.4]).unwrap();

    // Fast-BHM quality grows with the basis until it levels off
    let bhm: Vec<_> = rows.iter().filter(|r| r.representation == "fast-bhm").collect();
    assert_eq!(bhm.len(), 4);
    for w in bhm.windows(2) {
        assert!(w[1].bytes > w[0].bytes);
        assert!(w[1].auc >= w[0].auc - 0.005, "{} -> {}", w[0].auc, w[1].auc);
    }

    // the two cell encodings of the sample-built grid differ only in size
    for res in [0.1, 0.4] {
        let find = |name: &str| {
            rows.iter()
                .find(|r| r.representation == name && r.parameter == res)
                .unwrap()
        };
        let (f, q) = (find("grid-f64"), find("grid-u8"));
        assert!((f.auc - q.auc).abs() <= 0.005, "{} vs {}", f.auc, q.auc);
        assert_eq!(f.bytes - GRID_HEADER_BYTES, 8 * (q.bytes - GRID_HEADER_BYTES));
    }
}

#[test]
fn empty_sweep_is_empty() {
    let exp = Experiment::default();
    let data = exp.prepare().unwrap();
    assert!(size_auc_sweep(&exp, &data, &[], &[]).unwrap().is_empty());
}

#[test]
fn joint_map_consumes_every_sample_once() {
    let exp = Experiment::default();
    let data = exp.prepare().unwrap();
    let basis = exp.basis(data.extent).unwrap();
    let agents = quadrant_agents(&data.train, data.center, &basis, &exp.train);
    let report = run_simulation(
        agents,
        &SimulationPlan::fuse_once(&exp.train),
        &basis,
        &exp.train,
        &data.test,
    )
    .unwrap();
    assert_eq!(report.consumed_ids, report.union_ids);

    // scan order is by id, so the joint map does not depend on how scans arrive
    let (a, _) = train_joint(&data.train, &basis, &exp.train).unwrap();
    let mut reversed = data.train.clone();
    reversed.reverse();
    let (b, _) = train_joint(&reversed, &basis, &exp.train).unwrap();
    assert_eq!(a, b);
    assert_eq!(report.joint.as_ref(), Some(&a));
}

#[test]
fn kfold_auc_is_high_on_every_fold() {
    let exp = Experiment::default();
    let aucs = kfold_auc(&exp).unwrap();
    assert_eq!(aucs.len(), exp.folds);
    let (mean, sd) = mean_std(&aucs).unwrap();
    assert!(mean >= 0.9, "mean {mean} sd {sd}");
    assert!(aucs.iter().all(|a| (0.5..=1.0).contains(a)), "{aucs:?}");
}
