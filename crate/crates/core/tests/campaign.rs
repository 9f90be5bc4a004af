use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::AtomicBool;

use beamsel_core::harness::campaign::{shard_path, triples, CHECKPOINTS_DIR, FAILURES_DIR, RECORDS_DIR};
use beamsel_core::harness::export::{convergence_rows, export_tables};
use beamsel_core::harness::record::FailureRecord;
use beamsel_core::harness::{ee_report, load_records, run_campaign, ExperimentConfig, Phase, ResultRecord};

fn small(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::shipped();
    cfg.output_dir = dir.to_path_buf();
    cfg.n_ue = vec![5, 10];
    cfg.n_seeds = 2;
    cfg.trainer.episodes = 40;
    cfg
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir.join(RECORDS_DIR)).unwrap() {
        let p = e.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    out
}

#[test]
fn rerun_is_idempotent_and_resumes_missing_shards() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let first = run_campaign(&cfg, None).unwrap();
    assert_eq!(first.completed.len(), 20);
    let before = snapshot(dir.path());
    assert_eq!(before.len(), 20);

    let again = run_campaign(&cfg, None).unwrap();
    assert!(again.completed.is_empty());
    assert_eq!(again.skipped.len(), 20);
    assert_eq!(snapshot(dir.path()), before);

    let victim = &triples(&cfg)[3];
    std::fs::remove_file(shard_path(dir.path(), victim)).unwrap();
    let resumed = run_campaign(&cfg, None).unwrap();
    assert_eq!(resumed.completed, vec![victim.clone()]);
    assert_eq!(snapshot(dir.path()), before);
}

#[test]
fn slices_share_shards_with_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let full = small(dir.path());
    let mut slice = full.clone();
    slice.n_ue = vec![10];
    slice.run_strategies = Some(vec!["A2C".into(), "ESB-3".into()]);
    assert_eq!(run_campaign(&slice, None).unwrap().completed.len(), 4);
    let rest = run_campaign(&full, None).unwrap();
    assert_eq!(rest.skipped.len(), 4);
    assert_eq!(rest.completed.len(), 16);
}

#[test]
fn one_bad_shard_does_not_stop_the_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let broken = triples(&cfg)[0].clone();
    let path = shard_path(dir.path(), &broken);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, "not json\n").unwrap();

    let report = run_campaign(&cfg, None).unwrap();
    assert_eq!(report.failed.len(), 1);
    assert_eq!(report.failed[0].0, broken);
    assert_eq!(report.completed.len(), 19);
    let failure_path = dir.path().join(FAILURES_DIR).join(format!("{}.json", broken.shard_name()));
    let failure: FailureRecord = serde_json::from_str(&std::fs::read_to_string(&failure_path).unwrap()).unwrap();
    assert_eq!(failure.error_kind, "json");
    assert_eq!(failure.strategy, broken.strategy);

    std::fs::remove_file(&path).unwrap();
    let fixed = run_campaign(&cfg, None).unwrap();
    assert_eq!(fixed.completed, vec![broken]);
    assert!(!failure_path.exists());
}

#[test]
fn shards_from_another_config_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run_campaign(&cfg, None).unwrap();
    let before = snapshot(dir.path());
    let mut changed = cfg.clone();
    changed.trainer.learning_rate = 1e-3;
    let report = run_campaign(&changed, None).unwrap();
    assert_eq!(report.failed.len(), 20);
    assert!(report.failed[0].1.contains("written by config"));
    assert_eq!(snapshot(dir.path()), before);
}

#[test]
fn interrupted_runs_checkpoint_and_later_match_a_clean_run() {
    let stopped = tempfile::tempdir().unwrap();
    let cfg = small(stopped.path());
    let stop = AtomicBool::new(true);
    let report = run_campaign(&cfg, Some(&stop)).unwrap();
    // learned strategies stop after their first episode; fixed baselines finish
    let learned = cfg.strategies.iter().filter(|s| s.kind.is_learned()).count() * 4;
    assert_eq!(report.interrupted.len(), learned);
    assert_eq!(report.completed.len(), 20 - learned);
    let ckpts = std::fs::read_dir(stopped.path().join(CHECKPOINTS_DIR)).unwrap().count();
    assert_eq!(ckpts, learned);

    let resumed = run_campaign(&cfg, None).unwrap();
    assert_eq!(resumed.completed.len(), learned);
    assert_eq!(std::fs::read_dir(stopped.path().join(CHECKPOINTS_DIR)).unwrap().count(), 0);

    let clean = tempfile::tempdir().unwrap();
    run_campaign(&small(clean.path()), None).unwrap();
    assert_eq!(snapshot(stopped.path()), snapshot(clean.path()));
}

#[test]
fn records_are_self_describing_and_exports_are_pure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.record_every = 7;
    run_campaign(&cfg, None).unwrap();
    let records: Vec<ResultRecord> = load_records(dir.path()).unwrap();
    let hash = cfg.config_hash();
    assert!(records.iter().all(|r| r.config_hash == hash && r.experiment_id == cfg.experiment_id));

    for t in triples(&cfg) {
        let mine: Vec<&ResultRecord> =
            records.iter().filter(|r| r.strategy == t.strategy && r.n_ue == t.n_ue && r.seed == t.seed).collect();
        assert_eq!(mine.iter().filter(|r| r.phase == Phase::Eval && r.is_final).count(), 1);
        let train: Vec<_> = mine.iter().filter(|r| r.phase == Phase::Train).collect();
        if cfg.strategy(&t.strategy).unwrap().kind.is_learned() {
            // 40 episodes in blocks of 7: five full blocks and a tail of 5
            assert_eq!(train.len(), 6);
            assert_eq!(train.iter().map(|r| r.block.unwrap().episodes).sum::<usize>(), 40);
            assert_eq!(train.last().unwrap().index, 39);
        } else {
            assert!(train.is_empty());
        }
    }

    let a = export_tables(&records, 20);
    let b = export_tables(&load_records(dir.path()).unwrap(), 20);
    assert_eq!(a, b);
    for p in convergence_rows(&records, 20) {
        let s = p.summary;
        assert!(s.min <= s.mean && s.mean <= s.max);
        assert_eq!(s.n, 2);
    }
    let report = ee_report(&records);
    assert_eq!(report.lines().count(), 3 + cfg.strategies.len());
}
