use std::fs;

use myoe::checkpoint::{self, Dtype};
use myoe::log::{read_log, FINAL_CHECKPOINT, LOG_FILE};
use myoe::run::{
    evaluate_checkpoint, load_config, restore_agent, run_parallel, train_run, train_trials, EvalOptions, CONFIG_FILE,
    DEMO_FILE,
};
use myoe_core::agent::AgentVariant;
use myoe_core::config::RunConfig;
use myoe_core::harness::RecordKind;

fn smoke(agent: AgentVariant) -> RunConfig {
    let mut c = RunConfig::preset("smoke").unwrap();
    c.agent = agent;
    c.seed = 5;
    c
}

#[test]
fn zero_step_run_logs_header_and_demos_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = smoke(AgentVariant::Myoe);
    c.train.total_steps = 0;
    train_run(&c, dir.path(), false).unwrap();
    let log = read_log(&dir.path().join(LOG_FILE)).unwrap();
    assert_eq!(log.len(), 1 + c.demos.episodes);
    assert_eq!(log[0].kind, RecordKind::Header);
    assert!(log[1..].iter().all(|r| r.kind == RecordKind::DemoEpisode));
    assert!(dir.path().join(DEMO_FILE).exists());
    assert_eq!(load_config(&dir.path().join(CONFIG_FILE)).unwrap().seed, 5);
}

#[test]
fn identical_runs_write_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let c = smoke(AgentVariant::Myoe);
    train_run(&c, a.path(), false).unwrap();
    train_run(&c, b.path(), false).unwrap();
    for f in [LOG_FILE, DEMO_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    // Checkpoints embed their run directory; everything else must match.
    let (ca, mut cb) =
        (checkpoint::load(&a.path().join(FINAL_CHECKPOINT)).unwrap(), checkpoint::load(&b.path().join(FINAL_CHECKPOINT)).unwrap());
    cb.config.output_dir = ca.config.output_dir.clone();
    assert_eq!(ca, cb);
    let log = read_log(&a.path().join(LOG_FILE)).unwrap();
    assert!(log.iter().any(|r| r.kind == RecordKind::TrainStep));
    assert!(log.iter().any(|r| r.kind == RecordKind::TrainEpisode));
    assert_eq!(log.last().unwrap().kind, RecordKind::Summary);
}

#[test]
fn evaluation_leaves_checkpoints_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let c = smoke(AgentVariant::Mbc);
    train_run(&c, dir.path(), false).unwrap();
    let path = dir.path().join(FINAL_CHECKPOINT);
    let before = fs::read(&path).unwrap();
    let log = dir.path().join("eval.ndjson");
    let opts = EvalOptions { env: None, log: Some(log.clone()) };
    let first = evaluate_checkpoint(&path, 4, 11, &opts).unwrap();
    assert_eq!(evaluate_checkpoint(&path, 4, 11, &EvalOptions::default()).unwrap(), first);
    assert_eq!(read_log(&log).unwrap().len(), 4);

    let ckpt = checkpoint::load(&path).unwrap();
    let agent = restore_agent(&ckpt).unwrap();
    assert_eq!(checkpoint::encode(ckpt.step, &ckpt.config, agent.params(), Dtype::F64).unwrap(), before);
    assert_eq!(fs::read(&path).unwrap(), before);
}

#[test]
fn evaluating_on_an_incompatible_env_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = smoke(AgentVariant::Mbc);
    c.train.total_steps = 0;
    train_run(&c, dir.path(), false).unwrap();
    let opts = EvalOptions { env: Some("four-rooms".into()), log: None };
    let e = evaluate_checkpoint(&dir.path().join(FINAL_CHECKPOINT), 1, 0, &opts).unwrap_err();
    assert!(matches!(e, myoe_core::Error::Config(_)), "{e}");
}

#[test]
fn trials_get_one_directory_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = smoke(AgentVariant::Mbc);
    c.train.total_steps = 40;
    let out = train_trials(&c, &[1, 2], dir.path(), false).unwrap();
    assert_eq!(out.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![1, 2]);
    for t in &out {
        assert_eq!(t.dir, dir.path().join(format!("seed-{}", t.seed)));
        assert!(t.dir.join(FINAL_CHECKPOINT).exists());
    }
}

#[test]
fn parallel_jobs_keep_their_order() {
    let out = run_parallel((0..20u64).collect(), 3, |&x| x * x);
    assert_eq!(out, (0..20u64).map(|x| x * x).collect::<Vec<_>>());
    assert!(run_parallel(Vec::<u8>::new(), 4, |&x| x).is_empty());
}
