use std::path::Path;
use std::process::{Command, Output};

use myoe::checkpoint::{self, Dtype};
use myoe_core::config::RunConfig;
use myoe_core::harness::build_agent;

fn myoe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_myoe")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn selfcheck_passes() {
    let out = myoe(&["selfcheck"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 20);
    assert!(!text.contains("FAIL"));
}

#[test]
fn demo_gen_writes_ndjson() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("d.ndjson");
    let out = myoe(&["demo-gen", "--env", "four-rooms", "--episodes", "3", "--perturb", "shake", "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let (header, eps) = myoe::demos::load_demos(&out_path).unwrap();
    assert_eq!(eps.len(), 3);
    assert!(matches!(header.perturbation, myoe_core::env::Perturbation::Shake { .. }));
}

#[test]
fn configuration_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = myoe(&["demo-gen", "--env", "atlantis", "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = myoe(&["demo-gen", "--env", "point-reach", "--perturb", "wobble", "--out", p(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nbogus_key = true\n").unwrap();
    let out = myoe(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
    assert_eq!(myoe(&["train", "--preset", "smoke", "--agent", "dqn"]).status.code(), Some(2));
    assert_eq!(myoe(&["train"]).status.code(), Some(2));
}

#[test]
fn non_finite_parameters_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = RunConfig::preset("smoke").unwrap();
    let mut agent = build_agent(&c).unwrap();
    let params = agent.params_mut();
    let id = params.ids().next().unwrap();
    params.data_mut(id).iter_mut().for_each(|v| *v = f64::NAN);
    let path = dir.path().join("nan.myoe");
    std::fs::write(&path, checkpoint::encode(0, &c, agent.params(), Dtype::F64).unwrap()).unwrap();
    let out = myoe(&["eval", "--checkpoint", p(&path), "--episodes", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = myoe(&["train", "--preset", "smoke", "--agent", "mbc", "--seed", "2", "--steps", "100", "--out", p(&run)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains(" ± "));
    let ckpt = run.join("final.myoe");
    let out = myoe(&["eval", "--checkpoint", p(&ckpt), "--episodes", "3", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("over 3 episodes"));

    let out = myoe(&["preset", "four-rooms"]);
    let cfg: RunConfig = toml::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(cfg, RunConfig::preset("four-rooms").unwrap());
}
