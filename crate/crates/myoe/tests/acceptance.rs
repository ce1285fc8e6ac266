//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! The analytic criteria (1-4, 8) fail the target when they fail. The
//! training experiments (5-7) always print their measured numbers and a
//! verdict; a FAIL there is reported, not raised, because it measures how
//! well the agent learns at this compute scale rather than whether the code
//! is correct. `MYOE_ACCEPTANCE=quick` skips the training experiments.

use std::fs;
use std::io::Write;
use std::time::Instant;

use myoe::checkpoint::{self, Dtype};
use myoe::log::{FINAL_CHECKPOINT, LOG_FILE};
use myoe::run::{evaluate_checkpoint, restore_agent, run_parallel, thread_cap, train_run, EvalOptions};
use myoe::selfcheck::{self, Check};
use myoe_core::agent::AgentVariant;
use myoe_core::config::RunConfig;
use myoe_core::env::make_env;
use myoe_core::harness::{format_pm, generate_run_demos, mean_std, train, EvalSummary, MemorySink};

struct Verdict {
    id: usize,
    name: &'static str,
    passed: Option<bool>,
    fatal: bool,
    detail: String,
}

fn say(line: &str) {
    let mut e = std::io::stderr();
    let _ = writeln!(e, "{line}");
}

fn suite(id: usize, name: &'static str, checks: Vec<Check>, started: Instant) -> Verdict {
    for c in checks.iter().filter(|c| !c.passed) {
        say(&format!("    {}", c.line()));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    Verdict {
        id,
        name,
        passed: Some(failed == 0),
        fatal: true,
        detail: format!("{} checks, {failed} failed, {:.1}s", checks.len(), started.elapsed().as_secs_f64()),
    }
}

/// Train one config per seed in memory and return the final summaries.
fn trials(config: &RunConfig, seeds: &[u64]) -> Vec<EvalSummary> {
    let t = Instant::now();
    let out = run_parallel(seeds.to_vec(), thread_cap(), |&seed| {
        let mut c = config.clone();
        c.seed = seed;
        let mut sink = MemorySink::default();
        let demos = generate_run_demos(&c).expect("demonstrations");
        train(&c, demos, &mut sink).expect("training run").summary
    });
    let srs: Vec<f64> = out.iter().map(|s| s.success_rate).collect();
    say(&format!(
        "    {} on {} ({} steps, seeds {seeds:?}): per-seed SR {srs:?}, {:.0}s",
        config.agent.tag(),
        config.env.name,
        config.train.total_steps,
        t.elapsed().as_secs_f64()
    ));
    out
}

fn mean_of(xs: &[EvalSummary], f: fn(&EvalSummary) -> f64) -> (f64, f64) {
    mean_std(&xs.iter().map(f).collect::<Vec<_>>())
}

const SEEDS: [u64; 4] = [1, 2, 3, 4];

fn case_two_behavior() -> Verdict {
    let c = RunConfig::preset("point-reach-shake").unwrap();
    let gamma = c.behavior.gamma;
    let demos = generate_run_demos(&c).unwrap();
    // Suboptimality of the demonstrations against a noiseless expert from
    // the same start and goal.
    let spec = c.env.spec().unwrap();
    let mut env = make_env(spec, 0).unwrap();
    let mut ratio = Vec::new();
    for d in &demos {
        env.reset();
        env.place_agent(&d.observations[0][..2]);
        env.place_goal(&d.goal);
        ratio.push(d.steps() as f64 / env.optimal_steps().unwrap() as f64);
    }
    let demo_len = demos.iter().map(|d| d.steps() as f64).sum::<f64>() / demos.len() as f64;
    let opt_len = demos.iter().zip(&ratio).map(|(d, r)| d.steps() as f64 / r).sum::<f64>() / demos.len() as f64;
    let demo_return = demos.iter().map(|d| d.discounted_return(gamma)).sum::<f64>() / demos.len() as f64;
    let suboptimal = demo_len >= 1.5 * opt_len;
    let runs = trials(&c, &SEEDS);
    let (ret, sd) = mean_of(&runs, |s| s.mean_discounted_return);
    Verdict {
        id: 5,
        name: "case-2 behavior: MYOE beats shaken demonstrations",
        passed: Some(suboptimal && ret > demo_return),
        fatal: false,
        detail: format!(
            "demo length {demo_len:.1} vs optimal {opt_len:.1} ({:.2}x); success-weighted return MYOE {} vs demos {demo_return:.3}; MYOE SR {}",
            demo_len / opt_len,
            format_pm(ret, sd),
            format_pm(mean_of(&runs, |s| s.success_rate).0, mean_of(&runs, |s| s.success_rate).1),
        ),
    }
}

fn cascading_errors() -> Verdict {
    let base = RunConfig::preset("point-reach-noisy").unwrap();
    let sr = |agent: AgentVariant| {
        let mut c = base.clone();
        c.agent = agent;
        mean_of(&trials(&c, &SEEDS), |s| s.success_rate)
    };
    let (myoe, mbc, rnn) = (sr(AgentVariant::Myoe), sr(AgentVariant::Mbc), sr(AgentVariant::MbcRnn));
    Verdict {
        id: 6,
        name: "cascading errors: point-reach, action noise 0.1, 5 demos",
        passed: Some(myoe.0 >= 0.8 && myoe.0 - mbc.0 >= 0.2 && myoe.0 - rnn.0 >= 0.2),
        fatal: false,
        detail: format!(
            "{} steps, SR MYOE {}, MBC {}, MBC-RNN {} (need MYOE ≥ 0.80 and margins ≥ 0.20: {:+.2}, {:+.2})",
            base.train.total_steps,
            format_pm(myoe.0, myoe.1),
            format_pm(mbc.0, mbc.1),
            format_pm(rnn.0, rnn.1),
            myoe.0 - mbc.0,
            myoe.0 - rnn.0
        ),
    }
}

fn mixture_exercise() -> Verdict {
    let m4 = trials(&RunConfig::preset("four-rooms").unwrap(), &SEEDS);
    let m1 = trials(&RunConfig::preset("four-rooms-m1").unwrap(), &SEEDS);
    let ent = |xs: &[EvalSummary]| xs.iter().map(|s| s.mean_mixture_entropy.unwrap_or(f64::NAN)).sum::<f64>() / xs.len() as f64;
    let (h4, h1) = (ent(&m4), ent(&m1));
    let (sr4, sr1) = (mean_of(&m4, |s| s.success_rate), mean_of(&m1, |s| s.success_rate));
    Verdict {
        id: 7,
        name: "mixture exercise: four-rooms M = 4 vs M = 1",
        passed: Some(h4 > h1 && h1 == 0.0 && sr4.0 >= sr1.0),
        fatal: false,
        detail: format!(
            "mixture entropy {h4:.3} vs {h1:.3} nats; SR M=4 {} vs M=1 {}",
            format_pm(sr4.0, sr4.1),
            format_pm(sr1.0, sr1.1)
        ),
    }
}

fn determinism() -> Verdict {
    let t = Instant::now();
    let mut c = RunConfig::preset("point-reach-noisy").unwrap();
    c.train.total_steps = 8_000;
    c.train.log_every = 1;
    c.seed = 17;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        train_run(&c, d.path(), false).unwrap();
    }
    let head = |d: &tempfile::TempDir| -> Vec<String> {
        fs::read_to_string(d.path().join(LOG_FILE)).unwrap().lines().take(1000).map(str::to_string).collect()
    };
    let (a, b) = (head(&dirs[0]), head(&dirs[1]));
    let logs_equal = a.len() == 1000 && a == b;

    let path = dirs[0].path().join(FINAL_CHECKPOINT);
    let bytes = fs::read(&path).unwrap();
    let ckpt = checkpoint::load(&path).unwrap();
    let reencoded = checkpoint::encode(ckpt.step, &ckpt.config, &ckpt.params, Dtype::F64).unwrap() == bytes;
    evaluate_checkpoint(&path, 5, 3, &EvalOptions::default()).unwrap();
    let restored = restore_agent(&checkpoint::load(&path).unwrap()).unwrap();
    let after_eval = checkpoint::encode(ckpt.step, &ckpt.config, restored.params(), Dtype::F64).unwrap() == bytes
        && fs::read(&path).unwrap() == bytes;
    Verdict {
        id: 8,
        name: "determinism and checkpoint round trip",
        passed: Some(logs_equal && reencoded && after_eval),
        fatal: true,
        detail: format!(
            "first {} log records identical: {logs_equal}; checkpoint re-encodes bit-exact: {reencoded}; unchanged after eval: {after_eval}; {:.0}s",
            a.len(),
            t.elapsed().as_secs_f64()
        ),
    }
}

fn skipped(id: usize, name: &'static str) -> Verdict {
    Verdict { id, name, passed: None, fatal: false, detail: "skipped (MYOE_ACCEPTANCE=quick)".into() }
}

fn main() {
    let quick = std::env::var("MYOE_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let mut verdicts = Vec::new();
    let mut push = |v: Verdict| {
        let tag = match v.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        say(&format!("{tag} [{}] {}: {}", v.id, v.name, v.detail));
        verdicts.push(v);
    };

    let t = Instant::now();
    push(suite(1, "oracle equivalence", selfcheck::oracle_suite(1000), t));
    let t = Instant::now();
    push(suite(2, "gradient suite and stop-gradient paths", selfcheck::gradient_suite(), t));
    let t = Instant::now();
    push(suite(3, "mask semantics", selfcheck::mask_suite(), t));
    let t = Instant::now();
    push(suite(4, "regret algebra and sign cases", selfcheck::lemma_suite(10_000), t));
    if quick {
        push(skipped(5, "case-2 behavior"));
        push(skipped(6, "cascading errors"));
        push(skipped(7, "mixture exercise"));
    } else {
        push(case_two_behavior());
        push(cascading_errors());
        push(mixture_exercise());
    }
    push(determinism());

    let fatal: Vec<usize> = verdicts.iter().filter(|v| v.fatal && v.passed == Some(false)).map(|v| v.id).collect();
    let reported: Vec<usize> = verdicts.iter().filter(|v| !v.fatal && v.passed == Some(false)).map(|v| v.id).collect();
    say(&format!(
        "acceptance: {} passed, failing analytic criteria {fatal:?}, experiments below target {reported:?}",
        verdicts.iter().filter(|v| v.passed == Some(true)).count()
    ));
    if !fatal.is_empty() {
        std::process::exit(1);
    }
}
