//! Numerical self-checks: closed-form and brute-force oracles, finite
//! difference gradient checks of every loss term, and the mask and regret
//! contracts. Shared by `myoe selfcheck` and the acceptance tests.

use myoe_core::behavior::{
    ema_update, gae, imagine_rollout, policy_loss, policy_loss_with, preference_regret_reward, td_errors,
    value_loss_vars, value_loss_with, BehaviorHyper, BehaviorLearner, ImaginedTrajectory, StartBatch,
};
use myoe_core::env::{generate_demonstrations, make_env, EnvSpec, Perturbation};
use myoe_core::numerics::gradcheck::grad_check;
use myoe_core::numerics::{
    entropy_diag_gaussian, kl_diag_gaussian, softmax, DiagGaussian, Matrix, Owner, OwnerMask, ParamId, ParameterSet,
    Tape, Var,
};
use myoe_core::qmop::{ModelDims, WorldModel, WorldModelConfig, WorldModelLoss};
use myoe_core::replay::{EpisodeRecord, SequenceBatch};
use myoe_core::rng::{stream, Stream};
use rand::Rng;

/// Finite-difference step for the sixth-order stencil.
pub const GRAD_EPS: f64 = 1e-2;
pub const GRAD_TOL: f64 = 1e-6;
pub const EXACT_TOL: f64 = 1e-9;
pub const RECURSION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn gaussian(rng: &mut Stream, d: usize) -> DiagGaussian {
    let m = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let l = (0..d).map(|_| rng.random_range(-1.5..1.0)).collect();
    DiagGaussian::new(m, l).expect("finite draws")
}

/// Worst deviation over `n` draws of `(got, want)`.
fn sweep(n: usize, tol: f64, mut draw: impl FnMut(usize) -> Vec<(f64, f64)>) -> (bool, f64) {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..n {
        for (got, want) in draw(i) {
            worst = worst.max((got - want).abs());
            ok &= close(got, want, tol);
        }
    }
    (ok, worst)
}

fn report(name: &str, n: usize, (ok, worst): (bool, f64)) -> Check {
    Check::new(name, ok, format!("{n} instances, max abs deviation {worst:.3e}"))
}

/// Oracle comparisons on `n` random small instances per operation.
pub fn oracle_suite(n: usize) -> Vec<Check> {
    let mut rng = stream(2024, "oracles");
    let mut out = Vec::new();

    out.push(report(
        "KL divergence vs covariance-form oracle",
        n,
        sweep(n, EXACT_TOL, |i| {
            let d = 1 + i % 6;
            let (q, p) = (gaussian(&mut rng, d), gaussian(&mut rng, d));
            let vq: Vec<f64> = q.std().iter().map(|s| s * s).collect();
            let vp: Vec<f64> = p.std().iter().map(|s| s * s).collect();
            let trace: f64 = vq.iter().zip(&vp).map(|(a, b)| a / b).sum();
            let maha: f64 = (0..d).map(|k| (p.mean()[k] - q.mean()[k]).powi(2) / vp[k]).sum();
            let logdet = vp.iter().product::<f64>().ln() - vq.iter().product::<f64>().ln();
            let want = 0.5 * (trace + maha - d as f64 + logdet);
            vec![(kl_diag_gaussian(&q, &p).unwrap(), want), (kl_diag_gaussian(&q, &q).unwrap(), 0.0)]
        }),
    ));

    out.push(report(
        "Gaussian entropy vs log-determinant oracle",
        n,
        sweep(n, EXACT_TOL, |i| {
            let g = gaussian(&mut rng, 1 + i % 6);
            let det: f64 = g.std().iter().map(|s| s * s).product();
            let k = g.dim() as f64;
            vec![(entropy_diag_gaussian(&g), 0.5 * (k * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + det.ln()))]
        }),
    ));

    out.push(report(
        "softmax vs direct exponentials",
        n,
        sweep(n, EXACT_TOL, |i| {
            let k = 1 + i % 7;
            let z: Vec<f64> = (0..k).map(|_| rng.random_range(-8.0..8.0)).collect();
            let e: Vec<f64> = z.iter().map(|x| x.exp()).collect();
            let total: f64 = e.iter().sum();
            let p = softmax(&z).unwrap();
            let mut pairs: Vec<(f64, f64)> = p.iter().zip(&e).map(|(a, b)| (*a, b / total)).collect();
            pairs.push((p.iter().sum(), 1.0));
            let shifted: Vec<f64> = z.iter().map(|x| x + 300.0).collect();
            pairs.extend(softmax(&shifted).unwrap().into_iter().zip(p).map(|(a, b)| (a, b)));
            pairs
        }),
    ));

    out.push(report(
        "TD errors vs elementwise formula",
        n,
        sweep(n, EXACT_TOL, |i| {
            let h = 1 + i % 12;
            let g = if i % 10 == 0 { 0.0 } else { rng.random_range(0.0..1.0) };
            let r: Vec<f64> = (0..h).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..=h).map(|_| rng.random_range(-2.0..2.0)).collect();
            let d = td_errors(&r, &v, g).unwrap();
            (0..h).map(|t| (d[t], r[t] + g * v[t + 1] - v[t])).collect()
        }),
    ));

    out.push(report(
        "GAE vs explicit double sum",
        n,
        sweep(n, RECURSION_TOL, |i| {
            let h = 1 + i % 12;
            let (g, l) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let d: Vec<f64> = (0..h).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..h).map(|_| rng.random_range(-2.0..2.0)).collect();
            let out = gae(&d, &v, g, l).unwrap();
            let mut pairs = Vec::new();
            for t in 0..h {
                let s: f64 = (t..h).map(|k| (g * l).powi((k - t) as i32) * d[k]).sum();
                pairs.push((out.advantages[t], s));
                pairs.push((out.targets[t], s + v[t]));
            }
            // λ = γ = 1, v ≡ 0: suffix sums of the rewards.
            let zeros = vec![0.0; h + 1];
            let mc = gae(&td_errors(&d, &zeros, 1.0).unwrap(), &zeros[..h], 1.0, 1.0).unwrap();
            pairs.extend((0..h).map(|t| (mc.advantages[t], d[t..].iter().sum())));
            pairs
        }),
    ));

    out.push(report(
        "preference-regret reward vs 2·r_o − r_p + α·H",
        n,
        sweep(n, EXACT_TOL, |_| {
            let (ro, rp, e, a) = draw_regret_inputs(&mut rng);
            vec![(preference_regret_reward(ro, rp, e, a), 2.0 * ro - rp + a * e)]
        }),
    ));
    out
}

/// Dyadic rationals on a coarse grid: every sum and product below is exact.
fn draw_regret_inputs(rng: &mut Stream) -> (f64, f64, f64, f64) {
    let grid = |rng: &mut Stream, lo: i64, hi: i64| rng.random_range(lo..=hi) as f64 / 1024.0;
    (grid(rng, -4096, 4096), grid(rng, -4096, 4096), grid(rng, 0, 8192), grid(rng, 0, 64))
}

/// Exact regret algebra and the two sign cases on `n` sampled inputs.
pub fn lemma_suite(n: usize) -> Vec<Check> {
    let mut rng = stream(7, "lemma");
    let (mut exact, mut case1, mut case2, mut aligned, mut slopes) = (0, 0, 0, 0, 0);
    let (mut n1, mut n2) = (0, 0);
    for _ in 0..n {
        let (ro, rp, e, a) = draw_regret_inputs(&mut rng);
        let r = preference_regret_reward(ro, rp, e, a);
        exact += (r == 2.0 * ro - rp + a * e) as usize;
        aligned += (preference_regret_reward(ro, ro, e, a) == ro + a * e) as usize;
        let step = 1.0 / 64.0;
        let up_p = preference_regret_reward(ro, rp + step, e, a);
        let up_o = preference_regret_reward(ro + step, rp, e, a);
        slopes += (r - up_p == step && up_o - r == 2.0 * step) as usize;
        let regret = preference_regret_reward(ro, rp, 0.0, 0.0) - ro;
        if rp > ro {
            n1 += 1;
            case1 += (regret < 0.0) as usize;
        } else if rp < ro {
            n2 += 1;
            case2 += (regret > 0.0) as usize;
        }
    }
    vec![
        Check::new("R = 2·r_o − r_p + α·H exactly", exact == n, format!("{exact}/{n} exact")),
        Check::new("∂R/∂r_p = −1, ∂R/∂r_o = +2", slopes == n, format!("{slopes}/{n} exact unit steps")),
        Check::new("r_p = r_o leaves r_o + α·H", aligned == n, format!("{aligned}/{n} exact")),
        Check::new("case 1: r_p > r_o gives negative regret", case1 == n1 && n1 > 0, format!("{case1}/{n1}")),
        Check::new("case 2: r_p < r_o gives positive regret", case2 == n2 && n2 > 0, format!("{case2}/{n2}")),
    ]
}

struct Fixture {
    wm: WorldModel,
    learner: BehaviorLearner,
    params: ParameterSet<f64>,
}

fn tiny_config(free_bits: f64) -> WorldModelConfig {
    WorldModelConfig {
        deter_dim: 3,
        stoch_dim: 2,
        query_dim: 2,
        units: 4,
        components: 2,
        free_bits,
        mix_coef: 0.3,
        mix_reg: 0.1,
        obs_scale: 1.0,
    }
}

fn fixture(config: WorldModelConfig, hyper: BehaviorHyper, seed: u64) -> Fixture {
    let dims = ModelDims { obs_dim: 6, action_dim: 2, goal_dim: 2 };
    let mut params = ParameterSet::new();
    let mut rng = stream(seed, "selfcheck-init");
    let wm = WorldModel::new(config, dims, &mut params, &mut rng).expect("valid toy model");
    let learner =
        BehaviorLearner::new(hyper, wm.feature_dim(), 2, (-1.0, 1.0), &mut params, &mut rng).expect("valid toy learner");
    // Nonzero biases everywhere so no term starts at a symmetric point.
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        if params.entry(id).name.ends_with(".b") {
            for v in params.data_mut(id) {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
    ema_update(&mut params, 1.0).expect("paired critic tables");
    Fixture { wm, learner, params }
}

fn toy_episodes() -> (EpisodeRecord, EpisodeRecord) {
    let mut env = make_env(EnvSpec::named("point-reach").expect("registered"), 11).expect("valid env");
    let demo = generate_demonstrations(&mut env, 1, Perturbation::None, &mut stream(11, "d")).expect("expert succeeds");
    let obs = env.reset();
    let mut other = EpisodeRecord::start(env.spec(), 11, &obs, false);
    for k in 0..4 {
        let a = [(k as f64).cos(), -0.4];
        let r = env.step(&a).expect("episode running");
        other.push(&r.observation, &a, r.reward, r.done);
    }
    (demo.into_iter().next().expect("one demo"), other)
}

fn toy_batch(len: usize) -> SequenceBatch {
    let (demo, other) = toy_episodes();
    SequenceBatch::from_windows(&[(&demo, 0, 0), (&other, 0, 1)], len).expect("valid windows")
}

fn upstream_of_target(name: &str) -> bool {
    ["wm.encoder", "wm.input", "wm.gru", "wm.repr_post"].iter().any(|p| name.starts_with(p))
}

fn is_preference(name: &str) -> bool {
    ["wm.pref_post", "wm.pref_prior", "wm.goal_vec", "wm.goal_enc", "wm.gate"].iter().any(|p| name.starts_with(p))
}

fn owned(params: &ParameterSet<f64>, owner: Owner) -> Vec<ParamId> {
    params.iter().filter(|(_, e)| e.owner == owner).map(|(id, _)| id).collect()
}

fn grad_line(name: &str, rel: f64, worst: &str) -> Check {
    Check::new(name, rel <= GRAD_TOL, format!("max rel err {rel:.2e} (worst {worst})"))
}

type Pick = fn(&WorldModelLoss, &mut Tape<f64>) -> Option<Var>;

fn world_model_checks(out: &mut Vec<Check>) {
    let f = fixture(tiny_config(0.0), BehaviorHyper::default(), 1);
    let b = toy_batch(2);
    let world = owned(&f.params, Owner::World);
    // Central differences also move the stop-gradient target of the distance
    // term, so it is checked on the parameters downstream of that target.
    let downstream: Vec<ParamId> =
        world.iter().copied().filter(|&id| !upstream_of_target(&f.params.entry(id).name)).collect();
    let picks: [(&str, Pick, &[ParamId]); 7] = [
        ("F_o observation likelihood", |o, _| Some(o.terms.f_o), &world),
        ("F_o_kl representation KL", |o, _| Some(o.terms.f_o_kl), &world),
        ("F_r reward likelihood", |o, _| Some(o.terms.f_r), &world),
        ("F_p_kl preference KL", |o, _| o.terms.f_p_kl, &world),
        ("m-masked preference terms", |o, t| Some(t.add(o.terms.f_p_kl?, o.terms.f_dist?)), &downstream),
        ("F_dist posterior distance", |o, _| o.terms.f_dist, &downstream),
        ("mixture entropy objective", |o, _| o.terms.mix_entropy, &world),
    ];
    for (label, pick, which) in picks {
        let mut tape = Tape::new(OwnerMask::all());
        let o = f.wm.world_model_loss(&mut tape, &f.params, &b, &mut stream(5, "noise")).expect("finite toy loss");
        let Some(loss) = pick(&o, &mut tape) else {
            out.push(Check::new(label, false, "term missing from the loss".into()));
            continue;
        };
        let grads = tape.gradients(loss).expect("finite gradients");
        let rep = grad_check(&f.params, &grads, Some(which), GRAD_EPS, 24, |p| {
            let mut tape = Tape::frozen();
            let o = f.wm.world_model_loss(&mut tape, p, &b, &mut stream(5, "noise")).expect("finite toy loss");
            let v = pick(&o, &mut tape).expect("term present");
            tape.scalar(v)
        });
        let (w, e) = rep.worst().cloned().unwrap_or_default();
        out.push(grad_line(label, e, &w));
    }

    let fb = fixture(tiny_config(0.02), BehaviorHyper::default(), 4);
    let b3 = toy_batch(3);
    let total_without_dist = |o: &WorldModelLoss, t: &mut Tape<f64>| t.sub(o.total, o.terms.f_dist.expect("masked term"));
    let mut tape = Tape::new(OwnerMask::all());
    let o = fb.wm.world_model_loss(&mut tape, &fb.params, &b3, &mut stream(5, "noise")).expect("finite toy loss");
    let loss = total_without_dist(&o, &mut tape);
    let grads = tape.gradients(loss).expect("finite gradients");
    let rep = grad_check(&fb.params, &grads, None, GRAD_EPS, 16, |p| {
        let mut tape = Tape::frozen();
        let o = fb.wm.world_model_loss(&mut tape, p, &b3, &mut stream(5, "noise")).expect("finite toy loss");
        let v = total_without_dist(&o, &mut tape);
        tape.scalar(v)
    });
    let (w, e) = rep.worst().cloned().unwrap_or_default();
    out.push(grad_line("world-model total with free-bits floor active", e, &w));

    // One-sided target: the distance term sends nothing into the
    // representation posterior on a single step.
    let b1 = toy_batch(1);
    let mut tape = Tape::new(OwnerMask::all());
    let o = f.wm.world_model_loss(&mut tape, &f.params, &b1, &mut stream(2, "n")).expect("finite toy loss");
    let grads = tape.gradients(o.terms.f_dist.expect("masked term")).expect("finite gradients");
    let leaked: Vec<String> = f
        .params
        .iter()
        .filter(|(id, e)| e.name.starts_with("wm.repr_post") && grads.max_abs(*id) != 0.0)
        .map(|(_, e)| e.name.clone())
        .collect();
    let reaches = f.params.iter().any(|(id, e)| e.name.starts_with("wm.pref_post") && grads.max_abs(id) > 0.0);
    out.push(Check::new(
        "stop-gradient: F_dist target",
        leaked.is_empty() && reaches,
        if leaked.is_empty() { "zero gradient into the representation posterior".into() } else { format!("leaks into {leaked:?}") },
    ));
}

fn toy_rollout(f: &Fixture, seed: u64) -> ImaginedTrajectory {
    let b = toy_batch(2);
    let mut tape = Tape::frozen();
    let o = f.wm.world_model_loss(&mut tape, &f.params, &b, &mut stream(seed, "filter")).expect("finite toy loss");
    let start = StartBatch::from_observed(&tape, &o, &b).expect("valid start rows");
    let mut t = imagine_rollout(&f.wm, &f.learner.actor, &f.learner.critic, &f.params, &start, &f.learner.hyper, &mut stream(seed, "imagine"))
        .expect("finite rollout");
    t.expert.mask = (0..t.rows).map(|r| (r % 2) as f64).collect();
    t
}

fn column(m: &Matrix<f64>, c: usize) -> Matrix<f64> {
    Matrix::from_vec(m.rows, 1, (0..m.rows).map(|r| m.at(r, c)).collect())
}

fn behavior_checks(out: &mut Vec<Check>) {
    let base = BehaviorHyper { horizon: 3, units: 5, alpha_ent: 0.05, ..Default::default() };
    let f = fixture(tiny_config(0.0), base.clone(), 8);
    let t = toy_rollout(&f, 3);
    let policy = owned(&f.params, Owner::Policy);
    let value = owned(&f.params, Owner::Value);

    let variants = [
        ("policy L_adv (advantage term)", 0.0, 0.0),
        ("policy L_adv + L_ac (entropy term)", 1.0, 0.0),
        ("policy L_adv + L_exp (expert term)", 0.0, 1.0),
        ("policy total loss", base.alpha_ent, base.beta_expert),
    ];
    for (label, alpha, beta) in variants {
        let h = BehaviorHyper { alpha_ent: alpha, beta_expert: beta, ..base.clone() };
        let mut tape = Tape::new(OwnerMask::only(Owner::Policy));
        let pl = policy_loss(&mut tape, &f.learner.actor, &f.params, &t, &h).expect("finite policy loss");
        let grads = tape.gradients(pl.total).expect("finite gradients");
        let rep = grad_check(&f.params, &grads, Some(&policy), GRAD_EPS, 30, |p| {
            let mut tape = Tape::frozen();
            let pl = policy_loss(&mut tape, &f.learner.actor, p, &t, &h).expect("finite policy loss");
            tape.scalar(pl.total)
        });
        let (w, e) = rep.worst().cloned().unwrap_or_default();
        out.push(grad_line(label, e, &w));
    }

    for (label, alpha_val) in [("value regression term", 0.0), ("value loss with target regularizer", 1.0)] {
        let mut tape = Tape::new(OwnerMask::only(Owner::Value));
        let vl = value_loss_vars(&mut tape, &f.learner.critic, &f.params, &t, alpha_val);
        let grads = tape.gradients(vl).expect("finite gradients");
        let rep = grad_check(&f.params, &grads, Some(&value), GRAD_EPS, 30, |p| {
            let mut tape = Tape::frozen();
            let vl = value_loss_vars(&mut tape, &f.learner.critic, p, &t, alpha_val);
            tape.scalar(vl)
        });
        let (w, e) = rep.worst().cloned().unwrap_or_default();
        out.push(grad_line(label, e, &w));
    }

    let h = &f.learner.hyper;
    let mut tape = Tape::new(OwnerMask::all());
    let g: Vec<Var> = (0..t.horizon).map(|k| tape.watch(column(&t.targets, k))).collect();
    let vt: Vec<Var> = (0..t.horizon).map(|k| tape.watch(column(&t.target_values, k))).collect();
    let vl = value_loss_with(&mut tape, &f.learner.critic, &f.params, &t, &g, &vt, h.alpha_val);
    let grads = tape.gradients(vl).expect("finite gradients");
    let zero_in = g.iter().chain(&vt).all(|v| tape.gradient_wrt(vl, *v).expect("watched").data.iter().all(|&x| x == 0.0));
    let only_value = grads.is_zero_for(&f.params, OwnerMask::only(Owner::World).with(Owner::Policy).with(Owner::TargetValue));
    out.push(Check::new(
        "stop-gradient: value targets and target network",
        zero_in && only_value,
        format!("zero gradient into G and v′: {zero_in}; only the value network moves: {only_value}"),
    ));

    let mut tape = Tape::new(OwnerMask::all());
    let a: Vec<Var> = (0..t.horizon).map(|k| tape.watch(column(&t.advantages, k))).collect();
    let pl = policy_loss_with(&mut tape, &f.learner.actor, &f.params, &t, &a, h).expect("finite policy loss");
    let grads = tape.gradients(pl.total).expect("finite gradients");
    let zero_in = a.iter().all(|v| tape.gradient_wrt(pl.total, *v).expect("watched").data.iter().all(|&x| x == 0.0));
    let only_policy = grads.is_zero_for(&f.params, OwnerMask::only(Owner::World).with(Owner::Value).with(Owner::TargetValue));
    out.push(Check::new(
        "stop-gradient: advantages in the policy loss",
        zero_in && only_policy,
        format!("zero gradient into A: {zero_in}; only the policy moves: {only_policy}"),
    ));
}

/// Finite-difference checks of every loss term plus the stop-gradient paths.
pub fn gradient_suite() -> Vec<Check> {
    let mut out = Vec::new();
    world_model_checks(&mut out);
    behavior_checks(&mut out);
    out
}

/// The success mask silences preference learning; no expert flag, no
/// expert-matching loss.
pub fn mask_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let f = fixture(tiny_config(0.0), BehaviorHyper { horizon: 3, units: 5, ..Default::default() }, 3);
    let mut b = toy_batch(4);
    b.success.iter_mut().for_each(|m| *m = 0.0);
    b.expert.iter_mut().for_each(|m| *m = 0.0);
    let mut tape = Tape::new(OwnerMask::all());
    let o = f.wm.world_model_loss(&mut tape, &f.params, &b, &mut stream(1, "n")).expect("finite toy loss");
    let zero_terms = o.breakdown.f_p_kl == 0.0 && o.breakdown.f_dist == 0.0;
    out.push(Check::new(
        "m ≡ 0 gives F_p_kl = F_dist = 0",
        zero_terms,
        format!("F_p_kl = {}, F_dist = {}", o.breakdown.f_p_kl, o.breakdown.f_dist),
    ));
    let grads = tape.gradients(o.total).expect("finite gradients");
    let pref: Vec<(ParamId, String)> =
        f.params.iter().filter(|(_, e)| is_preference(&e.name)).map(|(id, e)| (id, e.name.clone())).collect();
    let moved: Vec<&String> = pref.iter().filter(|(id, _)| grads.max_abs(*id) != 0.0).map(|(_, n)| n).collect();
    let encoder_moves = f.params.iter().any(|(id, e)| e.name.starts_with("wm.encoder") && grads.max_abs(id) > 0.0);
    out.push(Check::new(
        "m ≡ 0 gives zero gradient to preference parameters",
        moved.is_empty() && !pref.is_empty() && encoder_moves,
        format!("{} preference tensors, {} with nonzero gradient", pref.len(), moved.len()),
    ));

    let start = StartBatch::from_observed(&tape, &o, &b).expect("valid start rows");
    let t = imagine_rollout(&f.wm, &f.learner.actor, &f.learner.critic, &f.params, &start, &f.learner.hyper, &mut stream(2, "n"))
        .expect("finite rollout");
    let mut tape = Tape::new(OwnerMask::only(Owner::Policy));
    let pl = policy_loss(&mut tape, &f.learner.actor, &f.params, &t, &f.learner.hyper).expect("finite policy loss");
    let no_mask = t.expert.mask.iter().all(|&m| m == 0.0);
    out.push(Check::new("e ≡ 0 gives L_exp = 0", no_mask && pl.l_exp == 0.0, format!("L_exp = {}", pl.l_exp)));
    out
}

/// Everything `myoe selfcheck` runs.
pub fn run_all() -> Vec<Check> {
    let mut out = oracle_suite(1000);
    out.extend(gradient_suite());
    out.extend(mask_suite());
    out.extend(lemma_suite(1000));
    out
}
