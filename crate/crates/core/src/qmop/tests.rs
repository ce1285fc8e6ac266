use alloc::vec;
use alloc::vec::Vec;

use super::*;
use crate::env::{generate_demonstrations, make_env, EnvSpec, Perturbation};
use crate::numerics::gaussian::{entropy_diag_gaussian, kl_vars};
use crate::numerics::gradcheck::grad_check;
use crate::numerics::{Adam, AdamConfig, OwnerMask};
use crate::replay::{EpisodeRecord, SequenceBatch};
use crate::rng::{stream, ZeroNoise};

fn tiny() -> WorldModelConfig {
    WorldModelConfig {
        deter_dim: 3,
        stoch_dim: 2,
        query_dim: 2,
        units: 4,
        components: 2,
        free_bits: 0.0,
        mix_coef: 0.3,
        mix_reg: 0.1,
        obs_scale: 1.0,
    }
}

fn dims() -> ModelDims {
    ModelDims { obs_dim: 6, action_dim: 2, goal_dim: 2 }
}

fn model<T: Real>(config: WorldModelConfig, seed: u64) -> (WorldModel, ParameterSet<T>) {
    let mut ps = ParameterSet::new();
    let wm = WorldModel::new(config, dims(), &mut ps, &mut stream(seed, "init")).unwrap();
    (wm, ps)
}

fn episodes() -> (EpisodeRecord, EpisodeRecord) {
    let mut env = make_env(EnvSpec::named("point-reach").unwrap(), 3).unwrap();
    let demo = generate_demonstrations(&mut env, 1, Perturbation::None, &mut stream(3, "d")).unwrap().remove(0);
    let obs = env.reset();
    let mut fail = EpisodeRecord::start(env.spec(), 3, &obs, false);
    for k in 0..5 {
        let a = [libm::sin(k as f64), 0.3];
        let r = env.step(&a).unwrap();
        fail.push(&r.observation, &a, r.reward, r.done);
    }
    (demo, fail)
}

fn batch(len: usize) -> SequenceBatch {
    let (demo, fail) = episodes();
    SequenceBatch::from_windows(&[(&demo, 0, 0), (&fail, 1, 1)], len).unwrap()
}

fn zero_success(mut b: SequenceBatch) -> SequenceBatch {
    b.success.iter_mut().for_each(|m| *m = 0.0);
    b.expert.iter_mut().for_each(|m| *m = 0.0);
    b
}

const GRAD_EPS: f64 = 1e-2;

fn is_preference(name: &str) -> bool {
    ["wm.pref_post", "wm.pref_prior", "wm.goal_vec", "wm.goal_enc", "wm.gate"].iter().any(|p| name.starts_with(p))
}

fn without_dist(o: &WorldModelLoss, tape: &mut Tape<f64>) -> Var {
    tape.sub(o.total, o.terms.f_dist.unwrap())
}

fn upstream_of_target(name: &str) -> bool {
    ["wm.encoder", "wm.input", "wm.gru", "wm.repr_post"].iter().any(|p| name.starts_with(p))
}

// Finite differences move the stop-gradient target of F_dist too, so F_dist
// is checked only on parameters that do not feed that target.
#[test]
fn every_loss_term_passes_finite_differences() {
    let (wm, ps) = model::<f64>(tiny(), 1);
    let b = batch(2);
    let all: Vec<ParamId> = ps.ids().collect();
    let downstream: Vec<ParamId> = ps.iter().filter(|(_, e)| !upstream_of_target(&e.name)).map(|(id, _)| id).collect();
    let picks: [(&str, fn(&WorldModelLoss, &mut Tape<f64>) -> Var, &[ParamId]); 8] = [
        ("total without F_dist", without_dist, &all),
        ("total", |o, _| o.total, &downstream),
        ("f_o", |o, _| o.terms.f_o, &all),
        ("f_o_kl", |o, _| o.terms.f_o_kl, &all),
        ("f_r", |o, _| o.terms.f_r, &all),
        ("f_p_kl", |o, _| o.terms.f_p_kl.unwrap(), &all),
        ("f_dist", |o, _| o.terms.f_dist.unwrap(), &downstream),
        ("mix_entropy", |o, _| o.terms.mix_entropy.unwrap(), &all),
    ];
    for (label, pick, which) in picks {
        let mut tape = Tape::new(OwnerMask::all());
        let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(5, "noise")).unwrap();
        let loss = pick(&out, &mut tape);
        let grads = tape.gradients(loss).unwrap();
        let report = grad_check(&ps, &grads, Some(which), GRAD_EPS, 24, |p| {
            let mut tape = Tape::frozen();
            let out = wm.world_model_loss(&mut tape, p, &b, &mut stream(5, "noise")).unwrap();
            let v = pick(&out, &mut tape);
            tape.scalar(v)
        });
        let worst = report.worst().unwrap();
        assert!(report.max_rel_error() <= 1e-6, "{label}: {} rel err {:e}", worst.0, worst.1);
    }
}

#[test]
fn free_bits_branch_passes_finite_differences() {
    let mut cfg = tiny();
    cfg.free_bits = 0.02;
    let (wm, ps) = model::<f64>(cfg, 4);
    let b = batch(3);
    let mut tape = Tape::new(OwnerMask::all());
    let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(5, "noise")).unwrap();
    let loss = without_dist(&out, &mut tape);
    let grads = tape.gradients(loss).unwrap();
    let report = grad_check(&ps, &grads, None, GRAD_EPS, 16, |p| {
        let mut tape = Tape::frozen();
        let out = wm.world_model_loss(&mut tape, p, &b, &mut stream(5, "noise")).unwrap();
        let v = without_dist(&out, &mut tape);
        tape.scalar(v)
    });
    assert!(report.max_rel_error() <= 1e-6, "{:?}", report.worst());
}

#[test]
fn observe_step_is_deterministic() {
    let (wm, ps) = model::<f64>(tiny(), 2);
    let b = batch(4);
    let run = || {
        let mut tape = Tape::frozen();
        let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(9, "n")).unwrap();
        (out.breakdown, out.start_states(&tape))
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_success_mask_silences_preference_learning() {
    let (wm, ps) = model::<f64>(tiny(), 3);
    let b = zero_success(batch(4));
    let mut tape = Tape::new(OwnerMask::all());
    let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(1, "n")).unwrap();
    assert_eq!(out.breakdown.f_p_kl, 0.0);
    assert_eq!(out.breakdown.f_dist, 0.0);
    assert_eq!(out.breakdown.mix_entropy, 0.0);
    let grads = tape.gradients(out.total).unwrap();
    let mut checked = 0;
    for (id, e) in ps.iter() {
        if is_preference(&e.name) {
            checked += 1;
            assert!(grads.get(id).is_none_or(|g| g.iter().all(|&v| v == 0.0)), "{} got gradient", e.name);
        } else if e.name.starts_with("wm.encoder") {
            assert!(grads.max_abs(id) > 0.0);
        }
    }
    assert!(checked >= 5);
}

#[test]
fn extra_failed_sequences_leave_masked_terms_unchanged() {
    let (wm, ps) = model::<f64>(tiny(), 6);
    let (demo, fail) = episodes();
    let one = SequenceBatch::from_windows(&[(&demo, 0, 0), (&fail, 0, 1)], 4).unwrap();
    let more = SequenceBatch::from_windows(&[(&demo, 0, 0), (&fail, 0, 1), (&fail, 1, 2), (&fail, 0, 3)], 4).unwrap();
    let eval = |b: &SequenceBatch| {
        let mut tape = Tape::frozen();
        wm.world_model_loss(&mut tape, &ps, b, &mut ZeroNoise).unwrap().breakdown
    };
    let (a, c) = (eval(&one), eval(&more));
    assert!((a.f_p_kl - c.f_p_kl).abs() < 1e-12);
    assert!((a.f_dist - c.f_dist).abs() < 1e-12);
    assert!((a.mix_entropy - c.mix_entropy).abs() < 1e-12);
}

#[test]
fn distance_term_does_not_reach_representation_posterior() {
    let (wm, ps) = model::<f64>(tiny(), 7);
    let b = batch(1);
    let mut tape = Tape::new(OwnerMask::all());
    let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(2, "n")).unwrap();
    let grads = tape.gradients(out.terms.f_dist.unwrap()).unwrap();
    for (id, e) in ps.iter() {
        if e.name.starts_with("wm.repr_post") {
            assert!(grads.get(id).is_none_or(|g| g.iter().all(|&v| v == 0.0)), "{}", e.name);
        }
        if e.name.starts_with("wm.pref_post") {
            assert!(grads.max_abs(id) > 0.0, "{}", e.name);
        }
    }
}

fn zero_last_layer(ps: &mut ParameterSet<f64>, net: &Mlp, bias: &[f64]) {
    let last = net.layers.last().unwrap();
    ps.data_mut(last.w).iter_mut().for_each(|v| *v = 0.0);
    ps.data_mut(last.b).copy_from_slice(bias);
}

#[test]
fn identical_posterior_and_prior_give_zero_kl() {
    let (wm, mut ps) = model::<f64>(tiny(), 8);
    let head = [0.3, -0.2, -0.5, 0.1];
    zero_last_layer(&mut ps, &wm.repr_post, &head);
    zero_last_layer(&mut ps, &wm.repr_prior, &head);
    zero_last_layer(&mut ps, &wm.pref_post, &head);
    // both prior components equal the posterior
    zero_last_layer(&mut ps, &wm.pref_prior, &[0.3, -0.2, 0.3, -0.2, -0.5, 0.1, -0.5, 0.1]);
    let b = batch(4);
    let mut tape = Tape::frozen();
    let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(0, "n")).unwrap();
    assert!(out.breakdown.f_o_kl.abs() < 1e-12);
    assert!(out.breakdown.f_p_kl.abs() < 1e-12);

    let mut cfg = tiny();
    cfg.free_bits = 1.0;
    let wm1 = WorldModel { config: cfg, ..wm };
    let mut tape = Tape::frozen();
    let out = wm1.world_model_loss(&mut tape, &ps, &b, &mut stream(0, "n")).unwrap();
    assert_eq!(out.breakdown.f_o_kl, 1.0);
    assert_eq!(out.breakdown.f_p_kl, 1.0);
}

#[test]
fn perfect_decoder_hits_the_likelihood_floor() {
    let (wm, mut ps) = model::<f64>(tiny(), 9);
    let c = [0.25, -0.5, 0.0, 1.0, 0.75, -0.125];
    zero_last_layer(&mut ps, &wm.decoder, &c);
    let rec = EpisodeRecord {
        env: "point-reach".into(),
        seed: 0,
        layout: EnvSpec::named("point-reach").unwrap().layout,
        observations: vec![c.to_vec(); 4],
        actions: vec![vec![0.0, 0.0]; 4],
        rewards: vec![0.0; 4],
        dones: vec![false, false, false, true],
        success: false,
        expert: false,
        goal: c[4..].to_vec(),
    };
    let b = SequenceBatch::from_windows(&[(&rec, 0, 0)], 4).unwrap();
    let mut tape = Tape::frozen();
    let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(0, "n")).unwrap();
    let floor = 6.0 * 0.5 * libm::log(2.0 * core::f64::consts::PI);
    assert!((out.breakdown.f_o - floor).abs() < 1e-12, "{} vs {floor}", out.breakdown.f_o);
}

#[test]
fn empty_batch_is_flagged() {
    let (wm, ps) = model::<f64>(tiny(), 1);
    let mut b = batch(3);
    b.valid.iter_mut().for_each(|v| *v = 0.0);
    b.success.iter_mut().for_each(|v| *v = 0.0);
    let mut tape = Tape::new(OwnerMask::all());
    let out = wm.world_model_loss(&mut tape, &ps, &b, &mut stream(0, "n")).unwrap();
    assert!(out.breakdown.empty);
    assert_eq!(out.breakdown.total, 0.0);
    assert!(tape.gradients(out.total).unwrap().global_norm() == 0.0);
}

#[test]
fn nan_parameters_name_the_head() {
    let (wm, mut ps) = model::<f64>(tiny(), 1);
    let id = ps.id("wm.repr_prior.1.b").unwrap();
    ps.data_mut(id)[0] = f64::NAN;
    let mut tape = Tape::frozen();
    let err = wm.world_model_loss(&mut tape, &ps, &batch(2), &mut stream(0, "n")).unwrap_err();
    assert!(alloc::format!("{err}").contains("representation prior"), "{err}");
}

#[test]
fn mixture_combine_examples() {
    let mut tape = Tape::<f64>::frozen();
    let comps = tape.constant_f64(1, 4, &[1.0, 2.0, 3.0, -4.0]);
    let z = tape.constant_f64(1, 2, &[0.0, 0.0]);
    let w = tape.softmax_rows(z);
    let c = mixture_combine(&mut tape, comps, w, 2).unwrap();
    assert_eq!(tape.value(c).data, vec![2.0, -1.0]);

    let z = tape.constant_f64(1, 2, &[core::f64::consts::LN_2, 0.0]);
    let w = tape.softmax_rows(z);
    let c = mixture_combine(&mut tape, comps, w, 2).unwrap();
    let expect = [(2.0 * 1.0 + 3.0) / 3.0, (2.0 * 2.0 - 4.0) / 3.0];
    for (a, e) in tape.value(c).data.iter().zip(expect) {
        assert!((a - e).abs() < 1e-15);
    }

    let one = tape.constant_f64(1, 1, &[1.0]);
    let single = tape.constant_f64(1, 2, &[0.7, -0.3]);
    let c = mixture_combine(&mut tape, single, one, 2).unwrap();
    assert_eq!(tape.value(c).data, vec![0.7, -0.3]);

    assert!(mixture_combine(&mut tape, comps, w, 3).is_err());
}

#[test]
fn gate_symmetry_is_bitwise() {
    let mut cfg = tiny();
    cfg.components = 3;
    let (wm, ps) = model::<f64>(cfg, 12);
    let perm = [2usize, 0, 1];
    let mut ps2 = ps.clone();
    let (dq, m) = (2, 3);
    let wsrc = ps.data(wm.gate.weight).to_vec();
    let bsrc = ps.data(wm.gate.bias).to_vec();
    for r in 0..dq {
        for (i, &p) in perm.iter().enumerate() {
            ps2.data_mut(wm.gate.weight)[r * m + i] = wsrc[r * m + p];
        }
    }
    for (i, &p) in perm.iter().enumerate() {
        ps2.data_mut(wm.gate.bias)[i] = bsrc[p];
    }
    let comps: Vec<f64> = (0..6).map(|k| libm::sin(1.3 * k as f64)).collect();
    let mut permuted = vec![0.0; 6];
    for (i, &p) in perm.iter().enumerate() {
        permuted[2 * i..2 * i + 2].copy_from_slice(&comps[2 * p..2 * p + 2]);
    }
    let run = |ps: &ParameterSet<f64>, comps: &[f64]| {
        let mut tape = Tape::frozen();
        let g = tape.constant_f64(1, 2, &[0.4, -0.6]);
        let q = wm.query(&mut tape, ps, g);
        let w = wm.mixture_weights(&mut tape, ps, q);
        let c = tape.constant_f64(1, 6, comps);
        let out = mixture_combine(&mut tape, c, w, 2).unwrap();
        tape.value(out).data.clone()
    };
    let a = run(&ps, &comps);
    let b = run(&ps2, &permuted);
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}

fn imagine(wm: &WorldModel, ps: &ParameterSet<f64>, steps: usize) -> Vec<LatentState<f64>> {
    let mut tape = Tape::frozen();
    let g = tape.constant_f64(2, 2, &[0.1, 0.2, -0.3, 0.4]);
    let q = wm.query(&mut tape, ps, g);
    let w = wm.mixture_weights(&mut tape, ps, q);
    let mut s = LatentState::<f64>::zeros(2, &wm.config).on_tape(&mut tape);
    let mut out = Vec::new();
    for k in 0..steps {
        let a = tape.constant_f64(2, 2, &[0.5, -0.5 * k as f64, 0.1, 0.0]);
        let o = wm.imagine_step(&mut tape, ps, s, a, q, w, &mut ZeroNoise).unwrap();
        let prior = o.repr_prior.row(&tape, 0).unwrap();
        let ent = crate::numerics::gaussian::entropy_vars(&mut tape, o.repr_prior);
        assert!((tape.value(ent).data[0] - entropy_diag_gaussian(&prior)).abs() < 1e-12);
        s = o.next;
        out.push(LatentState::from_tape(&tape, s));
    }
    out
}

#[test]
fn zero_noise_imagination_is_reproducible() {
    let (wm, ps) = model::<f64>(tiny(), 13);
    let a = imagine(&wm, &ps, 5);
    assert_eq!(a, imagine(&wm, &ps, 5));
    assert!(a[4].s_o.data.iter().any(|&v| v != 0.0));
}

#[test]
fn single_component_mixture_is_the_component() {
    let mut cfg = tiny();
    cfg.components = 1;
    let (wm, ps) = model::<f64>(cfg, 14);
    let mut tape = Tape::frozen();
    let g = tape.constant_f64(1, 2, &[0.1, 0.2]);
    let q = wm.query(&mut tape, &ps, g);
    let w = wm.mixture_weights(&mut tape, &ps, q);
    assert_eq!(tape.value(w).data, vec![1.0]);
    let s = LatentState::<f64>::zeros(1, &wm.config).on_tape(&mut tape);
    let a = tape.constant_f64(1, 2, &[0.3, 0.3]);
    let o = wm.imagine_step(&mut tape, &ps, s, a, q, w, &mut stream(1, "n")).unwrap();
    assert_eq!(tape.value(o.pref_prior.combined).data, tape.value(o.pref_prior.samples).data);
}

#[test]
fn mixture_entropy_examples() {
    assert_eq!(WorldModelConfig::default().mix_reg, 0.1);
    let c = DiagGaussian::new(vec![0.3, -0.4], vec![0.2, -0.1]).unwrap();
    let h = entropy_diag_gaussian(&c);
    let single = mixture_entropy_loss(core::slice::from_ref(&c), &[1.0], 0.0).unwrap();
    assert!((single - h).abs() < 1e-12);
    for w in [[0.5, 0.5], [0.2, 0.8]] {
        let two = mixture_entropy_loss(&[c.clone(), c.clone()], &w, 0.0).unwrap();
        assert!((two - h).abs() < 1e-12);
    }
    let reg = mixture_entropy_loss(core::slice::from_ref(&c), &[1.0], 0.1).unwrap();
    assert!((reg - (h - 0.1 * 0.5)).abs() < 1e-12);
}

#[test]
fn reward_head_is_shared_and_fits_a_constant() {
    let (wm, mut ps) = model::<f64>(tiny(), 15);
    let (s, h) = ([0.2, -0.1], [0.1, 0.0, -0.3]);
    let a = wm.predict_reward(&ps, &s, &h).unwrap();
    assert_eq!(a, wm.predict_reward(&ps, &s, &h).unwrap());

    // the same head scores representation and preference states
    let mut tape = Tape::frozen();
    let sv = tape.constant_f64(1, 2, &s);
    let hv = tape.constant_f64(1, 3, &h);
    let r = wm.reward_mean(&mut tape, &ps, sv, hv);
    let before = tape.value(r).data[0];
    let bias = wm.reward.layers[1].b;
    ps.data_mut(bias)[0] += 0.5;
    assert!((wm.predict_reward(&ps, &s, &h).unwrap().mean()[0] - before - 0.5).abs() < 1e-12);

    let mut adam = Adam::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() });
    let mut rng = stream(4, "fit");
    for _ in 0..400 {
        let mut tape = Tape::new(OwnerMask::all());
        let mut xs = vec![0.0; 16 * 2];
        let mut hs = vec![0.0; 16 * 3];
        crate::rng::Noise::fill(&mut rng, &mut xs);
        crate::rng::Noise::fill(&mut rng, &mut hs);
        let x = tape.constant_f64(16, 2, &xs);
        let hh = tape.constant_f64(16, 3, &hs);
        let ones = tape.constant_f64(16, 1, &[1.0; 16]);
        let r = wm.reward_mean(&mut tape, &ps, x, hh);
        let nll = crate::numerics::gaussian::unit_nll_vars(&mut tape, ones, r);
        let loss = tape.mean(nll);
        let g = tape.gradients(loss).unwrap();
        adam.step(&mut ps, &g).unwrap();
    }
    let p = wm.predict_reward(&ps, &s, &h).unwrap().mean()[0];
    assert!((p - 1.0).abs() < 0.05, "predicted {p}");
}

#[test]
fn kl_vars_matches_value_kl() {
    let mut tape = Tape::<f64>::frozen();
    let q = GaussianVars { mean: tape.constant_f64(1, 2, &[0.1, 0.5]), log_std: tape.constant_f64(1, 2, &[0.2, -0.3]) };
    let p = GaussianVars { mean: tape.constant_f64(1, 2, &[-0.4, 0.0]), log_std: tape.constant_f64(1, 2, &[0.0, 0.1]) };
    let k = kl_vars(&mut tape, q, p);
    let exact = crate::numerics::kl_diag_gaussian(&q.row(&tape, 0).unwrap(), &p.row(&tape, 0).unwrap()).unwrap();
    assert!((tape.scalar(k) - exact).abs() < 1e-14);
}


