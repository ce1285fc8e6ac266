use super::*;
use crate::rng::stream;

fn env(name: &str, seed: u64) -> Environment {
    make_env(EnvSpec::named(name).unwrap(), seed).unwrap()
}

fn rollout(env: &mut Environment, actions: &[Vec<f64>]) -> Vec<StepResult> {
    let mut out = Vec::new();
    for a in actions {
        if env.is_done() {
            break;
        }
        out.push(env.step(a).unwrap());
    }
    out
}

#[test]
fn identical_seeds_identical_trajectories() {
    let actions: Vec<Vec<f64>> = (0..60).map(|k| vec![libm::sin(k as f64), libm::cos(0.3 * k as f64)]).collect();
    for name in ["point-reach", "block-push"] {
        let mut spec = EnvSpec::named(name).unwrap();
        spec.action_noise = 0.1;
        let mut a = make_env(spec.clone(), 7).unwrap();
        let mut b = make_env(spec, 7).unwrap();
        assert_eq!(rollout(&mut a, &actions), rollout(&mut b, &actions));
    }
}

#[test]
fn four_rooms_is_a_nine_by_nine_grid() {
    let e = env("four-rooms", 3);
    assert_eq!(GRID, 9);
    assert_eq!(e.spec().action_dim, 4);
    assert!(WALLS.iter().all(|row| row.len() == 9));
}

#[test]
fn unknown_name_lists_available() {
    match EnvSpec::named("cartpole") {
        Err(Error::UnknownEnv { available, .. }) => assert_eq!(available, ENV_NAMES),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn reward_only_on_success() {
    let mut e = env("point-reach", 1);
    let goal = e.goal();
    e.place_agent(&[goal[0] + 0.01, goal[1]]);
    let r = e.step(&[0.0, 0.0]).unwrap();
    assert!(r.success && r.done);
    assert_eq!(r.reward, 1.0);
    assert!(matches!(e.step(&[0.0, 0.0]), Err(Error::EpisodeDone)));

    let mut e = env("point-reach", 2);
    let goal = e.goal();
    let eps = e.spec().success_tol;
    e.place_agent(&[goal[0] - 10.0 * eps, goal[1]]);
    let r = e.step(&[-1.0, 0.0]).unwrap();
    assert_eq!(r.reward, 0.0);
    assert!(!r.success);
}

#[test]
fn action_noise_moves_a_resting_agent() {
    let mut spec = EnvSpec::named("point-reach").unwrap();
    spec.action_noise = 0.1;
    spec.episode_len = 2000;
    let mut e = make_env(spec, 11).unwrap();
    let mut moved = 0;
    for _ in 0..1000 {
        let before = e.observe().proprio;
        if e.is_done() {
            e.reset();
            continue;
        }
        let r = e.step(&[0.0, 0.0]).unwrap();
        if r.observation.proprio[..2] != before[..2] {
            moved += 1;
        }
    }
    assert!(moved >= 990, "only {moved} of 1000 steps moved");
}

#[test]
fn point_expert_succeeds_from_every_start_on_a_grid() {
    let mut spec = EnvSpec::named("point-reach").unwrap();
    spec.randomize_goal = false;
    for goal in [[0.5, 0.5], [-0.8, 0.8], [0.0, -0.3]] {
        spec.fixed_goal = Some(goal.to_vec());
        for i in 0..=20 {
            for j in 0..=20 {
                let mut e = make_env(spec.clone(), 0).unwrap();
                e.place_agent(&[-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64]);
                let mut solved = e.distance_to_goal() <= spec.success_tol;
                while !solved && !e.is_done() {
                    let a = e.expert_action();
                    solved = e.step(&a).unwrap().success;
                }
                assert!(solved || e.distance_to_goal() <= spec.success_tol, "failed from ({i},{j})");
            }
        }
    }
}

#[test]
fn expert_is_still_at_the_goal() {
    let mut e = env("point-reach", 4);
    let g = e.goal();
    e.place_agent(&g);
    let a = e.expert_action();
    let norm = libm::hypot(a[0], a[1]);
    assert!(norm <= 0.05 * e.spec().action_high);
}

#[test]
fn grid_expert_path_matches_bfs() {
    let spec = EnvSpec::named("four-rooms").unwrap();
    for seed in 0..20 {
        let mut e = make_env(spec.clone(), seed).unwrap();
        let obs = e.observe();
        let cell = |v: f64| ((v + 1.0) * 0.5 * 8.0).round() as usize;
        let (x, y) = (cell(obs.proprio[0]), cell(obs.proprio[1]));
        let (gx, gy) = (cell(obs.goal[0]) as i32, cell(obs.goal[1]) as i32);
        let bfs = bfs_distances((gx, gy))[y * GRID + x].unwrap();
        let mut steps = 0;
        loop {
            let a = e.expert_action();
            steps += 1;
            if e.step(&a).unwrap().success {
                break;
            }
        }
        assert_eq!(steps, bfs);
    }
}

#[test]
fn grid_demos_take_more_than_one_route() {
    let mut e = env("four-rooms", 9);
    let demos = generate_demonstrations(&mut e, 20, Perturbation::None, &mut stream(9, "d")).unwrap();
    // the top-right or bottom-left room is crossed depending on the doorway taken
    let mut via_right = 0;
    let mut via_left = 0;
    for d in &demos {
        let crossed_top_right = d.observations.iter().any(|o| o[0] > 0.0 && o[1] < 0.0);
        if crossed_top_right {
            via_right += 1;
        } else {
            via_left += 1;
        }
    }
    assert!(via_right > 0 && via_left > 0, "routes: {via_right} / {via_left}");
}

#[test]
fn demos_are_successful_expert_episodes() {
    let mut e = env("point-reach", 5);
    let demos = generate_demonstrations(&mut e, 5, Perturbation::None, &mut stream(5, "d")).unwrap();
    assert_eq!(demos.len(), 5);
    for d in &demos {
        assert!(d.expert && d.success);
        d.validate().unwrap();
    }
}

#[test]
fn shake_demos_start_with_jitter() {
    let mut e = env("point-reach", 6);
    let p = Perturbation::default_shake(e.spec());
    let Perturbation::Shake { steps } = p else { unreachable!() };
    assert_eq!(steps, 12);
    let demos = generate_demonstrations(&mut e, 5, p, &mut stream(6, "d")).unwrap();
    for d in &demos {
        assert!(d.success && d.steps() > steps);
        for t in 1..=steps {
            let a = &d.actions[t];
            assert!((libm::hypot(a[0], a[1]) - 1.0).abs() < 1e-12, "step {t} is not a jitter action");
        }
    }
}

#[test]
fn unreachable_goal_exhausts_attempts() {
    let mut spec = EnvSpec::named("four-rooms").unwrap();
    spec.fixed_goal = Some(vec![4.0, 4.0]);
    let mut e = make_env(spec, 0).unwrap();
    let err = generate_demonstrations(&mut e, 5, Perturbation::None, &mut stream(0, "d")).unwrap_err();
    assert_eq!(err, Error::ExpertFailed { attempts: MAX_DEMO_ATTEMPTS });
}

#[test]
fn block_push_expert_mostly_succeeds() {
    let mut e = env("block-push", 3);
    let mut ok = 0;
    for _ in 0..50 {
        e.reset();
        loop {
            let a = e.expert_action();
            let r = e.step(&a).unwrap();
            if r.done {
                ok += r.success as usize;
                break;
            }
        }
    }
    assert!(ok >= 40, "block-push expert solved {ok}/50");
}

#[test]
fn sparse_reward_and_goal_randomization() {
    for name in ENV_NAMES {
        let mut e = env(name, 21);
        let mut goals = Vec::new();
        for _ in 0..10 {
            e.reset();
            goals.push(e.goal());
            let mut total = 0.0;
            let mut k = 0u64;
            while !e.is_done() {
                k += 1;
                let a: Vec<f64> = (0..e.spec().action_dim).map(|i| libm::sin((k * 7 + i as u64) as f64)).collect();
                let r = e.step(&a).unwrap();
                assert!(!r.success || r.done);
                total += r.reward;
            }
            assert!(total == 0.0 || total == 1.0);
        }
        if e.spec().randomize_goal {
            assert!(goals.windows(2).all(|w| w[0] != w[1]));
        }
    }
}

#[test]
fn pixels_are_in_unit_range() {
    let spec = EnvSpec::named("block-push").unwrap().with_pixels(true);
    let e = make_env(spec, 2).unwrap();
    let px = e.observe().pixels.unwrap();
    assert_eq!(px.len(), 256);
    assert!(px.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(px.iter().any(|&v| v == 1.0));
}
