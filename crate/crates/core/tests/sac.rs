use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scfind_tuner::env::{quadratic_reference_env, ParamSpace};
use scfind_tuner::nn::{Activation, Mlp};
use scfind_tuner::sac::*;

fn hyper(alpha: AlphaMode) -> SacHyperparams {
    SacHyperparams { hidden: vec![16, 16], alpha_mode: alpha, batch_size: 4, ..SacHyperparams::default() }
}

fn agent(alpha: AlphaMode) -> SacAgent {
    SacAgent::new(3, 2, hyper(alpha), 7).unwrap()
}

/// Zero every weight and set the output biases.
fn constant(net: &mut Mlp, outputs: &[f64]) {
    for t in net.tensors_mut() {
        t.fill(0.0);
    }
    let last = net.num_layers() - 1;
    net.layer_mut(last).1.assign(&Array1::from(outputs.to_vec()));
}

fn batch(rng: &mut ChaCha8Rng, n: usize, done: bool) -> Batch {
    Batch {
        states: Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0)),
        actions: Array2::from_shape_simple_fn((n, 2), || rng.random_range(-1.0..1.0)),
        rewards: Array1::from_shape_simple_fn(n, || rng.random_range(-1.0..1.0)),
        next_states: Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0)),
        dones: Array1::from_elem(n, if done { 1.0 } else { 0.0 }),
    }
}

#[test]
fn unit_gaussian_at_zero_noise() {
    let mut a = agent(AlphaMode::Auto(1.0));
    constant(&mut a.actor, &[0.0; 4]);
    let (act, lp) = a.action_with_noise(&[0.3, -0.2, 0.9], &[0.0, 0.0]).unwrap();
    assert_eq!(act, vec![0.0, 0.0]);
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let expect = -2.0 * (half_log_2pi + (1.0 + SQUASH_EPS).ln());
    assert!((lp - expect).abs() < 1e-12);
    assert!((half_log_2pi - 0.91894).abs() < 1e-5);
}

#[test]
fn deterministic_action_is_tanh_of_mean() {
    let mut a = agent(AlphaMode::Auto(1.0));
    constant(&mut a.actor, &[10.0, -10.0, 0.0, 0.0]);
    let act = a.deterministic_action(&[0.0; 3]).unwrap();
    assert!((act[0] - 10f64.tanh()).abs() < 1e-15);
    assert!(act[0] > 0.9999999 && act[0] <= 1.0 && act[1] >= -1.0);
    let (_, lp) = a.sample_action(&[0.0; 3], true).unwrap();
    assert!(lp.is_none());
}

#[test]
fn squashed_density_integrates_to_one() {
    // One action dimension, mean 0.3 and log-std -0.2.
    let (mu, ls) = (0.3, -0.2f64);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let eps = (a.atanh() - mu) / ls.exp();
        let p = squash(&array![[mu]], &array![[ls]], &array![[eps]]);
        assert!((p.actions[[0, 0]] - a).abs() < 1e-9);
        acc += p.log_probs[0].exp();
    }
    let integral = 2.0 * acc / n as f64;
    assert!((integral - 1.0).abs() < 0.02, "integral {integral}");
}

#[test]
fn log_std_is_clamped() {
    let mut a = agent(AlphaMode::Auto(1.0));
    constant(&mut a.actor, &[0.0, 0.0, 50.0, -50.0]);
    let (act, lp) = a.action_with_noise(&[0.0; 3], &[1.0, 1.0]).unwrap();
    assert!((act[0] - LOG_STD_MAX.exp().tanh()).abs() < 1e-12);
    assert!((act[1] - LOG_STD_MIN.exp().tanh()).abs() < 1e-12);
    assert!(lp.is_finite());
}

#[test]
fn target_q_takes_the_smaller_critic() {
    let mut a = agent(AlphaMode::Fixed(0.0));
    constant(&mut a.target1, &[3.0]);
    constant(&mut a.target2, &[5.0]);
    let s = array![[0.1, 0.2, 0.3]];
    let act = array![[0.5, -0.5]];
    let q = a.target_q(&s, &act, &array![-1.0], 0.0).unwrap();
    assert_eq!(q[0], 3.0);

    constant(&mut a.target1, &[2.0]);
    constant(&mut a.target2, &[2.0]);
    let q = a.target_q(&s, &act, &array![-1.0], 0.5).unwrap();
    assert_eq!(q[0], 2.5);
}

#[test]
fn swapping_critics_leaves_targets_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = agent(AlphaMode::Auto(0.4));
    let mut b = a.clone();
    std::mem::swap(&mut b.target1, &mut b.target2);
    std::mem::swap(&mut b.critic1, &mut b.critic2);
    std::mem::swap(&mut b.critic1_opt, &mut b.critic2_opt);
    let x = batch(&mut rng, 16, false);
    let lp = Array1::from_shape_simple_fn(16, || rng.random_range(-3.0..3.0));
    assert_eq!(
        a.target_q(&x.next_states, &x.actions, &lp, 0.4).unwrap(),
        b.target_q(&x.next_states, &x.actions, &lp, 0.4).unwrap()
    );
    let eps = Array2::from_shape_simple_fn((16, 2), || rng.random_range(-1.0..1.0));
    assert_eq!(a.actor_loss(&x.states, &eps, 0.4).unwrap().0, b.actor_loss(&x.states, &eps, 0.4).unwrap().0);
}

#[test]
fn targets_start_as_copies() {
    let a = agent(AlphaMode::Auto(1.0));
    assert_eq!(a.target1.tensors(), a.critic1.tensors());
    assert_eq!(a.target2.tensors(), a.critic2.tensors());
    assert_ne!(a.critic1.tensors(), a.critic2.tensors());
}

#[test]
fn terminal_and_undiscounted_targets_equal_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = agent(AlphaMode::Auto(1.0));
    let b = batch(&mut rng, 8, true);
    let eps = Array2::zeros((8, 2));
    assert_eq!(a.critic_targets(&b, &eps, a.alpha()).unwrap(), b.rewards);

    let mut g = a.clone();
    g.hyper.gamma = 0.0;
    let b = batch(&mut rng, 1, false);
    assert_eq!(g.critic_targets(&b, &Array2::zeros((1, 2)), 1.0).unwrap(), b.rewards);
}

#[test]
fn critic_step_reduces_loss_on_the_same_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut a = agent(AlphaMode::Auto(1.0));
    let b = batch(&mut rng, 32, false);
    let y = a.critic_targets(&b, &Array2::zeros((32, 2)), a.alpha()).unwrap();
    let before = a.critic_losses(&b, &y).unwrap();
    for _ in 0..20 {
        let [(_, g1), (_, g2)] = a.critic_losses(&b, &y).unwrap();
        scfind_tuner::nn::adam_step(&mut a.critic1, &g1, &mut a.critic1_opt).unwrap();
        scfind_tuner::nn::adam_step(&mut a.critic2, &g2, &mut a.critic2_opt).unwrap();
    }
    let after = a.critic_losses(&b, &y).unwrap();
    assert!(after[0].0 < before[0].0 && after[1].0 < before[1].0);

    let (l1, l2) = a.critic_update(&b).unwrap();
    assert!(l1.is_finite() && l2.is_finite());
}

#[test]
fn entropy_only_actor_step_widens_the_policy() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut a = agent(AlphaMode::Fixed(0.2));
    constant(&mut a.critic1, &[0.0]);
    constant(&mut a.critic2, &[0.0]);
    let last = a.actor.num_layers() - 1;
    a.actor.layer_mut(last).1.assign(&array![0.0, 0.0, -1.0, -1.0]);
    let b = batch(&mut rng, 64, false);
    let mean_log_std = |a: &SacAgent| {
        let out = a.actor.predict(&b.states).unwrap();
        out.slice(ndarray::s![.., 2..]).mean().unwrap()
    };
    let eps = Array2::from_shape_simple_fn((64, 2), || rng.sample(rand_distr::StandardNormal));
    let (loss, _, lp) = a.actor_loss(&b.states, &eps, 0.2).unwrap();
    assert!((loss - 0.2 * lp.mean().unwrap()).abs() < 1e-12);
    let before = mean_log_std(&a);
    a.actor_update(&b).unwrap();
    assert!(mean_log_std(&a) > before);
}

#[test]
fn quadratic_bowl_critic_pulls_actions_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut a = SacAgent::new(3, 2, SacHyperparams { hidden: vec![32, 32], alpha_mode: AlphaMode::Fixed(0.0), learning_rate: 3e-3, ..SacHyperparams::default() }, 1).unwrap();
    // Fit both critics to Q(s, a) = -|a|^2.
    for _ in 0..1500 {
        let b = batch(&mut rng, 64, false);
        let y: Array1<f64> = b.actions.rows().into_iter().map(|r| -r.dot(&r)).collect();
        let [(_, g1), (_, g2)] = a.critic_losses(&b, &y).unwrap();
        scfind_tuner::nn::adam_step(&mut a.critic1, &g1, &mut a.critic1_opt).unwrap();
        scfind_tuner::nn::adam_step(&mut a.critic2, &g2, &mut a.critic2_opt).unwrap();
    }
    let last = a.actor.num_layers() - 1;
    a.actor.layer_mut(last).1.assign(&array![1.0, -1.0, -3.0, -3.0]);
    let probe = batch(&mut rng, 64, false);
    let mean_abs = |a: &SacAgent| {
        probe.states.rows().into_iter().map(|s| a.deterministic_action(&s.to_vec()).unwrap().iter().map(|v| v.abs()).sum::<f64>()).sum::<f64>() / 128.0
    };
    let before = mean_abs(&a);
    for _ in 0..300 {
        let b = batch(&mut rng, 64, false);
        a.actor_update(&b).unwrap();
    }
    let after = mean_abs(&a);
    assert!(before > 0.5 && after < 0.1, "mean |a| {before} -> {after}");
}

#[test]
fn zero_alpha_removes_entropy_terms() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = agent(AlphaMode::Fixed(0.0));
    let b = batch(&mut rng, 8, false);
    let eps = Array2::from_shape_simple_fn((8, 2), || rng.random_range(-2.0..2.0));
    let next = a.policy_sample(&b.next_states, &eps).unwrap();
    let t = a.target_q(&b.next_states, &next.actions, &next.log_probs, 0.0).unwrap();
    let t_other = a.target_q(&b.next_states, &next.actions, &Array1::from_elem(8, 1e6), 0.0).unwrap();
    assert_eq!(t, t_other);
    let (loss, _, _) = a.actor_loss(&b.states, &eps, 0.0).unwrap();
    let cur = a.policy_sample(&b.states, &eps).unwrap();
    let x = ndarray::concatenate(ndarray::Axis(1), &[b.states.view(), cur.actions.view()]).unwrap();
    let q1 = a.critic1.predict(&x).unwrap();
    let q2 = a.critic2.predict(&x).unwrap();
    let expect = -(0..8).map(|i| q1[[i, 0]].min(q2[[i, 0]])).sum::<f64>() / 8.0;
    assert!((loss - expect).abs() < 1e-12);
}

#[test]
fn temperature_follows_entropy_gap() {
    let mut a = agent(AlphaMode::Auto(0.5));
    assert_eq!(a.target_entropy(), -2.0);
    let h = a.target_entropy();
    let before = a.log_alpha;
    a.temperature_update_with(&Array1::from_elem(8, -h)).unwrap();
    assert_eq!(a.log_alpha, before);

    // Entropy below target: log-probabilities above -H.
    a.temperature_update_with(&Array1::from_elem(8, -h + 1.0)).unwrap();
    assert!(a.log_alpha > before);
    assert!(a.alpha() > 0.5);

    let mut f = agent(AlphaMode::Fixed(0.1));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let b = batch(&mut rng, 4, false);
    assert!(matches!(f.temperature_update(&b), Err(scfind_tuner::Error::Usage(_))));
}

#[test]
fn default_target_entropy_is_minus_action_dim() {
    let a = SacAgent::new(5, 4, SacHyperparams { hidden: vec![4], ..SacHyperparams::default() }, 0).unwrap();
    assert_eq!(a.target_entropy(), -4.0);
}

#[test]
fn polyak_arithmetic() {
    let mut a = agent(AlphaMode::Auto(1.0));
    a.hyper.tau = 0.005;
    constant(&mut a.critic1, &[1.0]);
    constant(&mut a.target1, &[0.0]);
    a.polyak_update().unwrap();
    let last = a.target1.num_layers() - 1;
    assert!((a.target1.biases()[last][0] - 0.005).abs() < 1e-15);

    // Frozen source: the gap shrinks by (1 - tau) per step.
    let mut gap = 1.0 - 0.005;
    for _ in 0..50 {
        a.polyak_update().unwrap();
        gap *= 1.0 - 0.005;
        assert!((1.0 - a.target1.biases()[last][0] - gap).abs() < 1e-12);
    }

    a.hyper.tau = 1.0;
    a.polyak_update().unwrap();
    assert_eq!(a.target1.tensors(), a.critic1.tensors());
    assert_eq!(a.target2.tensors(), a.critic2.tensors());
}

#[test]
fn empty_batch_is_rejected() {
    let mut a = agent(AlphaMode::Auto(1.0));
    let b = Batch {
        states: Array2::zeros((0, 3)),
        actions: Array2::zeros((0, 2)),
        rewards: Array1::zeros(0),
        next_states: Array2::zeros((0, 3)),
        dones: Array1::zeros(0),
    };
    assert!(matches!(a.critic_update(&b), Err(scfind_tuner::Error::Usage(_))));
    assert!(matches!(a.actor_update(&b), Err(scfind_tuner::Error::Usage(_))));
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    let bad = [
        SacHyperparams { gamma: 1.0, ..SacHyperparams::default() },
        SacHyperparams { tau: 0.0, ..SacHyperparams::default() },
        SacHyperparams { batch_size: 2000, ..SacHyperparams::default() },
        SacHyperparams { alpha_mode: AlphaMode::Auto(0.0), ..SacHyperparams::default() },
        SacHyperparams { hidden: vec![], ..SacHyperparams::default() },
    ];
    for h in bad {
        assert!(SacAgent::new(5, 4, h, 0).is_err());
    }
}

fn quad_env() -> scfind_tuner::env::TuningEnv<scfind_tuner::env::QuadraticEvaluator> {
    let space = ParamSpace::default();
    quadratic_reference_env(&space.vector(&[3.6, 0.45, 0.2, 1.7]).unwrap()).unwrap()
}

fn small_agent(seed: u64) -> SacAgent {
    SacAgent::new(5, 4, SacHyperparams { hidden: vec![16, 16], ..SacHyperparams::default() }, seed).unwrap()
}

fn opts(steps: u64, every: u64, dir: Option<&std::path::Path>) -> TrainOptions {
    TrainOptions { total_steps: steps, checkpoint_every: every, checkpoint_dir: dir.map(Into::into), seed: 3 }
}

#[test]
fn zero_steps_produce_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = small_agent(1);
    let log = train_loop(&mut a, &mut quad_env(), &opts(0, 100, Some(dir.path())), |_| {}).unwrap();
    assert!(log.records.is_empty() && log.checkpoints.is_empty());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn warm_up_leaves_weights_untouched() {
    let mut a = small_agent(1);
    let before = a.clone();
    let log = train_loop(&mut a, &mut quad_env(), &opts(63, 0, None), |_| {}).unwrap();
    assert_eq!(log.records.len(), 63);
    assert!(log.records.iter().all(|r| r.critic1_loss.is_none()));
    assert_eq!(a.actor.tensors(), before.actor.tensors());
    assert_eq!(a.critic1.tensors(), before.critic1.tensors());
    assert_eq!(a.log_alpha, before.log_alpha);

    let log = train_loop(&mut a, &mut quad_env(), &opts(70, 0, None), |_| {}).unwrap();
    assert!(log.records.iter().any(|r| r.critic1_loss.is_some()));
    assert_ne!(a.actor.tensors(), before.actor.tensors());
}

#[test]
fn training_is_reproducible_and_checkpoints_round_trip() {
    let run = |dir: &std::path::Path| {
        let mut a = small_agent(4);
        let log = train_loop(&mut a, &mut quad_env(), &opts(250, 100, Some(dir)), |_| {}).unwrap();
        (a, log)
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (a1, l1) = run(d1.path());
    let (_, l2) = run(d2.path());
    assert_eq!(log_to_csv(&l1.records, 4).unwrap(), log_to_csv(&l2.records, 4).unwrap());
    let names: Vec<_> = l1.checkpoints.iter().map(|p| p.file_name().unwrap().to_owned()).collect();
    assert_eq!(names, vec!["ckpt_000100.sfck", "ckpt_000200.sfck"]);
    for (p, q) in l1.checkpoints.iter().zip(&l2.checkpoints) {
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
    assert_eq!(list_checkpoints(d1.path()).unwrap().len(), 2);

    let bytes = a1.to_bytes().unwrap();
    let b1 = SacAgent::from_bytes(&bytes).unwrap();
    assert_eq!(b1.to_bytes().unwrap(), bytes);
    assert_eq!(b1.global_step, 250);
    let state = [0.1, 0.5, 0.9, 0.3, 0.2];
    assert_eq!(a1.deterministic_action(&state).unwrap(), b1.deterministic_action(&state).unwrap());
    let eps = [0.3, -1.2, 0.0, 2.0];
    assert_eq!(a1.action_with_noise(&state, &eps).unwrap(), b1.action_with_noise(&state, &eps).unwrap());

    // The restored RNG continues the same stream.
    let (mut x, mut y) = (a1.clone(), b1);
    assert_eq!(x.sample_action(&state, false).unwrap(), y.sample_action(&state, false).unwrap());

    let mut bad = bytes.clone();
    bad[40] ^= 0xff;
    assert!(SacAgent::from_bytes(&bad).is_err());
}

#[test]
fn log_csv_round_trips() {
    let mut a = small_agent(2);
    let log = train_loop(&mut a, &mut quad_env(), &opts(80, 0, None), |_| {}).unwrap();
    let csv = log_to_csv(&log.records, 4).unwrap();
    let header = String::from_utf8(csv.clone()).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "step,episode,param_1,param_2,param_3,param_4,sr,reward,critic1_loss,critic2_loss,actor_loss,alpha");
    assert_eq!(parse_log(&csv).unwrap(), log.records);
}

#[test]
fn episodes_advance_at_the_step_limit() {
    let mut a = small_agent(2);
    let log = train_loop(&mut a, &mut quad_env(), &opts(201, 0, None), |_| {}).unwrap();
    assert_eq!(log.records[99].episode, 0);
    assert_eq!(log.records[100].episode, 1);
    assert_eq!(log.records[200].episode, 2);
}

#[test]
fn mismatched_agent_is_rejected() {
    let mut a = SacAgent::new(3, 4, SacHyperparams { hidden: vec![4], ..SacHyperparams::default() }, 0).unwrap();
    assert!(train_loop(&mut a, &mut quad_env(), &opts(1, 0, None), |_| {}).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn actions_stay_in_the_unit_box(
        state in proptest::collection::vec(-50.0f64..50.0, 3),
        eps in proptest::collection::vec(-10.0f64..10.0, 2),
        seed in 0u64..1000,
    ) {
        let a = SacAgent::new(3, 2, SacHyperparams { hidden: vec![8], activation: Activation::Relu, ..SacHyperparams::default() }, seed).unwrap();
        let (act, lp) = a.action_with_noise(&state, &eps).unwrap();
        prop_assert!(act.iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(lp.is_finite());
        let det = a.deterministic_action(&state).unwrap();
        prop_assert!(det.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn buffer_never_exceeds_capacity(cap in 1usize..20, n in 0usize..60) {
        let mut b = ReplayBuffer::new(cap).unwrap();
        for i in 0..n {
            b.push(Transition { state: vec![i as f64], action: vec![0.0], reward: i as f64, next_state: vec![0.0], done: false }).unwrap();
            prop_assert!(b.len() <= cap);
        }
        let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
        let expect: Vec<f64> = (n.saturating_sub(cap)..n).map(|i| i as f64).collect();
        prop_assert_eq!(kept, expect);
    }
}
