use proptest::prelude::*;
use scfind_tuner::cube::{generate_cube, SkyConfig};
use scfind_tuner::env::{
    benchmark_values, quadratic_reference_env, score_ratio, state_sr, EnvConfig, Environment, ParamSpace, RewardConfig,
    RewardShaper,
};
use scfind_tuner::seed;

fn shaper() -> RewardShaper {
    RewardShaper::new(RewardConfig::default())
}

#[test]
fn reward_examples() {
    assert_eq!(shaper().shape(None, false), -5.0);

    let mut s = shaper();
    s.observe_reset(Some(0.9));
    s.observe_reset(Some(0.2));
    assert_eq!(s.shape(Some(0.2), false), 10.0);

    let mut s = shaper();
    s.observe_reset(Some(0.2));
    let r = s.shape(Some(0.4), false);
    assert!((r - 32.18281828459045).abs() < 1e-12, "{r}");
}

#[test]
fn penalty_arithmetic_chains_into_the_no_output_branch() {
    let sr = score_ratio(-3.0, 30).unwrap();
    assert_eq!(sr, -0.1);
    assert_eq!(shaper().shape(Some(sr), false), -5.0);
    assert!(score_ratio(1.0, 0).is_err());
    assert!((score_ratio(38.69, 572).unwrap() - 0.06764).abs() < 1e-5);
}

#[test]
fn state_encodes_missing_output_as_minus_one() {
    assert_eq!(state_sr(None), -1.0);
    assert_eq!(state_sr(Some(-3.0)), -1.0);
    assert_eq!(state_sr(Some(0.25)), 0.25);
}

#[test]
fn quadratic_env_scores_optimum_and_far_corner() {
    let space = ParamSpace::default();
    let opt = space.vector(&[3.5, 0.0, 0.1, 0.0]).unwrap();
    let env = quadratic_reference_env(&opt).unwrap();
    assert_eq!(env.evaluate(&opt).unwrap().sr, Some(1.0));
    let corner = space.vector(&[4.0, 0.6, 0.7, 2.0]).unwrap();
    assert_eq!(env.evaluate(&corner).unwrap().sr, Some(0.0));
}

#[test]
fn timeout_lands_on_the_last_step() {
    let space = ParamSpace::default();
    let mut env = quadratic_reference_env(&space.vector(&benchmark_values()).unwrap()).unwrap();
    env.reset(3).unwrap();
    let zero = vec![0.0; 4];
    for k in 1..=100 {
        let out = env.step(&zero).unwrap();
        assert_eq!(out.done, k == 100);
    }
}

#[test]
fn pipeline_steps_are_replayable() {
    let patch = generate_cube(&SkyConfig { dims: [32, 32, 64], n_sources: 4, seed: 12, ..SkyConfig::default() }).unwrap();
    let mut env = EnvConfig::default().pipeline_env(vec![("p".into(), patch)]).unwrap();
    let mut srs = Vec::new();
    for _ in 0..2 {
        env.reset(seed::derive(1, seed::TAG_ENV, 0)).unwrap();
        let outs: Vec<_> = (0..3).map(|_| env.step(&[0.3, -0.2, 0.1, 0.5]).unwrap().info.sr).collect();
        srs.push(outs);
    }
    assert_eq!(srs[0], srs[1]);
    let held: Vec<_> = (0..3).map(|_| env.step(&[0.0; 4]).unwrap().info.sr).collect();
    assert!(held.windows(2).all(|w| w[0] == w[1]));
}

proptest! {
    #[test]
    fn base_reward_is_bounded_and_increasing(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let s = shaper();
        let lo = 10.0 * (-1.0f64).exp();
        let hi = 10.0 * 4.0f64.exp();
        for v in [a, b] {
            let r = s.base(v);
            prop_assert!(r >= lo - 1e-12 && r <= hi + 1e-9);
        }
        if a < b {
            prop_assert!(s.base(a) < s.base(b));
        }
    }

    #[test]
    fn best_is_the_running_maximum(trace in prop::collection::vec(prop::option::weighted(0.8, -1.0f64..1.0), 1..60)) {
        let mut s = shaper();
        for (i, sr) in trace.iter().enumerate() {
            s.shape(*sr, i + 1 == trace.len());
        }
        let best = trace.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(s.best_sr(), best);
    }

    #[test]
    fn saturating_actions_are_idempotent(unit in prop::collection::vec(0.0f64..=1.0, 4), signs in prop::collection::vec(any::<bool>(), 4)) {
        let space = ParamSpace::default();
        let action: Vec<f64> = signs.iter().map(|&s| if s { 1.0 } else { -1.0 }).collect();
        let mut p = space.denormalize(&unit).unwrap();
        for _ in 0..10 {
            p = space.apply_action(&p, &action, 0.1).unwrap();
        }
        let again = space.apply_action(&p, &action, 0.1).unwrap();
        prop_assert_eq!(again, p);
    }

    #[test]
    fn quadratic_is_symmetric_under_permutation(offsets in prop::collection::vec(-0.5f64..0.5, 4), shift in 1usize..4) {
        let space = ParamSpace::default();
        let opt_unit = [0.5; 4];
        let env = quadratic_reference_env(&space.denormalize(&opt_unit).unwrap()).unwrap();
        let at = |o: &[f64]| {
            let unit: Vec<f64> = o.iter().map(|d| 0.5 + d).collect();
            env.evaluate(&space.denormalize(&unit).unwrap()).unwrap().sr.unwrap()
        };
        let mut rotated = offsets.clone();
        rotated.rotate_left(shift);
        prop_assert!((at(&offsets) - at(&rotated)).abs() < 1e-12);
    }
}
