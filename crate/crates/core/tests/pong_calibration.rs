use lfcs_core::pong::{
    meets_targets, random_episode, scripted_episode, PongConfig, ScriptedKind, SCORE_TARGETS,
};
use lfcs_core::{Environment, Pong};

#[test]
fn scripted_extremes_hit_targets_on_many_seeds() {
    for target in SCORE_TARGETS {
        let cfg = PongConfig {
            horizon: target.horizon,
            ..PongConfig::pong100()
        };
        for seed in 0..1000 {
            assert_eq!(
                scripted_episode(ScriptedKind::Passive, &cfg, seed).unwrap(),
                target.passive
            );
            assert_eq!(
                scripted_episode(ScriptedKind::OracleTracker, &cfg, seed).unwrap(),
                target.oracle,
                "oracle on T={} seed {seed}",
                target.horizon
            );
        }
    }
}

#[test]
fn oracle_never_concedes() {
    let cfg = PongConfig::pong200();
    for seed in 0..200 {
        let mut env = Pong::new(cfg.clone()).unwrap();
        env.reset(seed);
        while !env.is_done() {
            let a =
                lfcs_core::pong::scripted_policy(ScriptedKind::OracleTracker, env.state(), &cfg);
            let (_, r, _) = env.step_action(a).unwrap();
            assert!(
                r >= 0.0,
                "seed {seed} conceded at frame {}",
                env.state().frame
            );
        }
    }
}

#[test]
fn random_rollouts_stay_within_bounds() {
    for target in SCORE_TARGETS {
        let cfg = PongConfig {
            horizon: target.horizon,
            ..PongConfig::pong100()
        };
        for k in 0..10_000u64 {
            let r = random_episode(&cfg, k, 1_000_003 + k).unwrap();
            assert!(
                (target.passive..=target.oracle).contains(&r),
                "T={} rollout {k} scored {r}",
                target.horizon
            );
        }
    }
}

#[test]
fn observations_stay_in_unit_box() {
    let mut env = Pong::new(PongConfig::pong200()).unwrap();
    for seed in 0..50 {
        let xi = env.reset(seed);
        assert_eq!(xi.len(), 4);
        let mut k = seed;
        loop {
            k = k
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let tr = env.step((k >> 33) as usize % 3).unwrap();
            assert_eq!(tr.xi.len(), 4);
            assert!(tr.xi.iter().all(|x| (0.0..=1.0).contains(x)), "{:?}", tr.xi);
            if tr.done {
                break;
            }
        }
    }
}

#[test]
fn physics_is_deterministic_given_seed_and_actions() {
    let run = || {
        let mut env = Pong::new(PongConfig::pong100()).unwrap();
        env.reset(9);
        let mut trace = Vec::new();
        for t in 0..100 {
            trace.push(env.step(t % 3).unwrap());
        }
        trace
    };
    assert_eq!(run(), run());
}

#[test]
fn default_constants_are_in_the_calibrated_set() {
    assert!(meets_targets(&PongConfig::pong100(), 256).unwrap());
}
