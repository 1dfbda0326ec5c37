use adp_core::bench::{summarize, Trial};
use adp_core::env::EnvConfig;
use adp_core::rl::{accumulate_n_step, RawStep, ReplayBuffer};
use adp_core::schedule::unconstrained_schedule;
use adp_core::*;
use proptest::prelude::*;

fn trial_strategy() -> impl Strategy<Value = (bool, bool, f64, f64)> {
    (any::<bool>(), any::<bool>(), 0.5f64..60.0, 1.0f64..10.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn decoded_actions_give_valid_schedules(raw in prop::array::uniform4(-1.5f64..1.5)) {
        let params = ActionBounds::default().decode(&raw);
        prop_assert!((1.0..=3.0).contains(&params.horizon));
        prop_assert!((5..=30).contains(&params.steps));
        let s = blended_schedule(&params).unwrap();
        prop_assert_eq!(s.len(), params.steps);
        prop_assert!(s.intervals().iter().all(|&d| d > 0.0));
        prop_assert!((s.total() - params.horizon).abs() < 1e-9);
    }

    #[test]
    fn unconstrained_actions_partition_the_horizon(raw in prop::collection::vec(-1.0f64..1.0, 20)) {
        let cfg = EnvConfig { action_space: ActionSpace::Unconstrained, ..EnvConfig::default() };
        let s = cfg.decode(&raw).unwrap();
        prop_assert!((s.total() - cfg.unconstrained_horizon).abs() < 1e-9);
        prop_assert!(s.intervals().iter().all(|&d| d > 0.0));
        let direct = unconstrained_schedule(&raw, 2.0).unwrap();
        prop_assert!((direct.total() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn report_csv_round_trips(rows in prop::collection::vec(prop::collection::vec(trial_strategy(), 11..20), 1..4)) {
        let per_world: Vec<(u64, Vec<Trial>)> = rows
            .iter()
            .enumerate()
            .map(|(w, trials)| {
                let ts = trials
                    .iter()
                    .enumerate()
                    .map(|(run, &(success, collided, at, ot))| {
                        let time = if success { at } else { 50.0 };
                        let score = barn_score(&ScoreInput { success, actual_time: time, optimal_time: ot }).unwrap();
                        Trial { run, success, collided: !success && collided, timeout: !success && !collided, time, score }
                    })
                    .collect();
                (w as u64, ts)
            })
            .collect();
        let report = summarize("m", 1.5, &per_world, 5).unwrap();
        prop_assert_eq!(report.rows.len(), per_world.len() + 1);
        for r in &report.rows {
            prop_assert!((r.success_pct + r.collision_pct + r.timeout_pct - 100.0).abs() < 1e-9);
        }
        prop_assert_eq!(BenchmarkReport::from_csv(&report.to_csv().unwrap()).unwrap(), report);
    }

    #[test]
    fn world_text_round_trips(seed in 0u64..500) {
        let w = generate_world(seed, 16, 14, 0.2, &CaParams::default()).unwrap();
        prop_assert_eq!(OccupancyWorld::from_text(&w.to_text()).unwrap(), w);
    }

    #[test]
    fn n_step_returns_match_direct_sums(
        rewards in prop::collection::vec(-5.0f64..5.0, 1..30),
        terminal in any::<bool>(),
        n in 1usize..8,
    ) {
        let gamma = 0.9;
        let len = rewards.len();
        let steps: Vec<RawStep> = rewards
            .iter()
            .enumerate()
            .map(|(i, &r)| RawStep {
                state: vec![i as f64],
                action: vec![0.0],
                reward: r,
                next_state: vec![i as f64 + 1.0],
                done: terminal && i + 1 == len,
            })
            .collect();
        let ts = accumulate_n_step(&steps, gamma, n);
        prop_assert_eq!(ts.len(), len);
        for (i, t) in ts.iter().enumerate() {
            let m = n.min(len - i);
            let expect: f64 = (0..m).map(|k| gamma.powi(k as i32) * rewards[i + k]).sum();
            prop_assert!((t.n_step_return - expect).abs() < 1e-9);
            let ends_episode = terminal && i + m == len;
            prop_assert_eq!(t.discount_pow == 0.0, ends_episode);
        }
    }

    #[test]
    fn replay_keeps_the_newest_capacity_items(cap in 1usize..50, pushes in 0usize..120) {
        let mut buf = ReplayBuffer::new(cap);
        for i in 0..pushes {
            buf.push(adp_core::rl::Transition {
                state: vec![i as f64],
                action: vec![],
                n_step_return: 0.0,
                bootstrap_state: vec![],
                discount_pow: 0.0,
                n_used: 1,
            });
        }
        prop_assert_eq!(buf.len(), pushes.min(cap));
        let first = pushes.saturating_sub(cap);
        for (k, t) in buf.iter().enumerate() {
            prop_assert_eq!(t.state[0], (first + k) as f64);
        }
    }
}
