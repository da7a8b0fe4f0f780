use comaze_core::fingerprint::{
    compute_fingerprint_with, pearson, spatial_map, ConstantPolicy, Fingerprint, FingerprintGrid, FnPolicy,
};
use comaze_core::partner::{oracle_action, proportional_action, Partner, PartnerKind, PartnerSpec};
use comaze_core::physics::{PhysicsConfig, TrayGeometry, TraySim, TrayState};
use comaze_core::sac::{ReplayBuffer, SacAgent, SacConfig, Transition};
use comaze_core::session::{run_colearning_session, SessionConfig, TrialRecord};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sim() -> TraySim<f64> {
    TraySim::new(TrayGeometry::default(), PhysicsConfig::default()).unwrap()
}

fn arb_state() -> impl Strategy<Value = TrayState<f64>> {
    let lim = TrayGeometry::default().position_limit();
    (
        (-lim..=lim, -lim..=lim),
        (-1.5f64..1.5, -1.5f64..1.5),
        (-0.1f64..=0.1, -0.1f64..=0.1),
        (-0.4f64..=0.4, -0.4f64..=0.4),
    )
        .prop_map(|((x, y), (vx, vy), (theta, phi), (tr, pr))| TrayState {
            x,
            y,
            vx,
            vy,
            theta,
            phi,
            theta_rate: tr,
            phi_rate: pr,
            captured: false,
        })
}

fn arb_kind() -> impl Strategy<Value = PartnerKind> {
    prop_oneof![
        Just(PartnerKind::Oracle),
        Just(PartnerKind::Noisy),
        Just(PartnerKind::Lazy),
        Just(PartnerKind::Null),
    ]
}

proptest! {
    #[test]
    fn frames_keep_the_ball_on_the_tray(
        s in arb_state(),
        actions in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..40),
    ) {
        let sim = sim();
        let geom = sim.geometry().clone();
        let cfg = sim.config().clone();
        let mut s = s;
        for (a, h) in actions {
            if s.captured {
                break;
            }
            let (next, _) = sim.step_frame(&s, a, h).unwrap();
            for v in next.observation() {
                prop_assert!(v.is_finite());
            }
            prop_assert!(next.x.abs() <= geom.position_limit() + 1e-12);
            prop_assert!(next.y.abs() <= geom.position_limit() + 1e-12);
            prop_assert!(next.theta.abs() <= cfg.max_tilt + 1e-12);
            prop_assert!(next.phi.abs() <= cfg.max_tilt + 1e-12);
            prop_assert!(next.theta_rate.abs() <= cfg.max_tilt_rate + 1e-12);
            s = next;
        }
    }

    #[test]
    fn partner_actions_stay_in_range(s in arb_state(), kind in arb_kind(), seed in any::<u64>()) {
        let spec = PartnerSpec { seed, ..PartnerSpec::of_kind(kind) };
        let mut p = Partner::new(spec, TrayGeometry::default()).unwrap();
        for _ in 0..8 {
            let a: f64 = p.action(&s).unwrap();
            prop_assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn proportional_action_is_bounded(h in -10.0f64..10.0, phi in -10.0f64..10.0) {
        let a = proportional_action(h, phi);
        prop_assert!((-1.0..=1.0).contains(&a));
        prop_assert_eq!(a == 0.0, h == phi);
    }

    #[test]
    fn oracle_ignores_the_agent_axis(s in arb_state(), theta in -0.1f64..0.1, vy in -1.0f64..1.0, tr in -0.4f64..0.4) {
        let g = TrayGeometry::default();
        let spec = PartnerSpec::default();
        let mut t = s;
        t.theta = theta;
        t.theta_rate = tr;
        // The waypoint depends on y only through the side of the barrier.
        t.vy = vy;
        prop_assert_eq!(oracle_action(&s, &g, &spec), oracle_action(&t, &g, &spec));
    }

    #[test]
    fn replay_buffer_keeps_the_newest(cap in 1usize..50, pushes in 0usize..200) {
        let mut b = ReplayBuffer::<f64>::bounded(cap);
        for i in 0..pushes {
            b.push(Transition {
                state: [i as f64; 8],
                action: 0.0,
                reward: -1.0,
                next_state: [0.0; 8],
                done: false,
            });
        }
        prop_assert_eq!(b.len(), pushes.min(cap));
        let first = pushes.saturating_sub(cap);
        for (k, t) in b.iter().enumerate() {
            prop_assert_eq!(t.state[0], (first + k) as f64);
        }
    }

    #[test]
    fn grid_index_round_trips(index in 0usize..1_265_625) {
        let g = FingerprintGrid::standard();
        prop_assert_eq!(g.index(&g.coords(index)), index);
        let s = g.state(index);
        let c = g.coords(index);
        for d in 0..8 {
            prop_assert_eq!(g.axes[d][c[d]], s[d]);
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        pairs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 3..200),
        a in 0.01f64..100.0,
        b in -50.0f64..50.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        if let (Ok(r1), Ok(r2)) = (pearson(&x, &y), pearson(&x, &z)) {
            prop_assert!((r1 - r2).abs() < 1e-9, "{} vs {}", r1, r2);
            prop_assert!((-1.0..=1.0).contains(&r1));
        }
    }

    #[test]
    fn model_documents_round_trip(seed in any::<u64>(), updates in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agent = SacAgent::<f32>::new(SacConfig { batch_size: 8, ..Default::default() }, &mut rng).unwrap();
        let mut buf = ReplayBuffer::unbounded();
        buf.push(Transition { state: [0.1; 8], action: 0.5, reward: -1.0, next_state: [0.2; 8], done: false });
        for _ in 0..updates {
            agent.gradient_update(&buf, &mut rng).unwrap();
        }
        let bytes = agent.to_bytes();
        let back = SacAgent::<f32>::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
        prop_assert_eq!(back.update_count(), agent.update_count());
    }
}

#[test]
fn fingerprint_of_constant_policy_is_constant() {
    let g = FingerprintGrid::standard();
    let f = compute_fingerprint_with(&ConstantPolicy(0.25f32), &g, "c", 50_000, true).unwrap();
    assert_eq!(f.actions.len(), 1_265_625);
    assert!(f.actions.iter().all(|&a| a == 0.25));
}

#[test]
fn chunked_parallel_fingerprint_matches_sequential() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let agent = SacAgent::<f32>::new(
        SacConfig {
            output_init_scale: 1.0,
            ..Default::default()
        },
        &mut rng,
    )
    .unwrap();
    let g = FingerprintGrid::standard();
    let seq = compute_fingerprint_with(&agent, &g, "a", g.len(), false).unwrap();
    let par = compute_fingerprint_with(&agent, &g, "a", 7_777, true).unwrap();
    assert_eq!(seq, par);
    assert!(seq.actions.iter().all(|a| (-1.0..=1.0).contains(a)));
    let again = compute_fingerprint_with(&agent, &g, "a", 15_625, true).unwrap();
    assert_eq!(again, seq);

    let bytes = par.to_bytes(&g);
    assert_eq!(Fingerprint::<f32>::from_bytes(&bytes, &g).unwrap(), par);
    assert!(Fingerprint::<f64>::from_bytes(&bytes, &g).is_err());
    assert!(Fingerprint::<f32>::from_bytes(&bytes[..bytes.len() - 1], &g).is_err());
}

#[test]
fn spatial_map_isolates_one_cell() {
    let g = FingerprintGrid::standard();
    let base = FnPolicy(|s: &[f64; 8]| (3.0 * s[2] + s[5] + 0.5 * s[7]).tanh());
    let (cx, cy) = (g.axes[0][6], g.axes[1][2]);
    let altered = FnPolicy(move |s: &[f64; 8]| {
        let a = (3.0 * s[2] + s[5] + 0.5 * s[7]).tanh();
        if s[0] == cx && s[1] == cy {
            (2.0 * s[3] - s[4]).tanh()
        } else {
            a
        }
    });
    let f1 = compute_fingerprint_with(&base, &g, "base", 15_625, true).unwrap();
    let f2 = compute_fingerprint_with(&altered, &g, "altered", 15_625, true).unwrap();
    let m = spatial_map(&f1, &f2, &g).unwrap();
    assert_eq!((m.cells.len(), m.cells[0].len()), (9, 9));
    let below: Vec<(usize, usize)> = (0..9)
        .flat_map(|i| (0..9).map(move |j| (i, j)))
        .filter(|&(i, j)| m.cells[i][j].unwrap() < 1.0 - 1e-12)
        .collect();
    assert_eq!(below, vec![(6, 2)]);

    let self_map = spatial_map(&f1, &f1, &g).unwrap();
    assert!(self_map.defined().all(|r| (r - 1.0).abs() < 1e-12));

    let flat = compute_fingerprint_with(&ConstantPolicy(0.0f64), &g, "flat", 15_625, true).unwrap();
    let undefined = spatial_map(&f1, &flat, &g).unwrap();
    assert_eq!(undefined.defined().count(), 0);
    assert!(undefined.to_csv().contains("NA"));
}

#[test]
fn short_session_accounting_and_spawn_cycle() {
    let sim = TraySim::<f32>::new(TrayGeometry::default(), PhysicsConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agent = SacAgent::<f32>::new(SacConfig::default(), &mut rng).unwrap();
    let mut partner = Partner::new(PartnerSpec::default(), TrayGeometry::default()).unwrap();
    let cfg = SessionConfig {
        trials_per_block: 2,
        blocks: 2,
        updates_per_trial_end: 5,
        ..Default::default()
    };
    let out = run_colearning_session(&mut agent, &mut partner, &sim, &cfg, &mut rng, &mut ()).unwrap();
    assert_eq!(out.records.len(), 4);
    assert_eq!(agent.update_count(), 20);
    assert_eq!(out.curve.successes.len(), 2);
    let corners: Vec<usize> = out.records.iter().map(|r| r.spawn_corner).collect();
    assert_eq!(corners, vec![0, 1, 2, 0]);
    for r in &out.records {
        assert_eq!(TrialRecord::from_json_line(&r.to_json_line()).unwrap(), *r);
        assert!(r.train && r.partner == "oracle");
    }
}
