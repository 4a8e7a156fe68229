//! Property tests over the invariants of every module, driven through the
//! public API.

use std::f64::consts::PI;

use crate::arm_kinematics::{
    elbow_position, forward_kinematics, min_jerk_profile, participant_arm, plan_reach, solve_ik,
    JointPose, MAX_ELBOW_SPEED,
};
use crate::dataset::{
    build_sequence_dataset, BoardLayout, Episode, EpisodeMeta, FeatureMask, LabelScaler, NormStats,
    Sample, Square, MASK_NAMES,
};
use crate::geom::{vee, Mat3, Vec3};
use crate::imu_synth::{
    angular_velocity, segment_rotation, simulate_episode, EpisodeSetup, MountConfig, NoiseConfig,
    Segment, SimConfig,
};
use crate::models::{GammaConfig, GammaNet, InputMode, LstmPosConfig, LstmPosNet};
use crate::nn::{lstm_cell_step, Adam, AdamConfig, Param, Tensor};
use crate::streaming::{
    rendezvous_step, run_campaign, CampaignConfig, OraclePredictor, RobotConfig, RobotState,
};
use crate::training::{curriculum_segment, fit_phi, EvalReport, PhiSetup, TrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arm() -> crate::ArmModel {
    participant_arm()
}

fn pose() -> impl Strategy<Value = JointPose<f64>> {
    (0.0..PI, -PI..PI, 0.0..PI, -PI..PI).prop_map(|(a, b, c, d)| JointPose::new(a, b, c, d))
}

fn interior_pose() -> impl Strategy<Value = JointPose<f64>> {
    (0.2..PI - 0.2, -PI..PI, 0.2..PI - 0.2, -PI..PI)
        .prop_map(|(a, b, c, d)| JointPose::new(a, b, c, d))
}

fn ramp(len: usize, hold: usize, offset: f64) -> Episode {
    let samples = (0..len)
        .map(|k| {
            let s = k.min(hold) as f64;
            let mut x = [0.0; 18];
            for (i, v) in x.iter_mut().enumerate() {
                *v = offset + (k as f64 * 0.1 + i as f64).sin();
            }
            Sample {
                t: k as f64 / 60.0,
                x,
                p: [offset + 0.001 * s, 0.3 + 0.002 * s, -0.1],
            }
        })
        .collect();
    Episode {
        rate: 60.0,
        samples,
        meta: EpisodeMeta {
            id: format!("r{len}-{offset}"),
            square: Some(Square { row: 0, col: 0 }),
            ..EpisodeMeta::default()
        },
    }
}

#[test]
fn fk_never_exceeds_span_on_a_dense_sweep() {
    use rand::Rng;
    let a = arm();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100_000 {
        let q = JointPose::new(
            rng.random_range(0.0..PI),
            rng.random_range(-PI..PI),
            rng.random_range(0.0..PI),
            rng.random_range(-PI..PI),
        );
        assert!(forward_kinematics(&q, &a).norm() <= a.span() * (1.0 + 1e-15));
    }
}

#[test]
fn min_jerk_boundaries() {
    let (s, ds, dds) = min_jerk_profile(0.0f64).unwrap();
    assert!(s.abs() < 1e-12 && ds.abs() < 1e-12 && dds.abs() < 1e-12);
    let (s, ds, dds) = min_jerk_profile(1.0f64).unwrap();
    assert!((s - 1.0).abs() < 1e-12 && ds.abs() < 1e-12 && dds.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ik_round_trip(q in pose(), seed in pose()) {
        let a = arm();
        let target = forward_kinematics(&q, &a);
        let sol = solve_ik(target, &a, &seed).unwrap();
        prop_assert!((forward_kinematics(&sol, &a) - target).norm() < 1e-6);
        prop_assert!(sol.within_limits());
    }

    #[test]
    fn min_jerk_is_monotone(t0 in 0.0f64..1.0, t1 in 0.0f64..1.0) {
        let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        let (a, da, _) = min_jerk_profile(lo).unwrap();
        let (b, _, _) = min_jerk_profile(hi).unwrap();
        prop_assert!(a <= b + 1e-15);
        prop_assert!((0.0..=1.0).contains(&a) && da >= 0.0);
    }

    #[test]
    fn reach_holds_and_rates_match_differences(
        q0 in (0.1..0.5f64, -0.4..0.6f64, 1.3..2.9f64, -0.6..0.8f64),
        col in 0usize..7, row in 0usize..6, tf in 0.9f64..1.7,
    ) {
        let a = arm();
        let q0 = JointPose::new(q0.0, q0.1, q0.2, q0.3);
        let board = BoardLayout::default();
        let target = Vec3::from_array(board.square_center(Square { row, col }));
        let rate = 240.0;
        let tf = (tf * 60.0).round() / 60.0;
        let Ok(traj) = plan_reach(&q0, target, tf, 2.0, &a, rate) else {
            // Branch switches are rejected by design; nothing to check.
            return Ok(());
        };
        let hs = traj.hold_start();
        let qf = traj.samples[hs].q;
        for s in &traj.samples[hs..] {
            prop_assert_eq!(s.q, qf);
            prop_assert!(s.qdot.iter().all(|v| *v == 0.0));
        }
        let h = 1.0 / rate;
        for k in 1..hs.saturating_sub(1) {
            let (p, n) = (traj.samples[k - 1].q.to_array(), traj.samples[k + 1].q.to_array());
            for j in 0..4 {
                let mut d = n[j] - p[j];
                if j % 2 == 1 {
                    d = (d + PI).rem_euclid(2.0 * PI) - PI;
                }
                let fd = d / (2.0 * h);
                prop_assert!((fd - traj.samples[k].qdot[j]).abs() < 1e-3,
                    "k={} j={} fd={} analytic={}", k, j, fd, traj.samples[k].qdot[j]);
            }
        }
        let mut prev = elbow_position(&q0, &a);
        for s in &traj.samples {
            let e = elbow_position(&s.q, &a);
            prop_assert!((e - prev).norm() <= MAX_ELBOW_SPEED / rate);
            prev = e;
        }
    }

    #[test]
    fn angular_velocity_matches_rotation_differences(
        q in interior_pose(),
        qdot in prop::array::uniform4(-3.0f64..3.0),
        roll in -0.5f64..0.5,
    ) {
        let mount = MountConfig { roll, anchor_shift: 0.0 };
        let h = 1e-6;
        for seg in [Segment::UpperArm, Segment::Forearm] {
            let shifted = |s: f64| {
                let a = q.to_array();
                JointPose::from_array([0, 1, 2, 3].map(|i| a[i] + s * qdot[i]))
            };
            let (rp, _) = segment_rotation(&shifted(h), seg, &mount);
            let (rm, _) = segment_rotation(&shifted(-h), seg, &mount);
            let (r, _) = segment_rotation(&q, seg, &mount);
            let mut rdot = Mat3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    rdot.m[i][j] = (rp.m[i][j] - rm.m[i][j]) / (2.0 * h);
                }
            }
            let fd = vee(&r.transpose().mul_mat(&rdot));
            let w = angular_velocity(&q, &qdot, seg, &mount);
            prop_assert!((fd - w).norm() < 1e-4, "{:?} vs {:?}", fd, w);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_episode_physics(
        col in 0usize..7, row in 0usize..6, yaw in -0.35f64..0.35, roll in -0.3f64..0.3,
    ) {
        let a = arm();
        let q0 = JointPose::new(0.3, 0.1, 2.0, 0.2);
        let target = Mat3::rot_z(-yaw).mul_vec(Vec3::from_array(BoardLayout::default().square_center(Square { row, col })));
        let Ok(traj) = plan_reach(&q0, target, 1.2, 2.0, &a, 240.0) else { return Ok(()); };
        let mut setup = EpisodeSetup::default();
        setup.torso_yaw = yaw;
        setup.wrist.mount.roll = roll;
        let sim = SimConfig { noise: NoiseConfig::noiseless(), ..SimConfig::default() };
        let ep = simulate_episode(&traj, &a, &setup, &sim, 0).unwrap();
        let b = sim.env.magnetic.norm();
        for s in &ep.samples {
            for band in 0..2 {
                let m = Vec3::new(s.x[band * 9 + 6], s.x[band * 9 + 7], s.x[band * 9 + 8]);
                prop_assert!((m.norm() - b).abs() < 1e-9);
            }
        }
        let qf = traj.samples.last().unwrap().q;
        let (rs, _) = segment_rotation(&qf, Segment::Forearm, &setup.wrist.mount);
        let r = Mat3::rot_z(yaw).mul_mat(&rs);
        let expect = r.transpose().mul_vec(-sim.env.gravity);
        let hs = ep.hold_start();
        for s in &ep.samples[hs + 1..] {
            let acc = Vec3::new(s.x[0], s.x[1], s.x[2]);
            prop_assert!((acc - expect).norm() < 1e-6);
            prop_assert!(s.x[3..6].iter().chain(&s.x[12..15]).all(|v| *v == 0.0));
        }
    }

    #[test]
    fn windows_stay_inside_episodes(lens in prop::collection::vec(1usize..40, 1..6), h in 1usize..12) {
        let eps: Vec<Episode> = lens.iter().enumerate().map(|(i, &n)| ramp(n, n / 2, i as f64)).collect();
        let mask = FeatureMask::named("all").unwrap();
        let result = build_sequence_dataset(&eps, h, &mask);
        if lens.iter().any(|&n| n < h) {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let ds = result.unwrap();
        let expect: usize = lens.iter().map(|&n| n + 1 - h).sum();
        prop_assert_eq!(ds.len(), expect);
        for i in 0..ds.len() {
            let (e, end) = ds.windows[i];
            prop_assert!(end + 1 >= h && end < lens[e]);
            let w = ds.window(i);
            prop_assert_eq!(w.len(), h * 18);
            prop_assert_eq!(&w[(h - 1) * 18..], &eps[e].samples[end].x[..]);
            prop_assert_eq!(ds.label(i), eps[e].target());
        }
    }

    #[test]
    fn masks_keep_feature_order(x in prop::array::uniform18(-5.0f64..5.0)) {
        for name in MASK_NAMES {
            let m = FeatureMask::named(name).unwrap();
            let y = m.apply(&x);
            prop_assert!(m.indices.windows(2).all(|w| w[0] < w[1]));
            let picked: Vec<f64> = m.indices.iter().map(|&i| x[i]).collect();
            prop_assert_eq!(y, picked);
        }
    }

    #[test]
    fn label_scaling_round_trips(p in prop::array::uniform3(-1.0f64..1.0),
                                 c in prop::array::uniform3(-0.5f64..0.5), s in 0.01f64..2.0) {
        let l = LabelScaler { center: c, scale: s };
        let back = l.denormalize(&l.normalize(&p));
        for i in 0..3 {
            prop_assert!((back[i] - p[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn lstm_activations_stay_bounded(
        x in prop::collection::vec(-50.0f64..50.0, 3),
        h in prop::collection::vec(-1.0f64..1.0, 4),
        c in prop::collection::vec(-20.0f64..20.0, 4),
        wseed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(wseed);
        let w = Tensor::from_vec(&[16, 7], (0..112).map(|_| rng.random_range(-4.0..4.0)).collect());
        let b = Tensor::from_vec(&[16], (0..16).map(|_| rng.random_range(-4.0..4.0)).collect());
        let (hn, _, cache) = lstm_cell_step(&x, &h, &c, &w, &b).unwrap();
        let (gates, cand) = cache.gates.split_at(12);
        prop_assert!(gates.iter().all(|g| (0.0..=1.0).contains(g)));
        prop_assert!(cand.iter().all(|v| (-1.0..=1.0).contains(v)));
        prop_assert!(hn.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn adam_ignores_zero_gradients(vals in prop::collection::vec(-3.0f64..3.0, 1..20), steps in 1usize..5) {
        let mut p = Param::new("p", Tensor::from_vec(&[vals.len()], vals.clone()));
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..steps {
            adam.update(&mut [&mut p]).unwrap();
        }
        prop_assert_eq!(&p.value.data, &vals);
    }

    #[test]
    fn zero_dropout_is_invariant_to_width(a in 1usize..6, seed in any::<u64>()) {
        let mask = FeatureMask::named("all").unwrap();
        let labels = LabelScaler { center: [0.0, 0.33, -0.08], scale: 0.2 };
        let make = |a: usize| {
            let cfg = LstmPosConfig { mode: InputMode::RawOnly, a, b: 1, m: 5, h: 4, dropout: 0.0, seed, ..LstmPosConfig::default() };
            LstmPosNet::new(cfg, mask.clone(), NormStats::identity(18), labels).unwrap()
        };
        let (one, many) = (make(1), make(a));
        let xn: Vec<f64> = (0..2 * 4 * 18).map(|i| (i as f64 * 0.37).cos()).collect();
        let (y1, _) = one.forward_train(&xn, 2, 7);
        let (ya, _) = many.forward_train(&xn, 2, 7);
        for (p, q) in y1.iter().zip(&ya) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        prop_assert_eq!(one.forward_normalized(&xn, 2), many.forward_normalized(&xn, 2));
    }

    #[test]
    fn curriculum_stages_nest(count in 1usize..300, segments in 1usize..12) {
        let seg: Vec<usize> = (0..count).map(|p| curriculum_segment(p, count, segments)).collect();
        prop_assert!(seg.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(seg.iter().all(|&s| s < segments));
        prop_assert_eq!(seg[0], 0);
    }

    #[test]
    fn report_is_order_invariant(errs in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 1..8), 1..8),
                                 rot in 0usize..8) {
        let eps: Vec<Episode> = (0..errs.len()).map(|i| ramp(10, 5, i as f64 * 0.01)).collect();
        let errors: Vec<Vec<(usize, f64)>> = errs.iter().map(|e| e.iter().copied().enumerate().collect()).collect();
        let board = BoardLayout::default();
        let a = EvalReport::from_errors(&board, &eps, &errors);
        let k = rot % eps.len();
        let mut eps2 = eps.clone();
        let mut err2 = errors.clone();
        eps2.rotate_left(k);
        err2.rotate_left(k);
        let b = EvalReport::from_errors(&board, &eps2, &err2);
        prop_assert!((a.mean_mm - b.mean_mm).abs() < 1e-9);
        prop_assert!((a.std_mm - b.std_mm).abs() < 1e-9);
    }

    #[test]
    fn robot_step_respects_speed_bound(
        pos in prop::array::uniform3(-1.0f64..1.0), goal in prop::array::uniform3(-1.0f64..1.0),
        v in 0.0f64..3.0, dt in 1e-3f64..0.1,
    ) {
        let r = RobotState::new(pos, v);
        let n = rendezvous_step(&r, goal, dt);
        let d = |a: &[f64; 3], b: &[f64; 3]| ((a[0]-b[0]).powi(2) + (a[1]-b[1]).powi(2) + (a[2]-b[2]).powi(2)).sqrt();
        prop_assert!(d(&n.pos, &pos) <= v * dt + 1e-12);
        prop_assert!(d(&n.pos, &goal) <= d(&pos, &goal) + 1e-12);
        prop_assert_eq!(n.goal, Some(goal));
    }

    #[test]
    fn campaign_rate_ignores_order(n in 2usize..6, rot in 0usize..6, thr in 0.0f64..200.0, v in 0.0f64..1.5) {
        let eps: Vec<Episode> = (0..n).map(|i| ramp(40, 20, i as f64 * 0.05)).collect();
        let cfg = CampaignConfig { robot: RobotConfig { threshold_mm: thr, v_max: v, ..RobotConfig::default() }, paced: false };
        let mut o = OraclePredictor::new(10);
        let a = run_campaign(&eps, &mut o, &cfg).unwrap();
        let mut eps2 = eps.clone();
        eps2.rotate_left(rot % n);
        let b = run_campaign(&eps2, &mut o, &cfg).unwrap();
        prop_assert_eq!(a.success_rate, b.success_rate);
        for t in &a.trials {
            prop_assert_eq!(t.success, t.final_distance_mm <= thr);
            let mut prev = cfg.robot.start;
            for s in &t.log {
                let step = ((s.robot[0]-prev[0]).powi(2) + (s.robot[1]-prev[1]).powi(2) + (s.robot[2]-prev[2]).powi(2)).sqrt();
                prop_assert!(step <= v / 60.0 + 1e-12);
                prev = s.robot;
            }
        }
    }
}

#[test]
fn training_the_target_network_leaves_gamma_untouched() {
    let mask = FeatureMask::named("all").unwrap();
    let labels = LabelScaler {
        center: [0.0, 0.33, -0.08],
        scale: 0.2,
    };
    let gamma = GammaNet::new(
        GammaConfig {
            hidden: vec![8],
            seed: 1,
        },
        mask.clone(),
        NormStats::identity(18),
        labels,
    )
    .unwrap();
    let before = gamma.to_weight_file().to_bytes();
    let eps: Vec<Episode> = (0..4).map(|i| ramp(20, 10, i as f64 * 0.02)).collect();
    let setup = PhiSetup {
        model: LstmPosConfig {
            mode: InputMode::Concat,
            a: 2,
            b: 1,
            m: 4,
            h: 5,
            ..LstmPosConfig::default()
        },
        train: TrainConfig {
            epochs: 2,
            batch_size: 8,
            ..TrainConfig::default()
        },
        curriculum: None,
    };
    fit_phi(&eps, &eps[..1], &mask, Some(&gamma), &setup).unwrap();
    assert_eq!(gamma.to_weight_file().to_bytes(), before);
}

#[test]
fn inference_survives_save_and_load() {
    let mask = FeatureMask::named("accel_mag").unwrap();
    let labels = LabelScaler {
        center: [0.0, 0.33, -0.08],
        scale: 0.2,
    };
    let d = InputMode::Concat.width(mask.dim());
    let cfg = LstmPosConfig {
        mode: InputMode::Concat,
        a: 3,
        b: 2,
        m: 6,
        h: 7,
        seed: 4,
        ..LstmPosConfig::default()
    };
    let phi = LstmPosNet::new(cfg, mask, NormStats::identity(d), labels).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phi.rchw");
    phi.save(&path).unwrap();
    let back = LstmPosNet::load(&path).unwrap();
    let x: Vec<f64> = (0..7 * d).map(|i| (i as f64 * 0.11).sin()).collect();
    let (p, q) = (phi.predict(&x).unwrap(), back.predict(&x).unwrap());
    assert_eq!(p.map(f64::to_bits), q.map(f64::to_bits));
    assert_eq!(phi.predict(&x).unwrap(), p);
}
