use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arm_kinematics::{participant_arm, plan_reach, ArmModel, JointPose};
use crate::geom::{Mat3, Vec3};
use crate::imu_synth::{
    draw_bias, perturb_mount, simulate_episode, BandSetup, EpisodeSetup, MountConfig,
    PerturbRanges, SimConfig,
};
use crate::seed::{derive_seed, derive_seed2};

use super::{split_episodes, BoardLayout, DatasetError, Episode, EpisodeMeta, Square};

const STREAM_EPISODE: u64 = 1;
const STREAM_MOUNT: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_SPLIT: u64 = 4;
const MAX_ATTEMPTS: u64 = 32;

/// Uniform ranges (rad) of the resting pose each reach starts from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPoseRanges {
    pub theta_elv: [f64; 2],
    pub theta_yaw: [f64; 2],
    pub phi_elv: [f64; 2],
    pub phi_yaw: [f64; 2],
}

impl Default for InitialPoseRanges {
    fn default() -> Self {
        Self {
            theta_elv: [0.1, 0.5],
            theta_yaw: [-0.4, 0.6],
            phi_elv: [1.3, 2.9],
            phi_yaw: [-0.6, 0.8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub board: BoardLayout,
    /// Use only the first `n` board squares (row-major) when set.
    pub squares: Option<usize>,
    pub arm: ArmModel<f64>,
    pub train_per_square: usize,
    pub test_per_square: usize,
    /// Output rate (Hz).
    pub rate: f64,
    /// Episode horizon T (s).
    pub horizon: f64,
    /// Internal trajectory rate (Hz); an integer multiple of `rate`.
    pub dense_rate: f64,
    /// Reach duration range (s); draws are rounded to the output grid.
    pub t_f: [f64; 2],
    /// Torso yaw half-width (rad).
    pub torso_yaw: f64,
    pub initial_pose: InitialPoseRanges,
    pub sim: SimConfig<f64>,
    pub perturb: PerturbRanges,
    /// Episodes recorded between band re-strappings.
    pub remount_every: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            board: BoardLayout::default(),
            squares: None,
            arm: participant_arm(),
            train_per_square: 20,
            test_per_square: 8,
            rate: 60.0,
            horizon: 2.0,
            dense_rate: 240.0,
            t_f: [0.9, 1.7],
            torso_yaw: 20f64.to_radians(),
            initial_pose: InitialPoseRanges::default(),
            sim: SimConfig::default(),
            perturb: PerturbRanges::default(),
            remount_every: 10,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn per_square(&self) -> usize {
        self.train_per_square + self.test_per_square
    }

    /// Squares episodes are generated for.
    pub fn active_squares(&self) -> Vec<Square> {
        let n = self.squares.unwrap_or(usize::MAX);
        self.board.squares().take(n).collect()
    }

    pub fn total_episodes(&self) -> usize {
        self.per_square() * self.active_squares().len()
    }
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

fn band_setup(cfg: &GenConfig, block: usize, band: u64) -> BandSetup<f64> {
    let s = derive_seed2(cfg.seed, STREAM_MOUNT, block as u64 * 2 + band);
    BandSetup {
        mount: perturb_mount(&MountConfig::default(), &cfg.perturb, derive_seed(s, 0)),
        bias: draw_bias(&cfg.sim.noise, derive_seed(s, 1)),
    }
}

/// Generates `per_square()` episodes for every board square, visiting
/// squares round-robin so consecutive episodes cover the whole board. The
/// bands are re-strapped (new mount perturbation and bias) every
/// `remount_every` episodes.
pub fn generate_episodes(cfg: &GenConfig) -> Result<Vec<Episode>, DatasetError> {
    let squares = cfg.active_squares();
    let n = squares.len() * cfg.per_square();
    let mut out = Vec::with_capacity(n);
    let remount = cfg.remount_every.max(1);
    let mut setup_cache: Option<(usize, BandSetup<f64>, BandSetup<f64>)> = None;
    for i in 0..n {
        let sq = squares[i % squares.len()];
        let block = i / remount;
        if setup_cache.as_ref().map(|c| c.0) != Some(block) {
            setup_cache = Some((block, band_setup(cfg, block, 0), band_setup(cfg, block, 1)));
        }
        let (_, wrist, upper) = setup_cache.unwrap();
        let ep_seed = derive_seed2(cfg.seed, STREAM_EPISODE, i as u64);
        let mut last_err = String::new();
        let mut done = None;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ep_seed, attempt));
            let target_world = cfg.board.random_point(sq, &mut rng);
            let yaw = if cfg.torso_yaw > 0.0 {
                rng.random_range(-cfg.torso_yaw..=cfg.torso_yaw)
            } else {
                0.0
            };
            let t_f = (draw(&mut rng, cfg.t_f) * cfg.rate).round().max(1.0) / cfg.rate;
            let ip = &cfg.initial_pose;
            let q0 = JointPose::new(
                draw(&mut rng, ip.theta_elv),
                draw(&mut rng, ip.theta_yaw),
                draw(&mut rng, ip.phi_elv),
                draw(&mut rng, ip.phi_yaw),
            );
            // The arm lives in the torso frame; the board in the world frame.
            let target = Mat3::rot_z(-yaw).mul_vec(Vec3::from_array(target_world));
            let traj = match plan_reach(&q0, target, t_f, cfg.horizon, &cfg.arm, cfg.dense_rate) {
                Ok(t) => t,
                Err(e) => {
                    log::debug!("episode {i} attempt {attempt}: {e}");
                    last_err = e.to_string();
                    continue;
                }
            };
            let setup = EpisodeSetup {
                wrist,
                upper,
                torso_yaw: yaw,
            };
            let noise_seed = derive_seed2(cfg.seed, STREAM_NOISE, i as u64);
            let mut ep =
                simulate_episode(&traj, &cfg.arm, &setup, &cfg.sim, noise_seed).map_err(|e| {
                    DatasetError::Generation {
                        index: i,
                        message: e.to_string(),
                    }
                })?;
            ep.meta = EpisodeMeta {
                id: format!("ep{i:05}"),
                seed: ep_seed,
                arm: cfg.arm,
                torso_yaw: yaw,
                t_f,
                square: Some(sq),
                mount_block: block,
            };
            done = Some(ep);
            break;
        }
        match done {
            Some(ep) => out.push(ep),
            None => {
                return Err(DatasetError::Generation {
                    index: i,
                    message: last_err,
                })
            }
        }
    }
    Ok(out)
}

/// Generates the corpus and holds out `test_per_square` episodes of every
/// square; returns `(train, test)`.
pub fn generate_split(cfg: &GenConfig) -> Result<(Vec<Episode>, Vec<Episode>), DatasetError> {
    let all = generate_episodes(cfg)?;
    split_episodes(
        all,
        cfg.test_per_square,
        derive_seed(cfg.seed, STREAM_SPLIT),
    )
}
