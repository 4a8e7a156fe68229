//! Simulated two-band wearable: accelerometer, gyroscope and magnetometer on
//! the upper arm and on the wrist, driven by a ground-truth joint trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm_kinematics::{ArmModel, JointPose, JointTrajectory};
use crate::dataset::{Episode, EpisodeMeta, Sample, STATE_DIM};
use crate::geom::{vee, Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImuError {
    #[error("trajectory has {0} samples, at least two are required")]
    TooShort(usize),
    #[error(
        "dense rate {dense} Hz is not an integer multiple (>= 2) of the output rate {output} Hz"
    )]
    RateMismatch { dense: f64, output: f64 },
    #[error("trajectory covers {available} output samples, {required} requested")]
    HorizonTooShort { available: usize, required: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    UpperArm,
    Forearm,
}

/// How a band sits on its segment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MountConfig<T> {
    /// Rotation of the band about the segment axis (rad).
    pub roll: T,
    /// Shift of the band along the segment, proximal to distal (m).
    pub anchor_shift: T,
}

/// Nominal band positions as fractions along each segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorLayout<T> {
    pub upper_anchor: T,
    pub wrist_anchor: T,
}

impl<T: Real> Default for SensorLayout<T> {
    fn default() -> Self {
        Self {
            upper_anchor: T::lit(0.6),
            wrist_anchor: T::lit(0.9),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig<T> {
    pub accel_sigma: T,
    pub gyro_sigma: T,
    pub mag_sigma: T,
    pub accel_bias_sigma: T,
    pub gyro_bias_sigma: T,
    pub mag_bias_sigma: T,
}

impl<T: Real> NoiseConfig<T> {
    pub fn noiseless() -> Self {
        let z = T::zero();
        Self {
            accel_sigma: z,
            gyro_sigma: z,
            mag_sigma: z,
            accel_bias_sigma: z,
            gyro_bias_sigma: z,
            mag_bias_sigma: z,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.accel_sigma,
            self.gyro_sigma,
            self.mag_sigma,
            self.accel_bias_sigma,
            self.gyro_bias_sigma,
            self.mag_bias_sigma,
        ]
        .iter()
        .all(|s| *s >= T::zero())
    }
}

impl<T: Real> Default for NoiseConfig<T> {
    fn default() -> Self {
        Self {
            accel_sigma: T::lit(0.05),
            gyro_sigma: T::lit(0.005),
            mag_sigma: T::lit(0.01),
            accel_bias_sigma: T::lit(0.05),
            gyro_bias_sigma: T::lit(0.005),
            mag_bias_sigma: T::lit(0.01),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig<T> {
    /// Gravitational acceleration in the world frame (m/s²).
    pub gravity: Vec3<T>,
    /// Magnetic field in the world frame (normalised units).
    pub magnetic: Vec3<T>,
}

impl<T: Real> Default for EnvConfig<T> {
    fn default() -> Self {
        Self {
            gravity: Vec3::new(T::zero(), T::zero(), T::lit(-9.81)),
            magnetic: Vec3::new(T::lit(0.4), T::lit(0.9), T::lit(-0.2)).normalized(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ImuReading<T> {
    /// Specific force in the body frame (m/s²).
    pub accel: Vec3<T>,
    /// Angular rate in the body frame (rad/s).
    pub gyro: Vec3<T>,
    /// Magnetic field in the body frame.
    pub mag: Vec3<T>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImuBias<T> {
    pub accel: Vec3<T>,
    pub gyro: Vec3<T>,
    pub mag: Vec3<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentFrame<T> {
    /// World-from-body rotation.
    pub rotation: Mat3<T>,
    /// Band position as a fraction of the segment length from its proximal end.
    pub anchor: T,
    /// The segment axis was within 1e-6 of world z and the frame was built
    /// against world y instead.
    pub degenerate: bool,
}

/// One band's physical placement and calibration offsets for an episode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BandSetup<T> {
    pub mount: MountConfig<T>,
    pub bias: ImuBias<T>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup<T> {
    pub wrist: BandSetup<T>,
    pub upper: BandSetup<T>,
    /// Yaw of the whole arm about the shoulder (rad).
    pub torso_yaw: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig<T> {
    pub noise: NoiseConfig<T>,
    pub env: EnvConfig<T>,
    pub layout: SensorLayout<T>,
    /// Output sample rate (Hz).
    pub output_rate: T,
}

impl<T: Real> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            noise: NoiseConfig::default(),
            env: EnvConfig::default(),
            layout: SensorLayout::default(),
            output_rate: T::lit(60.0),
        }
    }
}

fn segment_angles<T: Real>(q: &JointPose<T>, segment: Segment) -> (T, T, T) {
    match segment {
        Segment::UpperArm => (q.theta_elv, q.theta_yaw, -T::one()),
        Segment::Forearm => (q.phi_elv, q.phi_yaw, T::one()),
    }
}

/// Unit vector along the segment, proximal to distal.
pub fn segment_direction<T: Real>(q: &JointPose<T>, segment: Segment) -> Vec3<T> {
    let (e, y, sz) = segment_angles(q, segment);
    let (se, ce) = e.sin_cos();
    let (sy, cy) = y.sin_cos();
    Vec3::new(se * sy, se * cy, sz * ce)
}

/// Frame and its time derivative for given joint angles and rates.
fn frame_with_rate<T: Real>(
    q: &JointPose<T>,
    qdot: &[T; 4],
    segment: Segment,
    mount: &MountConfig<T>,
) -> (Mat3<T>, Mat3<T>, bool) {
    let (e, y, sz) = segment_angles(q, segment);
    let (edot, ydot) = match segment {
        Segment::UpperArm => (qdot[0], qdot[1]),
        Segment::Forearm => (qdot[2], qdot[3]),
    };
    let (se, ce) = e.sin_cos();
    let (sy, cy) = y.sin_cos();
    let x = Vec3::new(se * sy, se * cy, sz * ce);
    let xdot = Vec3::new(ce * sy, ce * cy, -sz * se).scale(edot)
        + Vec3::new(se * cy, -se * sy, T::zero()).scale(ydot);

    let gram = |r: Vec3<T>| r - x.scale(r.dot(x));
    let mut reference = Vec3::unit_z();
    let mut w = gram(reference);
    let mut degenerate = false;
    if w.norm() < T::lit(1e-6) {
        degenerate = true;
        reference = Vec3::unit_y();
        w = gram(reference);
    }
    let wdot = -(x.scale(reference.dot(xdot)) + xdot.scale(reference.dot(x)));
    let wn = w.norm();
    let z = w.scale(T::one() / wn);
    let zdot = (wdot - z.scale(z.dot(wdot))).scale(T::one() / wn);
    let yb = z.cross(x);
    let ybdot = zdot.cross(x) + z.cross(xdot);

    let roll = Mat3::rot_x(mount.roll);
    let r = Mat3::from_columns(x, yb, z).mul_mat(&roll);
    let rdot = Mat3::from_columns(xdot, ybdot, zdot).mul_mat(&roll);
    (r, rdot, degenerate)
}

/// World-from-body rotation of a band: body x along the segment, body z as
/// close to world up as the segment allows, then the mount roll about x.
pub fn segment_rotation<T: Real>(
    q: &JointPose<T>,
    segment: Segment,
    mount: &MountConfig<T>,
) -> (Mat3<T>, bool) {
    let (r, _, degenerate) = frame_with_rate(q, &[T::zero(); 4], segment, mount);
    (r, degenerate)
}

fn segment_length<T: Real>(arm: &ArmModel<T>, segment: Segment) -> T {
    match segment {
        Segment::UpperArm => arm.upper,
        Segment::Forearm => arm.fore,
    }
}

/// Band anchor fraction after the mount shift, clamped to the segment.
pub fn anchor_fraction<T: Real>(
    segment: Segment,
    mount: &MountConfig<T>,
    arm: &ArmModel<T>,
    layout: &SensorLayout<T>,
) -> T {
    let nominal = match segment {
        Segment::UpperArm => layout.upper_anchor,
        Segment::Forearm => layout.wrist_anchor,
    };
    (nominal + mount.anchor_shift / segment_length(arm, segment))
        .max(T::zero())
        .min(T::one())
}

pub fn segment_frame<T: Real>(
    q: &JointPose<T>,
    segment: Segment,
    mount: &MountConfig<T>,
    arm: &ArmModel<T>,
    layout: &SensorLayout<T>,
) -> SegmentFrame<T> {
    let (rotation, degenerate) = segment_rotation(q, segment, mount);
    SegmentFrame {
        rotation,
        anchor: anchor_fraction(segment, mount, arm, layout),
        degenerate,
    }
}

/// Body-frame angular velocity `vee(RᵀṘ)`, with `Ṙ` from the chain rule
/// over the segment's elevation and yaw.
pub fn angular_velocity<T: Real>(
    q: &JointPose<T>,
    qdot: &[T; 4],
    segment: Segment,
    mount: &MountConfig<T>,
) -> Vec3<T> {
    let (r, rdot, _) = frame_with_rate(q, qdot, segment, mount);
    vee(&r.transpose().mul_mat(&rdot))
}

/// Band anchor position in the shoulder frame.
pub fn anchor_position<T: Real>(
    q: &JointPose<T>,
    segment: Segment,
    anchor: T,
    arm: &ArmModel<T>,
) -> Vec3<T> {
    let upper = segment_direction(q, Segment::UpperArm);
    match segment {
        Segment::UpperArm => upper.scale(anchor * arm.upper),
        Segment::Forearm => {
            upper.scale(arm.upper) + segment_direction(q, Segment::Forearm).scale(anchor * arm.fore)
        }
    }
}

/// Noise-free readings of both bands at every trajectory sample, ordered
/// `[wrist, upper]`. Acceleration comes from central differences of the
/// anchor path; the arm is taken to be at rest before the first and after
/// the last sample.
pub fn simulate_dense<T: Real>(
    traj: &JointTrajectory<T>,
    arm: &ArmModel<T>,
    setup: &EpisodeSetup<T>,
    env: &EnvConfig<T>,
    layout: &SensorLayout<T>,
) -> Result<Vec<[ImuReading<T>; 2]>, ImuError> {
    let n = traj.samples.len();
    if n < 2 {
        return Err(ImuError::TooShort(n));
    }
    let torso = Mat3::rot_z(setup.torso_yaw);
    let h = T::one() / traj.rate;
    let bands = [
        (Segment::Forearm, setup.wrist.mount),
        (Segment::UpperArm, setup.upper.mount),
    ];
    let mut out = vec![[ImuReading::default(); 2]; n];
    for (b, (segment, mount)) in bands.iter().enumerate() {
        let anchor = anchor_fraction(*segment, mount, arm, layout);
        let pos: Vec<Vec3<T>> = traj
            .samples
            .iter()
            .map(|s| torso.mul_vec(anchor_position(&s.q, *segment, anchor, arm)))
            .collect();
        for (k, s) in traj.samples.iter().enumerate() {
            let prev = pos[k.saturating_sub(1)];
            let next = pos[(k + 1).min(n - 1)];
            let acc = (next - pos[k].scale(T::lit(2.0)) + prev).scale(T::one() / (h * h));
            let (r_shoulder, _) = segment_rotation(&s.q, *segment, mount);
            let rt = torso.mul_mat(&r_shoulder).transpose();
            out[k][b] = ImuReading {
                accel: rt.mul_vec(acc - env.gravity),
                gyro: angular_velocity(&s.q, &s.qdot, *segment, mount),
                mag: rt.mul_vec(env.magnetic),
            };
        }
    }
    Ok(out)
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3<f64> {
    if sigma == 0.0 {
        return Vec3::zero();
    }
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    Vec3::new(g() * sigma, g() * sigma, g() * sigma)
}

/// Draws a per-block sensor bias for one band.
pub fn draw_bias(noise: &NoiseConfig<f64>, seed: u64) -> ImuBias<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImuBias {
        accel: gaussian3(&mut rng, noise.accel_bias_sigma),
        gyro: gaussian3(&mut rng, noise.gyro_bias_sigma),
        mag: gaussian3(&mut rng, noise.mag_bias_sigma),
    }
}

/// Half-widths of the uniform re-strapping perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbRanges {
    /// Roll half-width (rad).
    pub roll: f64,
    /// Anchor shift half-width (m).
    pub shift: f64,
}

impl Default for PerturbRanges {
    fn default() -> Self {
        Self {
            roll: 15f64.to_radians(),
            shift: 0.02,
        }
    }
}

pub fn perturb_mount(
    base: &MountConfig<f64>,
    ranges: &PerturbRanges,
    seed: u64,
) -> MountConfig<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |w: f64| {
        if w > 0.0 {
            rng.random_range(-w..=w)
        } else {
            0.0
        }
    };
    let roll = draw(ranges.roll);
    let shift = draw(ranges.shift);
    MountConfig {
        roll: crate::arm_kinematics::wrap_angle(base.roll + roll),
        anchor_shift: base.anchor_shift + shift,
    }
}

/// Simulates one recorded episode at `cfg.output_rate` from a densely
/// sampled trajectory. Sensor noise is seeded by `seed`; bias comes from
/// `setup`.
pub fn simulate_episode(
    traj: &JointTrajectory<f64>,
    arm: &ArmModel<f64>,
    setup: &EpisodeSetup<f64>,
    cfg: &SimConfig<f64>,
    seed: u64,
) -> Result<Episode, ImuError> {
    let n = traj.samples.len();
    if n < 2 {
        return Err(ImuError::TooShort(n));
    }
    let ratio = traj.rate / cfg.output_rate;
    let step = ratio.round() as usize;
    if step < 2 || (ratio - step as f64).abs() > 1e-9 {
        return Err(ImuError::RateMismatch {
            dense: traj.rate,
            output: cfg.output_rate,
        });
    }
    let count = (traj.horizon * cfg.output_rate).round() as usize;
    let available = (n - 1) / step + 1;
    if count > available {
        return Err(ImuError::HorizonTooShort {
            available,
            required: count,
        });
    }
    let dense = simulate_dense(traj, arm, setup, &cfg.env, &cfg.layout)?;
    let torso = Mat3::rot_z(setup.torso_yaw);
    let noise = &cfg.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for j in 0..count {
        let k = j * step;
        let mut x = [0.0; STATE_DIM];
        for (b, band) in [&setup.wrist, &setup.upper].into_iter().enumerate() {
            let r = &dense[k][b];
            let accel = r.accel + band.bias.accel + gaussian3(&mut rng, noise.accel_sigma);
            let gyro = r.gyro + band.bias.gyro + gaussian3(&mut rng, noise.gyro_sigma);
            let mag = r.mag + band.bias.mag + gaussian3(&mut rng, noise.mag_sigma);
            for (c, v) in [accel, gyro, mag].into_iter().enumerate() {
                x[b * 9 + c * 3..b * 9 + c * 3 + 3].copy_from_slice(&v.to_array());
            }
        }
        let s = &traj.samples[k];
        samples.push(Sample {
            t: j as f64 / cfg.output_rate,
            x,
            p: torso.mul_vec(s.p).to_array(),
        });
    }
    Ok(Episode {
        rate: cfg.output_rate,
        samples,
        meta: EpisodeMeta {
            seed,
            arm: *arm,
            torso_yaw: setup.torso_yaw,
            t_f: traj.t_f,
            ..EpisodeMeta::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm_kinematics::{forward_kinematics, plan_reach};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn arm() -> ArmModel<f64> {
        ArmModel::new(0.29, 0.285).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> JointPose<f64> {
        JointPose::new(
            rng.random_range(0.05..PI - 0.05),
            rng.random_range(-PI..PI),
            rng.random_range(0.05..PI - 0.05),
            rng.random_range(-PI..PI),
        )
    }

    #[test]
    fn upper_arm_axis_reference_pose() {
        let q = JointPose::new(FRAC_PI_2, 0.0, FRAC_PI_2, 0.0);
        let (r, degenerate) = segment_rotation(&q, Segment::UpperArm, &MountConfig::default());
        assert!(!degenerate);
        assert!((r.column(0) - Vec3::unit_y()).norm() < 1e-15);
    }

    #[test]
    fn frames_are_proper_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let q = random_pose(&mut rng);
            for seg in [Segment::UpperArm, Segment::Forearm] {
                let (r, _) = segment_rotation(&q, seg, &MountConfig::default());
                assert!(r.orthonormality_error() < 1e-12);
                assert!((r.determinant() - 1.0).abs() < 1e-12);
                assert!((r.column(0) - segment_direction(&q, seg)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn half_turn_roll_negates_y_and_z() {
        let q = JointPose::new(0.7, 0.3, 1.9, -0.4);
        let (r0, _) = segment_rotation(&q, Segment::Forearm, &MountConfig::default());
        let mount = MountConfig {
            roll: PI,
            anchor_shift: 0.0,
        };
        let (r1, _) = segment_rotation(&q, Segment::Forearm, &mount);
        assert!((r1.column(0) - r0.column(0)).norm() < 1e-12);
        assert!((r1.column(1) + r0.column(1)).norm() < 1e-12);
        assert!((r1.column(2) + r0.column(2)).norm() < 1e-12);
    }

    #[test]
    fn vertical_segment_is_flagged() {
        let q = JointPose::new(0.0, 0.0, 0.0, 0.0);
        let (r, degenerate) = segment_rotation(&q, Segment::UpperArm, &MountConfig::default());
        assert!(degenerate);
        assert!(r.orthonormality_error() < 1e-12);
    }

    #[test]
    fn zero_rates_give_zero_gyro() {
        let q = JointPose::new(0.7, 0.3, 1.9, -0.4);
        let w = angular_velocity(&q, &[0.0; 4], Segment::UpperArm, &MountConfig::default());
        assert_eq!(w, Vec3::zero());
    }

    #[test]
    fn pure_yaw_on_horizontal_segment() {
        let q = JointPose::new(FRAC_PI_2, 0.4, FRAC_PI_2, -0.2);
        let rate = 1.7;
        let w = angular_velocity(
            &q,
            &[0.0, rate, 0.0, 0.0],
            Segment::UpperArm,
            &MountConfig::default(),
        );
        assert!((w.norm() - rate).abs() < 1e-12);
        let w = angular_velocity(
            &q,
            &[0.0, 0.0, 0.0, -rate],
            Segment::Forearm,
            &MountConfig::default(),
        );
        assert!((w.norm() - rate).abs() < 1e-12);
    }

    #[test]
    fn angular_velocity_matches_rotation_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = 1e-6;
        for _ in 0..1000 {
            let q = random_pose(&mut rng);
            let qdot: [f64; 4] = std::array::from_fn(|_| rng.random_range(-3.0..3.0));
            let mount = MountConfig {
                roll: rng.random_range(-0.3..0.3),
                anchor_shift: 0.0,
            };
            for seg in [Segment::UpperArm, Segment::Forearm] {
                let step = |sign: f64| {
                    let a = q.to_array();
                    JointPose::from_array(std::array::from_fn(|i| a[i] + sign * h * qdot[i]))
                };
                let (rp, _) = segment_rotation(&step(1.0), seg, &mount);
                let (rm, _) = segment_rotation(&step(-1.0), seg, &mount);
                let (r, _) = segment_rotation(&q, seg, &mount);
                let mut rdot = Mat3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        rdot.m[i][j] = (rp.m[i][j] - rm.m[i][j]) / (2.0 * h);
                    }
                }
                let fd = vee(&r.transpose().mul_mat(&rdot));
                let w = angular_velocity(&q, &qdot, seg, &mount);
                assert!((fd - w).norm() < 1e-4, "{seg:?}: {fd:?} vs {w:?}");
            }
        }
    }

    #[test]
    fn mount_perturbation_ranges() {
        let base = MountConfig {
            roll: 0.1,
            anchor_shift: 0.01,
        };
        let zero = PerturbRanges {
            roll: 0.0,
            shift: 0.0,
        };
        assert_eq!(perturb_mount(&base, &zero, 9), base);
        let ranges = PerturbRanges::default();
        assert_eq!(
            perturb_mount(&base, &ranges, 4),
            perturb_mount(&base, &ranges, 4)
        );
        let n = 10_000;
        let mut sum = 0.0;
        for seed in 0..n {
            let m = perturb_mount(&MountConfig::default(), &ranges, seed);
            assert!(m.roll.abs() <= ranges.roll && m.anchor_shift.abs() <= ranges.shift);
            sum += m.roll;
        }
        let sigma = ranges.roll / 3f64.sqrt();
        assert!((sum / n as f64).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    fn reach() -> JointTrajectory<f64> {
        let q0 = JointPose::new(0.25, 0.1, 1.7, 0.2);
        plan_reach(&q0, Vec3::new(0.12, 0.33, -0.05), 1.2, 2.0, &arm(), 240.0).unwrap()
    }

    #[test]
    fn hold_readings_are_static() {
        let traj = reach();
        let setup = EpisodeSetup {
            torso_yaw: 0.2,
            ..EpisodeSetup::default()
        };
        let env = EnvConfig::default();
        let dense = simulate_dense(&traj, &arm(), &setup, &env, &SensorLayout::default()).unwrap();
        let hold = traj.hold_start();
        for k in hold + 1..traj.samples.len() {
            for (b, seg) in [Segment::Forearm, Segment::UpperArm]
                .into_iter()
                .enumerate()
            {
                let (r, _) = segment_rotation(&traj.samples[k].q, seg, &MountConfig::default());
                let rt = Mat3::rot_z(0.2).mul_mat(&r).transpose();
                let expect = rt.mul_vec(-env.gravity);
                assert!((dense[k][b].accel - expect).norm() < 1e-6);
                assert!((dense[k][b].accel.norm() - 9.81).abs() < 1e-6);
                assert_eq!(dense[k][b].gyro, Vec3::zero());
            }
        }
        for row in &dense {
            for r in row {
                assert!((r.mag.norm() - env.magnetic.norm()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn double_integration_recovers_band_path() {
        let a = arm();
        let traj = reach();
        let mount = MountConfig {
            roll: 0.3,
            anchor_shift: -0.01,
        };
        let setup = EpisodeSetup {
            wrist: BandSetup {
                mount,
                ..BandSetup::default()
            },
            upper: BandSetup::default(),
            torso_yaw: -0.15,
        };
        let env = EnvConfig::default();
        let layout = SensorLayout::default();
        let dense = simulate_dense(&traj, &a, &setup, &env, &layout).unwrap();
        let torso = Mat3::rot_z(-0.15);
        let frac = anchor_fraction(Segment::Forearm, &mount, &a, &layout);
        let truth: Vec<Vec3<f64>> = traj
            .samples
            .iter()
            .map(|s| torso.mul_vec(anchor_position(&s.q, Segment::Forearm, frac, &a)))
            .collect();
        let world_acc: Vec<Vec3<f64>> = traj
            .samples
            .iter()
            .zip(&dense)
            .map(|(s, d)| {
                let (r, _) = segment_rotation(&s.q, Segment::Forearm, &mount);
                torso.mul_mat(&r).mul_vec(d[0].accel) + env.gravity
            })
            .collect();
        let h = 1.0 / traj.rate;
        let (mut x, mut v) = (truth[0], Vec3::zero());
        let mut worst = 0.0f64;
        for k in 1..truth.len() {
            let v_next = v + (world_acc[k - 1] + world_acc[k]).scale(0.5 * h);
            x += (v + v_next).scale(0.5 * h);
            v = v_next;
            worst = worst.max(x.distance(truth[k]));
        }
        assert!(traj.samples.last().unwrap().t >= 2.0 - 1e-12);
        assert!(worst < 0.010, "drift {worst}");
    }

    #[test]
    fn stationary_episode_reads_gravity() {
        let a = arm();
        let q0 = JointPose::new(0.4, 0.1, 1.2, 0.3);
        let traj = plan_reach(&q0, forward_kinematics(&q0, &a), 1.0, 2.0, &a, 240.0).unwrap();
        let cfg = SimConfig {
            noise: NoiseConfig::noiseless(),
            ..SimConfig::default()
        };
        let ep = simulate_episode(&traj, &a, &EpisodeSetup::default(), &cfg, 1).unwrap();
        assert_eq!(ep.samples.len(), 120);
        for s in &ep.samples {
            for b in 0..2 {
                let acc = Vec3::new(s.x[b * 9], s.x[b * 9 + 1], s.x[b * 9 + 2]);
                assert!((acc.norm() - 9.81).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn episodes_are_deterministic_per_seed() {
        let traj = reach();
        let cfg = SimConfig::default();
        let setup = EpisodeSetup::default();
        let a = simulate_episode(&traj, &arm(), &setup, &cfg, 11).unwrap();
        let b = simulate_episode(&traj, &arm(), &setup, &cfg, 11).unwrap();
        let c = simulate_episode(&traj, &arm(), &setup, &cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn short_trajectories_rejected() {
        let mut traj = reach();
        traj.samples.truncate(1);
        let err = simulate_episode(
            &traj,
            &arm(),
            &EpisodeSetup::default(),
            &SimConfig::default(),
            0,
        );
        assert_eq!(err.unwrap_err(), ImuError::TooShort(1));
    }

    #[test]
    fn output_rate_must_divide_dense_rate() {
        let traj = reach();
        let cfg = SimConfig {
            output_rate: 100.0,
            ..SimConfig::default()
        };
        let err = simulate_episode(&traj, &arm(), &EpisodeSetup::default(), &cfg, 0);
        assert!(matches!(err, Err(ImuError::RateMismatch { .. })));
    }
}
