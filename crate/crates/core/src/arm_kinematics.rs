//! Four-angle arm model: forward kinematics, damped least-squares inverse
//! kinematics and minimum-jerk reach planning.
//!
//! World frame: origin at the shoulder, `y` toward the interaction board,
//! `z` up. Upper-arm elevation is measured from the downward vertical,
//! forearm elevation from the upward vertical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Mat3, Vec3};
use crate::scalar::Real;

pub type Position3<T> = Vec3<T>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("segment lengths must be positive (upper {upper}, fore {fore})")]
    InvalidArm { upper: f64, fore: f64 },
    #[error("target at distance {distance:.6} m is outside the arm span {span:.6} m")]
    Unreachable { distance: f64, span: f64 },
    #[error("inverse kinematics did not converge after {iterations} iterations (residual {residual:.3e} m)")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("min-jerk phase {0} outside [0, 1]")]
    PhaseOutOfRange(f64),
    #[error("invalid timing: t_f={t_f}, horizon={horizon}, rate={rate}")]
    InvalidTiming { t_f: f64, horizon: f64, rate: f64 },
    #[error("elbow jumped {jump:.4} m between samples at t={t:.4} s")]
    Discontinuous { t: f64, jump: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmModel<T> {
    /// Upper-arm length (m).
    pub upper: T,
    /// Forearm length (m).
    pub fore: T,
}

impl<T: Real> ArmModel<T> {
    pub fn new(upper: T, fore: T) -> Result<Self, KinematicsError> {
        if !(upper > T::zero() && fore > T::zero()) {
            return Err(KinematicsError::InvalidArm {
                upper: upper.as_f64(),
                fore: fore.as_f64(),
            });
        }
        Ok(Self { upper, fore })
    }

    pub fn span(&self) -> T {
        self.upper + self.fore
    }
}

/// Arm lengths of the data-collection participant (29 cm / 28.5 cm).
pub fn participant_arm<T: Real>() -> ArmModel<T> {
    ArmModel {
        upper: T::lit(0.29),
        fore: T::lit(0.285),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointPose<T> {
    pub theta_elv: T,
    pub theta_yaw: T,
    pub phi_elv: T,
    pub phi_yaw: T,
}

impl<T: Real> JointPose<T> {
    pub fn new(theta_elv: T, theta_yaw: T, phi_elv: T, phi_yaw: T) -> Self {
        Self {
            theta_elv,
            theta_yaw,
            phi_elv,
            phi_yaw,
        }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.theta_elv, self.theta_yaw, self.phi_elv, self.phi_yaw]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn within_limits(&self) -> bool {
        let pi = T::PI();
        let elv = |v: T| v >= T::zero() && v <= pi;
        let yaw = |v: T| v >= -pi && v <= pi;
        elv(self.theta_elv) && elv(self.phi_elv) && yaw(self.theta_yaw) && yaw(self.phi_yaw)
    }

    /// Clamps elevations to `[0, π]` and wraps yaws into `[-π, π]`.
    pub fn clamped(self) -> Self {
        let pi = T::PI();
        let clamp = |v: T| v.max(T::zero()).min(pi);
        Self::new(
            clamp(self.theta_elv),
            wrap_angle(self.theta_yaw),
            clamp(self.phi_elv),
            wrap_angle(self.phi_yaw),
        )
    }
}

/// Wraps an angle into `[-π, π]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let pi = T::PI();
    if a >= -pi && a <= pi {
        return a;
    }
    let two_pi = pi + pi;
    let mut w = (a + pi) % two_pi;
    if w < T::zero() {
        w += two_pi;
    }
    w - pi
}

pub fn forward_kinematics<T: Real>(q: &JointPose<T>, arm: &ArmModel<T>) -> Position3<T> {
    let (ste, cte) = q.theta_elv.sin_cos();
    let (sty, cty) = q.theta_yaw.sin_cos();
    let (spe, cpe) = q.phi_elv.sin_cos();
    let (spy, cpy) = q.phi_yaw.sin_cos();
    Vec3::new(
        arm.upper * ste * sty + arm.fore * spe * spy,
        arm.upper * ste * cty + arm.fore * spe * cpy,
        -arm.upper * cte + arm.fore * cpe,
    )
}

/// Wrist-position Jacobian, columns ordered as [`JointPose::to_array`].
pub fn jacobian<T: Real>(q: &JointPose<T>, arm: &ArmModel<T>) -> [Vec3<T>; 4] {
    let (ste, cte) = q.theta_elv.sin_cos();
    let (sty, cty) = q.theta_yaw.sin_cos();
    let (spe, cpe) = q.phi_elv.sin_cos();
    let (spy, cpy) = q.phi_yaw.sin_cos();
    let (lu, lf) = (arm.upper, arm.fore);
    [
        Vec3::new(lu * cte * sty, lu * cte * cty, lu * ste),
        Vec3::new(lu * ste * cty, -lu * ste * sty, T::zero()),
        Vec3::new(lf * cpe * spy, lf * cpe * cpy, -lf * spe),
        Vec3::new(lf * spe * cpy, -lf * spe * spy, T::zero()),
    ]
}

fn jjt<T: Real>(j: &[Vec3<T>; 4], damping_sq: T) -> Mat3<T> {
    let mut a = Mat3::zeros();
    for col in j {
        let c = col.to_array();
        for r in 0..3 {
            for s in 0..3 {
                a.m[r][s] += c[r] * c[s];
            }
        }
    }
    for d in 0..3 {
        a.m[d][d] += damping_sq;
    }
    a
}

fn jt_mul<T: Real>(j: &[Vec3<T>; 4], y: Vec3<T>) -> [T; 4] {
    [j[0].dot(y), j[1].dot(y), j[2].dot(y), j[3].dot(y)]
}

/// Minimum-norm joint rates realising a wrist velocity.
pub fn joint_rates<T: Real>(q: &JointPose<T>, arm: &ArmModel<T>, wrist_vel: Vec3<T>) -> [T; 4] {
    if wrist_vel.norm_squared() == T::zero() {
        return [T::zero(); 4];
    }
    let j = jacobian(q, arm);
    match jjt(&j, T::zero()).solve(wrist_vel) {
        Some(y) => jt_mul(&j, y),
        None => [T::zero(); 4],
    }
}

/// Position of the min-jerk profile `s = 10τ³ − 15τ⁴ + 6τ⁵` and its first
/// two derivatives with respect to `τ`.
pub fn min_jerk_profile<T: Real>(tau: T) -> Result<(T, T, T), KinematicsError> {
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(KinematicsError::PhaseOutOfRange(tau.as_f64()));
    }
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let c = T::lit;
    let s = t3 * (c(10.0) + tau * (c(-15.0) + c(6.0) * tau));
    let ds = t2 * (c(30.0) + tau * (c(-60.0) + c(30.0) * tau));
    let dds = tau * (c(60.0) + tau * (c(-180.0) + c(120.0) * tau));
    Ok((s, ds, dds))
}

#[derive(Clone, Copy, Debug)]
pub struct IkOptions<T> {
    pub damping: T,
    pub max_iterations: usize,
    /// Early-exit threshold on the wrist position residual (m).
    pub tolerance: T,
    /// Residual still accepted when the iteration budget runs out (m).
    pub accept_tolerance: T,
    /// Largest joint step per iteration (rad).
    pub max_step: T,
    /// Retry from [`planar_pose`] when the seeded descent stalls.
    pub planar_restart: bool,
}

impl<T: Real> Default for IkOptions<T> {
    fn default() -> Self {
        // f32 cannot resolve 1e-10 m at arm scale.
        let tolerance = T::lit(1e-10).max(T::epsilon() * T::lit(4.0));
        Self {
            damping: T::lit(0.01),
            max_iterations: 200,
            tolerance,
            accept_tolerance: T::lit(1e-6),
            max_step: T::lit(0.5),
            planar_restart: true,
        }
    }
}

pub fn solve_ik<T: Real>(
    target: Position3<T>,
    arm: &ArmModel<T>,
    seed: &JointPose<T>,
) -> Result<JointPose<T>, KinematicsError> {
    solve_ik_with(target, arm, seed, &IkOptions::default())
}

/// Damped least squares with Levenberg-style damping adaptation.
///
/// Every accepted step lies in the row space of the Jacobian, so the
/// iterate never drifts along the redundant swivel direction on its own:
/// the solution returned is the one reached from `seed`. If the seeded
/// descent stalls in a joint-limit corner, the solve is restarted once from
/// the planar (zero swivel) solution.
pub fn solve_ik_with<T: Real>(
    target: Position3<T>,
    arm: &ArmModel<T>,
    seed: &JointPose<T>,
    opts: &IkOptions<T>,
) -> Result<JointPose<T>, KinematicsError> {
    let distance = target.norm();
    if !(distance <= arm.span()) {
        return Err(KinematicsError::Unreachable {
            distance: distance.as_f64(),
            span: arm.span().as_f64(),
        });
    }
    match descend(target, arm, seed, opts) {
        Err(KinematicsError::NotConverged { .. }) if opts.planar_restart => {
            descend(target, arm, &planar_pose(target, arm), opts)
        }
        other => other,
    }
}

/// Elbow-down solution with both segments in the vertical plane through
/// the target.
pub fn planar_pose<T: Real>(target: Position3<T>, arm: &ArmModel<T>) -> JointPose<T> {
    let r = (target.x * target.x + target.y * target.y).sqrt();
    let z = target.z;
    let yaw = if r > T::zero() {
        target.x.atan2(target.y)
    } else {
        T::zero()
    };
    let d = (r * r + z * z).sqrt().max(T::epsilon());
    let (lu, lf) = (arm.upper, arm.fore);
    // distance from the shoulder to the chord midpoint, and half-chord
    let a = ((lu * lu - lf * lf + d * d) / (d + d)).max(-lu).min(lu);
    let h = (lu * lu - a * a).max(T::zero()).sqrt();
    let (ur, uz) = (r / d, z / d);
    let (er, ez) = (a * ur + h * uz, a * uz - h * ur);
    let pi = T::PI();
    // a negative elevation is the same segment direction with yaw turned by π
    let unfold = |elv: T| {
        if elv < T::zero() {
            (-elv, wrap_angle(yaw + pi))
        } else {
            (elv, yaw)
        }
    };
    let (theta, theta_yaw) = unfold(er.atan2(-ez));
    let (phi, phi_yaw) = unfold((r - er).atan2(z - ez));
    JointPose::new(theta, theta_yaw, phi, phi_yaw).clamped()
}

fn descend<T: Real>(
    target: Position3<T>,
    arm: &ArmModel<T>,
    seed: &JointPose<T>,
    opts: &IkOptions<T>,
) -> Result<JointPose<T>, KinematicsError> {
    let mut q = seed.clamped();
    let mut err = (target - forward_kinematics(&q, arm)).norm();
    let mut lambda = opts.damping;
    // Near full extension the radial singular value vanishes; letting the
    // damping relax below its nominal value keeps convergence linear there.
    let lambda_min = opts.damping * T::lit(1e-4);
    let lambda_max = T::lit(1e3);
    for _ in 0..opts.max_iterations {
        if err < opts.tolerance {
            return Ok(q);
        }
        let e = target - forward_kinematics(&q, arm);
        let j = jacobian(&q, arm);
        let Some(y) = jjt(&j, lambda * lambda).solve(e) else {
            lambda = (lambda * T::lit(10.0)).min(lambda_max);
            continue;
        };
        let mut dq = jt_mul(&j, y);
        let step = dq.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
        if step > opts.max_step {
            let s = opts.max_step / step;
            dq.iter_mut().for_each(|v| *v = *v * s);
        }
        let mut next = q.to_array();
        for (n, d) in next.iter_mut().zip(dq) {
            *n += d;
        }
        let candidate = JointPose::from_array(next).clamped();
        let cand_err = (target - forward_kinematics(&candidate, arm)).norm();
        if cand_err < err {
            q = candidate;
            err = cand_err;
            lambda = (lambda * T::lit(0.5)).max(lambda_min);
        } else {
            lambda = (lambda * T::lit(10.0)).min(lambda_max);
        }
    }
    if err < opts.accept_tolerance {
        return Ok(q);
    }
    Err(KinematicsError::NotConverged {
        iterations: opts.max_iterations,
        residual: err.as_f64(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample<T> {
    pub t: T,
    pub q: JointPose<T>,
    /// Joint rates (rad/s), ordered as [`JointPose::to_array`].
    pub qdot: [T; 4],
    pub p: Position3<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointTrajectory<T> {
    /// Reach duration (s).
    pub t_f: T,
    /// Recording horizon (s).
    pub horizon: T,
    /// Sampling rate (Hz).
    pub rate: T,
    pub samples: Vec<TrajectorySample<T>>,
}

impl<T: Real> JointTrajectory<T> {
    /// Index of the first sample at or after `t_f`.
    pub fn hold_start(&self) -> usize {
        self.samples
            .iter()
            .position(|s| s.t >= self.t_f)
            .unwrap_or(self.samples.len())
    }
}

/// Elbow speed above which consecutive IK solutions are taken to lie on
/// different branches (m/s).
pub const MAX_ELBOW_SPEED: f64 = 4.0;

/// Elbow position relative to the shoulder.
pub fn elbow_position<T: Real>(q: &JointPose<T>, arm: &ArmModel<T>) -> Position3<T> {
    let (ste, cte) = q.theta_elv.sin_cos();
    let (sty, cty) = q.theta_yaw.sin_cos();
    Vec3::new(ste * sty, ste * cty, -cte).scale(arm.upper)
}

/// Straight task-space reach from `FK(q0)` to `target`, timed by the min-jerk
/// profile, sampled on `t = k / rate` for `k = 0..=round(horizon·rate)`.
///
/// Fails with [`KinematicsError::Discontinuous`] when the IK continuation
/// switches branch, which would show up as an impossible elbow jump.
pub fn plan_reach<T: Real>(
    q0: &JointPose<T>,
    target: Position3<T>,
    t_f: T,
    horizon: T,
    arm: &ArmModel<T>,
    rate: T,
) -> Result<JointTrajectory<T>, KinematicsError> {
    if !(t_f > T::zero() && t_f <= horizon && rate > T::zero()) {
        return Err(KinematicsError::InvalidTiming {
            t_f: t_f.as_f64(),
            horizon: horizon.as_f64(),
            rate: rate.as_f64(),
        });
    }
    let n = (horizon * rate).round().to_usize().unwrap_or(0) + 1;
    let start = forward_kinematics(q0, arm);
    let delta = target - start;
    let mut q = *q0;
    let mut hold: Option<JointPose<T>> = None;
    let mut samples = Vec::with_capacity(n);
    for k in 0..n {
        let t = T::from_usize(k).unwrap() / rate;
        if t >= t_f {
            let qf = match hold {
                Some(qf) => qf,
                None => {
                    let qf = solve_ik(target, arm, &q)?;
                    hold = Some(qf);
                    qf
                }
            };
            samples.push(TrajectorySample {
                t,
                q: qf,
                qdot: [T::zero(); 4],
                p: forward_kinematics(&qf, arm),
            });
            continue;
        }
        let (s, ds, _) = min_jerk_profile(t / t_f)?;
        let p_des = start + delta.scale(s);
        q = solve_ik(p_des, arm, &q)?;
        samples.push(TrajectorySample {
            t,
            q,
            qdot: joint_rates(&q, arm, delta.scale(ds / t_f)),
            p: forward_kinematics(&q, arm),
        });
    }
    let max_jump = T::lit(MAX_ELBOW_SPEED) / rate;
    let mut prev = elbow_position(q0, arm);
    for s in &samples {
        let e = elbow_position(&s.q, arm);
        let jump = (e - prev).norm();
        if jump > max_jump {
            return Err(KinematicsError::Discontinuous {
                t: s.t.as_f64(),
                jump: jump.as_f64(),
            });
        }
        prev = e;
    }
    // The tracked path drifts in the null space of the 4-joint chain, so the
    // minimum-norm rates do not describe it; use central differences of the
    // sampled joints instead.
    let motion = samples.iter().position(|s| s.t >= t_f).unwrap_or(n);
    let two_h = T::lit(2.0) / rate;
    for k in 1..motion.min(n - 1) {
        let a = samples[k - 1].q.to_array();
        let b = samples[k + 1].q.to_array();
        let mut qdot = [T::zero(); 4];
        for j in 0..4 {
            let d = b[j] - a[j];
            qdot[j] = if j % 2 == 1 { wrap_angle(d) } else { d } / two_h;
        }
        samples[k].qdot = qdot;
    }
    Ok(JointTrajectory {
        t_f,
        horizon,
        rate,
        samples,
    })
}
