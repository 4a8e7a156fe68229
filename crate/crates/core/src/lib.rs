//! Learning human reaching motion from two arm-mounted IMUs.
//!
//! Kinematics and sensor simulation produce synthetic episodes; a wrist
//! position network (Γ) and an LSTM target predictor (Φ) are trained on
//! them and exercised against a simulated robot.

pub mod arm_kinematics;
pub mod dataset;
pub mod geom;
pub mod imu_synth;
pub mod models;
pub mod nn;
pub mod scalar;
pub mod seed;
pub mod streaming;
pub mod training;

pub use scalar::Real;

#[cfg(test)]
mod proptests;

/// `f64` instantiations of the generic types.
pub type Vec3 = geom::Vec3<f64>;
pub type Mat3 = geom::Mat3<f64>;
pub type ArmModel = arm_kinematics::ArmModel<f64>;
pub type JointPose = arm_kinematics::JointPose<f64>;
pub type JointTrajectory = arm_kinematics::JointTrajectory<f64>;
pub type SimConfig = imu_synth::SimConfig<f64>;
pub type NoiseConfig = imu_synth::NoiseConfig<f64>;
pub type EpisodeSetup = imu_synth::EpisodeSetup<f64>;
pub type Tensor = nn::Tensor<f64>;
pub type Param = nn::Param<f64>;
pub type Adam = nn::Adam<f64>;
