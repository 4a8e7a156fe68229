//! Online target prediction from a live sample stream, and the simulated
//! robot rendezvous harness built on it.

mod predictor;
mod rendezvous;

pub use predictor::{OraclePredictor, StreamPredictor, TargetSource};
pub use rendezvous::{
    rendezvous_step, run_campaign, run_rendezvous_trial, write_campaign_csv, CampaignConfig,
    CampaignReport, LatencyStats, RobotConfig, RobotState, StepLog, TrialResult,
};
