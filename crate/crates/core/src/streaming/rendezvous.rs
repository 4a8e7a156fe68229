use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::TargetSource;
use crate::dataset::{distance, Episode};
use crate::models::ModelError;

/// Velocity-bounded point robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// End-effector position (m).
    pub pos: [f64; 3],
    /// Maximum speed (m/s).
    pub v_max: f64,
    pub goal: Option<[f64; 3]>,
}

impl RobotState {
    pub fn new(pos: [f64; 3], v_max: f64) -> Self {
        Self {
            pos,
            v_max,
            goal: None,
        }
    }
}

/// Moves straight toward `goal` by at most `v_max·dt`. The goal replaces
/// whatever the robot was heading to before.
pub fn rendezvous_step(robot: &RobotState, goal: [f64; 3], dt: f64) -> RobotState {
    assert!(dt > 0.0, "time step must be positive");
    let d = distance(&robot.pos, &goal);
    let reach = robot.v_max.max(0.0) * dt;
    let pos = if d <= reach {
        goal
    } else {
        let s = reach / d;
        [0, 1, 2].map(|i| robot.pos[i] + (goal[i] - robot.pos[i]) * s)
    };
    RobotState {
        pos,
        v_max: robot.v_max,
        goal: Some(goal),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    /// Starting end-effector position (m), across the board from the human.
    pub start: [f64; 3],
    pub v_max: f64,
    pub threshold_mm: f64,
    /// Extra time after the episode during which the robot keeps moving
    /// toward its last goal while the wrist holds still.
    pub grace_s: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            start: [0.0, 0.75, 0.0],
            v_max: 1.0,
            threshold_mm: 60.0,
            grace_s: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    pub prediction: Option<[f64; 3]>,
    pub robot: [f64; 3],
    pub wrist: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub episode_id: String,
    pub success: bool,
    pub final_distance_mm: f64,
    pub first_prediction_t_s: Option<f64>,
    pub log: Vec<StepLog>,
}

/// Replays `episode` sample by sample, stepping the robot toward each new
/// prediction. Success is judged against the true wrist at the end of the
/// episode (plus the configured grace period).
pub fn run_rendezvous_trial<P: TargetSource + ?Sized>(
    episode: &Episode,
    predictor: &mut P,
    cfg: &RobotConfig,
) -> Result<TrialResult, ModelError> {
    let (trial, _) = replay(episode, predictor, cfg, None)?;
    Ok(trial)
}

fn replay<P: TargetSource + ?Sized>(
    episode: &Episode,
    predictor: &mut P,
    cfg: &RobotConfig,
    pace: Option<Duration>,
) -> Result<(TrialResult, Vec<Duration>), ModelError> {
    if episode.len() < predictor.window() {
        return Err(ModelError::WindowLength {
            expected: predictor.window(),
            found: episode.len(),
        });
    }
    let dt = 1.0 / episode.rate;
    predictor.begin(episode);
    let mut robot = RobotState::new(cfg.start, cfg.v_max);
    let mut log = Vec::with_capacity(episode.len());
    let mut latencies = Vec::with_capacity(episode.len());
    let mut first = None;
    let mut frame = Instant::now();
    for s in &episode.samples {
        let t0 = Instant::now();
        let pred = predictor.push(s)?;
        latencies.push(t0.elapsed());
        if let Some(p) = pred {
            first.get_or_insert(s.t);
            robot.goal = Some(p);
        }
        if let Some(goal) = robot.goal {
            robot = rendezvous_step(&robot, goal, dt);
        }
        log.push(StepLog {
            t: s.t,
            prediction: pred,
            robot: robot.pos,
            wrist: s.p,
        });
        if let Some(period) = pace {
            let next = frame + period;
            if let Some(wait) = next.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
            frame = next;
        }
    }
    let wrist = episode.samples.last().map(|s| s.p).unwrap_or(cfg.start);
    let grace_steps = (cfg.grace_s.max(0.0) * episode.rate).round() as usize;
    if let Some(goal) = robot.goal {
        for _ in 0..grace_steps {
            robot = rendezvous_step(&robot, goal, dt);
        }
    }
    let final_distance_mm = distance(&robot.pos, &wrist) * 1000.0;
    Ok((
        TrialResult {
            episode_id: episode.meta.id.clone(),
            success: final_distance_mm <= cfg.threshold_mm,
            final_distance_mm,
            first_prediction_t_s: first,
            log,
        },
        latencies,
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub robot: RobotConfig,
    /// Sleep so that samples arrive at the episode rate.
    pub paced: bool,
}

/// Per-sample `push` wall-clock latency, in milliseconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_durations(d: &[Duration]) -> Self {
        let mut ms: Vec<f64> = d.iter().map(|x| x.as_secs_f64() * 1000.0).collect();
        ms.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if ms.is_empty() {
                0.0
            } else {
                ms[((ms.len() as f64 * p).ceil() as usize).clamp(1, ms.len()) - 1]
            }
        };
        Self {
            samples: ms.len(),
            mean_ms: if ms.is_empty() {
                0.0
            } else {
                ms.iter().sum::<f64>() / ms.len() as f64
            },
            p50_ms: q(0.5),
            p99_ms: q(0.99),
            max_ms: ms.last().copied().unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub success_rate: f64,
    pub successes: usize,
    pub config: CampaignConfig,
    /// When success is judged.
    pub success_at: String,
    pub latency: LatencyStats,
    pub trials: Vec<TrialResult>,
}

/// Runs one trial per episode, in the given order.
pub fn run_campaign<P: TargetSource + ?Sized>(
    episodes: &[Episode],
    predictor: &mut P,
    cfg: &CampaignConfig,
) -> Result<CampaignReport, ModelError> {
    if episodes.is_empty() {
        return Err(ModelError::InvalidConfig(
            "rendezvous campaign needs at least one episode".into(),
        ));
    }
    let mut trials = Vec::with_capacity(episodes.len());
    let mut lat = Vec::new();
    for ep in episodes {
        let pace = cfg.paced.then(|| Duration::from_secs_f64(1.0 / ep.rate));
        let (trial, l) = replay(ep, predictor, &cfg.robot, pace)?;
        lat.extend(l);
        trials.push(trial);
    }
    let successes = trials.iter().filter(|t| t.success).count();
    Ok(CampaignReport {
        success_rate: successes as f64 / trials.len() as f64,
        successes,
        config: cfg.clone(),
        success_at: format!("episode end + {} s grace", cfg.robot.grace_s),
        latency: LatencyStats::from_durations(&lat),
        trials,
    })
}

/// `trial_id, success, final_distance_mm, first_prediction_t_s`.
pub fn write_campaign_csv(path: &Path, report: &CampaignReport) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "trial_id,success,final_distance_mm,first_prediction_t_s")?;
    for t in &report.trials {
        let first = t
            .first_prediction_t_s
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{:.6},{}",
            t.episode_id, t.success, t.final_distance_mm, first
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::ramp_episode;
    use crate::streaming::OraclePredictor;

    fn robot(pos: [f64; 3], v: f64) -> RobotState {
        RobotState::new(pos, v)
    }

    #[test]
    fn at_goal_robot_stays() {
        let r = robot([0.1, 0.2, 0.3], 1.0);
        assert_eq!(rendezvous_step(&r, [0.1, 0.2, 0.3], 1.0 / 60.0).pos, r.pos);
    }

    #[test]
    fn saturated_step_covers_v_max_dt() {
        let r = robot([0.0; 3], 1.0);
        let n = rendezvous_step(&r, [1.0, 0.0, 0.0], 1.0 / 60.0);
        assert!((n.pos[0] * 1000.0 - 16.666_666_666_666_668).abs() < 1e-9);
        assert_eq!((n.pos[1], n.pos[2]), (0.0, 0.0));
    }

    #[test]
    fn heading_follows_replaced_goal() {
        let r = robot([0.0; 3], 1.0);
        let a = rendezvous_step(&r, [1.0, 0.0, 0.0], 0.1);
        let b = rendezvous_step(&a, [0.1, 1.0, 0.0], 0.1);
        assert_eq!(b.goal, Some([0.1, 1.0, 0.0]));
        // Moving from (0.1, 0, 0) toward (0.1, 1, 0): pure +y.
        assert!((b.pos[0] - 0.1).abs() < 1e-15);
        assert!((b.pos[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn oracle_with_fast_robot_succeeds() {
        let ep = ramp_episode(40, 20, 0.0);
        let mut o = OraclePredictor::new(10);
        let cfg = RobotConfig {
            v_max: 5.0,
            ..RobotConfig::default()
        };
        let r = run_rendezvous_trial(&ep, &mut o, &cfg).unwrap();
        assert!(r.success, "{}", r.final_distance_mm);
        assert_eq!(r.first_prediction_t_s, Some(9.0 / 60.0));
        assert_eq!(r.log.len(), 40);
    }

    #[test]
    fn stationary_robot_fails_unless_already_there() {
        let ep = ramp_episode(30, 10, 0.0);
        let mut o = OraclePredictor::new(5);
        let far = RobotConfig {
            v_max: 0.0,
            ..RobotConfig::default()
        };
        assert!(!run_rendezvous_trial(&ep, &mut o, &far).unwrap().success);
        let near = RobotConfig {
            v_max: 0.0,
            start: ep.samples.last().unwrap().p,
            ..RobotConfig::default()
        };
        let r = run_rendezvous_trial(&ep, &mut o, &near).unwrap();
        assert!(r.success);
        assert_eq!(r.final_distance_mm, 0.0);
    }

    #[test]
    fn grace_period_lets_slow_robot_arrive() {
        let ep = ramp_episode(30, 10, 0.0);
        let mut o = OraclePredictor::new(25);
        let cfg = RobotConfig {
            v_max: 0.3,
            ..RobotConfig::default()
        };
        assert!(!run_rendezvous_trial(&ep, &mut o, &cfg).unwrap().success);
        let graced = RobotConfig {
            grace_s: 3.0,
            ..cfg
        };
        assert!(run_rendezvous_trial(&ep, &mut o, &graced).unwrap().success);
    }

    #[test]
    fn short_episode_is_rejected() {
        let ep = ramp_episode(4, 2, 0.0);
        let mut o = OraclePredictor::new(5);
        assert!(run_rendezvous_trial(&ep, &mut o, &RobotConfig::default()).is_err());
    }

    #[test]
    fn oracle_campaign_and_zero_threshold() {
        let eps: Vec<Episode> = (0..4)
            .map(|i| ramp_episode(60, 30, 0.01 * i as f64))
            .collect();
        let mut o = OraclePredictor::new(10);
        let cfg = CampaignConfig::default();
        let rep = run_campaign(&eps, &mut o, &cfg).unwrap();
        assert_eq!(rep.success_rate, 1.0);
        let exact = CampaignConfig {
            robot: RobotConfig {
                threshold_mm: 0.0,
                v_max: 0.2,
                ..RobotConfig::default()
            },
            ..cfg
        };
        assert_eq!(
            run_campaign(&eps, &mut o, &exact).unwrap().success_rate,
            0.0
        );
        assert!(run_campaign(&[], &mut o, &CampaignConfig::default()).is_err());
    }

    #[test]
    fn campaign_csv_has_one_row_per_trial() {
        let eps: Vec<Episode> = (0..3)
            .map(|i| ramp_episode(30, 15, 0.02 * i as f64))
            .collect();
        let mut o = OraclePredictor::new(5);
        let rep = run_campaign(&eps, &mut o, &CampaignConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_campaign_csv(&path, &rep).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "trial_id,success,final_distance_mm,first_prediction_t_s"
        );
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn latency_percentiles() {
        let d: Vec<Duration> = (1..=100).map(Duration::from_millis).collect();
        let s = LatencyStats::from_durations(&d);
        assert_eq!(s.p50_ms, 50.0);
        assert_eq!(s.p99_ms, 99.0);
        assert_eq!(s.max_ms, 100.0);
    }
}
