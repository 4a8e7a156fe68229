use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use reach_core::dataset::{
    generate_split, read_split_dir, write_split_dirs, Episode, FeatureMask, Manifest,
};
use reach_core::models::{GammaNet, InputMode, LstmPosNet};
use reach_core::streaming::{run_campaign, write_campaign_csv, StreamPredictor};
use reach_core::training::{
    default_ablation_cells, evaluate_position, evaluate_target, fit_gamma, fit_phi,
    mean_distance_to_centroid, run_ablation, run_h_sweep, write_ablation_csv,
    write_error_vs_time_csv, write_h_sweep_csv, write_heatmap_csv, EvalReport, History, TrainError,
};

use crate::config::{RunConfig, SEED_ENV};
use crate::{Command, Common};

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let env = std::env::var(SEED_ENV).ok();
    let mut cfg = cfg.resolve(env.as_deref())?;
    cfg.paths.out = Some(common.out.clone());
    Ok(cfg)
}

fn read_split(dir: &Path, split: &str) -> Result<(Manifest, Vec<Episode>)> {
    read_split_dir(dir, split)
        .with_context(|| format!("reading {split} episodes from {}", dir.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn write_history(path: &Path, h: &History) -> Result<()> {
    fs::write(path, h.to_log()).with_context(|| format!("writing {}", path.display()))
}

fn load_gamma(path: &Path) -> Result<GammaNet> {
    GammaNet::load(path).with_context(|| format!("loading position network {}", path.display()))
}

/// Saves the history of a disqualified run before passing the error on.
fn keep_history<T>(r: Result<(T, History), TrainError>, log_path: &Path) -> Result<(T, History)> {
    match r {
        Ok(v) => Ok(v),
        Err(e) => {
            if let TrainError::Disqualified { history, .. } = &e {
                write_history(log_path, history)?;
            }
            Err(e.into())
        }
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData {
            common,
            squares,
            train_per_square,
            test_per_square,
        } => {
            let mut cfg = load_config(&common)?;
            if squares.is_some() {
                cfg.data.squares = squares;
            }
            if let Some(n) = train_per_square {
                cfg.data.train_per_square = n;
            }
            if let Some(n) = test_per_square {
                cfg.data.test_per_square = n;
            }
            gen_data(&cfg, &common.out)
        }
        Command::TrainGamma {
            common,
            data,
            mask,
            curriculum,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = mask {
                cfg.mask = m;
            }
            if curriculum && cfg.gamma.curriculum.is_none() {
                cfg.gamma.curriculum = Some(Default::default());
            }
            cfg.paths.data = Some(data.data);
            train_gamma(&cfg, &common.out)
        }
        Command::TrainTarget {
            common,
            data,
            gamma,
            mode,
            h,
            curriculum,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = mode {
                cfg.phi.model.mode = m;
            }
            if let Some(h) = h {
                cfg.phi.model.h = h;
            }
            if curriculum && cfg.phi.curriculum.is_none() {
                cfg.phi.curriculum = Some(Default::default());
            }
            cfg.paths.data = Some(data.data);
            cfg.paths.gamma = gamma.or(cfg.paths.gamma);
            train_target(&cfg, &common.out)
        }
        Command::Eval {
            common,
            data,
            gamma,
            phi,
            heatmap,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.paths.data = Some(data.data);
            cfg.paths.gamma = gamma.or(cfg.paths.gamma);
            cfg.paths.phi = phi.or(cfg.paths.phi);
            eval(&cfg, &common.out, heatmap)
        }
        Command::Ablate { common, data } => {
            let mut cfg = load_config(&common)?;
            cfg.paths.data = Some(data.data);
            ablate(&cfg, &common.out)
        }
        Command::HSweep {
            common,
            data,
            gamma,
            hs,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.paths.data = Some(data.data);
            cfg.paths.gamma = gamma.or(cfg.paths.gamma);
            if let Some(hs) = hs {
                cfg.h_sweep = hs;
            }
            h_sweep(&cfg, &common.out)
        }
        Command::Rendezvous {
            common,
            data,
            gamma,
            phi,
            paced,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.paths.data = Some(data.data);
            cfg.paths.gamma = gamma.or(cfg.paths.gamma);
            cfg.paths.phi = Some(phi);
            cfg.rendezvous.paced |= paced;
            rendezvous(&cfg, &common.out)
        }
    }
}

fn data_dir(cfg: &RunConfig) -> Result<&PathBuf> {
    cfg.paths
        .data
        .as_ref()
        .context("no dataset directory given")
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_snapshot(out, "gen-data")?;
    let (train, test) = generate_split(&cfg.data)?;
    let manifest = Manifest {
        seed: cfg.data.seed,
        rate: cfg.data.rate,
        horizon: cfg.data.horizon,
        board: cfg.data.board,
        episodes: Vec::new(),
        generator: Some(serde_json::to_value(&cfg.data)?),
    };
    write_split_dirs(out, &train, &test, manifest)?;
    info!(
        "wrote {} train and {} test episodes to {}",
        train.len(),
        test.len(),
        out.display()
    );
    Ok(())
}

fn train_gamma(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_snapshot(out, "train-gamma")?;
    let mask = FeatureMask::named(&cfg.mask)?;
    let (_, train) = read_split(data_dir(cfg)?, "train")?;
    let (fit, val) = cfg.validation_split(&train);
    info!(
        "training position network on {} episodes (mask {})",
        fit.len(),
        mask.name
    );
    let log_path = out.join("gamma_history.log");
    let (net, history) = keep_history(fit_gamma(fit, val, &mask, &cfg.gamma), &log_path)?;
    write_history(&log_path, &history)?;
    net.save(&out.join("gamma.rchw"))?;
    if let Some(last) = history.epochs.last() {
        info!(
            "done after {} epochs, final validation {:?} mm",
            last.epoch, last.val_mm
        );
    }
    Ok(())
}

fn train_target(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_snapshot(out, "train-target")?;
    let mode = cfg.phi.model.mode;
    let gamma = match &cfg.paths.gamma {
        Some(p) => Some(load_gamma(p)?),
        None if mode.needs_gamma() => bail!("mode {mode} needs --gamma"),
        None => None,
    };
    let mask = match &gamma {
        Some(g) => g.mask.clone(),
        None => FeatureMask::named(&cfg.mask)?,
    };
    let (_, train) = read_split(data_dir(cfg)?, "train")?;
    let (fit, val) = cfg.validation_split(&train);
    info!(
        "training target predictor (mode {mode}, H={}) on {} episodes",
        cfg.phi.model.h,
        fit.len()
    );
    let log_path = out.join("phi_history.log");
    let (net, history) = keep_history(
        fit_phi(fit, val, &mask, gamma.as_ref(), &cfg.phi),
        &log_path,
    )?;
    write_history(&log_path, &history)?;
    net.save(&out.join("phi.rchw"))?;
    Ok(())
}

fn write_report(out: &Path, stem: &str, r: &EvalReport, heatmap: bool) -> Result<()> {
    write_json(&out.join(format!("{stem}_report.json")), r)?;
    write_error_vs_time_csv(&out.join(format!("{stem}_error_vs_time.csv")), r)?;
    if heatmap {
        write_heatmap_csv(&out.join(format!("{stem}_heatmap.csv")), r)?;
    }
    info!("{stem}: {:.2} ± {:.2} mm", r.mean_mm, r.std_mm);
    Ok(())
}

fn eval(cfg: &RunConfig, out: &Path, heatmap: bool) -> Result<()> {
    cfg.write_snapshot(out, "eval")?;
    let (manifest, test) = read_split(data_dir(cfg)?, "test")?;
    let gamma = cfg.paths.gamma.as_deref().map(load_gamma).transpose()?;
    let phi = match &cfg.paths.phi {
        Some(p) => Some(
            LstmPosNet::load(p)
                .with_context(|| format!("loading target predictor {}", p.display()))?,
        ),
        None => None,
    };
    if gamma.is_none() && phi.is_none() {
        bail!("eval needs --gamma, --phi or both");
    }
    if let Some(g) = &gamma {
        write_report(
            out,
            "position",
            &evaluate_position(g, &test, &g.mask, &manifest.board)?,
            heatmap,
        )?;
    }
    if let Some(p) = &phi {
        let r = evaluate_target(
            p,
            gamma.as_ref(),
            &test,
            &p.mask,
            p.window(),
            &manifest.board,
        )?;
        write_report(out, "target", &r, heatmap)?;
    }
    info!(
        "centroid predictor: {:.2} mm",
        mean_distance_to_centroid(&test)
    );
    Ok(())
}

fn ablate(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_snapshot(out, "ablate")?;
    let dir = data_dir(cfg)?;
    let (manifest, train) = read_split(dir, "train")?;
    let (_, test) = read_split(dir, "test")?;
    let (fit, val) = cfg.validation_split(&train);
    let cells = cfg.ablation.clone().unwrap_or_else(default_ablation_cells);
    let rows = run_ablation(
        &cells,
        fit,
        val,
        &test,
        &cfg.gamma,
        &cfg.phi,
        &manifest.board,
        |r| {
            info!(
                "{} / {}: {:.2} ± {:.2} mm {}",
                r.mask,
                r.mode,
                r.mean_mm,
                r.std_mm,
                r.error.as_deref().unwrap_or("")
            );
        },
    );
    write_ablation_csv(&out.join("ablation.csv"), &rows)?;
    Ok(())
}

fn h_sweep(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_snapshot(out, "h-sweep")?;
    let dir = data_dir(cfg)?;
    let (manifest, train) = read_split(dir, "train")?;
    let (_, test) = read_split(dir, "test")?;
    let (fit, val) = cfg.validation_split(&train);
    let mode = cfg.phi.model.mode;
    let gamma = match &cfg.paths.gamma {
        Some(p) => Some(load_gamma(p)?),
        None if mode.needs_gamma() => {
            let mask = FeatureMask::named(&cfg.mask)?;
            info!("training position network for the sweep");
            Some(fit_gamma(fit, val, &mask, &cfg.gamma)?.0)
        }
        None => None,
    };
    let mask = match &gamma {
        Some(g) => g.mask.clone(),
        None => FeatureMask::named(&cfg.mask)?,
    };
    let rows = run_h_sweep(
        &cfg.h_sweep,
        fit,
        val,
        &test,
        &mask,
        gamma.as_ref(),
        &cfg.phi,
        &manifest.board,
        |r| {
            info!(
                "H={}: {:.2} ± {:.2} mm {}",
                r.h,
                r.mean_mm,
                r.std_mm,
                r.error.as_deref().unwrap_or("")
            );
        },
    );
    write_h_sweep_csv(&out.join("h_sweep.csv"), &rows)?;
    Ok(())
}

#[derive(serde::Serialize)]
struct CampaignSummary<'a> {
    success_rate: f64,
    successes: usize,
    trials: usize,
    success_at: &'a str,
    latency: &'a reach_core::streaming::LatencyStats,
    config: &'a reach_core::streaming::CampaignConfig,
}

fn rendezvous(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.write_snapshot(out, "rendezvous")?;
    let (_, test) = read_split(data_dir(cfg)?, "test")?;
    let phi_path = cfg.paths.phi.as_ref().context("rendezvous needs --phi")?;
    let phi = LstmPosNet::load(phi_path)
        .with_context(|| format!("loading target predictor {}", phi_path.display()))?;
    let gamma = cfg.paths.gamma.as_deref().map(load_gamma).transpose()?;
    if phi.config.mode != InputMode::RawOnly && gamma.is_none() {
        bail!("mode {} needs --gamma", phi.config.mode);
    }
    let mut predictor = StreamPredictor::new(&phi, gamma.as_ref())?;
    let report = run_campaign(&test, &mut predictor, &cfg.rendezvous)?;
    write_campaign_csv(&out.join("rendezvous.csv"), &report)?;
    write_json(
        &out.join("rendezvous.json"),
        &CampaignSummary {
            success_rate: report.success_rate,
            successes: report.successes,
            trials: report.trials.len(),
            success_at: &report.success_at,
            latency: &report.latency,
            config: &report.config,
        },
    )?;
    info!(
        "success rate {:.1}% ({}/{}), push p99 {:.3} ms",
        report.success_rate * 100.0,
        report.successes,
        report.trials.len(),
        report.latency.p99_ms
    );
    Ok(())
}
