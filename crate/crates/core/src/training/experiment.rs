use serde::{Deserialize, Serialize};

use super::data::{GammaData, PhiData};
use super::eval::{evaluate_position, evaluate_target};
use super::schedule::{train_curriculum, train_standard, History};
use super::{CurriculumConfig, TrainConfig, TrainError};
use crate::dataset::{
    build_position_dataset, fit_normalizer, BoardLayout, Episode, FeatureMask, LabelScaler,
    MASK_NAMES,
};
use crate::models::{GammaConfig, GammaNet, InputMode, LstmPosConfig, LstmPosNet};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaSetup {
    pub model: GammaConfig,
    pub train: TrainConfig,
    /// Reverse-curriculum schedule; standard training when absent.
    pub curriculum: Option<CurriculumConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhiSetup {
    pub model: LstmPosConfig,
    pub train: TrainConfig,
    pub curriculum: Option<CurriculumConfig>,
}

fn run<L: super::Learner>(
    net: &mut L,
    train: &L::Data,
    val: Option<&L::Data>,
    curriculum: Option<&CurriculumConfig>,
    tc: &TrainConfig,
) -> Result<History, TrainError> {
    match curriculum {
        Some(cc) => train_curriculum(net, train, val, cc, tc),
        None => train_standard(net, train, val, tc),
    }
}

/// Fits input statistics and the label scaler on `train`, then trains Γ.
pub fn fit_gamma(
    train: &[Episode],
    val: &[Episode],
    mask: &FeatureMask,
    setup: &GammaSetup,
) -> Result<(GammaNet, History), TrainError> {
    let ds = build_position_dataset(train, mask)?;
    let norm = fit_normalizer(&ds);
    let scaler = LabelScaler::fit(ds.labels.iter());
    let mut net = GammaNet::new(setup.model.clone(), mask.clone(), norm, scaler)?;
    let data = GammaData::new(&ds, &net.norm, &net.labels);
    let val_data = if val.is_empty() {
        None
    } else {
        Some(GammaData::from_episodes(val, mask, &net.norm, &net.labels)?)
    };
    let history = run(
        &mut net,
        &data,
        val_data.as_ref(),
        setup.curriculum.as_ref(),
        &setup.train,
    )?;
    Ok((net, history))
}

/// Builds x̄ with the frozen Γ, fits Φ's statistics on `train` and trains Φ.
pub fn fit_phi(
    train: &[Episode],
    val: &[Episode],
    mask: &FeatureMask,
    gamma: Option<&GammaNet>,
    setup: &PhiSetup,
) -> Result<(LstmPosNet, History), TrainError> {
    let cfg = &setup.model;
    let (data, norm, scaler) = PhiData::new(train, mask, cfg.h, cfg.mode, gamma, None, None)?;
    let mut net = LstmPosNet::new(cfg.clone(), mask.clone(), norm, scaler)?;
    let val_data = if val.is_empty() {
        None
    } else {
        Some(
            PhiData::new(
                val,
                mask,
                cfg.h,
                cfg.mode,
                gamma,
                Some(&net.norm),
                Some(&net.labels),
            )?
            .0,
        )
    };
    let history = run(
        &mut net,
        &data,
        val_data.as_ref(),
        setup.curriculum.as_ref(),
        &setup.train,
    )?;
    Ok((net, history))
}

/// One ablation table cell: Γ alone (`mode: None`) or Φ in a given mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationCell {
    pub mask: String,
    pub mode: Option<InputMode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mask: String,
    /// `gamma` for wrist-position rows, otherwise the Φ input mode.
    pub mode: String,
    pub mean_mm: f64,
    pub std_mm: f64,
    pub error: Option<String>,
}

/// Every mask with Γ, the raw LSTM and the concatenated LSTM-Pos, plus the
/// position-only LSTM-Pos on all sensors.
pub fn default_ablation_cells() -> Vec<AblationCell> {
    let mut cells = Vec::new();
    for mask in MASK_NAMES {
        for mode in [None, Some(InputMode::RawOnly), Some(InputMode::Concat)] {
            cells.push(AblationCell {
                mask: mask.to_string(),
                mode,
            });
        }
    }
    cells.push(AblationCell {
        mask: "all".into(),
        mode: Some(InputMode::PosOnly),
    });
    cells
}

/// Runs every cell in order. Γ is trained once per mask and reused by that
/// mask's Φ cells; a failing cell yields a row with its error and NaN
/// metrics without stopping the others.
#[allow(clippy::too_many_arguments)]
pub fn run_ablation(
    cells: &[AblationCell],
    train: &[Episode],
    val: &[Episode],
    test: &[Episode],
    gamma_setup: &GammaSetup,
    phi_setup: &PhiSetup,
    board: &BoardLayout,
    mut progress: impl FnMut(&AblationRow),
) -> Vec<AblationRow> {
    let mut gammas: Vec<(String, Result<GammaNet, String>)> = Vec::new();
    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let mode_name = cell
            .mode
            .map_or("gamma".to_string(), |m| m.name().to_string());
        let result = (|| -> Result<(f64, f64), String> {
            let mask = FeatureMask::named(&cell.mask).map_err(|e| e.to_string())?;
            let needs_gamma = cell.mode.is_none_or(|m| m.needs_gamma());
            let gamma = if needs_gamma {
                if !gammas.iter().any(|(k, _)| *k == cell.mask) {
                    let g = fit_gamma(train, val, &mask, gamma_setup)
                        .map(|(g, _)| g)
                        .map_err(|e| e.to_string());
                    gammas.push((cell.mask.clone(), g));
                }
                let (_, g) = gammas.iter().find(|(k, _)| *k == cell.mask).unwrap();
                Some(g.as_ref().map_err(|e| format!("position network: {e}"))?)
            } else {
                None
            };
            match cell.mode {
                None => {
                    let r = evaluate_position(gamma.unwrap(), test, &mask, board)
                        .map_err(|e| e.to_string())?;
                    Ok((r.mean_mm, r.std_mm))
                }
                Some(mode) => {
                    let mut setup = phi_setup.clone();
                    setup.model.mode = mode;
                    let (phi, _) =
                        fit_phi(train, val, &mask, gamma, &setup).map_err(|e| e.to_string())?;
                    let r = evaluate_target(&phi, gamma, test, &mask, setup.model.h, board)
                        .map_err(|e| e.to_string())?;
                    Ok((r.mean_mm, r.std_mm))
                }
            }
        })();
        let row = match result {
            Ok((mean_mm, std_mm)) => AblationRow {
                mask: cell.mask.clone(),
                mode: mode_name,
                mean_mm,
                std_mm,
                error: None,
            },
            Err(e) => AblationRow {
                mask: cell.mask.clone(),
                mode: mode_name,
                mean_mm: f64::NAN,
                std_mm: f64::NAN,
                error: Some(e),
            },
        };
        progress(&row);
        rows.push(row);
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSweepRow {
    pub h: usize,
    pub mean_mm: f64,
    pub std_mm: f64,
    pub error: Option<String>,
}

/// Trains and evaluates Φ once per window length, everything else fixed.
#[allow(clippy::too_many_arguments)]
pub fn run_h_sweep(
    hs: &[usize],
    train: &[Episode],
    val: &[Episode],
    test: &[Episode],
    mask: &FeatureMask,
    gamma: Option<&GammaNet>,
    phi_setup: &PhiSetup,
    board: &BoardLayout,
    mut progress: impl FnMut(&HSweepRow),
) -> Vec<HSweepRow> {
    hs.iter()
        .map(|&h| {
            let mut setup = phi_setup.clone();
            setup.model.h = h;
            let result = fit_phi(train, val, mask, gamma, &setup)
                .map_err(|e| e.to_string())
                .and_then(|(phi, _)| {
                    evaluate_target(&phi, gamma, test, mask, h, board).map_err(|e| e.to_string())
                });
            let row = match result {
                Ok(r) => HSweepRow {
                    h,
                    mean_mm: r.mean_mm,
                    std_mm: r.std_mm,
                    error: None,
                },
                Err(e) => HSweepRow {
                    h,
                    mean_mm: f64::NAN,
                    std_mm: f64::NAN,
                    error: Some(e),
                },
            };
            progress(&row);
            row
        })
        .collect()
}
