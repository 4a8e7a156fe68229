use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AblationRow, EvalReport, HSweepRow};

fn write(path: &Path, text: String) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)
}

/// `mask,mode,mean_mm,std_mm`.
pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> std::io::Result<()> {
    let mut s = String::from("mask,mode,mean_mm,std_mm\n");
    for r in rows {
        writeln!(s, "{},{},{:.6},{:.6}", r.mask, r.mode, r.mean_mm, r.std_mm).unwrap();
    }
    write(path, s)
}

/// `H,mean_mm,std_mm`.
pub fn write_h_sweep_csv(path: &Path, rows: &[HSweepRow]) -> std::io::Result<()> {
    let mut s = String::from("H,mean_mm,std_mm\n");
    for r in rows {
        writeln!(s, "{},{:.6},{:.6}", r.h, r.mean_mm, r.std_mm).unwrap();
    }
    write(path, s)
}

/// `square_row,square_col,mean_mm`, one line per board square; squares
/// without episodes get an empty value.
pub fn write_heatmap_csv(path: &Path, report: &EvalReport) -> std::io::Result<()> {
    let mut s = String::from("square_row,square_col,mean_mm\n");
    for row in 0..report.grid_rows {
        for col in 0..report.grid_cols {
            match report.cell(row, col) {
                Some(v) => writeln!(s, "{row},{col},{v:.6}").unwrap(),
                None => writeln!(s, "{row},{col},").unwrap(),
            }
        }
    }
    write(path, s)
}

/// `t,mean_mm,std_mm`.
pub fn write_error_vs_time_csv(path: &Path, report: &EvalReport) -> std::io::Result<()> {
    let mut s = String::from("t,mean_mm,std_mm\n");
    for p in &report.curve {
        writeln!(s, "{:.6},{:.6},{:.6}", p.t, p.mean_mm, p.std_mm).unwrap();
    }
    write(path, s)
}
