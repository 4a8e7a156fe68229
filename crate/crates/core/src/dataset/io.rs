use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoardLayout, DatasetError, Episode, EpisodeMeta, Sample, STATE_DIM};

pub const CSV_COLUMNS: [&str; 22] = [
    "t", "wax", "way", "waz", "wgx", "wgy", "wgz", "wmx", "wmy", "wmz", "uax", "uay", "uaz", "ugx",
    "ugy", "ugz", "umx", "umy", "umz", "px", "py", "pz",
];

fn header() -> String {
    CSV_COLUMNS.join(",")
}

/// Writes an episode as CSV with 17 significant digits per value.
pub fn save_episode(path: &Path, ep: &Episode) -> Result<(), DatasetError> {
    let mut out = header();
    out.push('\n');
    for s in &ep.samples {
        let values = std::iter::once(&s.t).chain(s.x.iter()).chain(s.p.iter());
        for (i, v) in values.enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads an episode CSV. The sample rate is inferred from the first two
/// timestamps (60 Hz for single-sample files); metadata is left default.
pub fn load_episode(path: &Path) -> Result<Episode, DatasetError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, head)) = lines.next() else {
        return Err(DatasetError::EmptyEpisode);
    };
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols != CSV_COLUMNS {
        return Err(DatasetError::Schema(format!(
            "expected `{}`, found `{}`",
            header(),
            head.trim()
        )));
    }
    let mut samples = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CSV_COLUMNS.len() {
            return Err(DatasetError::Parse {
                line: ln + 1,
                column: fields.len().min(CSV_COLUMNS.len()) + 1,
                message: format!(
                    "expected {} fields, found {}",
                    CSV_COLUMNS.len(),
                    fields.len()
                ),
            });
        }
        let mut v = [0.0; 22];
        for (c, f) in fields.iter().enumerate() {
            v[c] = f.trim().parse::<f64>().map_err(|e| DatasetError::Parse {
                line: ln + 1,
                column: c + 1,
                message: format!("`{}`: {e}", f.trim()),
            })?;
        }
        let mut x = [0.0; STATE_DIM];
        x.copy_from_slice(&v[1..1 + STATE_DIM]);
        samples.push(Sample {
            t: v[0],
            x,
            p: [v[19], v[20], v[21]],
        });
    }
    if samples.is_empty() {
        return Err(DatasetError::EmptyEpisode);
    }
    let rate = if samples.len() > 1 {
        let dt = samples[1].t - samples[0].t;
        (1.0 / dt * 1e6).round() / 1e6
    } else {
        60.0
    };
    Ok(Episode {
        rate,
        samples,
        meta: EpisodeMeta::default(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub split: String,
    #[serde(flatten)]
    pub meta: EpisodeMeta,
}

/// Dataset-level description written beside the episode files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Output sample rate (Hz).
    pub rate: f64,
    /// Episode horizon T (s).
    pub horizon: f64,
    pub board: BoardLayout,
    pub episodes: Vec<EpisodeRecord>,
    /// Full generator configuration, when produced by the generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

pub fn save_manifest(path: &Path, m: &Manifest) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(m)? + "\n")?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes `<dir>/train/<id>.csv`, `<dir>/test/<id>.csv` and
/// `<dir>/manifest.json`.
pub fn write_split_dirs(
    dir: &Path,
    train: &[Episode],
    test: &[Episode],
    mut manifest: Manifest,
) -> Result<(), DatasetError> {
    manifest.episodes.clear();
    for (split, eps) in [("train", train), ("test", test)] {
        fs::create_dir_all(dir.join(split))?;
        for ep in eps {
            save_episode(&dir.join(split).join(format!("{}.csv", ep.meta.id)), ep)?;
            manifest.episodes.push(EpisodeRecord {
                split: split.to_string(),
                meta: ep.meta.clone(),
            });
        }
    }
    save_manifest(&dir.join("manifest.json"), &manifest)
}

/// Loads every episode of `split` listed in `<dir>/manifest.json`, in
/// manifest order, with metadata restored.
pub fn read_split_dir(dir: &Path, split: &str) -> Result<(Manifest, Vec<Episode>), DatasetError> {
    let manifest = load_manifest(&dir.join("manifest.json"))?;
    let mut eps = Vec::new();
    for rec in manifest.episodes.iter().filter(|r| r.split == split) {
        let mut ep = load_episode(&dir.join(split).join(format!("{}.csv", rec.meta.id)))?;
        ep.meta = rec.meta.clone();
        ep.rate = manifest.rate;
        eps.push(ep);
    }
    Ok((manifest, eps))
}
