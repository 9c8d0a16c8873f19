//! Trajectory directories: `phi_NNNNNN.f64` snapshots, `meta.json`,
//! `series.csv` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::dynamics::{SeriesRow, Snapshot, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{BoundaryMode, Domain, Field};

pub const META_FILE: &str = "meta.json";
pub const SERIES_FILE: &str = "series.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn snapshot_file_name(step: u64) -> String {
    format!("phi_{step:06}.f64")
}

/// Reads a flat little-endian f64 array.
pub fn read_f64_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Validation(format!(
            "{}: length {} is not a multiple of 8",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_f64_file(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub step: u64,
    pub time: f64,
}

/// `meta.json`: lattice description, final time and the snapshot index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub dim: usize,
    pub cells: Vec<usize>,
    pub extents: Vec<f64>,
    pub boundary_mode: BoundaryMode,
    pub time: f64,
    pub dt: f64,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub name: String,
    pub sha256: String,
}

/// `manifest.json`: the config echo plus content hashes of every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: Option<RunConfig>,
    pub files: Vec<FileHash>,
    pub content_hash: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Git-style blob hash: `sha256("blob <len>\0" ‖ content)`.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex(&h.finalize())
}

/// Hash over the sorted `(name, blob hash)` list.
pub fn tree_hash(files: &[FileHash]) -> String {
    let mut sorted: Vec<&FileHash> = files.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut h = Sha256::new();
    for f in sorted {
        h.update(format!("{} {}\n", f.sha256, f.name).as_bytes());
    }
    hex(&h.finalize())
}

pub fn write_series(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// Writes a trajectory directory and returns its manifest.
pub fn write_trajectory(dir: &Path, traj: &Trajectory, config: Option<&RunConfig>) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let domain = traj.domain();
    let mut entries = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let name = snapshot_file_name(s.step);
        write_f64_file(&dir.join(&name), s.phi.values())?;
        entries.push(SnapshotEntry {
            file: name,
            step: s.step,
            time: s.time,
        });
    }
    let meta = Meta {
        dim: domain.dim(),
        cells: domain.cells().to_vec(),
        extents: domain.extents().to_vec(),
        boundary_mode: domain.boundary(),
        time: traj.t_end(),
        dt: traj.dt,
        snapshots: entries,
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    write_series(&dir.join(SERIES_FILE), &traj.series)?;

    let mut names: Vec<String> = meta.snapshots.iter().map(|e| e.file.clone()).collect();
    names.push(META_FILE.into());
    names.push(SERIES_FILE.into());
    let mut files = Vec::with_capacity(names.len());
    for name in names {
        let content = fs::read(dir.join(&name))?;
        files.push(FileHash {
            sha256: blob_hash(&content),
            name,
        });
    }
    let manifest = Manifest {
        config: config.cloned(),
        content_hash: tree_hash(&files),
        files,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_meta(dir: &Path) -> Result<Meta> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?)
}

/// Loads snapshots (and the series, if present) from a trajectory directory.
pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let meta = read_meta(dir)?;
    if meta.cells.len() != meta.dim || meta.extents.len() != meta.dim {
        return Err(Error::Validation(format!("{}: inconsistent meta.json", dir.display())));
    }
    let domain = Domain::new(meta.extents.clone(), meta.cells.clone(), meta.boundary_mode)?;
    let mut snapshots = Vec::with_capacity(meta.snapshots.len());
    for e in &meta.snapshots {
        let values = read_f64_file(&dir.join(&e.file))?;
        snapshots.push(Snapshot {
            step: e.step,
            time: e.time,
            phi: Field::new(domain.clone(), values)?,
        });
    }
    if snapshots.is_empty() {
        return Err(Error::Validation(format!("{}: no snapshots", dir.display())));
    }
    let series_path: PathBuf = dir.join(SERIES_FILE);
    let series = if series_path.exists() {
        read_series(&series_path)?
    } else {
        Vec::new()
    };
    Ok(Trajectory {
        dt: meta.dt,
        snapshots,
        series,
    })
}
