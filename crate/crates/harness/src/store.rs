//! Directory-backed results store. Every artifact is a file named by its content key:
//!
//! ```text
//! <root>/cells/<key>.json           CellResult
//! <root>/records/<key>/dayNN.ndjson one EpisodeRecord per test day
//! <root>/policies/<key>.ckpt        trained HITL policy
//! <root>/curves/<key>.csv           its training curve
//! <root>/predictors/<key>.ckpt      occupancy predictor
//! ```
//!
//! Files are written to a temporary name and renamed, so an interrupted run never
//! leaves a truncated artifact behind.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hvac_core::env::EpisodeRecord;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::metrics::MetricsSummary;
use crate::plan::Cell;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok { metrics: MetricsSummary },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Content key of the configuration that produced the result.
    pub key: String,
    pub cell: Cell,
    pub outcome: CellOutcome,
}

impl CellResult {
    pub fn metrics(&self) -> Option<&MetricsSummary> {
        match &self.outcome {
            CellOutcome::Ok { metrics } => Some(metrics),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.metrics().is_some()
    }
}

#[derive(Debug, Clone)]
pub struct ResultsStore {
    root: PathBuf,
}

const SUBDIRS: [&str; 5] = ["cells", "records", "policies", "curves", "predictors"];

impl ResultsStore {
    /// Open (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for d in SUBDIRS {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(|e| HarnessError::io(&p, e))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cell_path(&self, key: &str) -> PathBuf {
        self.root.join("cells").join(format!("{key}.json"))
    }

    pub fn records_dir(&self, key: &str) -> PathBuf {
        self.root.join("records").join(key)
    }

    pub fn policy_path(&self, key: &str) -> PathBuf {
        self.root.join("policies").join(format!("{key}.ckpt"))
    }

    pub fn curve_path(&self, key: &str) -> PathBuf {
        self.root.join("curves").join(format!("{key}.csv"))
    }

    pub fn predictor_path(&self, key: &str) -> PathBuf {
        self.root.join("predictors").join(format!("{key}.ckpt"))
    }

    pub fn load_cell(&self, key: &str) -> Result<Option<CellResult>> {
        let path = self.cell_path(key);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        let result = serde_json::from_slice(&bytes).map_err(|e| HarnessError::format(&path, e.to_string()))?;
        Ok(Some(result))
    }

    pub fn save_cell(&self, result: &CellResult) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(result).expect("cell result serializes");
        bytes.push(b'\n');
        write_atomic(&self.cell_path(&result.key), &bytes)
    }

    pub fn save_records(&self, key: &str, records: &[EpisodeRecord]) -> Result<()> {
        let dir = self.records_dir(key);
        fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        for (d, r) in records.iter().enumerate() {
            write_atomic(&dir.join(format!("day{d:02}.ndjson")), r.to_ndjson_string().as_bytes())?;
        }
        Ok(())
    }

    pub fn load_records(&self, key: &str, gamma: f64) -> Result<Vec<EpisodeRecord>> {
        let dir = self.records_dir(key);
        let mut paths = list_files(&dir, "ndjson")?;
        paths.sort();
        paths
            .iter()
            .map(|p| {
                let f = fs::File::open(p).map_err(|e| HarnessError::io(p, e))?;
                Ok(EpisodeRecord::read_ndjson(BufReader::new(f), gamma)?)
            })
            .collect()
    }

    /// Every stored cell result, in [`Cell::order`].
    pub fn cells(&self) -> Result<Vec<CellResult>> {
        let dir = self.root.join("cells");
        let mut out = Vec::new();
        for p in list_files(&dir, "json")? {
            let bytes = fs::read(&p).map_err(|e| HarnessError::io(&p, e))?;
            let r: CellResult = serde_json::from_slice(&bytes).map_err(|e| HarnessError::format(&p, e.to_string()))?;
            out.push(r);
        }
        out.sort_by(|a, b| a.cell.order(&b.cell).then_with(|| a.key.cmp(&b.key)));
        Ok(out)
    }
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e.map_err(|e| HarnessError::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Write via a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}
