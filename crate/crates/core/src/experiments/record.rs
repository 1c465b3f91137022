//! Result records, persistence, and resumable per-sample scatter stores.
//!
//! A record is a deterministic function of (config, seed): wall time is
//! carried alongside but excluded from the content hash, which is what
//! re-runs and tamper checks compare. Raw per-sample rows go to a sidecar
//! CSV keyed by the config hash, and a partially filled sidecar acts as the
//! resume cursor: finished rows are trusted, sampling continues at the
//! first missing index, and the final record is identical either way
//! because per-sample seeds depend only on the index.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One labelled estimate with its uncertainty and (optional) gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: String,
    pub value: f64,
    /// Standard error, when the statistic has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    /// Bootstrap interval, for medians and other order statistics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// None marks report-only entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

impl Estimate {
    pub fn report(label: impl Into<String>, value: f64) -> Self {
        Self {
            label: label.into(),
            value,
            std_error: None,
            ci: None,
            target: None,
            tolerance: None,
            pass: None,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }

    pub fn with_ci(mut self, ci: (f64, f64)) -> Self {
        self.ci = Some(ci);
        self
    }

    /// Gate |value - target| <= tolerance.
    pub fn gated(mut self, target: f64, tolerance: f64) -> Self {
        self.target = Some(target);
        self.tolerance = Some(tolerance);
        self.pass = Some((self.value - target).abs() <= tolerance);
        self
    }

    pub fn gated_by(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }
}

/// Exclusion bookkeeping accumulated over an experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExclusionSummary {
    pub undecided_side: usize,
    pub unresolved_cr: usize,
    pub swallowed: usize,
    pub dropped_atoms: usize,
    pub skipped_samples: usize,
}

/// One experiment's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub experiment: String,
    pub config_hash: String,
    pub root_seed: u64,
    pub estimates: Vec<Estimate>,
    pub exclusions: ExclusionSummary,
    /// Overall verdict; None when every estimate is report-only.
    pub passed: Option<bool>,
    pub notes: Vec<String>,
    /// Hash over everything above (with this field empty); wall time is
    /// outside the hashed content.
    pub content_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
}

impl ResultRecord {
    pub fn new(experiment: &str, config_hash: &str, root_seed: u64) -> Self {
        Self {
            schema_version: 1,
            experiment: experiment.to_string(),
            config_hash: config_hash.to_string(),
            root_seed,
            estimates: Vec::new(),
            exclusions: ExclusionSummary::default(),
            passed: None,
            notes: Vec::new(),
            content_hash: String::new(),
            wall_time_ms: None,
        }
    }

    /// Derive `passed` from the gated estimates and fill the content hash.
    pub fn finalize(&mut self) {
        let gated: Vec<bool> = self
            .estimates
            .iter()
            .filter_map(|e| e.pass)
            .collect();
        self.passed = if gated.is_empty() {
            None
        } else {
            Some(gated.iter().all(|p| *p))
        };
        self.content_hash = self.compute_content_hash();
    }

    pub fn compute_content_hash(&self) -> String {
        let mut clone = self.clone();
        clone.content_hash = String::new();
        clone.wall_time_ms = None;
        let json = serde_json::to_string(&clone).expect("record serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        format!("{:x}", h.finalize())
    }

    pub fn verify_hash(&self) -> Result<()> {
        let computed = self.compute_content_hash();
        if computed != self.content_hash {
            return Err(Error::HashMismatch {
                stored: self.content_hash.clone(),
                computed,
            });
        }
        Ok(())
    }

    pub fn estimate(&self, label: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.label == label)
    }
}

/// Write the record as JSON plus a flat CSV of the estimates.
pub fn persist(record: &ResultRecord, path: &Path) -> Result<()> {
    if record.content_hash.is_empty() {
        return Err(Error::Config("record not finalized before persist".into()));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    // overwrite is idempotent, but a corrupt existing file is surfaced
    if path.exists() {
        let _ = load(path)?;
    }
    let json = serde_json::to_string_pretty(record).expect("record serializes");
    std::fs::write(path, json)?;
    let csv_path = path.with_extension("csv");
    let mut out = std::fs::File::create(csv_path)?;
    writeln!(
        out,
        "label,value,std_error,ci_lo,ci_hi,target,tolerance,pass"
    )?;
    for e in &record.estimates {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.label.replace(',', ";"),
            e.value,
            e.std_error.map_or(String::new(), |v| v.to_string()),
            e.ci.map_or(String::new(), |c| c.0.to_string()),
            e.ci.map_or(String::new(), |c| c.1.to_string()),
            e.target.map_or(String::new(), |v| v.to_string()),
            e.tolerance.map_or(String::new(), |v| v.to_string()),
            e.pass.map_or(String::new(), |p| p.to_string()),
        )?;
    }
    Ok(())
}

/// Load and hash-verify a persisted record.
pub fn load(path: &Path) -> Result<ResultRecord> {
    let text = std::fs::read_to_string(path)?;
    let record: ResultRecord =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
    record.verify_hash()?;
    Ok(record)
}

/// Resumable per-sample row store.
///
/// Rows are fixed-width f64 vectors indexed by sample number. The header
/// pins the config hash and row width; a store written under a different
/// config refuses to resume.
pub struct ScatterStore {
    path: PathBuf,
    rows: Vec<Vec<f64>>,
    width: usize,
}

impl ScatterStore {
    /// Open or create a store for `config_hash` with `width` columns.
    pub fn open(path: &Path, config_hash: &str, width: usize) -> Result<Self> {
        let mut rows = Vec::new();
        if path.exists() {
            let file = std::fs::File::open(path)?;
            let reader = std::io::BufReader::new(file);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if i == 0 {
                    let expected = format!("# {config_hash} {width}");
                    if line != expected {
                        return Err(Error::Config(format!(
                            "scatter store {} belongs to a different run",
                            path.display()
                        )));
                    }
                    continue;
                }
                if line.trim().is_empty() {
                    continue;
                }
                let row: std::result::Result<Vec<f64>, _> =
                    line.split(',').map(|f| f.parse::<f64>()).collect();
                let row = row.map_err(|e| Error::Config(format!("scatter row {i}: {e}")))?;
                if row.len() != width {
                    return Err(Error::Config(format!(
                        "scatter row {i} has {} fields, expected {width}",
                        row.len()
                    )));
                }
                rows.push(row);
            }
        } else {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "# {config_hash} {width}")?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
            width,
        })
    }

    /// Number of completed samples (the resume cursor).
    pub fn cursor(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Append rows for samples `cursor()..cursor()+new_rows.len()`.
    pub fn append(&mut self, new_rows: Vec<Vec<f64>>) -> Result<()> {
        let mut f = std::fs::OpenOptions::new().append(true).open(&self.path)?;
        for row in &new_rows {
            debug_assert_eq!(row.len(), self.width);
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", line.join(","))?;
        }
        self.rows.extend(new_rows);
        Ok(())
    }
}
