//! File formats: problem input, partition export and counter history.
//!
//! Problem input (`"schema": 1`), matrices row-major as nested arrays:
//!
//! ```json
//! { "schema": 1,
//!   "A": [[1, 1], [0, 1]], "B": [[0.5], [1]],
//!   "Q": [[1, 0], [0, 1]], "R": [[0.1]],
//!   "U": { "C": [[1], [-1]], "d": [1, 1] },
//!   "X": { "C": [[1, 0], [-1, 0], [0, 1], [0, -1]], "d": [25, 25, 5, 5] } }
//! ```
//!
//! The counter history is a CSV file with columns
//! `algorithm,N,candidates,pruning_tests,rank_tests,optimality_lps,feasibility_lps,S_N,M_N`;
//! `S_N` is left empty for baseline rows, which never form the full family.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumeration::{ActiveSet, Counters};
use crate::model::{LinearSystem, ModelError, Ocp, Polytope};
use crate::regions::{PwaLaw, Region, StageClass};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetSpec {
    #[serde(rename = "C")]
    pub c: Rows,
    pub d: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema: u32,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(rename = "R")]
    pub r: Rows,
    #[serde(rename = "U")]
    pub u: SetSpec,
    #[serde(rename = "X")]
    pub x: SetSpec,
}

fn matrix(name: &str, rows: &Rows) -> Result<DMatrix<f64>, IoError> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 {
        return Err(IoError::Schema(format!("{name} is empty")));
    }
    if rows.iter().any(|r| r.len() != nc) {
        return Err(IoError::Schema(format!("{name} has ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(IoError::Schema(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SetSpec {
    fn polytope(&self, name: &str, dim: usize) -> Result<Polytope, IoError> {
        let c = matrix(&format!("{name}.C"), &self.c)?;
        if c.ncols() != dim {
            return Err(IoError::Schema(format!("{name}.C must have {dim} columns")));
        }
        if self.d.len() != c.nrows() {
            return Err(IoError::Schema(format!("{name}.d must have {} entries", c.nrows())));
        }
        Ok(Polytope::new(c, DVector::from_column_slice(&self.d))?)
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let p: ProblemFile = serde_json::from_str(text)?;
        if p.schema != SCHEMA_VERSION {
            return Err(IoError::Schema(format!("unsupported schema version {}", p.schema)));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_json(&read(path)?)
    }

    /// Builds the control problem, including the Riccati solution and the terminal set.
    pub fn to_ocp(&self) -> Result<Ocp, IoError> {
        let a = matrix("A", &self.a)?;
        let b = matrix("B", &self.b)?;
        let q = matrix("Q", &self.q)?;
        let r = matrix("R", &self.r)?;
        let n = a.nrows();
        let m = b.ncols();
        if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
            return Err(IoError::Schema("inconsistent dimensions of A, B, Q, R".into()));
        }
        let u = self.u.polytope("U", m)?;
        let x = self.x.polytope("X", n)?;
        Ok(Ocp::new(LinearSystem::new(a, b)?, u, x, &q, &r)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionRecord {
    pub active_set: ActiveSet,
    #[serde(rename = "C")]
    pub c: Rows,
    pub d: Vec<f64>,
    pub gain: Rows,
    pub offset: Vec<f64>,
    pub stage_classification: StageClass,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionFile {
    pub schema: u32,
    pub algorithm: String,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub q_ux: usize,
    pub n_reached: usize,
    pub finitely_determined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counters: Option<Counters>,
    pub regions: Vec<RegionRecord>,
}

impl PartitionFile {
    pub fn from_law(law: &PwaLaw, algorithm: &str) -> Self {
        let regions = law
            .regions
            .iter()
            .map(|r| RegionRecord {
                active_set: r.aset.clone(),
                c: rows_of(r.polytope.c()),
                d: r.polytope.d().iter().copied().collect(),
                gain: rows_of(&r.gain),
                offset: r.offset.iter().copied().collect(),
                stage_classification: r.class,
            })
            .collect();
        PartitionFile {
            schema: SCHEMA_VERSION,
            algorithm: algorithm.to_string(),
            horizon: law.horizon,
            n: law.n,
            m: law.m,
            q_ux: law.q_ux,
            n_reached: law.n_reached,
            finitely_determined: law.finitely_determined,
            counters: law.counters,
            regions,
        }
    }

    pub fn to_law(&self) -> Result<PwaLaw, IoError> {
        if self.schema != SCHEMA_VERSION {
            return Err(IoError::Schema(format!("unsupported schema version {}", self.schema)));
        }
        let mut regions = Vec::with_capacity(self.regions.len());
        for (k, rec) in self.regions.iter().enumerate() {
            let c = if rec.c.is_empty() {
                DMatrix::zeros(0, self.n)
            } else {
                matrix(&format!("region {k} C"), &rec.c)?
            };
            let gain = matrix(&format!("region {k} gain"), &rec.gain)?;
            if c.ncols() != self.n || gain.shape() != (self.m, self.n) || rec.offset.len() != self.m {
                return Err(IoError::Schema(format!("region {k} has inconsistent dimensions")));
            }
            regions.push(Region {
                aset: ActiveSet::new(rec.active_set.indices().iter().copied()),
                polytope: Polytope::from_raw(c, DVector::from_column_slice(&rec.d))?,
                gain,
                offset: DVector::from_column_slice(&rec.offset),
                class: rec.stage_classification,
            });
        }
        Ok(PwaLaw {
            horizon: self.horizon,
            n: self.n,
            m: self.m,
            q_ux: self.q_ux,
            regions,
            finitely_determined: self.finitely_determined,
            n_reached: self.n_reached,
            counters: self.counters,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write(path, &self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_json(&read(path)?)
    }
}

/// One line of the counter history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterRow {
    pub algorithm: String,
    #[serde(rename = "N")]
    pub horizon: usize,
    pub candidates: u64,
    pub pruning_tests: u64,
    pub rank_tests: u64,
    pub optimality_lps: u64,
    pub feasibility_lps: u64,
    #[serde(rename = "S_N")]
    pub s_size: Option<usize>,
    #[serde(rename = "M_N")]
    pub m_size: usize,
}

impl CounterRow {
    pub fn new(algorithm: &str, horizon: usize, c: &Counters, s_size: Option<usize>, m_size: usize) -> Self {
        CounterRow {
            algorithm: algorithm.to_string(),
            horizon,
            candidates: c.candidates_generated,
            pruning_tests: c.pruning_tests,
            rank_tests: c.rank_tests,
            optimality_lps: c.optimality_lps,
            feasibility_lps: c.feasibility_lps,
            s_size,
            m_size,
        }
    }
}

pub fn write_counters(path: &Path, rows: &[CounterRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Schema(e.to_string()))?;
    write(path, &String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn read_counters(path: &Path) -> Result<Vec<CounterRow>, IoError> {
    let text = read(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<CounterRow>, _>>()?)
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}
