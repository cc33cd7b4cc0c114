use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseRecord {
    pub iter: usize,
    pub epoch: usize,
    pub wall_ms: f64,
    pub rel_err: f64,
    pub objective: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub iter: usize,
    pub epoch: usize,
    pub wall_ms: f64,
    pub err_recon: f64,
    #[serde(rename = "err_S")]
    pub err_s: f64,
    #[serde(rename = "err_L")]
    pub err_l: f64,
    pub radius: f64,
}

/// Per-iteration history of one run. Errors are measured at the running mean
/// of the current epoch's iterates, so the last row of each epoch matches the
/// epoch average handed to the next epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Sparse(Vec<SparseRecord>),
    Decomposition(Vec<DecompositionRecord>),
}

pub const SPARSE_HEADER: &str = "iter,epoch,wall_ms,rel_err,objective,radius";
pub const DECOMPOSITION_HEADER: &str = "iter,epoch,wall_ms,err_recon,err_S,err_L,radius";

impl Trajectory {
    pub fn len(&self) -> usize {
        match self {
            Trajectory::Sparse(r) => r.len(),
            Trajectory::Decomposition(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The headline error per row: `rel_err` for vector problems and
    /// `err_recon` for decompositions.
    pub fn errors(&self) -> Vec<f64> {
        match self {
            Trajectory::Sparse(r) => r.iter().map(|x| x.rel_err).collect(),
            Trajectory::Decomposition(r) => r.iter().map(|x| x.err_recon).collect(),
        }
    }

    pub fn header(&self) -> &'static str {
        match self {
            Trajectory::Sparse(_) => SPARSE_HEADER,
            Trajectory::Decomposition(_) => DECOMPOSITION_HEADER,
        }
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let res = match self {
            Trajectory::Sparse(rows) => rows.iter().try_for_each(|r| w.serialize(r)),
            Trajectory::Decomposition(rows) => rows.iter().try_for_each(|r| w.serialize(r)),
        };
        res.map_err(csv_err)?;
        if self.is_empty() {
            return Ok(format!("{}\n", self.header()).into_bytes());
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let bytes = self.to_csv_bytes()?;
        let mut f = File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header == SPARSE_HEADER {
            let rows = r
                .deserialize()
                .collect::<std::result::Result<Vec<SparseRecord>, _>>()
                .map_err(csv_err)?;
            Ok(Trajectory::Sparse(rows))
        } else if header == DECOMPOSITION_HEADER {
            let rows = r
                .deserialize()
                .collect::<std::result::Result<Vec<DecompositionRecord>, _>>()
                .map_err(csv_err)?;
            Ok(Trajectory::Decomposition(rows))
        } else {
            Err(Error::Config(format!(
                "unrecognized trajectory header `{header}`"
            )))
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::Config(format!("csv: {e}"))
    }
}

/// Row indices for the checkpoints at `0.02T`, `0.2T` and `T`. A checkpoint
/// at `⌊fT⌋` iterations is row `⌊fT⌋ − 1`, clamped to the first row.
pub fn checkpoint_indices(total: usize) -> [usize; 3] {
    let at = |num: usize, den: usize| (total * num / den).max(1) - 1;
    [at(2, 100), at(20, 100), at(1, 1)]
}
