//! Per-iteration diagnostics shared by the solver and the baseline.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Zero-based iteration index.
    pub k: usize,
    pub mu: f64,
    /// Smoothed objective of the emitted iterate.
    pub f_mu: f64,
    pub tv: f64,
    pub emp_err: f64,
    /// Scaled dual variable of the feasibility projection.
    pub lambda_eps: f64,
    pub nmse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn nmse_curve(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.nmse).collect()
    }

    /// Writes `k,mu,f_mu,tv,emp_err,lambda_eps,nmse`; `nmse` is empty when no
    /// ground truth was supplied.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<trace>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(io::BufWriter::new(file))
    }

    pub fn read_csv<R: io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let records = r.deserialize().collect::<Result<Vec<TraceRecord>, _>>()?;
        Ok(Self { records })
    }
}
