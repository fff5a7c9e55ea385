//! Flat tabular views of trajectories and spectrum sweeps. JSONL and CSV
//! trajectory outputs share one column set.

use std::io::Write;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::eom::{TrajectoryRecord, TrajectorySample};
use crate::oracle::SpectrumSweep;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Column names for a trajectory with `ep_count` EPs and `ordinary_count`
/// ordinary levels; indices are 1-based.
pub fn trajectory_columns(ep_count: usize, ordinary_count: usize) -> Vec<String> {
    let mut cols = vec!["delta".to_string(), "lambda_re".into(), "lambda_im".into()];
    for m in 1..=ep_count {
        cols.push(format!("ep_energy_{m}_re"));
        cols.push(format!("ep_energy_{m}_im"));
    }
    for j in 1..=ordinary_count {
        cols.push(format!("energy_{j}_re"));
        cols.push(format!("energy_{j}_im"));
    }
    cols.extend(
        ["max_eigen_residual", "max_orthonormality_residual", "max_closure_residual", "lambda_dot_spread"]
            .map(String::from),
    );
    cols
}

/// Values in the order of [`trajectory_columns`].
pub fn sample_row(sample: &TrajectorySample) -> Vec<f64> {
    let mut row = vec![sample.delta, sample.lambda.re, sample.lambda.im];
    for e in sample.ep_energies.iter().chain(&sample.ordinary_energies) {
        row.push(e.re);
        row.push(e.im);
    }
    let r = &sample.residuals;
    row.extend([r.max_eigen_residual, r.max_orthonormality_residual, r.max_closure_residual, r.lambda_dot_spread]);
    row
}

pub fn write_trajectory_csv<W: Write>(record: &TrajectoryRecord, out: W) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_columns(record.ep_count, record.ordinary_count))?;
    for s in &record.samples {
        w.write_record(sample_row(s).iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_jsonl<W: Write>(record: &TrajectoryRecord, mut out: W) -> Result<(), RecordError> {
    let cols = trajectory_columns(record.ep_count, record.ordinary_count);
    for s in &record.samples {
        let obj: Map<String, Value> = cols.iter().cloned().zip(sample_row(s).into_iter().map(Value::from)).collect();
        serde_json::to_writer(&mut out, &obj)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// One row per eigenvalue: `lambda, delta, k, re_E, im_E`, with `k` the
/// tracked line index.
pub fn write_sweep_csv<W: Write>(sweep: &SpectrumSweep, out: W) -> Result<(), RecordError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "delta", "k", "re_E", "im_E"])?;
    for p in &sweep.points {
        for (k, e) in p.lines.iter().enumerate() {
            w.write_record([
                p.lambda.to_string(),
                p.delta.to_string(),
                k.to_string(),
                e.re.to_string(),
                e.im.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
