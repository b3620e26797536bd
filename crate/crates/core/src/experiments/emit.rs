//! Result emission: plot-ready CSV tables and JSON mirrors with
//! deterministic row ordering.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::optimizer::EpochRecord;
use super::sweep::SweepTable;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

impl std::str::FromStr for EmitFormat {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => Err(CoreError::Parameter(format!("unknown format {other:?}"))),
        }
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CoreError::Parse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn bitstring(index: usize, n_qubits: usize) -> String {
    format!("{index:0width$b}", width = n_qubits)
}

/// Optimization trace with columns (epoch, loss, fidelity).
pub fn emit_trace(trace: &[EpochRecord], path: &Path, format: EmitFormat) -> Result<()> {
    match format {
        EmitFormat::Json => write_json(&trace, path),
        EmitFormat::Csv => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "epoch,loss,fidelity")?;
            for rec in trace {
                match rec.fidelity {
                    Some(fid) => writeln!(f, "{},{:.17e},{:.17e}", rec.epoch, rec.loss, fid)?,
                    None => writeln!(f, "{},{:.17e},", rec.epoch, rec.loss)?,
                }
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct DistributionRow {
    bitstring: String,
    probability: f64,
}

/// Probability distribution with columns (bitstring, probability), in
/// ascending bitstring order.
pub fn emit_distribution(
    probs: &[f64],
    n_qubits: usize,
    path: &Path,
    format: EmitFormat,
) -> Result<()> {
    if probs.len() != 1 << n_qubits {
        return Err(CoreError::Shape(format!(
            "distribution length {} does not match {} qubits",
            probs.len(),
            n_qubits
        )));
    }
    match format {
        EmitFormat::Json => {
            let rows: Vec<DistributionRow> = probs
                .iter()
                .enumerate()
                .map(|(i, &p)| DistributionRow { bitstring: bitstring(i, n_qubits), probability: p })
                .collect();
            write_json(&rows, path)
        }
        EmitFormat::Csv => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "bitstring,probability")?;
            for (i, &p) in probs.iter().enumerate() {
                writeln!(f, "{},{:.17e}", bitstring(i, n_qubits), p)?;
            }
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct CountRow {
    bitstring: String,
    count: u64,
}

/// Sampled measurement counts with columns (bitstring, count).
pub fn emit_counts(
    counts: &std::collections::BTreeMap<usize, u64>,
    n_qubits: usize,
    path: &Path,
    format: EmitFormat,
) -> Result<()> {
    match format {
        EmitFormat::Json => {
            let rows: Vec<CountRow> = counts
                .iter()
                .map(|(&i, &c)| CountRow { bitstring: bitstring(i, n_qubits), count: c })
                .collect();
            write_json(&rows, path)
        }
        EmitFormat::Csv => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "bitstring,count")?;
            for (&i, &c) in counts {
                writeln!(f, "{},{c}", bitstring(i, n_qubits))?;
            }
            Ok(())
        }
    }
}

/// Sweep table with columns
/// (n_qubits, depth, chi, kappa, trials, mean_fidelity, std_err).
pub fn emit_sweep(table: &SweepTable, path: &Path, format: EmitFormat) -> Result<()> {
    match format {
        EmitFormat::Json => write_json(&table.rows, path),
        EmitFormat::Csv => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "n_qubits,depth,chi,kappa,trials,mean_fidelity,std_err")?;
            for r in &table.rows {
                writeln!(
                    f,
                    "{},{},{},{},{},{:.17e},{:.17e}",
                    r.n_qubits, r.depth, r.chi, r.kappa, r.trials, r.mean_fidelity, r.std_err
                )?;
            }
            Ok(())
        }
    }
}
