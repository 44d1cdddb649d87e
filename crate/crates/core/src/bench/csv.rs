//! Convergence tables.

use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "level",
    "n_vertices",
    "h",
    "eta",
    "rho_tilde",
    "linf_zbar",
    "flow_steps",
    "wall_time",
    "rate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub n_vertices: usize,
    pub h: f64,
    pub eta: f64,
    pub rho_tilde: Option<f64>,
    pub linf_zbar: f64,
    pub flow_steps: usize,
    pub wall_time: f64,
}

/// Seventeen significant digits, enough to recover every `f64`.
fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Experimental orders `d · log(η_i / η_{i+1}) / log(N_{i+1} / N_i)`
/// between consecutive rows; the first entry is `None`.
pub fn pairwise_rates(rows: &[ConvergenceRow], dim: usize) -> Vec<Option<f64>> {
    let mut rates = vec![None; rows.len()];
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        let dn = (b.n_vertices as f64 / a.n_vertices as f64).ln();
        if dn != 0.0 {
            rates[i] = Some(dim as f64 * (a.eta / b.eta).ln() / dn);
        }
    }
    rates
}

/// Least-squares rate `r` in `η ≈ C N^{−r/d}`.
pub fn fitted_rate(n_vertices: &[usize], eta: &[f64], dim: usize) -> f64 {
    let n = n_vertices.len().min(eta.len());
    let xs: Vec<f64> = n_vertices[..n].iter().map(|&v| (v as f64).ln()).collect();
    let ys: Vec<f64> = eta[..n].iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -(dim as f64) * sxy / sxx
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], dim: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv { line: 0, message: format!("{other:?}") },
    };
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(CSV_HEADER).map_err(to_err)?;
    for (row, rate) in rows.iter().zip(pairwise_rates(rows, dim)) {
        w.write_record([
            row.level.to_string(),
            row.n_vertices.to_string(),
            fmt(row.h),
            fmt(row.eta),
            row.rho_tilde.map(fmt).unwrap_or_default(),
            fmt(row.linf_zbar),
            row.flow_steps.to_string(),
            fmt(row.wall_time),
            rate.map(fmt).unwrap_or_default(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_convergence_csv(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRow>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv { line: 1, message: format!("{other:?}") },
    })?;
    let header = r
        .headers()
        .map_err(|e| Error::Csv { line: 1, message: e.to_string() })?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Csv { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (k, record) in r.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Csv { line, message: e.to_string() })?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or(Error::Csv { line, message: format!("missing column {}", CSV_HEADER[i]) })
        };
        let parse_f = |i: usize| -> Result<f64> {
            field(i)?.parse().map_err(|e| Error::Csv { line, message: format!("{}: {e}", CSV_HEADER[i]) })
        };
        let parse_u = |i: usize| -> Result<usize> {
            field(i)?.parse().map_err(|e| Error::Csv { line, message: format!("{}: {e}", CSV_HEADER[i]) })
        };
        rows.push(ConvergenceRow {
            level: parse_u(0)?,
            n_vertices: parse_u(1)?,
            h: parse_f(2)?,
            eta: parse_f(3)?,
            rho_tilde: if field(4)?.is_empty() { None } else { Some(parse_f(4)?) },
            linf_zbar: parse_f(5)?,
            flow_steps: parse_u(6)?,
            wall_time: parse_f(7)?,
        });
    }
    Ok(rows)
}
