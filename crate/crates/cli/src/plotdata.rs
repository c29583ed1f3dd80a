//! Plot-ready CSV of a risk series against the schedule's natural clock `n^{1−ρ}`.

use std::io::Write;

use relulab::dynamics::fmt_float;
use relulab::TrajectoryRecord;

use crate::error::{CliError, Result};

pub const PLOT_HEADER: &str = "n,n_pow,risk,log_risk";

/// Writes `n, n^{1−ρ}, risk, ln risk` per recorded row. Floats carry 17 significant digits.
pub fn emit_plotdata<W: Write>(rec: &TrajectoryRecord<f64>, rho_exp: f64, out: W) -> Result<()> {
    let rows: Vec<(usize, f64)> = rec.rows.iter().map(|r| (r.n, r.risk)).collect();
    write_plotdata(&rows, rho_exp, out)
}

/// As [`emit_plotdata`] for bare `(n, risk)` pairs.
pub fn write_plotdata<W: Write>(rows: &[(usize, f64)], rho_exp: f64, mut out: W) -> Result<()> {
    if rows.is_empty() {
        return Err(CliError::EmptyRecord);
    }
    writeln!(out, "{PLOT_HEADER}")?;
    for &(n, risk) in rows {
        let x = (n as f64).powf(1.0 - rho_exp);
        writeln!(out, "{n},{},{},{}", fmt_float(x), fmt_float(risk), fmt_float(risk.ln()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_series_is_rejected() {
        assert!(matches!(write_plotdata(&[], 0.0, Vec::new()), Err(CliError::EmptyRecord)));
    }

    #[test]
    fn sqrt_clock() {
        let mut buf = Vec::new();
        write_plotdata(&[(4, 1.0)], 0.5, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cols: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(cols[1].parse::<f64>().unwrap(), 2.0);
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
    }
}
