//! CSV output. The first line is a `#` comment with the generation time;
//! everything after it depends only on the configuration.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::experiments::{Outcome, Row};

pub const COLUMNS: [&str; 15] = [
    "refinement",
    "h",
    "k",
    "err_u_star",
    "err_B_star",
    "err_E_star",
    "err_p_star",
    "rate_u",
    "rate_B",
    "rate_E",
    "rate_p",
    "divB_max",
    "energy_margin",
    "picard_iters_max",
    "solve_residual_max",
];

fn float(x: f64) -> String {
    format!("{x:.6e}")
}

fn opt4(v: Option<[f64; 4]>) -> [String; 4] {
    match v {
        Some(a) => a.map(float),
        None => Default::default(),
    }
}

fn record(row: &Row) -> Vec<String> {
    let mut rec = vec![row.refinement.to_string(), float(row.h), float(row.k)];
    rec.extend(opt4(row.errors));
    rec.extend(opt4(row.rates));
    rec.push(float(row.div_b_max));
    rec.push(row.energy_margin.map(float).unwrap_or_default());
    rec.push(row.picard_iters_max.to_string());
    rec.push(float(row.solve_residual_max));
    rec
}

/// Writes the timestamp line and the table.
pub fn write_csv<W: Write>(mut out: W, outcome: &Outcome) -> std::io::Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    writeln!(out, "# generated unix={secs} experiment={} scheme={}", outcome.kind, outcome.scheme)?;
    write_table(out, &outcome.rows)
}

/// The table without the timestamp line.
pub fn write_table<W: Write>(out: W, rows: &[Row]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_fields_for_missing_values() {
        let row = Row {
            refinement: 3,
            h: 0.5,
            k: 0.01,
            div_b_max: 1e-16,
            picard_iters_max: 4,
            solve_residual_max: 2e-12,
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_table(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0].split(',').count(), 15);
        assert_eq!(lines[1], "3,5.000000e-1,1.000000e-2,,,,,,,,,1.000000e-16,,4,2.000000e-12");
    }
}
