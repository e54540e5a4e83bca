//! Sweep results as CSV, one row per density ratio.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{Estimate, SweepResult, SweepRow};

pub const SWEEP_HEADER: [&str; 9] = [
    "density_ratio",
    "r_u_mean",
    "r_u_stderr",
    "r_n_mean",
    "r_n_stderr",
    "r_c_mean",
    "r_c_stderr",
    "iterations_used",
    "degenerate_count",
];

/// Seventeen significant digits: every f64 survives the round trip.
fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(fmt)?;
    for row in &result.rows {
        w.write_record([
            real(row.density_ratio),
            real(row.r_u.mean),
            real(row.r_u.stderr),
            real(row.r_n.mean),
            real(row.r_n.stderr),
            real(row.r_c.mean),
            real(row.r_c.stderr),
            row.iterations_used.to_string(),
            row.degenerate_count.to_string(),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn emit_sweep_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep_csv(result, file).map_err(|e| match e {
        Error::Format(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

/// Parses a sweep CSV. The iteration count per ratio is not stored, so the
/// result reports the largest `iterations_used + degenerate_count` seen.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<SweepResult> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| Error::Format(e.to_string()))?;
    if header.iter().ne(SWEEP_HEADER) {
        return Err(Error::Format(format!("unexpected header: {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let real = |k: usize| -> Result<f64> {
            record[k].trim().parse().map_err(|_| {
                Error::Format(format!("row {}: `{}` is not a number in {}", line + 1, &record[k], SWEEP_HEADER[k]))
            })
        };
        let count = |k: usize| -> Result<usize> {
            record[k].trim().parse().map_err(|_| {
                Error::Format(format!("row {}: `{}` is not a count in {}", line + 1, &record[k], SWEEP_HEADER[k]))
            })
        };
        rows.push(SweepRow {
            density_ratio: real(0)?,
            r_u: Estimate { mean: real(1)?, stderr: real(2)? },
            r_n: Estimate { mean: real(3)?, stderr: real(4)? },
            r_c: Estimate { mean: real(5)?, stderr: real(6)? },
            iterations_used: count(7)?,
            degenerate_count: count(8)?,
        });
    }
    let iterations = rows.iter().map(|r| r.iterations_used + r.degenerate_count).max().unwrap_or(0);
    Ok(SweepResult::from_rows(rows, iterations, Vec::new()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ratio: f64, u: f64, n: f64) -> SweepRow {
        SweepRow {
            density_ratio: ratio,
            r_u: Estimate { mean: u, stderr: 0.01 },
            r_n: Estimate { mean: n, stderr: 1.0 / 3.0 },
            r_c: Estimate { mean: 0.123456789123, stderr: 0.0 },
            iterations_used: 7,
            degenerate_count: 1,
        }
    }

    fn csv_of(result: &SweepResult) -> String {
        let mut buf = Vec::new();
        write_sweep_csv(result, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn header_and_line_count() {
        let res = SweepResult::from_rows(vec![row(10.0, 0.9, 0.6), row(20.0, 0.7, 0.8)], 8, vec![]);
        let text = csv_of(&res);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "density_ratio,r_u_mean,r_u_stderr,r_n_mean,r_n_stderr,r_c_mean,r_c_stderr,iterations_used,degenerate_count"
        );
    }

    #[test]
    fn empty_result_is_header_only() {
        let text = csv_of(&SweepResult::from_rows(vec![], 1, vec![]));
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn round_trip_is_exact() {
        let res = SweepResult::from_rows(vec![row(10.0, 0.9, 0.6), row(20.0, 0.7, 0.8)], 8, vec![]);
        let back = read_sweep_csv(csv_of(&res).as_bytes()).unwrap();
        assert_eq!(back.rows, res.rows);
        assert_eq!(back.crossing, res.crossing);
        assert_eq!(back.iterations, 8);
    }

    #[test]
    fn digits_and_separators() {
        let text = csv_of(&SweepResult::from_rows(vec![row(12345.5, 0.9, 0.6)], 8, vec![]));
        let first = text.lines().nth(1).unwrap().split(',').next().unwrap();
        assert_eq!(first, "1.2345500000000000e4");
        assert!(first.contains('.'));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(read_sweep_csv("a,b\n1,2\n".as_bytes()).is_err());
        let bad = format!("{}\n1,x,0,0,0,0,0,1,0\n", SWEEP_HEADER.join(","));
        assert!(matches!(read_sweep_csv(bad.as_bytes()), Err(Error::Format(_))));
    }
}
