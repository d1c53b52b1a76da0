//! CSV schemas shared by the library and the CLI.
//!
//! Every output file starts with `#`-prefixed comment lines embedding the
//! fully resolved configuration and seed, so any file can be traced back to
//! the exact invocation that produced it. Values are written with 17
//! significant digits, enough to round-trip `f64` exactly.
//!
//! Schemas:
//!
//! * trajectory: `t,phi,du,z` (empty cells where a channel is absent)
//! * filter trace: `t,mu,kappa,r`
//! * summary: `t,filter,r_mean,r_hat,n_runs`
//! * timing: `filter,median_secs,rep0..rep4`

use std::io::{self, BufRead, Write};

use crate::experiments::{RunSummary, TimingReport};
use crate::models::TrajectoryRecord;
use crate::special::bessel_ratio;

#[derive(Debug)]
pub enum CsvError {
    Io(io::Error),
    Parse { line: usize, message: String },
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(e) => write!(f, "io: {e}"),
            Self::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

impl std::error::Error for CsvError {}

impl From<io::Error> for CsvError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

/// 17 significant digits: exact `f64` round trip.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the `# key = value` preamble common to all output files.
pub fn write_header<W: Write>(w: &mut W, kvs: &[(&str, String)]) -> io::Result<()> {
    for (k, v) in kvs {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

pub fn write_trajectory<W: Write>(
    w: &mut W,
    rec: &TrajectoryRecord,
    kvs: &[(&str, String)],
) -> io::Result<()> {
    write_header(w, kvs)?;
    writeln!(w, "t,phi,du,z")?;
    for i in 0..rec.times.len() {
        let du = if i == 0 || rec.du.is_empty() { String::new() } else { fmt_g17(rec.du[i - 1]) };
        let z = if i == 0 || rec.z.is_empty() {
            String::new()
        } else {
            rec.z[i - 1].map(fmt_g17).unwrap_or_default()
        };
        writeln!(w, "{},{},{},{}", fmt_g17(rec.times[i]), fmt_g17(rec.phi[i]), du, z)?;
    }
    Ok(())
}

/// Reads a trajectory CSV written by [`write_trajectory`]; returns the
/// record together with the header key/value pairs.
pub fn read_trajectory<R: BufRead>(
    r: R,
) -> Result<(TrajectoryRecord, Vec<(String, String)>), CsvError> {
    let mut kvs = Vec::new();
    let mut times = Vec::new();
    let mut phi = Vec::new();
    let mut du = Vec::new();
    let mut z = Vec::new();
    let mut saw_columns = false;
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                kvs.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !saw_columns {
            if trimmed != "t,phi,du,z" {
                return Err(CsvError::Parse {
                    line: lineno,
                    message: format!("expected column row 't,phi,du,z', got '{trimmed}'"),
                });
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 4 {
            return Err(CsvError::Parse {
                line: lineno,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, CsvError> {
            s.parse::<f64>().map_err(|e| CsvError::Parse {
                line: lineno,
                message: format!("bad {what} '{s}': {e}"),
            })
        };
        times.push(parse(fields[0], "t")?);
        phi.push(parse(fields[1], "phi")?);
        if !fields[2].is_empty() {
            du.push(parse(fields[2], "du")?);
        }
        if times.len() > 1 {
            z.push(if fields[3].is_empty() { None } else { Some(parse(fields[3], "z")?) });
        }
    }
    if times.is_empty() {
        return Err(CsvError::Parse { line: 0, message: "no data rows".into() });
    }
    if z.iter().all(Option::is_none) {
        z.clear();
    }
    Ok((TrajectoryRecord { times, phi, du, z }, kvs))
}

/// Filter trace: `t,mu,kappa,r` with `r = F(kappa)`.
pub fn write_trace<W: Write>(
    w: &mut W,
    times: &[f64],
    mu: &[f64],
    kappa: &[f64],
    kvs: &[(&str, String)],
) -> io::Result<()> {
    write_header(w, kvs)?;
    writeln!(w, "t,mu,kappa,r")?;
    for i in 0..times.len() {
        let r = bessel_ratio(kappa[i].max(0.0)).unwrap_or(f64::NAN);
        writeln!(
            w,
            "{},{},{},{}",
            fmt_g17(times[i]),
            fmt_g17(mu[i]),
            fmt_g17(kappa[i]),
            fmt_g17(r)
        )?;
    }
    Ok(())
}

/// Monte Carlo summary in long format: `t,filter,r_mean,r_hat,n_runs`.
pub fn write_summary<W: Write>(
    w: &mut W,
    summary: &RunSummary,
    kvs: &[(&str, String)],
) -> io::Result<()> {
    write_header(w, kvs)?;
    writeln!(w, "# n_runs = {}", summary.n_runs)?;
    writeln!(w, "# failed_runs = {}", summary.failed_runs)?;
    writeln!(w, "# obs_checksum = {:016x}", summary.obs_checksum)?;
    writeln!(w, "t,filter,r_mean,r_hat,n_runs")?;
    for f in &summary.filters {
        for (i, &t) in summary.times.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_g17(t),
                f.name,
                fmt_g17(f.est[i]),
                fmt_g17(f.emp[i]),
                summary.n_runs
            )?;
        }
    }
    Ok(())
}

/// Density samples `phi,p` on a uniform grid (exponential-family export).
pub fn write_density<W: Write>(
    w: &mut W,
    grid: &[(f64, f64)],
    kvs: &[(&str, String)],
) -> io::Result<()> {
    write_header(w, kvs)?;
    writeln!(w, "phi,p")?;
    for &(phi, p) in grid {
        writeln!(w, "{},{}", fmt_g17(phi), fmt_g17(p))?;
    }
    Ok(())
}

pub fn write_timing<W: Write>(
    w: &mut W,
    report: &TimingReport,
    kvs: &[(&str, String)],
) -> io::Result<()> {
    write_header(w, kvs)?;
    writeln!(w, "filter,median_secs,rep0,rep1,rep2,rep3,rep4")?;
    for e in &report.entries {
        write!(w, "{},{}", e.name, fmt_g17(e.median_secs))?;
        for r in &e.reps_secs {
            write!(w, ",{}", fmt_g17(*r))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_circular, CircularModelParams};

    #[test]
    fn trajectory_round_trip_is_bit_exact() {
        let p = CircularModelParams::new(1.0, 10.0, Some(4.0), 0.01, 3).unwrap();
        let rec = simulate_circular(&p, 0.5, 31).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &rec, &[("seed", "31".into())]).unwrap();
        let (back, kvs) = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(rec, back);
        assert_eq!(kvs, vec![("seed".to_string(), "31".to_string())]);
    }

    #[test]
    fn trajectory_row_count() {
        let p = CircularModelParams::new(1.0, 10.0, None, 0.01, 1).unwrap();
        let rec = simulate_circular(&p, 10.0, 7).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &rec, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_rows = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("t,") && !l.trim().is_empty())
            .count();
        assert_eq!(data_rows, 1001);
    }

    #[test]
    fn malformed_input_reports_line() {
        let bad = "t,phi,du,z\n0.0,0.0,,\nnot,a,number,here\n";
        match read_trajectory(bad.as_bytes()) {
            Err(CsvError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn density_export_integrates_to_one() {
        use crate::expfam::{gvm_density_grid, GvmNaturalParams};
        let theta = GvmNaturalParams::new(vec![1.0, 0.3], vec![0.2, -0.5]).unwrap();
        let grid = gvm_density_grid(&theta, 256).unwrap();
        let mut buf = Vec::new();
        write_density(&mut buf, &grid, &[("order", "2".into())]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("phi,p"));
        let step = std::f64::consts::TAU / 256.0;
        let mass: f64 = grid.iter().map(|(_, p)| p * step).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[0.1, std::f64::consts::PI, 1e-300, 123456.789, -0.0] {
            let s = fmt_g17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }
}
