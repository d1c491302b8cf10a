//! CSV ingestion and output.
//!
//! Every file has a header row and only numeric fields. Numbers are written
//! with 16 significant digits in scientific notation.

use std::fs;
use std::io::Write;
use std::path::Path;

use numdiff::TimeSeries;

use crate::error::{CliError, CliResult};

/// Largest relative spread of time steps accepted as uniform sampling.
pub const UNIFORMITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|h| h.to_string()).collect(), columns: vec![Vec::new(); headers.len()] }
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in 0..self.len() {
            let row: Vec<String> = self.columns.iter().map(|c| format_number(c[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn format_number(x: f64) -> String {
    format!("{x:.15e}")
}

pub fn read_table(path: &Path) -> CliResult<Table> {
    let name = path.display();
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("cannot read {name}: {e}")))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes.as_slice());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Io(format!("{name}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(CliError::Io(format!("{name}: empty file (a header row is required)")));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Io(format!("{name}:{line}: column '{}': cannot parse '{field}' as a number", headers[i]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Io(format!("{name}:{line}: column '{}': value is not finite", headers[i])));
            }
            columns[i].push(v);
        }
    }
    Ok(Table { headers, columns })
}

/// Writes through a temporary file in the target directory and renames it,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_table(path: &Path, table: &Table) -> CliResult<()> {
    write_atomic(path, &table.to_csv())
}

/// How to find the sampled values and their spacing in a table.
#[derive(Debug, Clone, Default)]
pub struct ColumnSpec {
    pub dt: Option<f64>,
    pub time_col: Option<String>,
    pub value_col: Option<String>,
}

/// A series read from a table, with the time stamps to report it against.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub series: TimeSeries,
    pub times: Vec<f64>,
}

/// Picks the value column (`--value-col`, else `y`, else the only column
/// that is not the time column) and the time step (`--dt`, else from the
/// time column, `t` by default).
pub fn ingest(path: &Path, spec: &ColumnSpec) -> CliResult<Ingested> {
    let table = read_table(path)?;
    let name = path.display();
    let time_name = spec.time_col.clone().unwrap_or_else(|| "t".to_string());
    let has_time = spec.dt.is_none() && table.column(&time_name).is_some();

    let value_name = match &spec.value_col {
        Some(v) => v.clone(),
        None if table.column("y").is_some() => "y".to_string(),
        None => {
            let candidates: Vec<&String> = table.headers.iter().filter(|h| **h != time_name).collect();
            match candidates.as_slice() {
                [only] => (*only).clone(),
                _ => {
                    return Err(CliError::Usage(format!(
                        "{name}: cannot tell which column holds the values ({}); pass --value-col",
                        table.headers.join(", ")
                    )))
                }
            }
        }
    };
    let values = table
        .column(&value_name)
        .ok_or_else(|| CliError::Usage(format!("{name}: no column named '{value_name}'")))?
        .to_vec();
    if values.len() < numdiff::series::MIN_SERIES_LEN {
        return Err(CliError::Io(format!(
            "{name}: {} data rows, at least {} are needed",
            values.len(),
            numdiff::series::MIN_SERIES_LEN
        )));
    }

    let (dt, times) = if let Some(dt) = spec.dt {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(CliError::Usage(format!("--dt must be positive, got {dt}")));
        }
        (dt, (0..values.len()).map(|k| k as f64 * dt).collect())
    } else if has_time {
        let t = table.column(&time_name).unwrap().to_vec();
        (uniform_step(&t, &name.to_string())?, t)
    } else if spec.time_col.is_some() {
        return Err(CliError::Usage(format!("{name}: no column named '{time_name}'")));
    } else {
        return Err(CliError::Usage(format!(
            "{name}: no time column '{time_name}'; pass --dt or --time-col"
        )));
    };
    let series = TimeSeries::new(values, dt).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
    Ok(Ingested { series, times })
}

/// Mean step of strictly increasing, uniformly spaced times.
fn uniform_step(t: &[f64], name: &str) -> CliResult<f64> {
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(CliError::Io(format!("{name}: time column must increase")));
    }
    for (k, w) in t.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > UNIFORMITY_TOLERANCE * dt {
            // Data row k + 1 sits on line k + 2 after the header.
            return Err(CliError::Io(format!(
                "{name}:{}: sampling is not uniform (step {step:e} against mean {dt:e})",
                k + 3
            )));
        }
    }
    Ok(dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn time_column_sets_the_step() {
        let f = file("t,y\n0,1\n0.5,2\n1.0,3\n1.5,5\n");
        let got = ingest(f.path(), &ColumnSpec::default()).unwrap();
        assert_eq!(got.series.dt(), 0.5);
        assert_eq!(got.series.values(), &[1.0, 2.0, 3.0, 5.0]);
    }

    #[test]
    fn single_value_column_needs_dt() {
        let f = file("pos\n1\n2\n3\n4\n");
        assert!(matches!(ingest(f.path(), &ColumnSpec::default()), Err(CliError::Usage(_))));
        let spec = ColumnSpec { dt: Some(0.1), ..Default::default() };
        assert_eq!(ingest(f.path(), &spec).unwrap().series.len(), 4);
    }

    #[test]
    fn ambiguous_value_column_is_rejected() {
        let f = file("t,a,b\n0,1,2\n1,1,2\n2,1,2\n3,1,2\n");
        assert!(matches!(ingest(f.path(), &ColumnSpec::default()), Err(CliError::Usage(_))));
        let spec = ColumnSpec { value_col: Some("b".into()), ..Default::default() };
        assert_eq!(ingest(f.path(), &spec).unwrap().series.values()[0], 2.0);
    }

    #[test]
    fn too_few_rows_is_an_input_error() {
        let f = file("t,y\n0,1\n1,2\n");
        assert!(matches!(ingest(f.path(), &ColumnSpec::default()), Err(CliError::Io(_))));
    }

    #[test]
    fn written_numbers_carry_sixteen_digits() {
        assert_eq!(format_number(0.1), "1.000000000000000e-1");
        assert_eq!(format_number(-2.5e300), "-2.500000000000000e300");
    }
}
