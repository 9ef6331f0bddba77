//! CSV series ingestion, experiment configuration files and report tables.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{histogram, ExperimentConfig, ExperimentSummary};

/// A numeric column read from a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDataset {
    pub label: String,
    pub values: Vec<f64>,
    pub source_path: PathBuf,
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Csv { path: path.to_path_buf(), message: format!("{other:?}") },
    }
}

/// Reads column `column` of a comma-separated file with a header row.
/// Values keep file order and must all be finite numbers.
pub fn load_csv_series(path: impl AsRef<Path>, column: &str) -> Result<SeriesDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    let col = headers.iter().position(|h| h == column).ok_or_else(|| Error::MissingColumn {
        path: path.to_path_buf(),
        column: column.to_string(),
        available: headers.iter().collect::<Vec<_>>().join(", "),
    })?;

    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = record.get(col).unwrap_or("");
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(Error::ParseCell { path: path.to_path_buf(), row: i + 1, line, cell: cell.to_string() })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyFile { path: path.to_path_buf() });
    }
    Ok(SeriesDataset { label: column.to_string(), values, source_path: path.to_path_buf() })
}

fn decode_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let mut key = e.path().to_string();
        let message = e.inner().to_string();
        // Missing fields are reported at the parent; name the field.
        if let Some(rest) = message.strip_prefix("missing field `") {
            let field = rest.split('`').next().unwrap_or_default();
            key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
        }
        Error::Config { key, message }
    })
}

/// Reads a JSON experiment configuration and checks only the fields every
/// experiment uses (sizes, replicates, level).
pub fn read_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let config = decode_config(path.as_ref())?;
    config.validate_run()?;
    Ok(config)
}

/// Reads and fully validates a JSON experiment configuration.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let config = decode_config(path.as_ref())?;
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Text(String),
    Int(i64),
    Real(f64),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) if x.is_finite() && *x != 0.0 && x.abs() < 1e-3 => format!("{x:.4e}"),
            Cell::Real(x) => format!("{x:.4}"),
        }
    }

    /// Shortest decimal that parses back to the same value; reals always
    /// carry a decimal point or exponent so they do not read back as integers.
    fn csv(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Real(x) => format!("{x:?}"),
        }
    }

    fn parse(s: &str) -> Cell {
        if let Ok(i) = s.parse::<i64>() {
            Cell::Int(i)
        } else if let Ok(x) = s.parse::<f64>() {
            Cell::Real(x)
        } else {
            Cell::Text(s.to_string())
        }
    }

    fn is_numeric(&self) -> bool {
        !matches!(self, Cell::Text(_))
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

/// A rectangular table rendered as aligned text or CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

impl ReportTable {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Self {
        Self { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Parameter(format!(
                "row has {} cells but the table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn render_text(&self) -> String {
        let body: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::text).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| body.iter().map(|r| r[j].chars().count()).chain([self.columns[j].chars().count()]).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let header: Vec<String> = self.columns.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", header.join("  ").trim_end());
        for (row, cells) in body.iter().zip(&self.rows) {
            let line: Vec<String> = row
                .iter()
                .zip(cells)
                .zip(&widths)
                .map(|((s, c), &w)| if c.is_numeric() { format!("{s:>w$}") } else { format!("{s:<w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let path = Path::new("<report>");
        writer.write_record(&self.columns).map_err(|e| csv_err(path, e))?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::csv)).map_err(|e| csv_err(path, e))?;
        }
        let bytes = writer.into_inner().map_err(|e| io_err(path, e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    /// Parses CSV produced by [`ReportTable::to_csv`]. Cells that look like
    /// integers or reals are read as such.
    pub fn from_csv(title: impl Into<String>, text: &str) -> Result<Self> {
        let path = Path::new("<report>");
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = reader.headers().map_err(|e| csv_err(path, e))?.iter().map(String::from).collect();
        let mut table = ReportTable { title: title.into(), columns, rows: Vec::new() };
        for record in reader.records() {
            let record = record.map_err(|e| csv_err(path, e))?;
            table.push_row(record.iter().map(Cell::parse).collect())?;
        }
        Ok(table)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Text => Ok(self.render_text()),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Writes `table` to stdout or a file.
pub fn emit_report(table: &ReportTable, format: Format, destination: &Destination) -> Result<()> {
    let text = table.render(format)?;
    match destination {
        Destination::Stdout => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e))
        }
        Destination::File(path) => std::fs::write(path, text).map_err(|e| io_err(path, e)),
    }
}

pub fn table1_report(summary: &ExperimentSummary) -> ReportTable {
    let mut t = ReportTable::new(
        format!("Mean and variance of D (master seed {})", summary.master_seed),
        &["family", "params", "n", "mean_D", "var_D", "n_failed"],
    );
    for c in &summary.cells {
        t.push_row(vec![
            c.family.clone().into(),
            c.params_label().into(),
            c.n.into(),
            c.empirical_mean_d.into(),
            c.empirical_var_d.into(),
            c.n_failed.into(),
        ])
        .expect("row matches header");
    }
    t
}

pub fn rejection_report(summary: &ExperimentSummary) -> ReportTable {
    let mut t = ReportTable::new(
        format!("Rejections of the chi-square reference (master seed {})", summary.master_seed),
        &["family", "params", "n", "replicates", "rejections", "rate", "rate_se", "lower_cutoff", "upper_cutoff", "n_failed"],
    );
    for c in &summary.cells {
        t.push_row(vec![
            c.family.clone().into(),
            c.params_label().into(),
            c.n.into(),
            c.replicates.into(),
            c.rejection_count.into(),
            c.rejection_rate().into(),
            c.rejection_rate_se().into(),
            c.lower_cutoff.into(),
            c.upper_cutoff.into(),
            c.n_failed.into(),
        ])
        .expect("row matches header");
    }
    t
}

/// Plot-ready histograms of simulated D, one block of rows per cell, with
/// the χ²ₙ₋₁ expected counts and the two rejection cutoffs on every row.
pub fn histogram_report(summary: &ExperimentSummary, bins: usize) -> Result<ReportTable> {
    let mut t = ReportTable::new(
        format!("Histogram of D (master seed {})", summary.master_seed),
        &["cell", "n", "bin_lower", "bin_upper", "count", "chi2_expected", "lower_cutoff", "upper_cutoff"],
    );
    for (i, cell) in summary.cells.iter().enumerate() {
        for b in histogram(cell, bins)? {
            t.push_row(vec![
                i.into(),
                cell.n.into(),
                b.lower.into(),
                b.upper.into(),
                b.count.into(),
                b.chi2_expected.into(),
                cell.lower_cutoff.into(),
                cell.upper_cutoff.into(),
            ])?;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_column_in_order() {
        let f = write_temp("year,rainfall\n1901,10.5\n1902,3\n1903,7.25\n");
        let s = load_csv_series(f.path(), "rainfall").unwrap();
        assert_eq!(s.values, vec![10.5, 3.0, 7.25]);
        assert_eq!(s.label, "rainfall");
    }

    #[test]
    fn distinct_errors() {
        let f = write_temp("year,rainfall\n1901,1\n");
        assert!(matches!(load_csv_series(f.path(), "rain"), Err(Error::MissingColumn { .. })));

        let rows: String = (1..=8).map(|i| format!("{i},{}\n", if i == 7 { "abc" } else { "1.0" })).collect();
        let f = write_temp(&format!("year,rainfall\n{rows}"));
        match load_csv_series(f.path(), "rainfall") {
            Err(e @ Error::ParseCell { row: 7, line: 8, .. }) => assert!(e.to_string().contains("row 7")),
            other => panic!("{other:?}"),
        }

        assert!(matches!(load_csv_series(write_temp("").path(), "x"), Err(Error::EmptyFile { .. })));
        assert!(matches!(load_csv_series(write_temp("x\n").path(), "x"), Err(Error::EmptyFile { .. })));
        assert!(matches!(load_csv_series(write_temp("x\nNaN\n").path(), "x"), Err(Error::ParseCell { row: 1, .. })));
        assert!(matches!(load_csv_series("/nonexistent/file.csv", "x"), Err(Error::Io { .. })));
    }

    #[test]
    fn config_defaults_and_errors() {
        let f = write_temp(r#"{"family": "exponential", "parameter_grid": [1, 5], "sample_sizes": [100]}"#);
        let c = parse_config(f.path()).unwrap();
        assert_eq!(c.replicates, 10_000);
        assert_eq!(c.level, 0.05);
        assert_eq!(c.master_seed, 42);

        let key_of = |json: &str| match parse_config(write_temp(json).path()) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("{other:?}"),
        };
        assert_eq!(
            key_of(r#"{"family": "exponential", "parameter_grid": [1], "sample_sizes": [100], "replicates": 0}"#),
            "replicates"
        );
        assert_eq!(
            key_of(r#"{"family": "gamma_shape", "parameter_grid": [1], "sample_sizes": [100], "shape_paramter": 2}"#),
            "shape_paramter"
        );
        assert_eq!(key_of(r#"{"family": "exponential", "parameter_grid": [1]}"#), "sample_sizes");
        assert_eq!(
            key_of(r#"{"family": "exponential", "parameter_grid": [1], "sample_sizes": [100], "level": "x"}"#),
            "level"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = ReportTable::new("t", &["name", "k", "x"]);
        for (i, x) in [0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5e10, f64::MIN_POSITIVE].into_iter().enumerate() {
            t.push_row(vec![format!("row{i}").into(), i.into(), x.into()]).unwrap();
        }
        let back = ReportTable::from_csv("t", &t.to_csv().unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ReportTable::new("", &["family", "params", "n", "mean_D", "var_D", "n_failed"]);
        assert_eq!(t.to_csv().unwrap(), "family,params,n,mean_D,var_D,n_failed\n");
        assert_eq!(t.render_text().lines().count(), 1);
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut t = ReportTable::new("", &["a", "b"]);
        assert!(t.push_row(vec![Cell::Int(1)]).is_err());
    }

    #[test]
    fn text_uses_four_decimals() {
        let mut t = ReportTable::new("", &["x"]);
        t.push_row(vec![Cell::Real(369.500509)]).unwrap();
        assert!(t.render_text().contains("369.5005"));
    }
}
