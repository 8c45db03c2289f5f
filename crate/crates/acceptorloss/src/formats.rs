//! Text file formats: S21 traces, strain maps, two-column tables and the
//! flat CSV curves written next to each result record.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use acceptorloss_core::acceptor::{StrainTensor, C64};
use acceptorloss_core::resonator::S21Trace;
use acceptorloss_core::spectrum::{LossSpectrum, SpectrumError, StrainCell, StrainField};

use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `# key: value` lines anywhere in the file.
pub fn metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Numeric CSV table: header row, `#` comments, values with line numbers.
struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<f64>)>,
}

fn read_table(path: &Path, text: &str) -> Result<Table, CliError> {
    let schema = |line: u64, message: String| CliError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| schema(e.position().map_or(1, |p| p.line()), e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(schema(1, "missing header".into()));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| schema(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .zip(&header)
            .map(|(field, column)| {
                field
                    .parse::<f64>()
                    .map_err(|_| schema(line, format!("column `{column}`: cannot parse `{field}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push((line, values));
    }
    Ok(Table { header, rows })
}

fn column_index(path: &Path, header: &[String], name: &str) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Schema {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
}

/// Parsed S21 samples. Frequencies are strictly ascending; the minimum
/// length required for fitting is checked by [`S21Samples::into_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct S21Samples {
    pub frequencies_hz: Vec<f64>,
    pub values: Vec<C64>,
    /// From a `# power_dbm_at_device: X` line, if present.
    pub power_dbm_at_device: Option<f64>,
}

impl S21Samples {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_trace(self, default_power_dbm: f64) -> Result<S21Trace, CliError> {
        let power = self.power_dbm_at_device.unwrap_or(default_power_dbm);
        Ok(S21Trace::new(self.frequencies_hz, self.values, power)?)
    }
}

/// Reads `freq_hz,re,im` or `freq_hz,mag_db,phase_rad`, chosen by header.
pub fn parse_s21_csv(path: &Path) -> Result<S21Samples, CliError> {
    let text = read(path)?;
    let table = read_table(path, &text)?;
    let f = column_index(path, &table.header, "freq_hz")?;
    let polar =
        !table.header.iter().any(|h| h == "re") && table.header.iter().any(|h| h == "mag_db");
    let (c1, c2) = if polar {
        (
            column_index(path, &table.header, "mag_db")?,
            column_index(path, &table.header, "phase_rad")?,
        )
    } else {
        (
            column_index(path, &table.header, "re")?,
            column_index(path, &table.header, "im")?,
        )
    };
    let mut frequencies_hz = Vec::with_capacity(table.rows.len());
    let mut values = Vec::with_capacity(table.rows.len());
    for (line, row) in &table.rows {
        if let Some(&prev) = frequencies_hz.last() {
            if row[f] <= prev {
                return Err(CliError::NonMonotonicFrequency {
                    path: path.to_path_buf(),
                    line: *line,
                });
            }
        }
        frequencies_hz.push(row[f]);
        values.push(if polar {
            C64::from_polar(10f64.powf(row[c1] / 20.0), row[c2])
        } else {
            C64::new(row[c1], row[c2])
        });
    }
    let power_dbm_at_device = match metadata(&text).get("power_dbm_at_device") {
        Some(v) => Some(v.parse::<f64>().map_err(|_| CliError::Schema {
            path: path.to_path_buf(),
            line: 0,
            message: format!("power_dbm_at_device: cannot parse `{v}`"),
        })?),
        None => None,
    };
    Ok(S21Samples {
        frequencies_hz,
        values,
        power_dbm_at_device,
    })
}

pub const STRAIN_COLUMNS: [&str; 9] = [
    "x_um", "y_um", "weight", "sxx", "syy", "szz", "sxy", "syz", "szx",
];

/// Reads a strain map. A `# total_bulk_participation: X` line sets the
/// expected weight sum; otherwise the sum itself is used.
pub fn parse_strain_map(path: &Path) -> Result<StrainField, CliError> {
    let text = read(path)?;
    let table = read_table(path, &text)?;
    let idx: Vec<usize> = STRAIN_COLUMNS
        .iter()
        .map(|c| column_index(path, &table.header, c))
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::with_capacity(table.rows.len());
    for (row_index, (line, row)) in table.rows.iter().enumerate() {
        let v = |k: usize| row[idx[k]];
        if !(0..9).all(|k| v(k).is_finite()) {
            return Err(CliError::Schema {
                path: path.to_path_buf(),
                line: *line,
                message: format!("row {row_index}: non-finite value"),
            });
        }
        if v(2) < 0.0 {
            return Err(CliError::NegativeWeight {
                path: path.to_path_buf(),
                row: row_index,
                weight: v(2),
            });
        }
        cells.push(StrainCell {
            position_um: [v(0), v(1)],
            weight: v(2),
            strain: StrainTensor {
                xx: v(3),
                yy: v(4),
                zz: v(5),
                xy: v(6),
                yz: v(7),
                zx: v(8),
            },
        });
    }
    let total = match metadata(&text).get("total_bulk_participation") {
        Some(v) => Some(v.parse::<f64>().map_err(|_| CliError::Schema {
            path: path.to_path_buf(),
            line: 0,
            message: format!("total_bulk_participation: cannot parse `{v}`"),
        })?),
        None => None,
    };
    StrainField::new(cells, total).map_err(|e| match e {
        SpectrumError::NegativeWeight { index, weight } => CliError::NegativeWeight {
            path: path.to_path_buf(),
            row: index,
            weight,
        },
        other => CliError::Validation(format!("{}: {other}", path.display())),
    })
}

/// Two named numeric columns, e.g. `concentration_cm3,q`.
pub fn parse_pairs(path: &Path, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let text = read(path)?;
    let table = read_table(path, &text)?;
    let (ix, iy) = (
        column_index(path, &table.header, x)?,
        column_index(path, &table.header, y)?,
    );
    Ok(table.rows.iter().map(|(_, r)| (r[ix], r[iy])).collect())
}

/// Plot-ready table written as CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }
}

pub fn write_curve(path: &Path, curve: &Curve) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&curve.columns).map_err(io)?;
    for row in &curve.rows {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(io)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Two columns: bin center (Hz) and participation density (1/Hz).
pub fn spectrum_curve(spectrum: &LossSpectrum) -> Curve {
    let mut c = Curve::new("spectrum", &["bin_center_hz", "p_per_hz"]);
    c.rows = spectrum
        .bin_centers()
        .zip(&spectrum.p_per_hz)
        .map(|(f, p)| vec![f, *p])
        .collect();
    c
}

pub fn curve_path(dir: &Path, command: &str, curve: &Curve) -> PathBuf {
    dir.join(format!("{command}_{}.csv", curve.name))
}
