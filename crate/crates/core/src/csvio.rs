//! CSV helpers shared by profile snapshots, recorder streams and sweep tables.

use std::io::Write;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes equally long named columns as a CSV table with a header row.
pub fn write_columns<W: Write>(out: W, columns: &[(&str, &[f64])]) -> std::io::Result<()> {
    let rows = columns.first().map_or(0, |(_, c)| c.len());
    debug_assert!(columns.iter().all(|(_, c)| c.len() == rows));

    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns.iter().map(|(name, _)| *name))?;
    for i in 0..rows {
        w.write_record(columns.iter().map(|(_, c)| fmt_f64(c[i])))?;
    }
    w.flush()
}

/// A CSV file read back as named float columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}, column `{column}`: `{text}` is not a number")]
    NotANumber {
        row: usize,
        column: String,
        text: String,
    },
}

impl ReadError {
    pub fn is_io(&self) -> bool {
        matches!(self, ReadError::Csv(e) if e.is_io_error())
    }
}

pub fn read_table<R: std::io::Read>(input: R) -> Result<Table, ReadError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (i, field) in record.iter().enumerate() {
            let x = field
                .trim()
                .parse::<f64>()
                .map_err(|_| ReadError::NotANumber {
                    row: row + 1,
                    column: headers[i].clone(),
                    text: field.to_owned(),
                })?;
            columns[i].push(x);
        }
    }
    Ok(Table { headers, columns })
}
