//! Per-step diagnostics handed to recorders, and their CSV form.

use std::io::Write;

use crate::csvio::fmt_f64;
use crate::stepper::SimState;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub step: u64,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub linf: f64,
    /// `‖u‖_p` for each configured exponent, in configuration order.
    pub lp: Vec<f64>,
    /// `u` extrapolated to `r = R`.
    pub boundary_trace: f64,
    /// `∂v/∂ν` at `r = R`.
    pub boundary_flux: f64,
    pub min_u: f64,
}

impl Record {
    pub fn capture(state: &SimState, lp_exponents: &[f64]) -> Self {
        let u = state.u();
        Self {
            step: state.step_index,
            t: state.t,
            dt: state.dt,
            mass: u.integral(),
            linf: u.sup_norm(),
            lp: lp_exponents
                .iter()
                .map(|&p| u.lp_norm(p).map_or(f64::NAN, |l| l.norm))
                .collect(),
            boundary_trace: u.boundary_trace(),
            boundary_flux: state.elliptic().boundary_flux,
            min_u: u.min(),
        }
    }
}

/// Column name for an `Lp` norm, e.g. `l2` or `l3.5`.
pub fn lp_column(p: f64) -> String {
    format!("l{p}")
}

pub fn header(lp_exponents: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["step", "t", "dt", "mass", "linf"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(lp_exponents.iter().map(|&p| lp_column(p)));
    h.extend(
        ["u_boundary", "dv_dnu", "min_u"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// Streams records as CSV with a fixed header.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W, lp_exponents: &[f64]) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(header(lp_exponents))?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &Record) -> csv::Result<()> {
        let mut row = vec![
            r.step.to_string(),
            fmt_f64(r.t),
            fmt_f64(r.dt),
            fmt_f64(r.mass),
            fmt_f64(r.linf),
        ];
        row.extend(r.lp.iter().map(|&x| fmt_f64(x)));
        row.extend([r.boundary_trace, r.boundary_flux, r.min_u].map(fmt_f64));
        self.inner.write_record(row)
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| std::io::Error::other(e.to_string()))
    }
}

/// Serializes a record stream to CSV bytes in memory.
pub fn to_csv_bytes(records: &[Record], lp_exponents: &[f64]) -> Vec<u8> {
    let mut w = RecordWriter::new(Vec::new(), lp_exponents).expect("in-memory write");
    for r in records {
        w.write(r).expect("in-memory write");
    }
    w.finish().expect("in-memory write")
}
