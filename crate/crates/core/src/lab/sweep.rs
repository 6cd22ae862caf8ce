use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::thread;

use toml::Value;

use crate::config::{flatten_table, run_config_from_map, to_map, FlatMap};
use crate::csvio::fmt_f64;
use crate::error::{Error, Result};
use crate::lab::case::{run_case, CaseReport, Verdict};
use crate::model::RunConfig;

pub const SWEEP_HEADER: [&str; 7] = [
    "alpha",
    "data_id",
    "verdict",
    "peak_linf",
    "terminal_t",
    "steps",
    "wall_ms",
];

/// Id given to the base data when a plan lists no variants.
pub const BASE_ID: &str = "base";

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub id: String,
    /// Flat configuration keys replacing those of the base. Setting
    /// `initial.kind` discards every `initial.*` key of the base.
    pub overrides: FlatMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub base: RunConfig,
    /// Strictly increasing.
    pub alphas: Vec<f64>,
    /// Sorted by id.
    pub variants: Vec<Variant>,
    pub t_end: Option<f64>,
    pub u_max_threshold: Option<f64>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub alpha: f64,
    pub data_id: String,
    pub config: RunConfig,
}

impl SweepPlan {
    pub fn new(base: RunConfig, alphas: Vec<f64>) -> Self {
        Self {
            base,
            alphas,
            variants: vec![Variant {
                id: BASE_ID.into(),
                overrides: FlatMap::new(),
            }],
            t_end: None,
            u_max_threshold: None,
            workers: 1,
        }
    }

    /// Reads a plan file: top-level `alphas`, optional `workers`, `t_end`
    /// and `u_max_threshold`, a `[base]` run configuration and optional
    /// `[variants.<id>]` tables of overrides.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config(e.to_string()))?;
        if let Some(k) = table.keys().find(|k| {
            ![
                "alphas",
                "workers",
                "t_end",
                "u_max_threshold",
                "base",
                "variants",
            ]
            .contains(&k.as_str())
        }) {
            return Err(Error::UnknownKey(k.clone()));
        }
        let base = match table.remove("base") {
            Some(Value::Table(t)) => run_config_from_map(&flatten_table(t))?,
            Some(_) => return Err(Error::config("`base` must be a table")),
            None => return Err(Error::MissingKey("base".into())),
        };
        let alphas = match table.get("alphas") {
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| number(v, "alphas"))
                .collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::config("`alphas` must be a list of numbers")),
            None => return Err(Error::MissingKey("alphas".into())),
        };
        let mut plan = Self::new(base, alphas);
        if let Some(v) = table.get("workers") {
            plan.workers = match v {
                Value::Integer(w) if *w >= 1 => *w as usize,
                other => {
                    return Err(Error::config(format!(
                        "`workers` must be a positive integer, got {other}"
                    )))
                }
            };
        }
        plan.t_end = table.get("t_end").map(|v| number(v, "t_end")).transpose()?;
        plan.u_max_threshold = table
            .get("u_max_threshold")
            .map(|v| number(v, "u_max_threshold"))
            .transpose()?;
        match table.remove("variants") {
            None => {}
            Some(Value::Table(t)) => {
                let mut variants = BTreeMap::new();
                for (id, v) in t {
                    let Value::Table(overrides) = v else {
                        return Err(Error::config(format!("variant `{id}` must be a table")));
                    };
                    variants.insert(id, flatten_table(overrides));
                }
                plan.variants = variants
                    .into_iter()
                    .map(|(id, overrides)| Variant { id, overrides })
                    .collect();
            }
            Some(_) => return Err(Error::config("`variants` must be a table of tables")),
        }
        plan.cases()?;
        Ok(plan)
    }

    /// Every `(alpha, variant)` pair, ordered by `alpha` then data id.
    pub fn cases(&self) -> Result<Vec<Case>> {
        if self.alphas.is_empty() {
            return Err(Error::config("`alphas` must not be empty"));
        }
        if self.alphas.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("`alphas` must be strictly increasing"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("a sweep needs at least one data variant"));
        }
        if self.variants.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(Error::config("variant ids must be unique and sorted"));
        }
        if self.workers == 0 {
            return Err(Error::config("`workers` must be >= 1"));
        }
        let base = to_map(&self.base);
        let mut cases = Vec::with_capacity(self.alphas.len() * self.variants.len());
        for &alpha in &self.alphas {
            for variant in &self.variants {
                let mut map = base.clone();
                if variant.overrides.contains_key("initial.kind") {
                    map.retain(|k, _| !k.starts_with("initial."));
                }
                map.extend(variant.overrides.clone());
                map.insert("alpha".into(), Value::Float(alpha));
                if let Some(t) = self.t_end {
                    map.insert("t_end".into(), Value::Float(t));
                }
                if let Some(th) = self.u_max_threshold {
                    map.insert("u_max_threshold".into(), Value::Float(th));
                }
                let config = run_config_from_map(&map).map_err(|e| {
                    Error::config(format!("variant `{}` at alpha {alpha}: {e}", variant.id))
                })?;
                cases.push(Case {
                    alpha,
                    data_id: variant.id.clone(),
                    config,
                });
            }
        }
        Ok(cases)
    }
}

fn number(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(format!(
            "`{key}` must be a number, got {other}"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub data_id: String,
    pub verdict: Verdict,
    pub peak_linf: f64,
    pub terminal_t: f64,
    pub steps: u64,
    pub wall_ms: f64,
}

impl SweepRow {
    fn from_report(case: &Case, report: &CaseReport) -> Self {
        Self {
            alpha: case.alpha,
            data_id: case.data_id.clone(),
            verdict: report.verdict.clone(),
            peak_linf: report.peak_linf,
            terminal_t: report.terminal_t,
            steps: report.steps,
            wall_ms: report.wall.as_secs_f64() * 1e3,
        }
    }

    fn failed(case: &Case, check: String) -> Self {
        Self {
            alpha: case.alpha,
            data_id: case.data_id.clone(),
            verdict: Verdict::ToleranceFailure { check },
            peak_linf: f64::NAN,
            terminal_t: f64::NAN,
            steps: 0,
            wall_ms: 0.0,
        }
    }
}

/// Whether the `wall_ms` column carries measured times or zeros. Only the
/// latter makes sweep output reproducible byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Timing {
    #[default]
    Measured,
    Omitted,
}

pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    run_sweep_with(plan, run_case)
}

/// Runs every case of `plan` on `plan.workers` threads, dealing cases out
/// round-robin. A panicking case becomes a `tolerance_failure` row.
pub fn run_sweep_with<F>(plan: &SweepPlan, runner: F) -> Result<Vec<SweepRow>>
where
    F: Fn(&RunConfig) -> Result<CaseReport> + Sync,
{
    let cases = plan.cases()?;
    let workers = plan.workers.min(cases.len()).max(1);
    let runner = &runner;
    let cases = &cases;
    let mut slots: Vec<Option<SweepRow>> = vec![None; cases.len()];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..cases.len())
                        .step_by(workers)
                        .map(|k| {
                            let case = &cases[k];
                            let row = match catch_unwind(AssertUnwindSafe(|| runner(&case.config)))
                            {
                                Ok(Ok(report)) => SweepRow::from_report(case, &report),
                                Ok(Err(e)) => SweepRow::failed(case, format!("setup: {e}")),
                                Err(_) => SweepRow::failed(case, "worker fault".into()),
                            };
                            (k, row)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            // panics are caught per case, so a worker never unwinds
            for (k, row) in h.join().expect("sweep worker") {
                slots[k] = Some(row);
            }
        }
    });
    Ok(slots
        .into_iter()
        .map(|r| r.expect("every case assigned"))
        .collect())
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow], timing: Timing) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        let wall = match timing {
            Timing::Measured => format!("{:.3}", r.wall_ms),
            Timing::Omitted => "0".into(),
        };
        w.write_record([
            fmt_f64(r.alpha),
            r.data_id.clone(),
            r.verdict.label().into(),
            fmt_f64(r.peak_linf),
            fmt_f64(r.terminal_t),
            r.steps.to_string(),
            wall,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"
alphas = [0.0, 0.5]
workers = 2
t_end = 0.01

[base]
n = 2
R = 1.0
alpha = 0.0
kappa = 1.0
M = 1.0
initial.kind = "gaussian"
initial.mass = 2.0
initial.width = 0.3
cells = 32
t_end = 1.0

[variants.wide]
initial.width = 0.5

[variants.flat]
initial.kind = "constant"
initial.mass = 1.0

[variants.ball3]
n = 3
"#;

    #[test]
    fn parses_and_orders_cases() {
        let plan = SweepPlan::parse(PLAN).unwrap();
        assert_eq!(plan.workers, 2);
        let cases = plan.cases().unwrap();
        let keys: Vec<(f64, &str)> = cases
            .iter()
            .map(|c| (c.alpha, c.data_id.as_str()))
            .collect();
        assert_eq!(
            keys,
            vec![
                (0.0, "ball3"),
                (0.0, "flat"),
                (0.0, "wide"),
                (0.5, "ball3"),
                (0.5, "flat"),
                (0.5, "wide")
            ]
        );
        assert!(cases.iter().all(|c| c.config.t_end == 0.01));
        assert_eq!(cases[0].config.geometry.dim, 3);
        assert!(matches!(
            cases[1].config.initial,
            crate::model::InitialData::Constant { .. }
        ));
        assert_eq!(cases[5].config.diffusion.alpha, 0.5);
    }

    #[test]
    fn rejects_bad_plans() {
        assert!(SweepPlan::parse(&PLAN.replace("[0.0, 0.5]", "[0.5, 0.0]")).is_err());
        assert!(SweepPlan::parse(&PLAN.replace("[0.0, 0.5]", "[]")).is_err());
        assert!(SweepPlan::parse(&PLAN.replace("workers = 2", "workers = 0")).is_err());
        assert_eq!(
            SweepPlan::parse(&format!("speed = 1\n{PLAN}")).unwrap_err(),
            Error::UnknownKey("speed".into())
        );
        assert!(SweepPlan::parse(&PLAN.replace("n = 3", "n = 0")).is_err());
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let mut plan = SweepPlan::parse(PLAN).unwrap();
        let mut outputs = Vec::new();
        for workers in [1, 2, 8] {
            plan.workers = workers;
            let rows = run_sweep(&plan).unwrap();
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &rows, Timing::Omitted).unwrap();
            outputs.push(buf);
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
        let text = String::from_utf8(outputs.remove(0)).unwrap();
        assert!(text.starts_with("alpha,data_id,verdict,peak_linf,terminal_t,steps,wall_ms\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn panicking_case_is_isolated() {
        let mut plan = SweepPlan::parse(PLAN).unwrap();
        plan.workers = 3;
        let rows = run_sweep_with(&plan, |c| {
            if c.geometry.dim == 3 && c.diffusion.alpha == 0.5 {
                panic!("injected");
            }
            run_case(c)
        })
        .unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            if r.data_id == "ball3" && r.alpha == 0.5 {
                assert_eq!(
                    r.verdict,
                    Verdict::ToleranceFailure {
                        check: "worker fault".into()
                    }
                );
            } else {
                assert!(!r.verdict.is_tolerance_failure(), "{r:?}");
            }
        }
    }
}
