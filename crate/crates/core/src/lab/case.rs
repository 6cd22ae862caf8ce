use std::fmt;
use std::time::{Duration, Instant};

use crate::elliptic::boundary_flux_bound;
use crate::error::Result;
use crate::model::RunConfig;
use crate::record::Record;
use crate::stepper::{advance, SimState, StepStatus};

pub const MASS_TOLERANCE: f64 = 1e-11;
/// Relative to `M`.
pub const SIGNAL_BOUND_TOLERANCE: f64 = 1e-12;
pub const FLUX_BOUND_SLACK: f64 = 1e-8;
/// Fraction of the horizon inspected by the plateau criterion.
pub const PLATEAU_WINDOW: f64 = 0.2;
/// Largest relative growth of `‖u‖∞` inside the window still called a plateau.
pub const PLATEAU_GROWTH: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    Threshold { linf: f64 },
    DtUnderflow { dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Bounded,
    /// Suspected, never proved: the trigger cannot tell genuine blow-up from
    /// exhausted resolution.
    BlowupSuspected {
        t: f64,
        trigger: Trigger,
    },
    Inconclusive,
    ToleranceFailure {
        check: String,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Bounded => "bounded",
            Verdict::BlowupSuspected { .. } => "blowup_suspected",
            Verdict::Inconclusive => "inconclusive",
            Verdict::ToleranceFailure { .. } => "tolerance_failure",
        }
    }

    pub fn is_tolerance_failure(&self) -> bool {
        matches!(self, Verdict::ToleranceFailure { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::BlowupSuspected { t, trigger } => match trigger {
                Trigger::Threshold { linf } => write!(
                    f,
                    "blowup_suspected at t={t:e} (sup norm {linf:e} crossed the threshold)"
                ),
                Trigger::DtUnderflow { dt } => {
                    write!(
                        f,
                        "blowup_suspected at t={t:e} (step size {dt:e} fell below dt_min)"
                    )
                }
            },
            Verdict::ToleranceFailure { check } => write!(f, "tolerance_failure ({check})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub config: RunConfig,
    pub records: Vec<Record>,
    pub verdict: Verdict,
    pub status: StepStatus,
    pub initial_linf: f64,
    pub peak_linf: f64,
    pub terminal_t: f64,
    pub steps: u64,
    pub wall: Duration,
    pub final_state: SimState,
}

/// Online invariant checks applied to every record of a run.
#[derive(Debug, Clone)]
pub(crate) struct Monitor {
    initial_mass: f64,
    signal_max: f64,
    flux_limit: f64,
    pub(crate) failure: Option<&'static str>,
}

impl Monitor {
    pub(crate) fn new(config: &RunConfig, initial_mass: f64) -> Self {
        let m = config.boundary.value();
        let c1 = boundary_flux_bound(initial_mass, &config.geometry).unwrap_or(f64::INFINITY);
        Self {
            initial_mass,
            signal_max: m,
            flux_limit: m * c1 + FLUX_BOUND_SLACK,
            failure: None,
        }
    }

    pub(crate) fn observe(&mut self, r: &Record, state: &SimState) {
        if self.failure.is_some() {
            return;
        }
        let m = self.signal_max;
        let v = state.v();
        self.failure = if (r.mass - self.initial_mass).abs() > MASS_TOLERANCE * self.initial_mass {
            Some("mass_conservation")
        } else if !(r.min_u >= 0.0) {
            Some("positivity")
        } else if v.min() < -SIGNAL_BOUND_TOLERANCE * m
            || v.values()
                .iter()
                .any(|&x| x > m * (1.0 + SIGNAL_BOUND_TOLERANCE))
        {
            Some("v_bounds")
        } else if !(r.boundary_flux <= self.flux_limit) {
            Some("flux_bound")
        } else {
            None
        };
    }
}

/// Plateau criterion: `‖u‖∞` grows by less than 1% over the final 20% of the
/// horizon. `None` when the window holds fewer than two records.
pub fn plateau_growth(records: &[Record], t_end: f64) -> Option<f64> {
    let start = (1.0 - PLATEAU_WINDOW) * t_end;
    let window: Vec<f64> = records
        .iter()
        .filter(|r| r.t >= start)
        .map(|r| r.linf)
        .collect();
    if window.len() < 2 {
        return None;
    }
    let first = window[0];
    let max = window.iter().copied().fold(first, f64::max);
    Some(if first > 0.0 {
        (max - first) / first
    } else if max == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

pub fn run_case(config: &RunConfig) -> Result<CaseReport> {
    let started = Instant::now();
    let state = SimState::new(config)?;
    let initial_linf = state.u().sup_norm();
    let mut monitor = Monitor::new(config, state.initial_mass());
    let mut records = Vec::new();
    let outcome = advance(state, config, |r, s| {
        monitor.observe(r, s);
        records.push(r.clone());
    });

    let peak_linf = records.iter().map(|r| r.linf).fold(initial_linf, f64::max);
    let verdict = if let Some(check) = monitor.failure {
        Verdict::ToleranceFailure {
            check: check.into(),
        }
    } else {
        match outcome.status {
            StepStatus::NumericalFailure { value, .. } => Verdict::ToleranceFailure {
                check: if value < 0.0 {
                    "positivity".into()
                } else {
                    "numerical_failure".into()
                },
            },
            StepStatus::ThresholdExceeded { linf } => Verdict::BlowupSuspected {
                t: outcome.state.t,
                trigger: Trigger::Threshold { linf },
            },
            StepStatus::DtUnderflow { dt } => Verdict::BlowupSuspected {
                t: outcome.state.t,
                trigger: Trigger::DtUnderflow { dt },
            },
            StepStatus::Advanced => match plateau_growth(&records, config.t_end) {
                Some(g) if g < PLATEAU_GROWTH => Verdict::Bounded,
                _ => Verdict::Inconclusive,
            },
        }
    };

    Ok(CaseReport {
        config: config.clone(),
        verdict,
        status: outcome.status,
        initial_linf,
        peak_linf,
        terminal_t: outcome.state.t,
        steps: outcome.state.step_index,
        records,
        wall: started.elapsed(),
        final_state: outcome.state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryDatum, DiffusionLaw, Geometry, InitialData};

    fn config(alpha: f64, initial: InitialData) -> RunConfig {
        let mut c = RunConfig::new(
            Geometry::new(2, 1.0).unwrap(),
            DiffusionLaw::new(alpha, 1.0).unwrap(),
            BoundaryDatum::new(1.0).unwrap(),
            initial,
        );
        c.cells = 32;
        c.t_end = 0.2;
        c.output_stride = 10;
        c
    }

    fn record(t: f64, linf: f64) -> Record {
        Record {
            step: 0,
            t,
            dt: 0.0,
            mass: 1.0,
            linf,
            lp: vec![],
            boundary_trace: 0.0,
            boundary_flux: 0.0,
            min_u: 0.0,
        }
    }

    #[test]
    fn plateau_window() {
        let flat: Vec<Record> = (0..=10).map(|k| record(k as f64 * 0.1, 2.0)).collect();
        assert_eq!(plateau_growth(&flat, 1.0), Some(0.0));
        let growing: Vec<Record> = (0..=10)
            .map(|k| record(k as f64 * 0.1, 1.0 + k as f64))
            .collect();
        assert!(plateau_growth(&growing, 1.0).unwrap() > PLATEAU_GROWTH);
        assert_eq!(plateau_growth(&flat[..5], 1.0), None);
        let zeros: Vec<Record> = (0..=10).map(|k| record(k as f64 * 0.1, 0.0)).collect();
        assert_eq!(plateau_growth(&zeros, 1.0), Some(0.0));
    }

    #[test]
    fn zero_data_is_bounded() {
        for alpha in [0.0, 0.5, 2.0] {
            let r = run_case(&config(alpha, InitialData::Constant { value: 0.0 })).unwrap();
            assert_eq!(r.verdict, Verdict::Bounded);
            assert_eq!(r.peak_linf, 0.0);
            assert_eq!(r.terminal_t, 0.2);
        }
    }

    #[test]
    fn low_threshold_reports_suspected_blowup() {
        let mut c = config(
            2.0,
            InitialData::GaussianBump {
                mass: 20.0,
                width: 0.5,
                center: 0.0,
            },
        );
        c.u_max_threshold = Some(1.0);
        let r = run_case(&c).unwrap();
        assert!(matches!(
            r.verdict,
            Verdict::BlowupSuspected {
                trigger: Trigger::Threshold { .. },
                ..
            }
        ));
        assert_eq!(r.verdict.label(), "blowup_suspected");
    }

    #[test]
    fn short_horizon_is_inconclusive() {
        let mut c = config(
            0.5,
            InitialData::GaussianBump {
                mass: 5.0,
                width: 0.1,
                center: 0.0,
            },
        );
        c.t_end = 1e-4;
        c.output_stride = 1_000_000;
        let r = run_case(&c).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }
}
