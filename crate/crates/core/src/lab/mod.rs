//! Experiment layer: single runs with verdicts, the verification ledger,
//! paired-run diagnostics and parallel parameter sweeps.

mod case;
mod separation;
mod sweep;
mod verify;

pub use case::{
    plateau_growth, run_case, CaseReport, Trigger, Verdict, FLUX_BOUND_SLACK, MASS_TOLERANCE,
    PLATEAU_GROWTH, PLATEAU_WINDOW, SIGNAL_BOUND_TOLERANCE,
};
pub use separation::{gronwall_fit, paired_separation, GronwallFit, Separation, FIT_SLACK};
pub use sweep::{
    run_sweep, run_sweep_with, write_sweep_csv, Case, SweepPlan, SweepRow, Timing, Variant,
    BASE_ID, SWEEP_HEADER,
};
pub use verify::{
    cosh_errors, observed_order, representation_gap, sinh_errors, verify_suite, verify_suite_with,
    Bound, Check, Ledger,
};
