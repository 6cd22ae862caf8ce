use crate::error::{Error, Result};
use crate::grid::RadialProfile;
use crate::model::{sample_initial, RunConfig};
use crate::stepper::{step, SimState, StepStatus};

/// Allowed excess of late `ln w` over the early exponential fit.
pub const FIT_SLACK: f64 = 1.0;

/// Squared distance `w = ∫(u¹ − u²)²` between two runs started from `u₀`
/// and `u₀ + εφ` and advanced in lockstep with a shared step size.
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
    pub status: StepStatus,
    /// Whether the two trajectories stayed bit-for-bit identical.
    pub identical: bool,
}

pub fn paired_separation(
    config: &RunConfig,
    perturbation: &RadialProfile,
    eps: f64,
    max_steps: u64,
    stride: u64,
) -> Result<Separation> {
    let grid = config.grid()?;
    if perturbation.grid().as_ref() != grid.as_ref() {
        return Err(Error::GridMismatch);
    }
    let u0 = sample_initial(&config.initial, &grid)?;
    let shifted = RadialProfile::from_values(
        &grid,
        u0.values()
            .iter()
            .zip(perturbation.values())
            .map(|(a, p)| a + eps * p)
            .collect(),
    );
    let mut a = SimState::from_profile(u0, config)?;
    let mut b = SimState::from_profile(shifted, config)?;

    let gap = |a: &SimState, b: &SimState| -> f64 {
        let diff: Vec<f64> = a
            .u()
            .values()
            .iter()
            .zip(b.u().values())
            .map(|(x, y)| x - y)
            .collect();
        let d = RadialProfile::from_values(&grid, diff);
        d.lp_norm(2.0).map_or(f64::NAN, |l| l.raw)
    };
    let mut out = Separation {
        times: vec![0.0],
        gaps: vec![gap(&a, &b)],
        status: StepStatus::Advanced,
        identical: a.u() == b.u(),
    };

    while a.step_index < max_steps && a.t < config.t_end {
        let dt = a
            .cfl_dt(config)
            .min(b.cfl_dt(config))
            .min(config.t_end - a.t);
        a.dt = dt;
        b.dt = dt;
        let (oa, ob) = (step(a, config), step(b, config));
        a = oa.state;
        b = ob.state;
        // a halving retry in only one run would break the lockstep
        let status = if !oa.status.is_advanced() {
            oa.status
        } else {
            ob.status
        };
        if !status.is_advanced() || a.t != b.t {
            out.status = status;
            break;
        }
        out.identical &= a.u() == b.u();
        if a.step_index % stride == 0 {
            out.times.push(a.t);
            out.gaps.push(gap(&a, &b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallFit {
    /// Exponential rate fitted to `ln w` over the first half of the samples.
    pub rate: f64,
    pub intercept: f64,
    /// Largest `ln w − fit` over the second half.
    pub late_excess: f64,
}

impl GronwallFit {
    pub fn consistent(&self) -> bool {
        self.rate.is_finite() && self.late_excess <= FIT_SLACK
    }
}

/// Least-squares fit of `ln w = intercept + rate·t` on the early half,
/// extrapolated over the late half. `None` with fewer than four positive
/// samples.
pub fn gronwall_fit(times: &[f64], gaps: &[f64]) -> Option<GronwallFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(gaps)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&t, &w)| (t, w.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let (early, late) = pts.split_at(pts.len() / 2);
    let k = early.len() as f64;
    let mt = early.iter().map(|p| p.0).sum::<f64>() / k;
    let my = early.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = early.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = early.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let rate = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - rate * mt;
    let late_excess = late
        .iter()
        .map(|&(t, y)| y - (intercept + rate * t))
        .fold(f64::NEG_INFINITY, f64::max);
    Some(GronwallFit {
        rate,
        intercept,
        late_excess,
    })
}
