//! Conservative explicit finite-volume update of
//! `u_t = ∇·(D(u)∇u − u∇v)` with no-flux boundary.
//!
//! Interior face fluxes combine a centered diffusive part with
//! `D(½(u_L+u_R))` and a donor-cell drift part. The two boundary faces carry
//! exactly zero flux, so mass changes only by round-off. The signal is
//! re-solved after every accepted step.

use crate::elliptic::{self, EllipticSolution};
use crate::error::{Error, Result};
use crate::grid::{sup_norm, RadialProfile};
use crate::model::{
    sample_initial, DiffusionLaw, RunConfig, DEFAULT_DT_MIN_FACTOR, DEFAULT_THRESHOLD_FACTOR,
};
use crate::record::Record;

/// Relative size of negative values that are treated as round-off.
pub const CLIP_TOLERANCE: f64 = 1e-13;

/// Blow-up triggers resolved against the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triggers {
    pub u_max: f64,
    pub dt_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Step size for the next call to [`step`].
    pub dt: f64,
    pub step_index: u64,
    u: RadialProfile,
    elliptic: EllipticSolution,
    face_diffusivity: Vec<f64>,
    initial_mass: f64,
    min_u_watermark: f64,
    triggers: Triggers,
}

impl SimState {
    /// Samples the configured initial data and solves for the signal.
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        let u0 = sample_initial(&config.initial, &grid)?;
        Self::from_profile(u0, config)
    }

    /// Starts a run at `t = 0` from an explicit density profile.
    pub fn from_profile(u0: RadialProfile, config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let grid = u0.grid();
        if *grid.geometry() != config.geometry || grid.cells() != config.cells {
            return Err(Error::GridMismatch);
        }
        if let Some((cell, value)) = u0.first_non_finite() {
            return Err(Error::NonFinite { cell, value });
        }
        if let Some(i) = u0.values().iter().position(|&x| x < 0.0) {
            return Err(Error::domain(format!(
                "initial density is negative at cell {i}: {}",
                u0.values()[i]
            )));
        }

        let elliptic = elliptic::solve_v(&u0, config.boundary)?;
        let face_diffusivity = face_diffusivities(u0.values(), &config.diffusion)?;
        let dt = cfl_from_faces(
            &face_diffusivity,
            &elliptic.vr_faces,
            &config.diffusion,
            grid.dr(),
            config.cfl_safety,
        );
        let triggers = Triggers {
            u_max: config.u_max_threshold.unwrap_or_else(|| {
                (DEFAULT_THRESHOLD_FACTOR * u0.sup_norm()).max(f64::MIN_POSITIVE)
            }),
            dt_min: config.dt_min.unwrap_or(DEFAULT_DT_MIN_FACTOR * dt),
        };
        Ok(Self {
            t: 0.0,
            dt,
            step_index: 0,
            initial_mass: u0.integral(),
            u: u0,
            elliptic,
            face_diffusivity,
            min_u_watermark: 0.0,
            triggers,
        })
    }

    pub fn u(&self) -> &RadialProfile {
        &self.u
    }

    pub fn v(&self) -> &RadialProfile {
        &self.elliptic.v
    }

    pub fn elliptic(&self) -> &EllipticSolution {
        &self.elliptic
    }

    pub fn initial_mass(&self) -> f64 {
        self.initial_mass
    }

    pub fn mass(&self) -> f64 {
        self.u.integral()
    }

    /// Most negative pre-clip value seen so far, relative to `‖u‖∞` (`<= 0`).
    pub fn min_u_watermark(&self) -> f64 {
        self.min_u_watermark
    }

    pub fn triggers(&self) -> Triggers {
        self.triggers
    }

    /// CFL step for the current state.
    pub fn cfl_dt(&self, config: &RunConfig) -> f64 {
        cfl_from_faces(
            &self.face_diffusivity,
            &self.elliptic.vr_faces,
            &config.diffusion,
            self.u.grid().dr(),
            config.cfl_safety,
        )
    }
}

/// `D(½(u_{j-1}+u_j))` on interior faces; boundary entries are zero.
fn face_diffusivities(u: &[f64], law: &DiffusionLaw) -> Result<Vec<f64>> {
    let n = u.len();
    let mut d = vec![0.0; n + 1];
    for j in 1..n {
        d[j] = law.eval(0.5 * (u[j - 1] + u[j]))?;
    }
    Ok(d)
}

fn fluxes_from_faces(u: &[f64], vr: &[f64], d: &[f64], areas: &[f64], dr: f64) -> Vec<f64> {
    let n = u.len();
    let mut flux = vec![0.0; n + 1];
    for j in 1..n {
        let (left, right) = (u[j - 1], u[j]);
        let donor = if vr[j] >= 0.0 { left } else { right };
        flux[j] = areas[j] * (d[j] * (right - left) / dr - donor * vr[j]);
    }
    flux
}

/// Face fluxes `Φ_j = A_j·[D(ū_j)(u_j − u_{j-1})/dr − u_donor·vr_j]`.
///
/// Positive flux points toward the origin. The origin and boundary faces
/// carry exactly zero.
pub fn face_flux(u: &RadialProfile, vr_faces: &[f64], law: &DiffusionLaw) -> Result<Vec<f64>> {
    let grid = u.grid();
    assert_eq!(vr_faces.len(), grid.cells() + 1, "one gradient per face");
    if let Some((cell, value)) = u.first_non_finite() {
        return Err(Error::NonFinite { cell, value });
    }
    if let Some((j, &value)) = vr_faces.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFinite { cell: j, value });
    }
    let d = face_diffusivities(u.values(), law)?;
    Ok(fluxes_from_faces(
        u.values(),
        vr_faces,
        &d,
        grid.areas(),
        grid.dr(),
    ))
}

fn cfl_from_faces(d: &[f64], vr: &[f64], law: &DiffusionLaw, dr: f64, safety: f64) -> f64 {
    let n = d.len() - 1;
    let d_max = if n > 1 {
        d[1..n].iter().copied().fold(0.0, f64::max)
    } else {
        0.0
    };
    // all-zero or single-cell degenerate case
    let d_max = if d_max > 0.0 {
        d_max
    } else {
        law.eval_unchecked(0.0)
    };
    let diffusive = dr * dr / (2.0 * d_max);
    let v_max = sup_norm(vr);
    let bound = if v_max > 0.0 {
        diffusive.min(dr / v_max)
    } else {
        diffusive
    };
    safety * bound
}

/// `dt = safety·min(dr²/(2·max D(ū)), dr/max|vr|)`.
pub fn cfl_dt(
    u: &RadialProfile,
    vr_faces: &[f64],
    law: &DiffusionLaw,
    cfl_safety: f64,
) -> Result<f64> {
    let d = face_diffusivities(u.values(), law)?;
    Ok(cfl_from_faces(&d, vr_faces, law, u.grid().dr(), cfl_safety))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepStatus {
    Advanced,
    DtUnderflow { dt: f64 },
    ThresholdExceeded { linf: f64 },
    NumericalFailure { cell: usize, value: f64 },
}

impl StepStatus {
    pub fn is_advanced(&self) -> bool {
        matches!(self, StepStatus::Advanced)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub status: StepStatus,
    /// The advanced state for `Advanced` and `ThresholdExceeded`; the
    /// unchanged input state otherwise.
    pub state: SimState,
}

/// Deliberate scheme defects used to prove that the verification suite
/// catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxFault {
    /// Flip the sign of the outer-face flux in each cell update only, which
    /// breaks the telescoping of interior fluxes.
    OneSidedSignFlip,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Scheme {
    pub fault: Option<FluxFault>,
}

pub fn step(state: SimState, config: &RunConfig) -> StepOutcome {
    step_with(state, config, Scheme::default())
}

pub fn step_with(state: SimState, config: &RunConfig, scheme: Scheme) -> StepOutcome {
    let final_step = state.t + state.dt >= config.t_end;
    if state.dt < state.triggers.dt_min && !final_step {
        let dt = state.dt;
        return StepOutcome {
            status: StepStatus::DtUnderflow { dt },
            state,
        };
    }

    let grid = state.u.grid().clone();
    let u = state.u.values();
    let flux = fluxes_from_faces(
        u,
        &state.elliptic.vr_faces,
        &state.face_diffusivity,
        grid.areas(),
        grid.dr(),
    );
    let outer_sign = match scheme.fault {
        Some(FluxFault::OneSidedSignFlip) => -1.0,
        None => 1.0,
    };

    let mut dt = state.dt;
    let mut attempt = 0;
    let (mut next, linf, min_ratio) = loop {
        let next: Vec<f64> = u
            .iter()
            .zip(grid.volumes())
            .enumerate()
            .map(|(i, (ui, vol))| ui + dt / vol * (outer_sign * flux[i + 1] - flux[i]))
            .collect();
        if let Some((cell, &value)) = next.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return StepOutcome {
                status: StepStatus::NumericalFailure { cell, value },
                state,
            };
        }
        let linf = sup_norm(&next);
        let (cell, min) =
            next.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, x)| if x < acc.1 { (i, x) } else { acc },
                );
        if min >= -CLIP_TOLERANCE * linf {
            let ratio = if linf > 0.0 {
                (min / linf).min(0.0)
            } else {
                0.0
            };
            break (next, linf, ratio);
        }
        if attempt == 1 {
            return StepOutcome {
                status: StepStatus::NumericalFailure { cell, value: min },
                state,
            };
        }
        attempt += 1;
        dt *= 0.5;
    };
    clip_conservatively(&mut next, grid.volumes());

    let u_next = RadialProfile::from_values(&grid, next);
    let elliptic = match elliptic::solve_v(&u_next, config.boundary) {
        Ok(sol) => sol,
        Err(e) => return failure(state, e),
    };
    let face_diffusivity = match face_diffusivities(u_next.values(), &config.diffusion) {
        Ok(d) => d,
        Err(e) => return failure(state, e),
    };

    let advanced = SimState {
        t: state.t + dt,
        dt,
        step_index: state.step_index + 1,
        u: u_next,
        elliptic,
        face_diffusivity,
        initial_mass: state.initial_mass,
        min_u_watermark: state.min_u_watermark.min(min_ratio),
        triggers: state.triggers,
    };
    let status = if linf > advanced.triggers.u_max {
        StepStatus::ThresholdExceeded { linf }
    } else {
        StepStatus::Advanced
    };
    StepOutcome {
        status,
        state: advanced,
    }
}

fn failure(state: SimState, err: Error) -> StepOutcome {
    let (cell, value) = match err {
        Error::NonFinite { cell, value } => (cell, value),
        Error::Singular { row, pivot } => (row, pivot),
        _ => (0, f64::NAN),
    };
    StepOutcome {
        status: StepStatus::NumericalFailure { cell, value },
        state,
    }
}

/// Zeroes round-off negatives and removes the mass they added from the
/// positive cells proportionally.
fn clip_conservatively(u: &mut [f64], volumes: &[f64]) {
    let negative: f64 = u
        .iter()
        .zip(volumes)
        .filter(|(x, _)| **x < 0.0)
        .map(|(x, v)| x * v)
        .sum();
    if negative == 0.0 {
        return;
    }
    let positive: f64 = u
        .iter()
        .zip(volumes)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, v)| x * v)
        .sum();
    let factor = if positive > 0.0 {
        (positive + negative) / positive
    } else {
        1.0
    };
    for x in u.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        } else {
            *x *= factor;
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdvanceOutcome {
    /// `Advanced` when the horizon was reached.
    pub status: StepStatus,
    pub state: SimState,
}

/// Runs CFL-controlled steps until `t_end`, a blow-up trigger, or a failure.
///
/// The recorder sees the initial state, every `output_stride`-th step and
/// the terminal state.
pub fn advance<F>(state: SimState, config: &RunConfig, recorder: F) -> AdvanceOutcome
where
    F: FnMut(&Record, &SimState),
{
    advance_with(state, config, Scheme::default(), recorder)
}

pub fn advance_with<F>(
    mut state: SimState,
    config: &RunConfig,
    scheme: Scheme,
    mut recorder: F,
) -> AdvanceOutcome
where
    F: FnMut(&Record, &SimState),
{
    let mut last_recorded = state.step_index;
    recorder(&Record::capture(&state, &config.lp_exponents), &state);

    let mut status = StepStatus::Advanced;
    while state.t < config.t_end {
        let cfl = state.cfl_dt(config);
        if cfl < state.triggers.dt_min {
            state.dt = cfl;
            status = StepStatus::DtUnderflow { dt: cfl };
            break;
        }
        let remaining = config.t_end - state.t;
        let landing = cfl >= remaining;
        state.dt = if landing { remaining } else { cfl };

        let planned = state.dt;
        let outcome = step_with(state, config, scheme);
        state = outcome.state;
        status = outcome.status;
        if status.is_advanced() && landing && state.dt == planned {
            state.t = config.t_end;
        }
        if !status.is_advanced() {
            break;
        }
        if state.step_index.is_multiple_of(config.output_stride as u64) {
            recorder(&Record::capture(&state, &config.lp_exponents), &state);
            last_recorded = state.step_index;
        }
    }
    if state.step_index != last_recorded {
        recorder(&Record::capture(&state, &config.lp_exponents), &state);
    }
    AdvanceOutcome { status, state }
}
