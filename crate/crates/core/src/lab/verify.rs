use std::fmt;
use std::sync::Arc;

use crate::elliptic::{boundary_flux_bound, scaled_residual, solve_v, vr_from_integral};
use crate::error::Result;
use crate::grid::{RadialGrid, RadialProfile};
use crate::lab::case::{FLUX_BOUND_SLACK, MASS_TOLERANCE, SIGNAL_BOUND_TOLERANCE};
use crate::model::{sample_initial, BoundaryDatum, Geometry, RunConfig};
use crate::record::Record;
use crate::stepper::{step_with, Scheme, SimState, StepStatus, CLIP_TOLERANCE};

/// Steps taken by the trajectory checks.
pub const VERIFY_STEPS: u64 = 2000;
pub const DETERMINISM_STEPS: u64 = 200;
pub const ORACLE_TOLERANCE: f64 = 1e-4;
pub const ORACLE_ORDER: f64 = 1.9;
pub const REPRESENTATION_ORDER: f64 = 1.5;
/// Relative agreement of the two gradient routes where they coincide.
pub const REPRESENTATION_IDENTITY: f64 = 1e-10;
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tol: f64,
    pub bound: Bound,
}

impl Check {
    fn at_most(name: &str, measured: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tol,
            bound: Bound::AtMost,
        }
    }

    fn at_least(name: &str, measured: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tol,
            bound: Bound::AtLeast,
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost => self.measured <= self.tol,
            Bound::AtLeast => self.measured >= self.tol,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "CHECK {} {} measured={:e} tol={:e}",
            self.name,
            if self.passed() { "pass" } else { "fail" },
            self.measured,
            self.tol
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub checks: Vec<Check>,
}

impl Ledger {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

impl fmt::Display for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

pub fn verify_suite(config: &RunConfig) -> Result<Ledger> {
    verify_suite_with(config, Scheme::default())
}

/// Runs every check against `config`, stepping with `scheme`.
pub fn verify_suite_with(config: &RunConfig, scheme: Scheme) -> Result<Ledger> {
    config.validate()?;
    let mut checks = Vec::new();
    elliptic_oracles(config, &mut checks)?;
    representation(config, &mut checks)?;
    trajectory(config, scheme, &mut checks)?;
    comparison(config, &mut checks)?;
    zero_fixed_point(config, scheme, &mut checks)?;
    determinism(config, scheme, &mut checks)?;
    Ok(Ledger { checks })
}

fn max_error(p: &RadialProfile, exact: impl Fn(f64) -> f64) -> f64 {
    p.grid()
        .centers()
        .iter()
        .zip(p.values())
        .map(|(&r, v)| (v - exact(r)).abs())
        .fold(0.0, f64::max)
}

/// Smallest observed order across successive halvings of `dr`.
pub fn observed_order(errors: &[f64]) -> f64 {
    errors
        .windows(2)
        .map(|w| {
            if w[0] == 0.0 && w[1] == 0.0 {
                f64::INFINITY
            } else {
                (w[0] / w[1]).log2()
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn grid(geometry: Geometry, cells: usize) -> Result<Arc<RadialGrid>> {
    Ok(Arc::new(RadialGrid::new(geometry, cells)?))
}

/// Max errors against `cosh(r)/cosh(1)` on the unit interval, `u ≡ 1`, `M = 1`.
pub fn cosh_errors(ladder: &[usize]) -> Result<Vec<f64>> {
    let geometry = Geometry::new(1, 1.0)?;
    let m = BoundaryDatum::new(1.0)?;
    ladder
        .iter()
        .map(|&cells| {
            let g = grid(geometry, cells)?;
            let u = RadialProfile::from_values(&g, vec![1.0; cells]);
            Ok(max_error(&solve_v(&u, m)?.v, |r| r.cosh() / 1f64.cosh()))
        })
        .collect()
}

/// Max errors against `M·(R/r)·sinh(√u*·r)/sinh(√u*·R)` in the 3-ball.
pub fn sinh_errors(radius: f64, m: f64, ustar: f64, ladder: &[usize]) -> Result<Vec<f64>> {
    let geometry = Geometry::new(3, radius)?;
    let datum = BoundaryDatum::new(m)?;
    let k = ustar.sqrt();
    let exact = |r: f64| m * (radius / r) * (k * r).sinh() / (k * radius).sinh();
    ladder
        .iter()
        .map(|&cells| {
            let g = grid(geometry, cells)?;
            let u = RadialProfile::from_values(&g, vec![ustar; cells]);
            Ok(max_error(&solve_v(&u, datum)?.v, exact))
        })
        .collect()
}

const ORACLE_LADDER: [usize; 4] = [64, 128, 256, 512];

fn elliptic_oracles(config: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let cosh = cosh_errors(&ORACLE_LADDER)?;
    checks.push(Check::at_most(
        "elliptic_oracle_1d",
        cosh[2],
        ORACLE_TOLERANCE,
    ));
    checks.push(Check::at_least(
        "elliptic_order_1d",
        observed_order(&cosh),
        ORACLE_ORDER,
    ));
    let sinh = sinh_errors(
        config.geometry.radius,
        config.boundary.value(),
        4.0,
        &ORACLE_LADDER,
    )?;
    checks.push(Check::at_least(
        "elliptic_order_3d",
        observed_order(&sinh),
        ORACLE_ORDER,
    ));
    Ok(())
}

/// Difference between the two gradient routes for the configured initial data
/// sampled on `cells` cells: `(ball-weighted L2, max, max |vr|)`.
pub fn representation_gap(config: &RunConfig, cells: usize) -> Result<(f64, f64, f64)> {
    let g = grid(config.geometry, cells)?;
    let u = sample_initial(&config.initial, &g)?;
    let sol = solve_v(&u, config.boundary)?;
    let integral = vr_from_integral(&u, &sol.v)?;
    let dr = g.dr();
    let mut l2 = 0.0;
    let mut max = 0.0f64;
    for ((a, b), area) in sol.vr_faces.iter().zip(&integral).zip(g.areas()) {
        let d = a - b;
        l2 += area * dr * d * d;
        max = max.max(d.abs());
    }
    let scale = sol.vr_faces.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok((l2.sqrt(), max, scale))
}

fn representation(config: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let n = config.cells;
    if config.geometry.dim <= 2 {
        let (_, max, scale) = representation_gap(config, n)?;
        let rel = if scale > 0.0 { max / scale } else { max };
        checks.push(Check::at_most(
            "vr_representation_identity",
            rel,
            REPRESENTATION_IDENTITY,
        ));
    } else {
        let gaps = [n, 2 * n, 4 * n]
            .iter()
            .map(|&c| representation_gap(config, c).map(|g| g.0))
            .collect::<Result<Vec<_>>>()?;
        checks.push(Check::at_least(
            "vr_representation_order",
            observed_order(&gaps),
            REPRESENTATION_ORDER,
        ));
    }
    Ok(())
}

#[derive(Debug, Default)]
struct Extremes {
    mass_drift: f64,
    min_u: f64,
    v_below: f64,
    v_above: f64,
    v_decrease: f64,
    flux_excess: f64,
    residual: f64,
}

impl Extremes {
    fn observe(&mut self, state: &SimState, m: f64, flux_limit: f64, boundary: BoundaryDatum) {
        let m0 = state.initial_mass();
        let drift = (state.mass() - m0).abs();
        self.mass_drift = self
            .mass_drift
            .max(if m0 > 0.0 { drift / m0 } else { drift });
        self.min_u = self.min_u.min(state.u().min());
        let v = state.v().values();
        for &x in v {
            self.v_below = self.v_below.max(-x / m);
            self.v_above = self.v_above.max((x - m) / m);
        }
        for w in v.windows(2) {
            self.v_decrease = self.v_decrease.max((w[0] - w[1]) / m);
        }
        self.flux_excess = self
            .flux_excess
            .max(state.elliptic().boundary_flux - flux_limit);
        self.residual = self
            .residual
            .max(scaled_residual(state.u(), boundary, state.v()) / m);
    }
}

/// Takes up to `steps` CFL steps toward `t_end`, calling `visit` on every state.
fn run_steps(
    config: &RunConfig,
    scheme: Scheme,
    steps: u64,
    mut visit: impl FnMut(&SimState),
) -> Result<(SimState, StepStatus)> {
    let mut state = SimState::new(config)?;
    visit(&state);
    let mut status = StepStatus::Advanced;
    while state.step_index < steps && state.t < config.t_end {
        state.dt = state.cfl_dt(config).min(config.t_end - state.t);
        let out = step_with(state, config, scheme);
        state = out.state;
        status = out.status;
        if !matches!(status, StepStatus::Advanced) {
            break;
        }
        visit(&state);
    }
    Ok((state, status))
}

fn trajectory(config: &RunConfig, scheme: Scheme, checks: &mut Vec<Check>) -> Result<()> {
    let m = config.boundary.value();
    let initial = SimState::new(config)?;
    let c1 = boundary_flux_bound(initial.initial_mass(), &config.geometry)?;
    let flux_limit = m * c1;
    let mut ex = Extremes::default();
    let (last, status) = run_steps(config, scheme, VERIFY_STEPS, |s| {
        ex.observe(s, m, flux_limit, config.boundary)
    })?;

    checks.push(Check::at_most(
        "elliptic_residual",
        ex.residual,
        RESIDUAL_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "v_lower_bound",
        ex.v_below,
        SIGNAL_BOUND_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "v_upper_bound",
        ex.v_above,
        SIGNAL_BOUND_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "v_monotone",
        ex.v_decrease,
        SIGNAL_BOUND_TOLERANCE,
    ));
    checks.push(Check::at_most(
        "flux_bound",
        ex.flux_excess,
        FLUX_BOUND_SLACK,
    ));
    checks.push(Check::at_most(
        "mass_conservation",
        ex.mass_drift,
        MASS_TOLERANCE,
    ));
    checks.push(Check::at_least("nonnegativity", ex.min_u, 0.0));
    checks.push(Check::at_least(
        "positivity_margin",
        last.min_u_watermark(),
        -CLIP_TOLERANCE,
    ));
    // blow-up triggers are not defects; only a failed step is
    let failed = matches!(status, StepStatus::NumericalFailure { .. });
    checks.push(Check::at_most(
        "step_failures",
        if failed { 1.0 } else { 0.0 },
        0.0,
    ));
    Ok(())
}

fn comparison(config: &RunConfig, checks: &mut Vec<Check>) -> Result<()> {
    let g = config.grid()?;
    let low = sample_initial(&config.initial, &g)?;
    let bump = RadialProfile::from_fn(&g, |r| {
        let x = r / config.geometry.radius;
        1.0 + (-(x - 0.5) * (x - 0.5) * 20.0).exp()
    });
    let high = RadialProfile::from_values(
        &g,
        low.values()
            .iter()
            .zip(bump.values())
            .map(|(a, b)| a + b)
            .collect(),
    );
    let m = config.boundary.value();
    let v_low = solve_v(&low, config.boundary)?.v;
    let v_high = solve_v(&high, config.boundary)?.v;
    let excess = v_high
        .values()
        .iter()
        .zip(v_low.values())
        .map(|(h, l)| (h - l) / m)
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most(
        "comparison_principle",
        excess,
        SIGNAL_BOUND_TOLERANCE,
    ));
    Ok(())
}

fn zero_fixed_point(config: &RunConfig, scheme: Scheme, checks: &mut Vec<Check>) -> Result<()> {
    let mut zero = config.clone();
    zero.initial = crate::model::InitialData::Constant { value: 0.0 };
    let m = config.boundary.value();
    let mut worst = 0.0f64;
    run_steps(&zero, scheme, DETERMINISM_STEPS, |s| {
        worst = worst.max(s.u().sup_norm());
        for &x in s.v().values() {
            worst = worst.max((x - m).abs());
        }
    })?;
    checks.push(Check::at_most("zero_fixed_point", worst, 1e-12));
    Ok(())
}

fn determinism(config: &RunConfig, scheme: Scheme, checks: &mut Vec<Check>) -> Result<()> {
    let trace = || -> Result<Vec<Record>> {
        let mut out = Vec::new();
        run_steps(config, scheme, DETERMINISM_STEPS, |s| {
            out.push(Record::capture(s, &config.lp_exponents));
        })?;
        Ok(out)
    };
    let (a, b) = (trace()?, trace()?);
    let differing = if a.len() != b.len() {
        a.len().max(b.len())
    } else {
        a.iter()
            .zip(&b)
            .filter(|(x, y)| format!("{x:?}") != format!("{y:?}"))
            .count()
    };
    checks.push(Check::at_most("determinism", differing as f64, 0.0));
    Ok(())
}
