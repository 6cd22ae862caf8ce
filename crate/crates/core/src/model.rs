//! Problem definition: geometry, diffusion law, boundary datum, initial data
//! and run configuration.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, RadialProfile};

/// Power-law diffusion coefficient `D(ξ) = kappa·(ξ+1)^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionLaw {
    pub alpha: f64,
    pub kappa: f64,
}

impl DiffusionLaw {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::config(format!("alpha must be finite, got {alpha}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::config(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { alpha, kappa })
    }

    pub fn eval(&self, xi: f64) -> Result<f64> {
        check_density(xi)?;
        Ok(self.eval_unchecked(xi))
    }

    pub fn eval_prime(&self, xi: f64) -> Result<f64> {
        check_density(xi)?;
        Ok(-self.alpha * self.kappa * (xi + 1.0).powf(-self.alpha - 1.0))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, xi: f64) -> f64 {
        if self.alpha == 0.0 {
            self.kappa
        } else {
            self.kappa * (xi + 1.0).powf(-self.alpha)
        }
    }
}

fn check_density(xi: f64) -> Result<()> {
    // also rejects NaN
    if xi >= 0.0 && xi.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "diffusion law evaluated at density {xi}; densities must be finite and >= 0"
        )))
    }
}

/// Volume of the unit ball in `R^n`, `π^(n/2)/Γ(n/2+1)`.
///
/// Evaluated through the recurrence `|B_1^n| = 2π/n·|B_1^(n-2)|`, which is
/// exact in closed form and avoids a gamma function.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dim: u32,
    pub radius: f64,
}

impl Geometry {
    pub fn new(dim: u32, radius: f64) -> Result<Self> {
        if dim < 1 {
            return Err(Error::config("space dimension n must be >= 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config(format!("radius R must be > 0, got {radius}")));
        }
        Ok(Self { dim, radius })
    }

    pub fn unit_ball_volume(&self) -> f64 {
        unit_ball_volume(self.dim)
    }

    /// Surface coefficient `ω = n·|B_1|`, so that `|∂B_r| = ω r^(n-1)`.
    pub fn surface_coefficient(&self) -> f64 {
        self.dim as f64 * self.unit_ball_volume()
    }

    pub fn volume(&self) -> f64 {
        self.unit_ball_volume() * self.radius.powi(self.dim as i32)
    }
}

/// Constant Dirichlet value `M` of the signal on the boundary sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryDatum(f64);

impl BoundaryDatum {
    pub fn new(m: f64) -> Result<Self> {
        if m > 0.0 && m.is_finite() {
            Ok(Self(m))
        } else {
            Err(Error::config(format!(
                "boundary value M must be > 0, got {m}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Radially symmetric nonnegative initial density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    Constant {
        value: f64,
    },
    /// `exp(-(r-center)²/(2·width²))`, scaled to `mass`.
    GaussianBump {
        mass: f64,
        width: f64,
        center: f64,
    },
    /// Smooth `sin²` hump supported on `[r_lo, r_hi]`, scaled to `mass`.
    Annulus {
        mass: f64,
        r_lo: f64,
        r_hi: f64,
    },
}

impl InitialData {
    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        let r = geometry.radius;
        match *self {
            InitialData::Constant { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::config(format!(
                        "constant initial value must be >= 0, got {value}"
                    )));
                }
            }
            InitialData::GaussianBump {
                mass,
                width,
                center,
            } => {
                check_mass(mass)?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::config(format!(
                        "initial.width must be > 0, got {width}"
                    )));
                }
                if !(center >= 0.0 && center < r) {
                    return Err(Error::config(format!(
                        "initial.center must lie in [0, R), got {center}"
                    )));
                }
            }
            InitialData::Annulus { mass, r_lo, r_hi } => {
                check_mass(mass)?;
                if !(r_lo >= 0.0 && r_lo < r_hi && r_hi <= r) {
                    return Err(Error::config(format!(
                        "annulus needs 0 <= r_lo < r_hi <= R, got [{r_lo}, {r_hi}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Requested total mass; for a constant profile this is `c·|Ω|`.
    pub fn mass(&self, geometry: &Geometry) -> f64 {
        match *self {
            InitialData::Constant { value } => value * geometry.volume(),
            InitialData::GaussianBump { mass, .. } | InitialData::Annulus { mass, .. } => mass,
        }
    }

    fn shape(&self, r: f64) -> f64 {
        match *self {
            InitialData::Constant { value } => value,
            InitialData::GaussianBump { width, center, .. } => {
                let s = (r - center) / width;
                (-0.5 * s * s).exp()
            }
            InitialData::Annulus { r_lo, r_hi, .. } => {
                if r <= r_lo || r >= r_hi {
                    0.0
                } else {
                    (PI * (r - r_lo) / (r_hi - r_lo)).sin().powi(2)
                }
            }
        }
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if mass >= 0.0 && mass.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "initial mass must be >= 0, got {mass}"
        )))
    }
}

const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Cell averages of the initial datum, normalized to the requested mass.
///
/// Each cell average is `ω/V_i·∫ f(r) r^(n-1) dr` by 3-point Gauss rule;
/// the result is then rescaled so that the grid quadrature reproduces the
/// requested mass.
pub fn sample_initial(data: &InitialData, grid: &Arc<RadialGrid>) -> Result<RadialProfile> {
    let geometry = grid.geometry();
    data.validate(geometry)?;

    if let InitialData::Constant { value } = *data {
        return Ok(RadialProfile::from_values(grid, vec![value; grid.cells()]));
    }

    let mass = data.mass(geometry);
    if mass == 0.0 {
        return Ok(RadialProfile::zeros(grid));
    }

    let n = geometry.dim as i32;
    let omega = geometry.surface_coefficient();
    let values: Vec<f64> = (0..grid.cells())
        .map(|i| {
            let (a, b) = (grid.faces()[i], grid.faces()[i + 1]);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let integral: f64 = GAUSS3_NODES
                .iter()
                .zip(GAUSS3_WEIGHTS)
                .map(|(x, w)| {
                    let r = mid + half * x;
                    w * data.shape(r) * r.powi(n - 1)
                })
                .sum::<f64>()
                * half;
            (omega * integral / grid.volumes()[i]).max(0.0)
        })
        .collect();

    let raw = RadialProfile::from_values(grid, values);
    let sampled = raw.integral();
    if !(sampled > 0.0 && sampled.is_finite()) {
        return Err(Error::config(
            "initial profile vanishes on this grid; widen the bump or refine the grid",
        ));
    }
    Ok(raw.scaled(mass / sampled))
}

pub const DEFAULT_CFL_SAFETY: f64 = 0.25;
pub const DEFAULT_OUTPUT_STRIDE: usize = 100;
/// Default blow-up trigger relative to the initial sup norm.
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 1e6;
/// Default step-size floor relative to the first CFL step.
pub const DEFAULT_DT_MIN_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: Geometry,
    pub diffusion: DiffusionLaw,
    pub boundary: BoundaryDatum,
    pub initial: InitialData,
    pub cells: usize,
    pub t_end: f64,
    pub cfl_safety: f64,
    /// `None` resolves to `1e6·‖u₀‖∞` when the run starts.
    pub u_max_threshold: Option<f64>,
    /// `None` resolves to `1e-12` times the first CFL step.
    pub dt_min: Option<f64>,
    pub output_stride: usize,
    pub lp_exponents: Vec<f64>,
}

impl RunConfig {
    /// Configuration with default numerics; callers adjust fields directly.
    pub fn new(
        geometry: Geometry,
        diffusion: DiffusionLaw,
        boundary: BoundaryDatum,
        initial: InitialData,
    ) -> Self {
        Self {
            geometry,
            diffusion,
            boundary,
            initial,
            cells: 256,
            t_end: 1.0,
            cfl_safety: DEFAULT_CFL_SAFETY,
            u_max_threshold: None,
            dt_min: None,
            output_stride: DEFAULT_OUTPUT_STRIDE,
            lp_exponents: vec![2.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        Geometry::new(self.geometry.dim, self.geometry.radius)?;
        DiffusionLaw::new(self.diffusion.alpha, self.diffusion.kappa)?;
        BoundaryDatum::new(self.boundary.value())?;
        self.initial.validate(&self.geometry)?;
        if self.cells < 16 {
            return Err(Error::config(format!(
                "cells must be >= 16, got {}",
                self.cells
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config(format!(
                "t_end must be finite and >= 0, got {}",
                self.t_end
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if let Some(th) = self.u_max_threshold {
            if !(th > 0.0) {
                return Err(Error::config(format!(
                    "u_max_threshold must be > 0, got {th}"
                )));
            }
        }
        if let Some(dt) = self.dt_min {
            if !(dt > 0.0) {
                return Err(Error::config(format!("dt_min must be > 0, got {dt}")));
            }
        }
        if self.output_stride < 1 {
            return Err(Error::config("output_stride must be >= 1"));
        }
        if let Some(p) = self
            .lp_exponents
            .iter()
            .find(|p| !(p.is_finite() && **p > 1.0))
        {
            return Err(Error::config(format!(
                "lp exponents must be finite and > 1, got {p}"
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(self.geometry, self.cells)?))
    }
}
