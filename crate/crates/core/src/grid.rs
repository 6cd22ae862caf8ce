//! Cell-centered radial finite-volume mesh on the ball `B_R ⊂ R^n`.
//!
//! Faces sit at `r_j = j·dr` (`j = 0..=N`) and cell `i` spans
//! `[r_i, r_{i+1}]`. There is no node at the origin: the `r = 0` face has
//! zero area for `n >= 2` and carries zero flux by symmetry for `n = 1`.
//! Cell volumes are exact differences of `r^n`, so sums of cell volumes
//! telescope to the ball volume.

use std::io::Write;
use std::sync::Arc;

use crate::csvio;
use crate::error::{Error, Result};
use crate::model::Geometry;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    geometry: Geometry,
    dr: f64,
    faces: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    areas: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.geometry == other.geometry && self.cells() == other.cells()
    }
}

impl RadialGrid {
    pub fn new(geometry: Geometry, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(Error::config(format!(
                "a radial grid needs >= 2 cells, got {cells}"
            )));
        }
        let radius = geometry.radius;
        let n = geometry.dim as i32;
        let ball = geometry.unit_ball_volume();
        let omega = geometry.surface_coefficient();

        let dr = radius / cells as f64;
        let faces: Vec<f64> = (0..=cells)
            .map(|j| radius * j as f64 / cells as f64)
            .collect();
        let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let volumes = faces
            .windows(2)
            .map(|w| ball * (w[1].powi(n) - w[0].powi(n)))
            .collect();
        let areas = faces.iter().map(|r| omega * r.powi(n - 1)).collect();

        Ok(Self {
            geometry,
            dr,
            faces,
            centers,
            volumes,
            areas,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dim(&self) -> u32 {
        self.geometry.dim
    }

    pub fn radius(&self) -> f64 {
        self.geometry.radius
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    /// Face radii, length `N+1`.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Cell-center radii, length `N`.
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Face areas `ω·r_j^(n-1)`, length `N+1`.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    /// Finite-volume quadrature `Σ V_i f_i`.
    pub fn integrate(&self, profile: &RadialProfile) -> Result<f64> {
        self.check(profile)?;
        Ok(self.integrate_values(profile.values()))
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        self.volumes.iter().zip(values).map(|(v, f)| v * f).sum()
    }

    pub fn lp_norm(&self, profile: &RadialProfile, p: f64) -> Result<LpNorm> {
        self.check(profile)?;
        lp_norm_values(self, profile.values(), p)
    }

    /// Second-order extrapolation of a cell-centered field to `r = R`.
    pub fn boundary_trace(&self, profile: &RadialProfile) -> Result<f64> {
        self.check(profile)?;
        let f = profile.values();
        let n = f.len();
        Ok(0.5 * (3.0 * f[n - 1] - f[n - 2]))
    }

    fn check(&self, profile: &RadialProfile) -> Result<()> {
        if profile.grid.as_ref() == self {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Both the raw integral `∫|f|^p` and the norm `(∫|f|^p)^(1/p)`.
///
/// For `p = ∞` both fields hold `max |f_i|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNorm {
    pub raw: f64,
    pub norm: f64,
}

fn lp_norm_values(grid: &RadialGrid, values: &[f64], p: f64) -> Result<LpNorm> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::domain(format!("Lp exponent must be >= 1, got {p}")));
    }
    if p == f64::INFINITY {
        let m = sup_norm(values);
        return Ok(LpNorm { raw: m, norm: m });
    }
    let raw: f64 = grid
        .volumes
        .iter()
        .zip(values)
        .map(|(v, f)| v * f.abs().powf(p))
        .sum();
    Ok(LpNorm {
        raw,
        norm: raw.powf(1.0 / p),
    })
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m: f64, f| m.max(f.abs()))
}

/// Radial scalar field sampled as cell averages on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialProfile {
    /// # Panics
    ///
    /// Panics if `values.len()` differs from the grid's cell count.
    pub fn from_values(grid: &Arc<RadialGrid>, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            grid.cells(),
            "profile length must match the grid"
        );
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self::from_values(grid, vec![0.0; grid.cells()])
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.centers().iter().map(|&r| f(r)).collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate_values(&self.values)
    }

    pub fn lp_norm(&self, p: f64) -> Result<LpNorm> {
        lp_norm_values(&self.grid, &self.values, p)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_trace(&self) -> f64 {
        let n = self.values.len();
        0.5 * (3.0 * self.values[n - 1] - self.values[n - 2])
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.values.iter_mut().for_each(|f| *f *= factor);
        self
    }

    pub fn first_non_finite(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .find(|(_, f)| !f.is_finite())
            .map(|(i, &f)| (i, f))
    }

    /// Writes `r,value` rows, one per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        csvio::write_columns(out, &[("r", self.grid.centers()), ("value", &self.values)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::unit_ball_volume;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: u32, r: f64, cells: usize) -> Arc<RadialGrid> {
        Arc::new(RadialGrid::new(Geometry::new(n, r).unwrap(), cells).unwrap())
    }

    #[test]
    fn volumes_telescope_to_the_ball() {
        for n in [1, 2, 3, 5] {
            for cells in [16, 512] {
                let g = grid(n, 1.3, cells);
                let exact = unit_ball_volume(n) * 1.3f64.powi(n as i32);
                assert_relative_eq!(g.total_volume(), exact, max_relative = 1e-13);
                assert!(g.volumes().iter().all(|&v| v > 0.0));
                assert!(g.faces().windows(2).all(|w| w[1] > w[0]));
            }
        }
    }

    #[test]
    fn origin_face_area() {
        assert_eq!(grid(1, 1.0, 16).areas()[0], 2.0);
        for n in [2, 3, 4] {
            assert_eq!(grid(n, 1.0, 16).areas()[0], 0.0);
        }
        assert_eq!(grid(3, 1.0, 16).faces()[16], 1.0);
    }

    #[test]
    fn integrate_examples() {
        let g = grid(2, 1.0, 100);
        let one = RadialProfile::from_values(&g, vec![1.0; 100]);
        assert_relative_eq!(g.integrate(&one).unwrap(), PI, max_relative = 1e-12);
        assert_eq!(g.integrate(&RadialProfile::zeros(&g)).unwrap(), 0.0);

        let g3 = grid(3, 2.0, 77);
        let c = RadialProfile::from_values(&g3, vec![2.5; 77]);
        assert_relative_eq!(
            g3.integrate(&c).unwrap(),
            2.5 * 4.0 / 3.0 * PI * 8.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let a = grid(2, 1.0, 32);
        let b = grid(2, 1.0, 64);
        let p = RadialProfile::zeros(&b);
        assert_eq!(a.integrate(&p), Err(Error::GridMismatch));
        assert_eq!(a.boundary_trace(&p), Err(Error::GridMismatch));
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid(3, 1.0, 64);
        let two = RadialProfile::from_values(&g, vec![2.0; 64]);
        assert_eq!(g.lp_norm(&two, f64::INFINITY).unwrap().norm, 2.0);
        let vol = g.total_volume();
        for p in [1.0, 2.0, 3.5] {
            let l = g.lp_norm(&two, p).unwrap();
            assert_relative_eq!(l.raw, 2f64.powf(p) * vol, max_relative = 1e-13);
            assert_relative_eq!(l.norm, 2.0 * vol.powf(1.0 / p), max_relative = 1e-13);
        }
        let zero = RadialProfile::zeros(&g);
        for p in [1.0, 4.0, f64::INFINITY] {
            assert_eq!(g.lp_norm(&zero, p).unwrap().norm, 0.0);
        }
        assert!(matches!(g.lp_norm(&two, 0.5), Err(Error::Domain(_))));

        let bump = RadialProfile::from_fn(&g, |r| (-20.0 * r * r).exp());
        assert_relative_eq!(
            g.lp_norm(&bump, 1.0).unwrap().norm,
            g.integrate(&bump).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn boundary_trace_examples() {
        let g = grid(2, 1.5, 40);
        let c = RadialProfile::from_values(&g, vec![0.7; 40]);
        assert_relative_eq!(g.boundary_trace(&c).unwrap(), 0.7, max_relative = 1e-15);
        let lin = RadialProfile::from_fn(&g, |r| r);
        assert_relative_eq!(g.boundary_trace(&lin).unwrap(), 1.5, max_relative = 1e-14);

        // quadratic: second-order extrapolation error quarters under refinement
        let err = |cells: usize| {
            let g = grid(2, 1.0, cells);
            let q = RadialProfile::from_fn(&g, |r| r * r);
            (g.boundary_trace(&q).unwrap() - 1.0).abs()
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
            f in proptest::collection::vec(-10.0f64..10.0, 32),
            h in proptest::collection::vec(-10.0f64..10.0, 32),
        ) {
            let g = grid(3, 1.0, 32);
            let combo: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
            let lhs = g.integrate_values(&combo);
            let rhs = a * g.integrate_values(&f) + b * g.integrate_values(&h);
            let scale = g.integrate_values(&f.iter().map(|x| x.abs()).collect::<Vec<_>>())
                + g.integrate_values(&h.iter().map(|x| x.abs()).collect::<Vec<_>>());
            prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + 10.0 * scale));
        }

        #[test]
        fn l1_norm_is_integral_of_modulus(f in proptest::collection::vec(-10.0f64..10.0, 20)) {
            let g = grid(2, 1.0, 20);
            let p = RadialProfile::from_values(&g, f.clone());
            let abs = RadialProfile::from_values(&g, f.iter().map(|x| x.abs()).collect());
            let l1 = g.lp_norm(&p, 1.0).unwrap().norm;
            prop_assert!((l1 - abs.integral()).abs() <= 1e-14 * (1.0 + l1));
        }
    }
}
