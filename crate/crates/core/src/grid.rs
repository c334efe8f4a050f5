//! Spherically symmetric radial grids, complex fields sampled on them, and
//! quadrature of `f(r) 4 pi r^2 dr`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    /// Uniform nodes `0, h, ..., r_max` with composite Simpson weights.
    UniformSimpson,
    /// Gauss-Legendre nodes on `(0, r_max)`.
    GaussLegendre,
    /// Gauss-Legendre in `s = ln(r_pole - r)`, clustering nodes towards `r_max < r_pole`.
    LogGraded { r_pole: f64 },
}

/// Nodes and weights for integrals `int f(r) 4 pi r^2 dr` over `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    kind: GridKind,
    r_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Uniform grid with an odd number of points, including `r = 0` (weight 0).
    pub fn uniform(r_max: f64, n_points: usize) -> Result<Arc<Self>> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::param("r_max", "must be positive"));
        }
        if n_points < 3 || n_points % 2 == 0 {
            return Err(Error::param(
                "n_points",
                "Simpson rule needs an odd count >= 3",
            ));
        }
        let h = r_max / (n_points - 1) as f64;
        let nodes: Vec<f64> = (0..n_points).map(|j| j as f64 * h).collect();
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(j, &r)| {
                let c = if j == 0 || j == n_points - 1 {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0 * 4.0 * PI * r * r
            })
            .collect();
        Ok(Arc::new(RadialGrid {
            kind: GridKind::UniformSimpson,
            r_max,
            nodes,
            weights,
        }))
    }

    /// Gauss-Legendre grid on `(0, r_max)`; exact for polynomial integrands of degree `2n - 3`.
    pub fn gauss_legendre(r_max: f64, n_points: usize) -> Result<Arc<Self>> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::param("r_max", "must be positive"));
        }
        if n_points == 0 {
            return Err(Error::param("n_points", "must be positive"));
        }
        let (x, w) = gauss_legendre_unit(n_points);
        let nodes: Vec<f64> = x.iter().map(|&x| 0.5 * r_max * (x + 1.0)).collect();
        let weights = nodes
            .iter()
            .zip(&w)
            .map(|(&r, &w)| 0.5 * r_max * w * 4.0 * PI * r * r)
            .collect();
        Ok(Arc::new(RadialGrid {
            kind: GridKind::GaussLegendre,
            r_max,
            nodes,
            weights,
        }))
    }

    /// Grid on `[0, r_max]` for integrands with a pole or log singularity at
    /// `r_pole > r_max`. Gauss-Legendre in `s = ln(r_pole - r)` resolves
    /// `1 / (r_pole - r)` behaviour at any distance from the pole.
    pub fn log_graded(r_max: f64, r_pole: f64, n_points: usize) -> Result<Arc<Self>> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::param("r_max", "must be positive"));
        }
        if !(r_pole > r_max) {
            return Err(Error::param("r_pole", "must lie beyond r_max"));
        }
        if n_points == 0 {
            return Err(Error::param("n_points", "must be positive"));
        }
        let s_lo = (r_pole - r_max).ln();
        let s_hi = r_pole.ln();
        let half = 0.5 * (s_hi - s_lo);
        let (x, w) = gauss_legendre_unit(n_points);
        // x ascending => s ascending => r descending; reverse for increasing nodes.
        let mut pairs: Vec<(f64, f64)> = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| {
                let s = s_lo + half * (x + 1.0);
                let u = s.exp();
                let r = r_pole - u;
                (r, half * w * u * 4.0 * PI * r * r)
            })
            .collect();
        pairs.reverse();
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Arc::new(RadialGrid {
            kind: GridKind::LogGraded { r_pole },
            r_max,
            nodes,
            weights,
        }))
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn n_points(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node spacing of a uniform grid.
    pub fn spacing(&self) -> Option<f64> {
        match self.kind {
            GridKind::UniformSimpson => Some(self.r_max / (self.nodes.len() - 1) as f64),
            _ => None,
        }
    }

    pub fn integrate_real(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(Error::GridMismatch);
        }
        Ok(self.weights.iter().zip(values).map(|(w, f)| w * f).sum())
    }

    /// Integrates a pointwise function of `r`.
    pub fn integrate_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .sum()
    }

    pub fn integrate_complex_fn(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| f(r) * w)
            .sum()
    }
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Complex samples on a shared radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<Complex64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::Domain("field sample is not finite".into()));
        }
        Ok(RadialField { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.n_points();
        RadialField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        RadialField { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> RadialField {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&r, &v)| f(r, v))
            .collect();
        RadialField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// `int conj(self) other 4 pi r^2 dr`.
    pub fn inner(&self, other: &RadialField) -> Result<Complex64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| a.conj() * b * *w)
            .sum())
    }
}

/// `sum_j w_j f(r_j)` for a field-valued integrand.
pub fn integrate_radial(f: &RadialField) -> Complex64 {
    f.grid
        .weights()
        .iter()
        .zip(&f.values)
        .map(|(w, v)| v * *w)
        .sum()
}

/// Atom number `int N |psi|^2 d^3r` carried by `psi`.
pub fn field_norm(psi: &RadialField, n_total: f64) -> f64 {
    let w = psi.grid.weights();
    n_total
        * w.iter()
            .zip(&psi.values)
            .map(|(w, v)| w * v.norm_sqr())
            .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn unit_integrand_gives_ball_volume() {
        for grid in [
            RadialGrid::uniform(2.5, 101).unwrap(),
            RadialGrid::gauss_legendre(2.5, 8).unwrap(),
        ] {
            let one = RadialField::from_fn(grid, |_| c(1.0));
            let v = integrate_radial(&one).re;
            let exact = 4.0 * PI * 2.5f64.powi(3) / 3.0;
            assert!((v - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn zero_integrand() {
        let g = RadialGrid::uniform(1.0, 11).unwrap();
        assert_eq!(integrate_radial(&RadialField::zeros(g.clone())).norm(), 0.0);
        assert_eq!(field_norm(&RadialField::zeros(g), 10.0), 0.0);
    }

    #[test]
    fn thomas_fermi_profile_integrates_to_n() {
        let (n, r0) = (1000.0, 3.0);
        let rho = |r: f64| {
            if r < r0 {
                15.0 * n / (8.0 * PI * r0.powi(3)) * (1.0 - r * r / (r0 * r0))
            } else {
                0.0
            }
        };
        let g = RadialGrid::gauss_legendre(r0, 4).unwrap();
        assert!((g.integrate_fn(rho) - n).abs() < 1e-10 * n);
        // Degree-4 integrand: Simpson converges at O(h^4).
        let u = RadialGrid::uniform(r0, 2001).unwrap();
        assert!((u.integrate_fn(rho) - n).abs() < 1e-10 * n);
    }

    #[test]
    fn simpson_is_exact_on_cubics_times_measure() {
        let g = RadialGrid::uniform(2.0, 9).unwrap();
        // r * 4 pi r^2 is degree 3.
        let got = g.integrate_fn(|r| r);
        assert!((got - PI * 16.0).abs() < 1e-12 * got);
    }

    #[test]
    fn log_graded_resolves_near_pole() {
        // int_0^{1-eps} 1/(1-r) 4 pi r^2 dr, exact antiderivative.
        let eps = 1e-6;
        let g = RadialGrid::log_graded(1.0 - eps, 1.0, 80).unwrap();
        let got = g.integrate_fn(|r| 1.0 / (1.0 - r));
        let anti = |r: f64| 4.0 * PI * (-(1.0 - r).ln() - r - r * r / 2.0);
        let exact = anti(1.0 - eps) - anti(0.0);
        assert!((got - exact).abs() < 1e-12 * exact, "{got} vs {exact}");
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(g.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = RadialField::zeros(RadialGrid::uniform(1.0, 11).unwrap());
        let b = RadialField::zeros(RadialGrid::uniform(1.0, 13).unwrap());
        assert_eq!(a.inner(&b), Err(Error::GridMismatch));
        assert!(RadialGrid::uniform(1.0, 10).is_err());
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 64, 301] {
            let (x, w) = gauss_legendre_unit(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }
}
