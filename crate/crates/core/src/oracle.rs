//! Exact two-mode Bose-Hubbard dynamics in the Fock basis `|n_A = k, n_B = N - k>`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::table::Table;

type C64 = Complex64;

/// Largest atom number accepted for the dense eigendecomposition.
pub const MAX_ATOMS: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    pub amplitudes: Vec<C64>,
}

impl FockVector {
    pub fn n_atoms(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn normalised(mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Domain("state has zero norm".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(FockVector { amplitudes })
    }

    pub fn fock(n_atoms: usize, k: usize) -> Result<Self> {
        if k > n_atoms {
            return Err(Error::Domain(format!("n_A = {k} exceeds N = {n_atoms}")));
        }
        let mut a = vec![C64::new(0.0, 0.0); n_atoms + 1];
        a[k] = C64::new(1.0, 0.0);
        Ok(FockVector { amplitudes: a })
    }

    /// Atomic coherent state: every atom in `cos(theta/2) |A> + e^{-i phi} sin(theta/2) |B>`,
    /// so the classical imbalance is `N cos theta` and the relative phase `arg psi_A - arg psi_B` is `phi`.
    pub fn coherent(n_atoms: usize, theta: f64, phi: f64) -> Result<Self> {
        let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
        let n = n_atoms as f64;
        let amps = (0..=n_atoms)
            .map(|k| {
                let kf = k as f64;
                let log_binom = ln_gamma(n + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(n - kf + 1.0);
                let log_mag = 0.5 * log_binom + kf * c.abs().ln() + (n - kf) * s.abs().ln();
                let sign = c.signum().powi(k as i32) * s.signum().powi((n_atoms - k) as i32);
                if log_mag.is_finite() {
                    C64::from_polar(sign * log_mag.exp(), -(n - kf) * phi)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        Self::normalised(amps)
    }

    /// Real Gaussian in `n_rel = k - N/2` with standard deviation `sigma` (phase-coherent across k).
    pub fn gaussian(n_atoms: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::param("sigma", "must be positive"));
        }
        let c = n_atoms as f64 / 2.0;
        let amps = (0..=n_atoms)
            .map(|k| C64::new((-(k as f64 - c).powi(2) / (4.0 * sigma * sigma)).exp(), 0.0))
            .collect();
        Self::normalised(amps)
    }
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeHamiltonian {
    pub n_atoms: usize,
    pub hbar: f64,
    pub lambda_coupling: f64,
    pub u_aa: f64,
    pub u_bb: f64,
    pub u_ab: f64,
    /// Mode asymmetry: adds `delta_e (n_A - n_B) / 2`.
    pub delta_e: f64,
}

impl TwoModeHamiltonian {
    /// Equal intra- and inter-mode interaction `u`.
    pub fn equal_interaction(n_atoms: usize, hbar: f64, lambda: f64, u: f64, delta_e: f64) -> Self {
        TwoModeHamiltonian {
            n_atoms,
            hbar,
            lambda_coupling: lambda,
            u_aa: u,
            u_bb: u,
            u_ab: u,
            delta_e,
        }
    }

    /// Coefficient `chi` of `n_rel^2` in the diagonal, `(u_aa + u_bb)/2 - u_ab`.
    pub fn relative_nonlinearity(&self) -> f64 {
        0.5 * (self.u_aa + self.u_bb) - self.u_ab
    }

    /// `2 pi hbar / |u_aa + u_bb - 2 u_ab|`; infinite without relative nonlinearity.
    pub fn kerr_revival_time(&self) -> f64 {
        let d = (self.u_aa + self.u_bb - 2.0 * self.u_ab).abs();
        if d > 0.0 {
            2.0 * std::f64::consts::PI * self.hbar / d
        } else {
            f64::INFINITY
        }
    }

    fn diagonal(&self, k: usize) -> f64 {
        let (na, nb) = (k as f64, (self.n_atoms - k) as f64);
        0.5 * self.u_aa * na * (na - 1.0)
            + 0.5 * self.u_bb * nb * (nb - 1.0)
            + self.u_ab * na * nb
            + 0.5 * self.delta_e * (na - nb)
    }

    fn off_diagonal(&self, k: usize) -> f64 {
        let n = self.n_atoms as f64;
        -self.hbar * self.lambda_coupling * (((k + 1) as f64) * (n - k as f64)).sqrt()
    }

    pub fn apply(&self, x: &FockVector) -> FockVector {
        let a = &x.amplitudes;
        let n = self.n_atoms;
        let out = (0..=n)
            .map(|k| {
                let mut s = a[k] * self.diagonal(k);
                if k > 0 {
                    s += a[k - 1] * self.off_diagonal(k - 1);
                }
                if k < n {
                    s += a[k + 1] * self.off_diagonal(k);
                }
                s
            })
            .collect();
        FockVector { amplitudes: out }
    }

    pub fn energy(&self, x: &FockVector) -> f64 {
        let hx = self.apply(x);
        x.amplitudes
            .iter()
            .zip(&hx.amplitudes)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }
}

/// Dense real symmetric matrix of the Hamiltonian.
pub fn build_hamiltonian(h: &TwoModeHamiltonian) -> Result<DMatrix<f64>> {
    if h.n_atoms > MAX_ATOMS {
        return Err(Error::param(
            "n_atoms",
            format!("dense oracle supports N <= {MAX_ATOMS}"),
        ));
    }
    let n = h.n_atoms + 1;
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = h.diagonal(k);
        if k + 1 < n {
            m[(k, k + 1)] = h.off_diagonal(k);
            m[(k + 1, k)] = h.off_diagonal(k);
        }
    }
    Ok(m)
}

/// Eigendecomposition-based propagator `exp(-i H t / hbar)`.
pub struct Propagator {
    hbar: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl Propagator {
    pub fn new(h: &TwoModeHamiltonian) -> Result<Self> {
        let eig = SymmetricEigen::new(build_hamiltonian(h)?);
        Ok(Propagator {
            hbar: h.hbar,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    pub fn evolve(&self, state: &FockVector, t: f64) -> FockVector {
        let v = &self.eigenvectors;
        let n = self.eigenvalues.len();
        let coeffs: Vec<C64> = (0..n)
            .map(|j| {
                let c: C64 = (0..n).map(|k| state.amplitudes[k] * v[(k, j)]).sum();
                c * C64::from_polar(1.0, -self.eigenvalues[j] * t / self.hbar)
            })
            .collect();
        let amps = (0..n)
            .map(|k| (0..n).map(|j| coeffs[j] * v[(k, j)]).sum())
            .collect();
        FockVector { amplitudes: amps }
    }
}

pub fn evolve_exact(
    state0: &FockVector,
    h: &TwoModeHamiltonian,
    times: &[f64],
) -> Result<Vec<FockVector>> {
    if state0.n_atoms() != h.n_atoms {
        return Err(Error::Domain(
            "state and Hamiltonian atom numbers differ".into(),
        ));
    }
    if (state0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain("initial state must have unit norm".into()));
    }
    let prop = Propagator::new(h)?;
    Ok(times.iter().map(|&t| prop.evolve(state0, t)).collect())
}

/// `<n_A - n_B>` and its variance.
pub fn imbalance_moments(x: &FockVector) -> (f64, f64) {
    let n = x.n_atoms() as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, a) in x.amplitudes.iter().enumerate() {
        let d = 2.0 * k as f64 - n;
        let p = a.norm_sqr();
        m1 += d * p;
        m2 += d * d * p;
    }
    (m1, m2 - m1 * m1)
}

/// `<a^dagger b>`.
pub fn coherence(x: &FockVector) -> C64 {
    let n = x.n_atoms();
    (0..n)
        .map(|k| {
            x.amplitudes[k + 1].conj()
                * x.amplitudes[k]
                * (((k + 1) as f64) * ((n - k) as f64)).sqrt()
        })
        .sum()
}

/// `|<a^dagger b>| / (N / 2)` per state.
pub fn visibility(trajectory: &[FockVector]) -> Vec<f64> {
    trajectory
        .iter()
        .map(|x| coherence(x).norm() / (0.5 * x.n_atoms() as f64))
        .collect()
}

pub fn trajectory_table(times: &[f64], trajectory: &[FockVector]) -> Table {
    let mut t = Table::new(&[
        ("t", "1/omega_m"),
        ("mean_delta_n", "atoms"),
        ("var_delta_n", "atoms^2"),
        ("visibility", "1"),
    ]);
    for ((time, x), v) in times.iter().zip(trajectory).zip(visibility(trajectory)) {
        let (m, var) = imbalance_moments(x);
        t.push(vec![*time, m, var, v]);
    }
    t
}

/// Average angular frequency from upward zero crossings of `values - mean`.
pub fn crossing_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut crossings = Vec::new();
    for i in 1..values.len() {
        let (a, b) = (values[i - 1] - mean, values[i] - mean);
        if a < 0.0 && b >= 0.0 {
            let f = a / (a - b);
            crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    if crossings.len() < 2 {
        return None;
    }
    let periods = (crossings.len() - 1) as f64;
    Some(2.0 * std::f64::consts::PI * periods / (crossings[crossings.len() - 1] - crossings[0]))
}

/// Gaussian collapse time of `visibility / visibility(0)` fitted while it stays above `floor`.
pub fn collapse_time(times: &[f64], vis: &[f64], floor: f64) -> Result<f64> {
    let v0 = vis.first().copied().unwrap_or(0.0);
    if !(v0 > 0.0) {
        return Err(Error::Domain("no initial coherence".into()));
    }
    let n = vis.iter().position(|v| v / v0 < floor).unwrap_or(vis.len());
    let rel: Vec<f64> = vis[..n].iter().map(|v| v / v0).collect();
    crate::fit::gaussian_decay_time(&times[..n], &rel)
}
