//! Linear least squares and the fits built on it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

/// Minimises `sum_i (y_i - sum_k c_k basis_k(x_i))^2`.
pub fn least_squares(xs: &[f64], ys: &[f64], basis: &[&dyn Fn(f64) -> f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < basis.len() || basis.is_empty() {
        return Err(Error::Domain(format!(
            "least squares needs at least {} samples, got {}",
            basis.len(),
            xs.len()
        )));
    }
    let a = DMatrix::from_fn(xs.len(), basis.len(), |i, k| basis[k](xs[i]));
    let b = DVector::from_column_slice(ys);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Singular(format!("least squares: {e}")))?;
    let resid = &a * &c - &b;
    Ok(LinearFit {
        coefficients: c.iter().copied().collect(),
        rms_residual: (resid.norm_squared() / xs.len() as f64).sqrt(),
    })
}

/// Fits `c(t) = exp(-t^2 / tau^2)` through `-ln c = t^2 / tau^2` (no intercept) and returns `tau`.
pub fn gaussian_decay_time(times: &[f64], values: &[f64]) -> Result<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0 && v < 1.0)
        .map(|(&t, &v)| (t, -v.ln()))
        .unzip();
    let fit = least_squares(&xs, &ys, &[&|t: f64| t * t])?;
    let k = fit.coefficients[0];
    if k <= 0.0 {
        return Err(Error::Domain("correlation does not decay".into()));
    }
    Ok(1.0 / k.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_polynomial_coefficients() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x + 0.5 * x * x).collect();
        let fit = least_squares(&xs, &ys, &[&|_| 1.0, &|x| x, &|x| x * x]).unwrap();
        for (c, e) in fit.coefficients.iter().zip([2.0, -3.0, 0.5]) {
            assert!((c - e).abs() < 1e-12);
        }
        assert!(fit.rms_residual < 1e-12);
    }

    #[test]
    fn gaussian_decay_recovered() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let cs: Vec<f64> = ts.iter().map(|t| (-(t / 2.5f64).powi(2)).exp()).collect();
        assert!((gaussian_decay_time(&ts, &cs).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        assert!(least_squares(&[1.0], &[1.0], &[&|_| 1.0, &|x| x]).is_err());
    }
}
