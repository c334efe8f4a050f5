//! Fixed-step classical Runge-Kutta integration.

/// One RK4 step of `dy/dt = f(t, y)`.
pub fn rk4_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> [f64; N] {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Advances from `t0` to `t1` with the smallest number of equal steps not exceeding `max_step`.
pub fn rk4_advance<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y: &[f64; N],
    max_step: f64,
) -> [f64; N] {
    let span = t1 - t0;
    if span == 0.0 {
        return *y;
    }
    let n = (span.abs() / max_step).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut y = *y;
    for k in 0..n {
        y = rk4_step(f, t0 + k as f64 * h, &y, h);
    }
    y
}

fn axpy<const N: usize>(y: &[f64; N], a: f64, x: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * x[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_is_fourth_order() {
        let f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let err = |h: f64| {
            let y = rk4_advance(&f, 0.0, 1.0, &[1.0, 0.0], h);
            (y[0] - 1.0f64.cos()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }
}
