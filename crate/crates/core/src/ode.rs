//! Fixed-step classical Runge-Kutta and Hermite interpolation.

use nalgebra::DVector;

/// One classical fourth-order Runge-Kutta step of size `h` (may be negative).
pub fn rk4_step<F>(f: &F, t: f64, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Cubic Hermite basis on [0, 1]: returns (h00, h10, h01, h11) and their
/// derivatives with respect to the unit parameter.
pub fn cubic_hermite(s: f64) -> ([f64; 4], [f64; 4]) {
    let s2 = s * s;
    let s3 = s2 * s;
    (
        [2.0 * s3 - 3.0 * s2 + 1.0, s3 - 2.0 * s2 + s, -2.0 * s3 + 3.0 * s2, s3 - s2],
        [6.0 * s2 - 6.0 * s, 3.0 * s2 - 4.0 * s + 1.0, -6.0 * s2 + 6.0 * s, 3.0 * s2 - 2.0 * s],
    )
}

/// Quintic Hermite interpolation on an interval of length `h` given value,
/// first and second derivative at both ends. Returns value and derivative at
/// fractional position `s` in [0, 1].
pub fn quintic_hermite(
    s: f64,
    h: f64,
    p0: &DVector<f64>,
    d0: &DVector<f64>,
    a0: &DVector<f64>,
    p1: &DVector<f64>,
    d1: &DVector<f64>,
    a1: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
    let h3 = 0.5 * s3 - s4 + 0.5 * s5;
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let dh0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
    let dh1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let dh2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
    let dh3 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
    let dh4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let dh5 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let hh = h * h;
    let value = p0 * h0 + d0 * (h * h1) + a0 * (hh * h2) + a1 * (hh * h3) + d1 * (h * h4) + p1 * h5;
    let deriv = (p0 * dh0 + d0 * (h * dh1) + a0 * (hh * dh2) + a1 * (hh * dh3) + d1 * (h * dh4) + p1 * dh5) / h;
    (value, deriv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_fourth_order_on_exponential() {
        let f = |_t: f64, y: &DVector<f64>| y.clone();
        let run = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let mut y = DVector::from_element(1, 1.0);
            for k in 0..n {
                y = rk4_step(&f, k as f64 * h, &y, h);
            }
            (y[0] - 1.0_f64.exp()).abs()
        };
        let ratio = run(0.02) / run(0.01);
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn quintic_hermite_reproduces_quintics() {
        let p = |x: f64| x.powi(5) - x.powi(3) + 2.0;
        let dp = |x: f64| 5.0 * x.powi(4) - 3.0 * x * x;
        let ddp = |x: f64| 20.0 * x.powi(3) - 6.0 * x;
        let v = |x: f64| DVector::from_element(1, x);
        let (a, b) = (0.3, 0.8);
        let (val, der) = quintic_hermite(0.37, b - a, &v(p(a)), &v(dp(a)), &v(ddp(a)), &v(p(b)), &v(dp(b)), &v(ddp(b)));
        let x = a + 0.37 * (b - a);
        assert!((val[0] - p(x)).abs() < 1e-12);
        assert!((der[0] - dp(x)).abs() < 1e-11);
    }
}
