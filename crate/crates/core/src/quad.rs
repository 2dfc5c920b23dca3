//! Gauss–Legendre quadrature, used for hyperprior calibration checks and by
//! the heavy-tailed marginal-likelihood route.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// ∫_0^1 f(t) dt by the `n`-point Gauss–Legendre rule.
pub fn integrate_unit(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| 0.5 * w * f(0.5 * (x + 1.0)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        // 16-point rule is exact for degree <= 31.
        let val = integrate_unit(16, |t| t.powi(7));
        assert_abs_diff_eq!(val, 1.0 / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn integrates_exp() {
        let val = integrate_unit(64, f64::exp);
        assert_abs_diff_eq!(val, std::f64::consts::E - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weights_sum_to_two() {
        let (_, w) = gauss_legendre(64);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-12);
    }
}
