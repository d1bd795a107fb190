//! Closed-form parallel I/O lower bounds for LU and Cholesky.

/// `(2N^3 - 6N^2 + 4N) / (3 P sqrt(M)) + N(N-1) / (2P)`.
pub fn lu_bound(n: f64, m: f64, p: f64) -> f64 {
    (2.0 * n.powi(3) - 6.0 * n * n + 4.0 * n) / (3.0 * p * m.sqrt()) + n * (n - 1.0) / (2.0 * p)
}

/// The approximate form `N^3 / (3 P sqrt(M)) + N^2 / (2P) + N / P`.
pub fn cholesky_bound(n: f64, m: f64, p: f64) -> f64 {
    n.powi(3) / (3.0 * p * m.sqrt()) + n * n / (2.0 * p) + n / p
}

/// Sum of the three statement terms before dropping lower-order parts:
/// `N(N-1)(N-2) / (3 P sqrt(M)) + N(N-1) / (2P) + N / P`.
pub fn cholesky_bound_exact(n: f64, m: f64, p: f64) -> f64 {
    n * (n - 1.0) * (n - 2.0) / (3.0 * p * m.sqrt()) + n * (n - 1.0) / (2.0 * p) + n / p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutions() {
        assert_eq!(lu_bound(4.0, 4.0, 1.0), 14.0);
        assert_eq!(lu_bound(2.0, 9.0, 1.0), 1.0);
        assert!((cholesky_bound(8.0, 4.0, 1.0) - 125.333_333_333).abs() < 1e-6);
        assert_eq!(cholesky_bound_exact(8.0, 4.0, 1.0), 336.0 / 6.0 + 28.0 + 8.0);
    }

    #[test]
    fn parallel_forms_scale_with_p() {
        for f in [lu_bound, cholesky_bound, cholesky_bound_exact] {
            assert!((f(64.0, 16.0, 8.0) * 8.0 - f(64.0, 16.0, 1.0)).abs() < 1e-9);
        }
    }
}
