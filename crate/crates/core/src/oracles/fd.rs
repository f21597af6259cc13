//! Central finite differences over a weight matrix.

use ndarray::Array2;

/// Central difference of `f` at `at`, one coordinate at a time.
pub fn central_difference<F>(mut f: F, at: &Array2<f64>, step: f64) -> Array2<f64>
where
    F: FnMut(&Array2<f64>) -> f64,
{
    let mut grad = Array2::zeros(at.raw_dim());
    let mut probe = at.clone();
    for i in 0..at.nrows() {
        for j in 0..at.ncols() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + step;
            let plus = f(&probe);
            probe[(i, j)] = orig - step;
            let minus = f(&probe);
            probe[(i, j)] = orig;
            grad[(i, j)] = (plus - minus) / (2.0 * step);
        }
    }
    grad
}

/// Largest relative deviation between two gradients, with denominators
/// floored at 1 to keep near-zero entries meaningful.
pub fn max_relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
