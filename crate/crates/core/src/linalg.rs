//! Small dense helpers: Perron pairs of nonnegative matrices and guarded
//! linear solves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Perron root and normalized positive right eigenvector.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
    pub used_dense_fallback: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations between progress checks; the iteration is abandoned when the
    /// residual fails to halve over one window.
    pub stall_window: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions { tol: 1e-12, max_iter: 1_000_000, stall_window: 2_000 }
    }
}

/// Power iteration on an entrywise nonnegative irreducible matrix.
pub fn power_iteration(b: &DMatrix<f64>, opts: PowerOptions) -> Result<PerronPair> {
    let n = b.nrows();
    debug_assert_eq!(n, b.ncols());
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    let scale = b.amax().max(f64::MIN_POSITIVE);
    let mut best_window_residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let bw = b * &w;
        let norm = bw.sum();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonConvergence { iterations: it });
        }
        let next = bw / norm;
        let residual = (&next - &w).amax();
        w = next;
        if residual < opts.tol {
            let value = rayleigh_like(b, &w);
            let res = (b * &w - &w * value).amax();
            if res <= opts.tol * scale.max(1.0) * 10.0 {
                return Ok(PerronPair { value, vector: w, iterations: it, used_dense_fallback: false });
            }
        }
        if it % opts.stall_window == 0 {
            if residual > 0.5 * best_window_residual {
                return Err(Error::NonConvergence { iterations: it });
            }
            best_window_residual = residual;
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter })
}

fn rayleigh_like(b: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    // for a positive vector, sum(Bw)/sum(w) equals the eigenvalue at convergence
    (b * w).sum() / w.sum()
}

/// Dense route: largest real part over the spectrum (real Schur form), then
/// the eigenvector by inverse iteration.
pub fn dense_perron(b: &DMatrix<f64>) -> Result<PerronPair> {
    let n = b.nrows();
    let eig = b.clone().complex_eigenvalues();
    let value = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !value.is_finite() {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    let scale = b.amax().max(1.0);
    let shift = value + 1e-10 * scale;
    let m = b - DMatrix::identity(n, n) * shift;
    let lu = m.lu();
    let mut w = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..50 {
        let Some(next) = lu.solve(&w) else {
            return Err(Error::SingularSystem { lambda: value });
        };
        let s = next.sum();
        let next = next / s;
        let done = (&next - &w).amax() < 1e-15;
        w = next;
        if done {
            break;
        }
    }
    let w = w.map(|x| x.max(0.0));
    let w = &w / w.sum();
    Ok(PerronPair { value, vector: w, iterations: 0, used_dense_fallback: true })
}

/// Power iteration with dense fallback on stall or cap.
pub fn perron(b: &DMatrix<f64>) -> Result<PerronPair> {
    match power_iteration(b, PowerOptions::default()) {
        Ok(p) => Ok(p),
        Err(Error::NonConvergence { .. }) => dense_perron(b),
        Err(e) => Err(e),
    }
}

/// LU solve with a pivot-ratio guard; returns `None` when the system is too
/// close to singular to trust.
pub fn guarded_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let lu = m.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min < 1e-13 * max {
        return None;
    }
    let x = lu.solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_finds_perron_root() {
        let b = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let p = power_iteration(&b, PowerOptions::default()).unwrap();
        assert!((p.value - 4.0).abs() < 1e-10);
        assert!(p.vector.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn periodic_matrix_falls_back_to_dense() {
        // eigenvalues ±√6: power iteration oscillates forever
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0]);
        assert!(power_iteration(&b, PowerOptions::default()).is_err());
        let p = perron(&b).unwrap();
        assert!(p.used_dense_fallback);
        assert!((p.value - 6f64.sqrt()).abs() < 1e-12);
        let r = &b * &p.vector - &p.vector * p.value;
        assert!(r.amax() < 1e-10);
    }

    #[test]
    fn guarded_solve_rejects_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let rhs = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(guarded_solve(&m, &rhs).is_none());
    }
}
