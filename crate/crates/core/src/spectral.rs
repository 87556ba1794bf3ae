//! The matrix route: the tilted cell generator `A(λ)`, its Perron root
//! `Λ(λ)` and the conjugate `I(θ) = sup_λ { θλ − Λ(λ) }`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::graph::{LatticeVertex, RatedCell};
use crate::linalg;
use crate::ratefn::{check_grid, RateCurve, RateKind, Route};

/// `A(λ)` indexed by the cell vertices other than the sink.
#[derive(Debug, Clone, Serialize)]
pub struct TiltedMatrix {
    /// Vertex index of each row/column.
    pub vertices: Vec<usize>,
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    /// `∂A/∂λ`.
    #[serde(skip)]
    pub derivative: DMatrix<f64>,
    pub lambda: f64,
    pub kappa: f64,
}

/// Entry `(w, v)` collects the rate of every lattice edge out of `(v, 0)`
/// landing on `(w, d)`, weighted by `e^{dλ}`; the diagonal carries `−r(v)`.
/// Cross-cell moves from the gate back onto the gate are kept on the diagonal.
pub fn build_a(cell: &RatedCell, lambda: f64) -> TiltedMatrix {
    let g = cell.graph();
    let sink = g.sink();
    let vertices: Vec<usize> = (0..g.vertex_count()).filter(|&v| v != sink).collect();
    let mut pos = vec![usize::MAX; g.vertex_count()];
    for (i, &v) in vertices.iter().enumerate() {
        pos[v] = i;
    }
    let n = vertices.len();
    let mut matrix = DMatrix::zeros(n, n);
    let mut derivative = DMatrix::zeros(n, n);
    for (j, &v) in vertices.iter().enumerate() {
        matrix[(j, j)] -= cell.exit_rate(v);
        for (y, r) in cell.lattice_out_edges(LatticeVertex::new(v, 0)) {
            let d = y.cell as f64;
            let w = r * (d * lambda).exp();
            matrix[(pos[y.name], j)] += w;
            derivative[(pos[y.name], j)] += d * w;
        }
    }
    TiltedMatrix { vertices, matrix, derivative, lambda, kappa: cell.max_exit_rate() }
}

/// `Λ(λ)` with the Perron vectors and `Λ'(λ)`.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    pub value: f64,
    pub slope: f64,
    pub right: DVector<f64>,
    pub left: DVector<f64>,
}

pub fn spectral_point(cell: &RatedCell, lambda: f64) -> Result<SpectralPoint> {
    let a = build_a(cell, lambda);
    let n = a.matrix.nrows();
    let shifted = &a.matrix + DMatrix::identity(n, n) * a.kappa;
    let right = linalg::perron(&shifted)?;
    let left = linalg::perron(&shifted.transpose())?;
    let (w, u) = (right.vector, left.vector);
    let slope = u.dot(&(&a.derivative * &w)) / u.dot(&w);
    if !slope.is_finite() {
        return Err(Error::NonConvergence { iterations: right.iterations });
    }
    Ok(SpectralPoint { value: right.value - a.kappa, slope, right: w, left: u })
}

/// `Λ(λ)`: the largest real eigenvalue of `A(λ)`.
pub fn lambda_scgf(cell: &RatedCell, lambda: f64) -> Result<f64> {
    Ok(spectral_point(cell, lambda)?.value)
}

/// `Λ'(λ) = uᵀ A'(λ) w / uᵀ w`.
pub fn lambda_slope(cell: &RatedCell, lambda: f64) -> Result<f64> {
    Ok(spectral_point(cell, lambda)?.slope)
}

/// Tilts beyond this make `e^{±λ}` overflow.
const MAX_TILT: f64 = 600.0;

/// `I(θ)` from bisection on `Λ'(λ) = θ`; `+inf` when no bracket exists.
pub fn i_spectral(cell: &RatedCell, theta: f64) -> Result<ExtReal> {
    if !theta.is_finite() {
        return Ok(ExtReal::PositiveInfinity);
    }
    let slope = |l: f64| spectral_point(cell, l).map(|p| p.slope);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while slope(lo)? > theta {
        hi = lo;
        lo *= 2.0;
        if lo < -MAX_TILT {
            return Ok(ExtReal::PositiveInfinity);
        }
    }
    while slope(hi)? < theta {
        lo = hi.max(lo);
        hi *= 2.0;
        if hi > MAX_TILT {
            return Ok(ExtReal::PositiveInfinity);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? < theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    let value = theta * l - lambda_scgf(cell, l)?;
    Ok(ExtReal::Finite(value.max(0.0)))
}

/// Spectral-route curve of `I`.
pub fn rate_curve_spectral(cell: &RatedCell, grid: &[f64], law: &str) -> Result<RateCurve> {
    check_grid(grid)?;
    let values = grid.iter().map(|&t| i_spectral(cell, t)).collect::<Result<Vec<_>>>()?;
    Ok(RateCurve { grid: grid.to_vec(), values, kind: RateKind::I, route: Route::Spectral, law: law.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::law::CycleLaw;
    use crate::mgf;

    #[test]
    fn two_vertex_matrix_is_scalar() {
        let c = two_vertex(4.0, 1.0);
        for l in [-1.0, 0.0, 0.3] {
            let a = build_a(&c, l);
            assert_eq!(a.matrix.shape(), (1, 1));
            let want = 4.0 * f64::exp(l) + f64::exp(-l) - 5.0;
            assert!((a.matrix[(0, 0)] - want).abs() < 1e-14);
        }
        assert!((lambda_scgf(&c, -2f64.ln()).unwrap() + 1.0).abs() < 1e-12);
    }

    /// Hand unfolding of the 3-chain: columns are sources, rows targets, over (u, m).
    #[test]
    fn three_chain_matrix_by_hand() {
        let c = three_chain();
        let l = 0.4f64;
        let a = build_a(&c, l).matrix;
        // gate u: out to m (2), and w's edge w→m lands in cell -1 (1)
        // m: to u (1), to w = gate of cell +1 (3)
        let want = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0 + 3.0 * l.exp(), 2.0 + (-l).exp(), -4.0]);
        assert!((a - want).amax() < 1e-14);
    }

    #[test]
    fn columns_conserve_probability_at_zero() {
        for c in all_test_cells() {
            let a = build_a(&c, 0.0).matrix;
            for j in 0..a.ncols() {
                assert!(a.column(j).sum().abs() < 1e-12);
            }
            let n = a.nrows();
            let shifted = a + DMatrix::identity(n, n) * c.max_exit_rate();
            assert!(shifted.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn scgf_vanishes_at_zero_and_slope_is_velocity() {
        for c in all_test_cells() {
            let p = spectral_point(&c, 0.0).unwrap();
            assert!(p.value.abs() < 1e-10);
            let v = mgf::velocity(&CycleLaw::graph(c.clone())).unwrap();
            assert!((p.slope - v).abs() < 1e-8, "slope {} v {v}", p.slope);
        }
    }

    #[test]
    fn perron_vector_residual() {
        for c in all_test_cells() {
            for l in [-1.5, 0.7] {
                let a = build_a(&c, l);
                let p = spectral_point(&c, l).unwrap();
                assert!(p.right.iter().all(|&x| x > 0.0));
                let r = &a.matrix * &p.right - &p.right * p.value;
                assert!(r.amax() < 1e-10);
            }
        }
    }

    #[test]
    fn scgf_is_convex_and_above_tangent() {
        for c in all_test_cells() {
            let s0 = spectral_point(&c, 0.0).unwrap().slope;
            let grid: Vec<f64> = (0..=40).map(|k| -2.0 + 0.1 * k as f64).collect();
            let vals: Vec<f64> = grid.iter().map(|&l| lambda_scgf(&c, l).unwrap()).collect();
            for w in vals.windows(3) {
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9);
            }
            for (l, v) in grid.iter().zip(&vals) {
                assert!(*v >= l * s0 - 1e-9);
            }
        }
    }

    #[test]
    fn slope_matches_central_difference() {
        let c = five_mixed();
        for l in [-1.0, 0.2, 1.1] {
            let h = 1e-5;
            let fd = (lambda_scgf(&c, l + h).unwrap() - lambda_scgf(&c, l - h).unwrap()) / (2.0 * h);
            assert!((fd - lambda_slope(&c, l).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn birth_death_conjugate() {
        let c = two_vertex(4.0, 1.0);
        assert!(i_spectral(&c, 3.0).unwrap().to_f64().abs() < 1e-10);
        assert!((i_spectral(&c, 0.0).unwrap().to_f64() - 1.0).abs() < 1e-10);
        let s = two_vertex(1.5, 1.5);
        for t in [0.5, 2.0] {
            let a = i_spectral(&s, t).unwrap().to_f64();
            let b = i_spectral(&s, -t).unwrap().to_f64();
            assert!((a - b).abs() < 1e-10);
        }
    }
}
