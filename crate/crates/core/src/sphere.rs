//! Quadrature and rotational-gradient identities on the unit sphere.
//!
//! Orientation space is always the full sphere S² regardless of the spatial
//! dimension. Grids are product rules: Gauss–Legendre in cos(theta) times a
//! uniform trapezoid in phi, which integrates every spherical polynomial of
//! degree `min(2 n_polar - 1, n_azimuth - 1)` exactly and refines to
//! arbitrary degree without tabulated node sets.
//!
//! The rotational gradient R = m x grad_m enters only through its closed-form
//! action on polynomials of degree <= 2 in m:
//!
//! ```text
//!   R (m·u)   = m x u
//!   R (m·A m) = 2 m x (A m)   for symmetric A
//!   R·(m x u) = -2 m·u
//! ```
//!
//! which is all the Euler-Lagrange manipulations of Bingham densities need.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

/// Quadrature rule on S²: unit nodes, positive weights summing to 4*pi.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub nodes: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree integrated exactly.
    pub exact_degree: usize,
    pub n_polar: usize,
    pub n_azimuth: usize,
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi-style initial guess, then Newton.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
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

/// Build the product quadrature grid.
///
/// Exact for all spherical polynomials of degree up to
/// `min(2 n_polar - 1, n_azimuth - 1)`.
pub fn build_grid(n_polar: usize, n_azimuth: usize) -> Result<SphereGrid> {
    if n_polar < 2 {
        return Err(Error::InvalidGrid(format!("n_polar = {n_polar} < 2")));
    }
    if n_azimuth < 4 {
        return Err(Error::InvalidGrid(format!("n_azimuth = {n_azimuth} < 4")));
    }
    let (z_nodes, z_weights) = gauss_legendre(n_polar);
    let dphi = 2.0 * PI / n_azimuth as f64;

    let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
    let mut weights = Vec::with_capacity(n_polar * n_azimuth);
    for (z, wz) in z_nodes.iter().zip(&z_weights) {
        let s = (1.0 - z * z).sqrt();
        for j in 0..n_azimuth {
            let phi = dphi * j as f64;
            nodes.push(Vector3::new(s * phi.cos(), s * phi.sin(), *z));
            weights.push(wz * dphi);
        }
    }
    Ok(SphereGrid {
        nodes,
        weights,
        exact_degree: (2 * n_polar - 1).min(n_azimuth - 1),
        n_polar,
        n_azimuth,
    })
}

impl SphereGrid {
    /// Grid exact at least to the given polynomial degree.
    pub fn with_exact_degree(degree: usize) -> Result<SphereGrid> {
        let n_polar = (degree / 2 + 1).max(2);
        let n_azimuth = (degree + 1).max(4);
        build_grid(n_polar, n_azimuth)
    }

    /// Default grid for solver-scale Bingham moments (exact to degree 47).
    pub fn default_solver() -> SphereGrid {
        build_grid(24, 48).expect("static parameters are valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature sum of per-node values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(Error::LengthMismatch {
                expected: self.nodes.len(),
                got: values.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Quadrature of a function evaluated at the nodes.
    pub fn integrate_fn<F: Fn(&Vector3<f64>) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * f(m))
            .sum()
    }
}

/// R applied to the linear function m·u, evaluated at m: equals m x u.
pub fn rot_linear(u: &Vector3<f64>, m: &Vector3<f64>) -> Vector3<f64> {
    m.cross(u)
}

/// R applied to the quadratic form m·Am (A symmetric), evaluated at m.
pub fn rot_quadratic(a: &Matrix3<f64>, m: &Vector3<f64>) -> Vector3<f64> {
    2.0 * m.cross(&(a * m))
}

/// R·(m x u): divergence of the tangential field m x u under R.
///
/// The j-th component of m x u is linear in m, so each term reduces to
/// `rot_linear`; the contraction collapses to -2 m·u.
pub fn rot_divergence_cross(u: &Vector3<f64>, m: &Vector3<f64>) -> f64 {
    let mut sum = 0.0;
    for j in 0..3 {
        // (m x u)_j = m·w where w_k = eps_{jkl} u_l.
        let mut w = Vector3::zeros();
        for k in 0..3 {
            for l in 0..3 {
                w[k] += levi_civita(j, k, l) * u[l];
            }
        }
        sum += rot_linear(&w, m)[j];
    }
    sum
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Residuals of the two closed-form identities for R at one point.
///
/// Returns `(|R(m·u) - m x u|, |R·(m x u) + 2 m·u|)`; both are pure
/// floating-point arithmetic and must vanish to rounding.
pub fn rotational_identity_check(u: &Vector3<f64>, m: &Vector3<f64>) -> Result<(f64, f64)> {
    let norm = m.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitVector(norm));
    }
    let res_a = (rot_linear(u, m) - m.cross(u)).norm();
    let res_b = (rot_divergence_cross(u, m) + 2.0 * m.dot(u)).abs();
    Ok((res_a, res_b))
}

/// Componentwise residual of integration by parts for quadratic forms:
/// `int (R f1) f2 + int f1 (R f2)` with f1 = m·Am, f2 = m·Bm.
pub fn integration_by_parts_residual(
    a: &Matrix3<f64>,
    b: &Matrix3<f64>,
    grid: &SphereGrid,
) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    for (m, w) in grid.nodes.iter().zip(&grid.weights) {
        let f1 = m.dot(&(a * m));
        let f2 = m.dot(&(b * m));
        acc += *w * (rot_quadratic(a, m) * f2 + rot_quadratic(b, m) * f1);
    }
    acc
}
