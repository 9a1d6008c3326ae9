//! Q-tensor, scalar and director fields on rectangular lattices, with the
//! domain masks used by the strong-anchoring constraint.
//!
//! The spatial box is `[-R, R]^d` with `N` midpoint nodes per axis. The
//! physical domain `Omega` sits well inside (`Omega ⊂ B_{R/4}`), leaving room
//! for the compactly supported boundary extension. For a boundary-layer width
//! `delta` the domain splits into the anchored shell
//! `{x in Omega : dist(x, ∂Omega) <= delta}` and the free interior.
//!
//! Director extraction diagonalizes the Q-tensor; the director is only a line
//! field (`n` and `-n` are the same state), so a sign-consistent vector field
//! is produced by breadth-first sign propagation, which fails exactly when
//! the region carries a half-integer defect.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use std::io::{self, Write};
use std::ops::{Add, Mul, Sub};

/// Symmetric traceless 3x3 order parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QTensor {
    m: Matrix3<f64>,
}

impl QTensor {
    pub fn zero() -> Self {
        QTensor {
            m: Matrix3::zeros(),
        }
    }

    /// Symmetrize and remove the trace.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let sym = 0.5 * (m + m.transpose());
        let tr = sym.trace() / 3.0;
        QTensor {
            m: sym - Matrix3::identity() * tr,
        }
    }

    /// `s (nu ⊗ nu - I/3)` for a unit axis `nu`.
    pub fn uniaxial(s: f64, nu: &Vector3<f64>) -> Self {
        QTensor {
            m: s * (nu * nu.transpose() - Matrix3::identity() / 3.0),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.m.norm_squared()
    }

    pub fn frobenius(&self) -> f64 {
        self.m.norm()
    }

    pub fn dot(&self, other: &QTensor) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn row(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.m[(i, 0)], self.m[(i, 1)], self.m[(i, 2)])
    }

    /// Eigenvalues ascending with matching eigenvector columns.
    pub fn eigen_sorted(&self) -> ([f64; 3], Matrix3<f64>) {
        let eig = SymmetricEigen::new(self.m);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals = [
            eig.eigenvalues[order[0]],
            eig.eigenvalues[order[1]],
            eig.eigenvalues[order[2]],
        ];
        let mut vecs = Matrix3::zeros();
        for (c, &o) in order.iter().enumerate() {
            vecs.set_column(c, &eig.eigenvectors.column(o));
        }
        (vals, vecs)
    }
}

impl Add for QTensor {
    type Output = QTensor;
    fn add(self, rhs: QTensor) -> QTensor {
        QTensor { m: self.m + rhs.m }
    }
}

impl Sub for QTensor {
    type Output = QTensor;
    fn sub(self, rhs: QTensor) -> QTensor {
        QTensor { m: self.m - rhs.m }
    }
}

impl Mul<f64> for QTensor {
    type Output = QTensor;
    fn mul(self, rhs: f64) -> QTensor {
        QTensor { m: self.m * rhs }
    }
}

/// Shape of the physical domain Omega, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// Axis-aligned cube/square `[-half, half]^d`.
    Cube { half: f64 },
    /// Ball of the given radius.
    Ball { radius: f64 },
}

impl Domain {
    /// Distance to the boundary, positive inside Omega, negative outside.
    pub fn inner_distance(&self, x: &[f64; 3], d: usize) -> f64 {
        match self {
            Domain::Cube { half } => {
                let mut m: f64 = 0.0;
                for xi in x.iter().take(d) {
                    m = m.max(xi.abs());
                }
                half - m
            }
            Domain::Ball { radius } => {
                let mut r2 = 0.0;
                for xi in x.iter().take(d) {
                    r2 += xi * xi;
                }
                radius - r2.sqrt()
            }
        }
    }

    /// Radius of the smallest origin-centred ball containing Omega.
    pub fn circumradius(&self, d: usize) -> f64 {
        match self {
            Domain::Cube { half } => half * (d as f64).sqrt(),
            Domain::Ball { radius } => *radius,
        }
    }
}

/// Node classification at a given boundary-layer width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Outside Omega.
    Exterior,
    /// Anchored shell: inside Omega within `delta` of the boundary.
    Shell,
    /// Free interior: deeper than `delta` inside Omega.
    Interior,
}

/// Rectangular midpoint lattice over `[-R, R]^d` carrying the domain shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeBox {
    pub d: usize,
    pub n: usize,
    pub r: f64,
    pub h: f64,
    pub domain: Domain,
}

impl LatticeBox {
    pub fn new(d: usize, n: usize, r: f64, domain: Domain) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::InvalidGrid(format!("spatial dimension {d} not in {{2, 3}}")));
        }
        if n < 8 {
            return Err(Error::InvalidGrid(format!("lattice nodes per axis {n} < 8")));
        }
        if r <= 0.0 {
            return Err(Error::InvalidGrid(format!("box half-width {r} <= 0")));
        }
        let circ = domain.circumradius(d);
        if circ > r / 4.0 + 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "domain circumradius {circ} exceeds R/4 = {}",
                r / 4.0
            )));
        }
        Ok(LatticeBox {
            d,
            n,
            r,
            h: 2.0 * r / n as f64,
            domain,
        })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node volume of the midpoint rule.
    pub fn node_volume(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    /// Per-axis extents, padded with 1 in unused dimensions.
    pub fn dims(&self) -> [usize; 3] {
        if self.d == 2 {
            [self.n, self.n, 1]
        } else {
            [self.n, self.n, self.n]
        }
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let dims = self.dims();
        (ijk[0] * dims[1] + ijk[1]) * dims[2] + ijk[2]
    }

    pub fn multi(&self, idx: usize) -> [usize; 3] {
        let dims = self.dims();
        let k = idx % dims[2];
        let j = (idx / dims[2]) % dims[1];
        let i = idx / (dims[1] * dims[2]);
        [i, j, k]
    }

    /// Physical coordinates of a node (third component 0 in 2D).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi(idx);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = -self.r + (m[a] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Lattice neighbor along `axis` in direction `dir` (+1/-1), if any.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let mut m = self.multi(idx);
        let v = m[axis] as isize + dir;
        if v < 0 || v >= self.n as isize {
            return None;
        }
        m[axis] = v as usize;
        Some(self.index(m))
    }

    pub fn in_omega(&self, idx: usize) -> bool {
        self.domain.inner_distance(&self.coords(idx), self.d) > 0.0
    }

    pub fn region(&self, idx: usize, delta: f64) -> Region {
        let dist = self.domain.inner_distance(&self.coords(idx), self.d);
        if dist <= 0.0 {
            Region::Exterior
        } else if dist <= delta {
            Region::Shell
        } else {
            Region::Interior
        }
    }

    pub fn omega_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.in_omega(i)).collect()
    }

    pub fn shell_mask(&self, delta: f64) -> Vec<bool> {
        (0..self.len())
            .map(|i| self.region(i, delta) == Region::Shell)
            .collect()
    }

    pub fn interior_mask(&self, delta: f64) -> Vec<bool> {
        (0..self.len())
            .map(|i| self.region(i, delta) == Region::Interior)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub lattice: LatticeBox,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(lattice: &LatticeBox) -> Self {
        ScalarField {
            lattice: lattice.clone(),
            values: vec![0.0; lattice.len()],
        }
    }

    pub fn from_fn<F: Fn(&[f64; 3]) -> f64>(lattice: &LatticeBox, f: F) -> Self {
        ScalarField {
            lattice: lattice.clone(),
            values: (0..lattice.len()).map(|i| f(&lattice.coords(i))).collect(),
        }
    }

    /// Lattice L2 norm (midpoint rule).
    pub fn l2_norm(&self) -> f64 {
        (self.lattice.node_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub lattice: LatticeBox,
    pub values: Vec<Vector3<f64>>,
}

impl VectorField {
    pub fn constant(lattice: &LatticeBox, v: Vector3<f64>) -> Self {
        VectorField {
            lattice: lattice.clone(),
            values: vec![v; lattice.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QTensorField {
    pub lattice: LatticeBox,
    pub values: Vec<QTensor>,
}

impl QTensorField {
    pub fn zeros(lattice: &LatticeBox) -> Self {
        QTensorField {
            lattice: lattice.clone(),
            values: vec![QTensor::zero(); lattice.len()],
        }
    }

    /// L2(region) distance to another field over a node mask.
    pub fn l2_distance_on(&self, other: &QTensorField, mask: &[bool]) -> f64 {
        let vol = self.lattice.node_volume();
        let mut acc = 0.0;
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            if mask[i] {
                acc += (*a - *b).frobenius_sq();
            }
        }
        (vol * acc).sqrt()
    }
}

/// Unit director field; `defined` marks nodes carrying a director.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectorField {
    pub lattice: LatticeBox,
    pub values: Vec<Vector3<f64>>,
    pub defined: Vec<bool>,
}

impl DirectorField {
    pub fn undefined(lattice: &LatticeBox) -> Self {
        DirectorField {
            lattice: lattice.clone(),
            values: vec![Vector3::zeros(); lattice.len()],
            defined: vec![false; lattice.len()],
        }
    }
}

/// Largest-eigenvalue director and scalar order parameter of one Q-tensor.
///
/// Returns `(s, nu)` with `s = (3/2) lambda_max` and `nu` the corresponding
/// unit eigenvector with its first significant component made positive.
/// Callers needing a sign-consistent field must use [`orient_lift`].
pub fn director_extract(q: &QTensor, degeneracy_tol: f64) -> Result<(f64, Vector3<f64>)> {
    let (vals, vecs) = q.eigen_sorted();
    let gap = vals[2] - vals[1];
    if gap < degeneracy_tol {
        return Err(Error::DegenerateQ {
            gap,
            tol: degeneracy_tol,
        });
    }
    let mut nu = Vector3::new(vecs[(0, 2)], vecs[(1, 2)], vecs[(2, 2)]);
    nu /= nu.norm();
    for c in 0..3 {
        if nu[c].abs() > 1e-10 {
            if nu[c] < 0.0 {
                nu = -nu;
            }
            break;
        }
    }
    Ok((1.5 * vals[2], nu))
}

/// Frobenius distance to the closest uniaxial tensor.
///
/// In the eigenframe the optimum aligns with an extreme eigenvalue and the
/// residual reduces to the splitting of the other two: the minimum of
/// `(lambda_2 - lambda_1)` and `(lambda_3 - lambda_2)` divided by sqrt(2).
pub fn uniaxiality_residual(q: &QTensor) -> f64 {
    let (vals, _) = q.eigen_sorted();
    ((vals[1] - vals[0]).min(vals[2] - vals[1])) / 2.0_f64.sqrt()
}

/// Sign-consistent director field from a Q-tensor field on a region.
///
/// Extracts the line field node by node and propagates a sign choice by
/// breadth-first search from the first region node. Fails with
/// [`Error::DegenerateQ`] if any node has no well-separated director, and
/// with [`Error::LiftInconsistency`] if sign propagation meets a
/// contradiction (a half-integer defect or a non-simply-connected mask).
pub fn orient_lift(
    field: &QTensorField,
    region: &[bool],
    degeneracy_tol: f64,
) -> Result<DirectorField> {
    let lattice = &field.lattice;
    if region.len() != lattice.len() {
        return Err(Error::LengthMismatch {
            expected: lattice.len(),
            got: region.len(),
        });
    }

    let mut out = DirectorField::undefined(lattice);
    let mut line = vec![Vector3::zeros(); lattice.len()];
    let mut seed = None;
    for idx in 0..lattice.len() {
        if region[idx] {
            let (_, nu) = director_extract(&field.values[idx], degeneracy_tol)?;
            line[idx] = nu;
            if seed.is_none() {
                seed = Some(idx);
            }
        }
    }
    let seed = match seed {
        Some(s) => s,
        None => return Ok(out),
    };

    let mut queue = std::collections::VecDeque::new();
    out.values[seed] = line[seed];
    out.defined[seed] = true;
    queue.push_back(seed);
    while let Some(cur) = queue.pop_front() {
        for axis in 0..lattice.d {
            for dir in [-1isize, 1] {
                let Some(nb) = lattice.neighbor(cur, axis, dir) else {
                    continue;
                };
                if !region[nb] || out.defined[nb] {
                    continue;
                }
                let dot = out.values[cur].dot(&line[nb]);
                out.values[nb] = if dot >= 0.0 { line[nb] } else { -line[nb] };
                out.defined[nb] = true;
                queue.push_back(nb);
            }
        }
    }

    // Verify sign consistency on every adjacent pair; BFS assignment alone
    // cannot see contradictions around a defect loop.
    for idx in 0..lattice.len() {
        if !out.defined[idx] {
            continue;
        }
        for axis in 0..lattice.d {
            if let Some(nb) = lattice.neighbor(idx, axis, 1) {
                if out.defined[nb] && out.values[idx].dot(&out.values[nb]) <= 0.0 {
                    return Err(Error::LiftInconsistency { node: idx });
                }
            }
        }
    }
    Ok(out)
}

/// Write a Q-tensor field as CSV: `x,y[,z],Q11,Q12,Q13,Q22,Q23,Q33`,
/// one node per line in row-major order.
pub fn write_qfield_csv<W: Write>(field: &QTensorField, w: &mut W) -> io::Result<()> {
    let lattice = &field.lattice;
    if lattice.d == 2 {
        writeln!(w, "x,y,Q11,Q12,Q13,Q22,Q23,Q33")?;
    } else {
        writeln!(w, "x,y,z,Q11,Q12,Q13,Q22,Q23,Q33")?;
    }
    for idx in 0..lattice.len() {
        let x = lattice.coords(idx);
        let q = field.values[idx].matrix();
        if lattice.d == 2 {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                x[0],
                x[1],
                q[(0, 0)],
                q[(0, 1)],
                q[(0, 2)],
                q[(1, 1)],
                q[(1, 2)],
                q[(2, 2)]
            )?;
        } else {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                x[0],
                x[1],
                x[2],
                q[(0, 0)],
                q[(0, 1)],
                q[(0, 2)],
                q[(1, 1)],
                q[(1, 2)],
                q[(2, 2)]
            )?;
        }
    }
    Ok(())
}

/// Metadata sidecar accompanying a QFIELD-CSV dump.
pub fn write_qfield_meta<W: Write>(
    w: &mut W,
    lattice: &LatticeBox,
    delta: f64,
    eps: f64,
    alpha: f64,
) -> io::Result<()> {
    writeln!(w, "R = {}", lattice.r)?;
    writeln!(w, "N = {}", lattice.n)?;
    writeln!(w, "d = {}", lattice.d)?;
    writeln!(w, "delta = {delta}")?;
    writeln!(w, "eps = {eps}")?;
    writeln!(w, "alpha = {alpha}")?;
    Ok(())
}

/// Write a director field as CSV: `x,y[,z],nx,ny,nz` over defined nodes.
pub fn write_director_csv<W: Write>(field: &DirectorField, w: &mut W) -> io::Result<()> {
    let lattice = &field.lattice;
    if lattice.d == 2 {
        writeln!(w, "x,y,nx,ny,nz")?;
    } else {
        writeln!(w, "x,y,z,nx,ny,nz")?;
    }
    for idx in 0..lattice.len() {
        if !field.defined[idx] {
            continue;
        }
        let x = lattice.coords(idx);
        let v = field.values[idx];
        if lattice.d == 2 {
            writeln!(w, "{},{},{},{},{}", x[0], x[1], v[0], v[1], v[2])?;
        } else {
            writeln!(w, "{},{},{},{},{},{}", x[0], x[1], x[2], v[0], v[1], v[2])?;
        }
    }
    Ok(())
}
