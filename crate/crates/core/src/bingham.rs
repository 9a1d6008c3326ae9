//! The Bingham exponential family `f = exp(m·Bm) / Z` on the sphere and the
//! homogeneous Maier-Saupe phase diagram.
//!
//! Every critical point of the mean-field free energy with the Maier-Saupe
//! interaction is of this form: the mean-field potential is a quadratic form
//! in m up to an additive constant, so the self-consistency density is an
//! exponential of a quadratic form. Adding a multiple of the identity to B
//! leaves the normalized density unchanged, so parameters are stored in the
//! traceless gauge.
//!
//! The scalar phase diagram is carried by
//!
//! ```text
//!   alpha(eta) = int_0^1 e^{eta z^2} dz / int_0^1 z^2 (1 - z^2) e^{eta z^2} dz
//! ```
//!
//! whose nontrivial solutions `eta_1(alpha) > eta* > eta_2(alpha)` exist for
//! `alpha > alpha* = min_eta alpha(eta) ~ 6.7314`. On a nontrivial branch the
//! degree of orientation satisfies `s2 = eta / alpha`.

use crate::error::{Error, Result};
use crate::field::QTensor;
use crate::optim;
use crate::quad;
use crate::sphere::SphereGrid;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use std::borrow::Cow;
use std::f64::consts::PI;

/// Exponent matrix of a Bingham density, stored symmetric and traceless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinghamParam {
    b: Matrix3<f64>,
}

impl BinghamParam {
    /// Symmetrize and project to the traceless gauge.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let sym = 0.5 * (m + m.transpose());
        let tr = sym.trace() / 3.0;
        BinghamParam {
            b: sym - Matrix3::identity() * tr,
        }
    }

    pub fn zero() -> Self {
        BinghamParam {
            b: Matrix3::zeros(),
        }
    }

    /// Uniaxial parameter `eta * (nu ⊗ nu)` in traceless gauge.
    pub fn uniaxial(eta: f64, nu: &Vector3<f64>) -> Self {
        Self::from_matrix(&(eta * nu * nu.transpose()))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.b
    }

    /// Operator norm (largest absolute eigenvalue).
    pub fn op_norm(&self) -> f64 {
        let eig = SymmetricEigen::new(self.b);
        eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()))
    }
}

/// Exact polynomial degree required for reliable quadrature of a Bingham
/// density with the given exponent operator norm.
fn required_degree(op_norm: f64) -> usize {
    30usize.max((6.0 * op_norm).ceil() as usize)
}

const MAX_UPGRADE_DEGREE: usize = 2400;

/// Upgrade the grid if it is too coarse for this exponent scale.
fn ensure_grid<'a>(grid: &'a SphereGrid, op_norm: f64) -> Result<Cow<'a, SphereGrid>> {
    let need = required_degree(op_norm);
    if grid.exact_degree >= need {
        Ok(Cow::Borrowed(grid))
    } else if need > MAX_UPGRADE_DEGREE {
        Err(Error::GridTooCoarse {
            have: grid.exact_degree,
            need,
        })
    } else {
        Ok(Cow::Owned(SphereGrid::with_exact_degree(need)?))
    }
}

/// Partition function and diagonal second moments in the eigenframe of B.
///
/// Off-diagonal second moments vanish there by the reflection symmetry of the
/// product grid, so the full moment follows by rotating the diagonal back.
fn eigenframe_moments(p: &BinghamParam, grid: &SphereGrid) -> Result<(f64, Matrix3<f64>, f64)> {
    let eig = SymmetricEigen::new(p.b);
    let b = eig.eigenvalues;
    let op_norm = b.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let grid = ensure_grid(grid, op_norm)?;

    // Shift so the exponent is <= 0; the shift is restored analytically.
    let bmax = b.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let mut z = 0.0;
    let mut mm = [0.0_f64; 3];
    for (m, w) in grid.nodes.iter().zip(&grid.weights) {
        let e = (b[0] - bmax) * m[0] * m[0]
            + (b[1] - bmax) * m[1] * m[1]
            + (b[2] - bmax) * m[2] * m[2];
        let fw = w * e.exp();
        z += fw;
        mm[0] += fw * m[0] * m[0];
        mm[1] += fw * m[1] * m[1];
        mm[2] += fw * m[2] * m[2];
    }
    let diag = Matrix3::from_diagonal(&Vector3::new(mm[0] / z, mm[1] / z, mm[2] / z));
    let second_moment = eig.eigenvectors * diag * eig.eigenvectors.transpose();
    Ok((z * bmax.exp(), second_moment, bmax))
}

/// Partition function `Z = int exp(m·Bm) dm`.
pub fn partition(p: &BinghamParam, grid: &SphereGrid) -> Result<f64> {
    let (z, _, _) = eigenframe_moments(p, grid)?;
    Ok(z)
}

/// Q-tensor moment of the normalized density:
/// `Q = int (m ⊗ m - I/3) exp(m·Bm) dm / Z`.
pub fn moment_q(p: &BinghamParam, grid: &SphereGrid) -> Result<QTensor> {
    let (_, mm, _) = eigenframe_moments(p, grid)?;
    Ok(QTensor::from_matrix(&mm))
}

/// Orientational entropy `int f log f dm = B : Q - log Z` for the normalized
/// Bingham density (B in traceless gauge).
pub fn entropy(p: &BinghamParam, grid: &SphereGrid) -> Result<f64> {
    let (z, mm, _) = eigenframe_moments(p, grid)?;
    let q = QTensor::from_matrix(&mm);
    Ok(p.b.dot(q.matrix()) - z.ln())
}

/// Homogeneous Maier-Saupe free energy
/// `A[f] = int f log f dm + (alpha/2)(2/3 - |Q[f]|^2)`.
///
/// The interaction is pair-counted (factor 1/2 on the double integral) so
/// that critical points satisfy the self-consistency `B = alpha Q[f]`, which
/// is the convention behind the phase diagram: the isotropic state loses
/// stability at alpha = 7.5 and the stable branch carries `s2 = eta/alpha`.
pub fn homogeneous_energy(p: &BinghamParam, alpha: f64, grid: &SphereGrid) -> Result<f64> {
    let (z, mm, _) = eigenframe_moments(p, grid)?;
    let q = QTensor::from_matrix(&mm);
    let ent = p.b.dot(q.matrix()) - z.ln();
    Ok(ent + 0.5 * alpha * (2.0 / 3.0 - q.frobenius_sq()))
}

/// Interaction strength on the nontrivial branch as a function of eta.
pub fn alpha_of_eta(eta: f64) -> f64 {
    // Scale the integrand by its maximum so the adaptive tolerance is
    // meaningful for large |eta|; the scale cancels in the ratio.
    let (num, den) = if eta > 0.0 {
        (
            quad::integrate(|z| (eta * (z * z - 1.0)).exp(), 0.0, 1.0, 1e-14),
            quad::integrate(
                |z| z * z * (1.0 - z * z) * (eta * (z * z - 1.0)).exp(),
                0.0,
                1.0,
                1e-14,
            ),
        )
    } else {
        (
            quad::integrate(|z| (eta * z * z).exp(), 0.0, 1.0, 1e-14),
            quad::integrate(|z| z * z * (1.0 - z * z) * (eta * z * z).exp(), 0.0, 1.0, 1e-14),
        )
    };
    num / den
}

/// Degree of orientation of the uniaxial density with exponent eta:
/// `s2 = int P2(z) e^{eta z^2} dz / int e^{eta z^2} dz` with `P2 = (3z^2-1)/2`.
pub fn s2_of_eta(eta: f64) -> f64 {
    let weight = |z: f64| {
        if eta > 0.0 {
            (eta * (z * z - 1.0)).exp()
        } else {
            (eta * z * z).exp()
        }
    };
    let num = quad::integrate(|z| 0.5 * (3.0 * z * z - 1.0) * weight(z), -1.0, 1.0, 1e-14);
    let den = quad::integrate(weight, -1.0, 1.0, 1e-14);
    num / den
}

/// Location of the minimum of `alpha(eta)` over eta > 0.
pub fn eta_star() -> f64 {
    optim::golden_section(alpha_of_eta, 1e-6, 20.0, 1e-11)
}

/// The critical interaction strength `alpha* = min_eta alpha(eta)`.
pub fn alpha_star() -> f64 {
    alpha_of_eta(eta_star())
}

/// One solution branch of `alpha(eta) = alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBranch {
    pub eta: f64,
    pub s2: f64,
    /// Whether this branch is the stable nematic state for its alpha.
    pub globally_stable: bool,
}

/// Solutions of the self-consistency relation at fixed interaction strength.
#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub alpha: f64,
    /// Always contains the isotropic branch eta = 0; for alpha above the
    /// critical value also eta_2 < eta* < eta_1, in that order.
    pub branches: Vec<PhaseBranch>,
}

impl PhasePoint {
    /// The largest root eta_1, when present.
    pub fn eta1(&self) -> Option<f64> {
        self.branches.last().filter(|b| b.eta > 0.0).map(|b| b.eta)
    }
}

const ETA_BRACKET_LO: f64 = -200.0;
const ETA_BRACKET_HI: f64 = 220.0;

/// Solve `alpha(eta) = alpha` on both sides of eta*.
///
/// The trivial branch eta = 0 is always returned. For `alpha` above the
/// critical value the two nontrivial roots are found by bisection to 1e-12
/// in eta, using the monotonicity of `alpha(eta)` on each side of eta*.
pub fn eta_branches(alpha: f64) -> Result<PhasePoint> {
    if alpha <= 0.0 {
        return Err(Error::Config(format!("alpha = {alpha} must be positive")));
    }
    let isotropic = PhaseBranch {
        eta: 0.0,
        s2: 0.0,
        globally_stable: alpha < 7.5,
    };
    let estar = eta_star();
    let astar = alpha_of_eta(estar);
    if alpha <= astar {
        return Ok(PhasePoint {
            alpha,
            branches: vec![isotropic],
        });
    }

    let f = |eta: f64| alpha_of_eta(eta) - alpha;
    let eta2 = optim::bisect(f, ETA_BRACKET_LO, estar, 1e-12)
        .ok_or(Error::NoBracket { alpha })?;
    let eta1 = optim::bisect(f, estar, ETA_BRACKET_HI.max(2.0 * alpha), 1e-12)
        .ok_or(Error::NoBracket { alpha })?;

    Ok(PhasePoint {
        alpha,
        branches: vec![
            isotropic,
            PhaseBranch {
                eta: eta2,
                s2: s2_of_eta(eta2),
                globally_stable: false,
            },
            PhaseBranch {
                eta: eta1,
                s2: s2_of_eta(eta1),
                globally_stable: alpha > 7.5,
            },
        ],
    })
}

/// Largest root `eta_1(alpha)`; the exponent used for boundary distributions.
pub fn eta1_of_alpha(alpha: f64) -> Result<f64> {
    eta_branches(alpha)?
        .eta1()
        .ok_or(Error::NoBracket { alpha })
}

/// Map a 5-vector onto a traceless symmetric matrix.
fn param_from_coords(x: &[f64]) -> BinghamParam {
    let m = Matrix3::new(
        x[0], x[2], x[3], //
        x[2], x[1], x[4], //
        x[3], x[4], -x[0] - x[1],
    );
    BinghamParam::from_matrix(&m)
}

/// Multistart derivative-free minimization of the homogeneous free energy
/// over all Bingham parameters.
///
/// Returns the best parameter and its energy. Starting points are the
/// isotropic state plus `extra_starts` seeded random draws.
pub fn minimize_homogeneous(
    alpha: f64,
    grid: &SphereGrid,
    extra_starts: usize,
    seed: u64,
) -> Result<(BinghamParam, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mut starts = vec![vec![0.0; 5]];
    for _ in 0..extra_starts {
        starts.push((0..5).map(|_| rng.gen_range(-3.0..3.0)).collect());
    }

    let mut best: Option<(BinghamParam, f64)> = None;
    for x0 in &starts {
        let result = optim::nelder_mead(
            |x| {
                homogeneous_energy(&param_from_coords(x), alpha, grid)
                    .unwrap_or(f64::INFINITY)
            },
            x0,
            0.8,
            1e-13,
            4000,
        );
        let p = param_from_coords(&result.x);
        if best.as_ref().map_or(true, |(_, v)| result.value < *v) {
            best = Some((p, result.value));
        }
    }
    Ok(best.expect("at least one start"))
}

/// Phase-diagram row: `(eta, alpha(eta), s2(eta))` over a uniform eta grid.
pub fn phase_table(eta_min: f64, eta_max: f64, steps: usize) -> Vec<(f64, f64, f64)> {
    (0..=steps)
        .map(|i| {
            let eta = eta_min + (eta_max - eta_min) * i as f64 / steps as f64;
            (eta, alpha_of_eta(eta), s2_of_eta(eta))
        })
        .collect()
}

/// Reference value of the isotropic entropy, `-log(4 pi)`.
pub fn isotropic_entropy() -> f64 {
    -(4.0 * PI).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_rotation(rng: &mut StdRng) -> Matrix3<f64> {
        // QR of a random matrix; sign-fix to a proper rotation.
        let a = Matrix3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let qr = a.qr();
        let mut q = qr.q();
        if q.determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        q
    }

    fn random_unit(rng: &mut StdRng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn gauge_is_traceless_symmetric() {
        let m = Matrix3::new(1.0, 2.0, 0.5, 0.1, -3.0, 4.0, 2.0, 0.0, 5.0);
        let p = BinghamParam::from_matrix(&m);
        assert!(p.matrix().trace().abs() <= 1e-14);
        assert!((p.matrix() - p.matrix().transpose()).norm() <= 1e-14);
    }

    #[test]
    fn partition_isotropic() {
        let grid = SphereGrid::default_solver();
        let z = partition(&BinghamParam::zero(), &grid).unwrap();
        assert_abs_diff_eq!(z, 4.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn partition_uniaxial_against_1d_oracle() {
        let grid = SphereGrid::default_solver();
        let eta = 5.0;
        let mut rng = StdRng::seed_from_u64(1);
        let nu = random_unit(&mut rng);
        let mut m = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = eta * nu[i] * nu[j];
            }
        }
        let p = BinghamParam::from_matrix(&m);
        let z = partition(&p, &grid).unwrap();
        let oracle = 4.0
            * PI
            * (-eta / 3.0).exp()
            * quad::integrate(|z| (eta * z * z).exp(), 0.0, 1.0, 1e-14);
        assert_abs_diff_eq!(z, oracle, epsilon = 1e-10 * oracle);
    }

    #[test]
    fn partition_rotation_invariance() {
        let grid = SphereGrid::default_solver();
        let mut rng = StdRng::seed_from_u64(2);
        let base = Matrix3::new(2.0, 0.3, -0.4, 0.3, -1.0, 0.8, -0.4, 0.8, -1.0);
        let p = BinghamParam::from_matrix(&base);
        let z0 = partition(&p, &grid).unwrap();
        for _ in 0..5 {
            let r = random_rotation(&mut rng);
            let rotated = BinghamParam::from_matrix(&(r.transpose() * p.matrix() * r));
            let z1 = partition(&rotated, &grid).unwrap();
            assert_abs_diff_eq!(z0, z1, epsilon = 1e-10 * z0);
        }
    }

    #[test]
    fn moment_isotropic_is_zero() {
        let grid = SphereGrid::default_solver();
        let q = moment_q(&BinghamParam::zero(), &grid).unwrap();
        assert!(q.frobenius() <= 1e-13);
    }

    #[test]
    fn moment_uniaxial_matches_s2_identity() {
        // Q[h_nu] = s2 (nu ⊗ nu - I/3) with s2 = eta1 / alpha on the branch.
        let grid = SphereGrid::default_solver();
        let alpha = 8.0;
        let eta1 = eta1_of_alpha(alpha).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..5 {
            let nu = random_unit(&mut rng);
            let p = BinghamParam::uniaxial(eta1, &nu);
            let q = moment_q(&p, &grid).unwrap();
            let expected = QTensor::uniaxial(eta1 / alpha, &nu);
            assert!(
                (q.matrix() - expected.matrix()).norm() <= 1e-8,
                "deviation {}",
                (q.matrix() - expected.matrix()).norm()
            );
        }
    }

    #[test]
    fn moment_equivariance() {
        let grid = SphereGrid::default_solver();
        let mut rng = StdRng::seed_from_u64(4);
        let p = BinghamParam::from_matrix(&Matrix3::new(
            3.0, 1.0, 0.0, 1.0, -2.0, 0.5, 0.0, 0.5, -1.0,
        ));
        let q0 = moment_q(&p, &grid).unwrap();
        for _ in 0..5 {
            let r = random_rotation(&mut rng);
            let rotated = BinghamParam::from_matrix(&(r.transpose() * p.matrix() * r));
            let q1 = moment_q(&rotated, &grid).unwrap();
            let expected = r.transpose() * q0.matrix() * r;
            assert!((q1.matrix() - expected).norm() <= 1e-10);
        }
    }

    #[test]
    fn moment_eigenvalue_range() {
        let grid = SphereGrid::default_solver();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let m = Matrix3::from_fn(|_, _| rng.gen_range(-4.0..4.0));
            let p = BinghamParam::from_matrix(&m);
            let q = moment_q(&p, &grid).unwrap();
            let (eigs, _) = q.eigen_sorted();
            assert!(eigs[0] >= -1.0 / 3.0 - 1e-12);
            assert!(eigs[2] <= 2.0 / 3.0 + 1e-12);
        }
    }

    #[test]
    fn entropy_isotropic() {
        let grid = SphereGrid::default_solver();
        let s = entropy(&BinghamParam::zero(), &grid).unwrap();
        assert_abs_diff_eq!(s, -(4.0 * PI).ln(), epsilon = 1e-12);
    }

    #[test]
    fn entropy_matches_nodewise_quadrature() {
        let grid = SphereGrid::default_solver();
        let eta = 10.0;
        let p = BinghamParam::uniaxial(eta, &Vector3::z());
        let s = entropy(&p, &grid).unwrap();

        // Direct quadrature of f log f with f evaluated per node.
        let z = partition(&p, &grid).unwrap();
        let direct = grid.integrate_fn(|m| {
            let f = (m.dot(&(p.matrix() * m))).exp() / z;
            f * f.ln()
        });
        assert_abs_diff_eq!(s, direct, epsilon = 1e-10);
    }

    #[test]
    fn entropy_rotation_invariance() {
        let grid = SphereGrid::default_solver();
        let mut rng = StdRng::seed_from_u64(6);
        let p = BinghamParam::uniaxial(4.0, &Vector3::z());
        let s0 = entropy(&p, &grid).unwrap();
        for _ in 0..3 {
            let r = random_rotation(&mut rng);
            let rotated = BinghamParam::from_matrix(&(r.transpose() * p.matrix() * r));
            assert_abs_diff_eq!(entropy(&rotated, &grid).unwrap(), s0, epsilon = 1e-10);
        }
    }

    #[test]
    fn alpha_at_zero_is_7_5() {
        assert_abs_diff_eq!(alpha_of_eta(0.0), 7.5, epsilon = 1e-12);
    }

    #[test]
    fn alpha_minimum_location_and_value() {
        let estar = eta_star();
        let astar = alpha_of_eta(estar);
        // Monotone on either side of the minimum.
        assert!(alpha_of_eta(estar - 0.5) > astar);
        assert!(alpha_of_eta(estar + 0.5) > astar);
        assert!(alpha_of_eta(10.0) > alpha_of_eta(5.0).min(astar));
        assert!((astar - 6.7314).abs() < 5e-3, "alpha* = {astar}");
    }

    #[test]
    fn branch_structure() {
        // alpha = 7.5: the lower branch merges with the trivial root.
        let p = eta_branches(7.5).unwrap();
        assert_eq!(p.branches.len(), 3);
        assert!(p.branches[1].eta.abs() < 1e-5, "eta2 = {}", p.branches[1].eta);
        let eta1 = p.eta1().unwrap();
        assert_abs_diff_eq!(alpha_of_eta(eta1), 7.5, epsilon = 1e-9);

        // Below the critical value only the isotropic branch survives.
        let p = eta_branches(6.0).unwrap();
        assert_eq!(p.branches.len(), 1);
        assert_eq!(p.branches[0].eta, 0.0);

        // eta1 increases with alpha.
        let e8 = eta1_of_alpha(8.0).unwrap();
        let e10 = eta1_of_alpha(10.0).unwrap();
        assert!(e10 > e8);

        // Root-finder against a dense scan oracle.
        let alpha = 8.0;
        let mut best_eta = f64::NAN;
        let mut best = f64::INFINITY;
        let estar = eta_star();
        let mut eta = estar;
        while eta < 30.0 {
            let d = (alpha_of_eta(eta) - alpha).abs();
            if d < best {
                best = d;
                best_eta = eta;
            }
            eta += 1e-3;
        }
        assert!((e8 - best_eta).abs() <= 1e-3);
    }

    #[test]
    fn eta2_negative_above_7_5() {
        let p = eta_branches(9.0).unwrap();
        assert!(p.branches[1].eta < 0.0);
        assert_abs_diff_eq!(alpha_of_eta(p.branches[1].eta), 9.0, epsilon = 1e-9);
    }

    #[test]
    fn s2_properties() {
        assert_abs_diff_eq!(s2_of_eta(0.0), 0.0, epsilon = 1e-13);
        // Concentration at the poles as eta grows.
        assert!((s2_of_eta(100.0) - 1.0).abs() < 0.02);
        // s2 = eta / alpha(eta) on the nontrivial branch.
        for eta in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
            let lhs = s2_of_eta(eta);
            let rhs = eta / alpha_of_eta(eta);
            assert!(
                (lhs - rhs).abs() <= 1e-8,
                "eta = {eta}: s2 = {lhs}, eta/alpha = {rhs}"
            );
        }
    }

    #[test]
    fn fixed_point_consistency_of_uniaxial_branch() {
        // alpha * Q[B_eta] equals the traceless gauge of B = eta1 nu ⊗ nu.
        let grid = SphereGrid::default_solver();
        let alpha = 8.0;
        let eta1 = eta1_of_alpha(alpha).unwrap();
        let nu = Vector3::new(0.6, -0.64, 0.48).normalize();
        let p = BinghamParam::uniaxial(eta1, &nu);
        let q = moment_q(&p, &grid).unwrap();
        let lhs = alpha * q.matrix();
        assert!((lhs - p.matrix()).norm() <= 1e-8);
    }

    #[test]
    fn isotropic_energy_value() {
        let grid = SphereGrid::default_solver();
        let alpha = 8.0;
        let e = homogeneous_energy(&BinghamParam::zero(), alpha, &grid).unwrap();
        assert_abs_diff_eq!(e, -(4.0 * PI).ln() + alpha / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn critical_points_match_the_scalar_branch() {
        // The stationarity of the homogeneous energy within the Bingham
        // family is B = alpha Q[B]: perturbing the uniaxial eta_1 state in
        // any coordinate direction does not lower the energy.
        let grid = SphereGrid::default_solver();
        let alpha = 8.0;
        let eta1 = eta1_of_alpha(alpha).unwrap();
        let p = BinghamParam::uniaxial(eta1, &Vector3::z());
        let e0 = homogeneous_energy(&p, alpha, &grid).unwrap();
        let step = 1e-4;
        for i in 0..3 {
            for j in i..3 {
                let mut m = *p.matrix();
                m[(i, j)] += step;
                m[(j, i)] = m[(i, j)];
                let e1 = homogeneous_energy(&BinghamParam::from_matrix(&m), alpha, &grid).unwrap();
                assert!(e1 >= e0 - 1e-9, "perturbation ({i},{j}) lowered energy");
            }
        }
    }

    #[test]
    fn nematic_beats_isotropic_above_7_5() {
        let grid = SphereGrid::default_solver();
        let alpha = 8.0;
        let eta1 = eta1_of_alpha(alpha).unwrap();
        let uni = homogeneous_energy(&BinghamParam::uniaxial(eta1, &Vector3::z()), alpha, &grid)
            .unwrap();
        let iso = homogeneous_energy(&BinghamParam::zero(), alpha, &grid).unwrap();
        assert!(uni < iso, "uniaxial {uni} vs isotropic {iso}");
    }

    #[test]
    fn homogeneous_minimizer_is_uniaxial() {
        let grid = SphereGrid::default_solver();
        let alpha = 8.0;
        let (p, value) = minimize_homogeneous(alpha, &grid, 5, 42).unwrap();
        let eta1 = eta1_of_alpha(alpha).unwrap();
        let reference =
            homogeneous_energy(&BinghamParam::uniaxial(eta1, &Vector3::z()), alpha, &grid)
                .unwrap();
        assert!(
            (value - reference).abs() <= 1e-6,
            "gap = {}",
            (value - reference).abs()
        );
        let q = moment_q(&p, &grid).unwrap();
        assert!(crate::field::uniaxiality_residual(&q) <= 1e-5);
    }

    #[test]
    fn below_critical_only_isotropic_minimum() {
        let grid = SphereGrid::default_solver();
        let alpha = 6.0;
        let (p, _) = minimize_homogeneous(alpha, &grid, 4, 7).unwrap();
        let q = moment_q(&p, &grid).unwrap();
        assert!(q.frobenius() <= 1e-4, "found |Q| = {}", q.frobenius());
    }

    #[test]
    fn default_grid_refinement_study() {
        // Moments with op-norm up to 40 are already converged on the default
        // grid; the upgrade rule is conservative. Compare raw evaluations on
        // the default grid against a much finer one.
        let coarse = SphereGrid::default_solver();
        let fine = SphereGrid::with_exact_degree(320).unwrap();
        for eta in [10.0, 30.0, 60.0] {
            // op_norm of the gauged uniaxial parameter is 2 eta / 3.
            let p = BinghamParam::uniaxial(eta, &Vector3::z());
            let qc = eigenframe_moments(&p, &coarse).unwrap().1;
            let qf = eigenframe_moments(&p, &fine).unwrap().1;
            assert!(
                (qc - qf).norm() <= 1e-10,
                "eta = {eta}: deviation {}",
                (qc - qf).norm()
            );
        }
    }

    #[test]
    fn grid_upgrade_engages_for_large_exponents() {
        let coarse = crate::sphere::build_grid(6, 12).unwrap();
        let p = BinghamParam::uniaxial(30.0, &Vector3::z());
        // Exact degree 11 is far below the required degree; the call must
        // still succeed through the internal upgrade and match a fine grid.
        let q_up = moment_q(&p, &coarse).unwrap();
        let fine = SphereGrid::with_exact_degree(240).unwrap();
        let q_fine = moment_q(&p, &fine).unwrap();
        assert!((q_up.matrix() - q_fine.matrix()).norm() <= 1e-11);
    }
}
