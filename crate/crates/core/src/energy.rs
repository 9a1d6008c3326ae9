//! The nonlocal mean-field free energy in Q-tensor form, the anchored
//! boundary extension, and the a-priori quantities that control the small
//! interaction-distance limit.
//!
//! States are number-density fields of Bingham form, represented by their
//! exponent field `B(x)` and Q-tensor field `Q(x)` on the lattice. The
//! admissible class pins the state to the boundary distribution `h_{n_b}` on
//! the anchoring shell and outside the domain, where
//!
//! ```text
//!   h_{n_b} = exp(eta (m·n_b)^2) / Z,      eta = eta_1(alpha),
//! ```
//!
//! and `n_b` is the compactly supported director extension: unit length on
//! Omega, cut off radially to vanish for `|x| >= R`. Where `|n_b|` ramps
//! between 1 and 0 the same exponential formula remains a valid density and
//! its Q-tensor is the Bingham moment of `eta n_b ⊗ n_b`.
//!
//! The energy uses the pair-counted interaction (each molecular pair counted
//! once), so its critical points satisfy the mean-field self-consistency
//! `B = alpha (Q * g_eps)` and the homogeneous phase diagram carries
//! `s2 = eta / alpha`:
//!
//! ```text
//!   A_eps[f] = int f log f  -  (alpha/2) int_Omega |Q|^2
//!            + (alpha/2) int_Omega Q : (Q - Q *_Omega g_eps)  +  C1,
//!   C1 = (alpha/3) int_Omega (1_Omega * g_eps).
//! ```

use crate::bingham::{self, BinghamParam};
use crate::error::{Error, Result};
use crate::field::{LatticeBox, QTensor, QTensorField, Region, ScalarField, VectorField};
use crate::kernel::{self, KernelSpec};
use crate::sphere::SphereGrid;
use nalgebra::Vector3;
use rayon::prelude::*;

/// C-infinity ramp: 0 for t <= 0, 1 for t >= 1, strictly monotone between.
pub fn smooth_step(t: f64) -> f64 {
    let sigma = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = sigma(t);
    let b = sigma(1.0 - t);
    a / (a + b)
}

/// Radial cutoff: 1 on the half-radius ball, 0 outside radius `r`.
fn cutoff(dist: f64, r: f64) -> f64 {
    smooth_step((r - dist) / (r / 2.0))
}

/// Analytic director profile prescribing the anchoring on Omega and its
/// natural extension to the whole box (before the radial cutoff).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryProfile {
    /// Fixed unit direction.
    Constant(Vector3<f64>),
    /// In-plane director `(cos psi, sin psi, 0)` with lifted angle
    /// `psi(x) = psi0 + g·x + bilinear x0 x1` (harmonic for any choice).
    InPlane {
        psi0: f64,
        grad: [f64; 2],
        bilinear: f64,
    },
}

impl BoundaryProfile {
    pub fn angle(&self, x: &[f64; 3]) -> Option<f64> {
        match self {
            BoundaryProfile::Constant(_) => None,
            BoundaryProfile::InPlane {
                psi0,
                grad,
                bilinear,
            } => Some(psi0 + grad[0] * x[0] + grad[1] * x[1] + bilinear * x[0] * x[1]),
        }
    }

    pub fn direction(&self, x: &[f64; 3]) -> Vector3<f64> {
        match self {
            BoundaryProfile::Constant(v) => *v,
            BoundaryProfile::InPlane { .. } => {
                let psi = self.angle(x).unwrap();
                Vector3::new(psi.cos(), psi.sin(), 0.0)
            }
        }
    }
}

/// Anchoring data: the compactly supported director extension and the
/// Q-tensor field of the boundary distribution.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub profile: BoundaryProfile,
    pub n_b: VectorField,
    /// Q[h_{n_b}] per node.
    pub h_q: QTensorField,
    pub eta: f64,
    /// Degree of orientation of the anchored state, `s2(eta)`.
    pub s2: f64,
}

/// Build the boundary extension on a lattice for exponent `eta`.
///
/// The profile must be unit length on Omega; it is multiplied by a smooth
/// radial cutoff equal to 1 on `B_{R/2}` and 0 outside `B_R`, and the induced
/// Q-field is the Bingham moment of `eta n_b ⊗ n_b` nodewise.
pub fn make_boundary(
    profile: BoundaryProfile,
    lattice: &LatticeBox,
    eta: f64,
    grid: &SphereGrid,
) -> Result<BoundaryData> {
    for idx in 0..lattice.len() {
        if lattice.in_omega(idx) {
            let v = profile.direction(&lattice.coords(idx));
            if (v.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::NonUnitVector(v.norm()));
            }
        }
    }

    let values: Vec<Vector3<f64>> = (0..lattice.len())
        .map(|idx| {
            let x = lattice.coords(idx);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            profile.direction(&x) * cutoff(r, lattice.r)
        })
        .collect();

    let h_q_values: Vec<QTensor> = values
        .par_iter()
        .map(|nb| {
            if nb.norm_squared() < 1e-30 {
                Ok(QTensor::zero())
            } else {
                let p = BinghamParam::from_matrix(&(eta * nb * nb.transpose()));
                bingham::moment_q(&p, grid)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BoundaryData {
        profile,
        n_b: VectorField {
            lattice: lattice.clone(),
            values,
        },
        h_q: QTensorField {
            lattice: lattice.clone(),
            values: h_q_values,
        },
        eta,
        s2: bingham::s2_of_eta(eta),
    })
}

/// Physical parameters of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateParams {
    pub eps: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// Anchoring-shell width `eps^{1/2 - sigma}`.
    pub delta: f64,
}

impl StateParams {
    pub fn new(eps: f64, alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 7.5) {
            return Err(Error::Config(format!(
                "alpha = {alpha} must exceed 7.5 for anchored solves"
            )));
        }
        if !(sigma > 0.0 && sigma < 0.5) {
            return Err(Error::Config(format!("sigma = {sigma} not in (0, 1/2)")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("eps = {eps} not in (0, 1)")));
        }
        Ok(StateParams {
            eps,
            alpha,
            sigma,
            delta: eps.powf(0.5 - sigma),
        })
    }
}

/// An admissible state: Bingham exponent and Q-tensor fields over the box,
/// pinned to the boundary data on the anchoring shell and outside Omega.
#[derive(Debug, Clone)]
pub struct State {
    pub q: QTensorField,
    pub b: Vec<BinghamParam>,
    pub params: StateParams,
}

impl State {
    /// The anchored competitor: `f = h_{n_b}` everywhere.
    pub fn anchored(boundary: &BoundaryData, params: StateParams) -> State {
        let b = boundary
            .n_b
            .values
            .iter()
            .map(|nb| BinghamParam::from_matrix(&(boundary.eta * nb * nb.transpose())))
            .collect();
        State {
            q: boundary.h_q.clone(),
            b,
            params,
        }
    }

    /// Anchored state with the free interior reset to the isotropic density.
    pub fn isotropic_interior(boundary: &BoundaryData, params: StateParams) -> State {
        let mut state = State::anchored(boundary, params);
        let lattice = state.q.lattice.clone();
        for idx in 0..lattice.len() {
            if lattice.region(idx, params.delta) == Region::Interior {
                state.q.values[idx] = QTensor::zero();
                state.b[idx] = BinghamParam::zero();
            }
        }
        state
    }

    /// Anchored state with independently randomized uniaxial interior nodes.
    pub fn random_uniaxial_interior<R: rand::Rng>(
        boundary: &BoundaryData,
        params: StateParams,
        rng: &mut R,
    ) -> State {
        let mut state = State::anchored(boundary, params);
        let lattice = state.q.lattice.clone();
        for idx in 0..lattice.len() {
            if lattice.region(idx, params.delta) == Region::Interior {
                let nu = loop {
                    let v = Vector3::new(
                        rng.gen_range(-1.0..1.0_f64),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 1e-3 && n <= 1.0 {
                        break v / n;
                    }
                };
                state.q.values[idx] = QTensor::uniaxial(boundary.s2, &nu);
                state.b[idx] = BinghamParam::uniaxial(boundary.eta, &nu);
            }
        }
        state
    }

    /// Verify the admissible-set pinning on the shell and exterior.
    pub fn check_constraint(&self, boundary: &BoundaryData) -> Result<()> {
        let lattice = &self.q.lattice;
        let mut worst = 0.0_f64;
        for idx in 0..lattice.len() {
            if lattice.region(idx, self.params.delta) != Region::Interior {
                worst = worst.max((self.q.values[idx] - boundary.h_q.values[idx]).frobenius());
            }
        }
        if worst > 1e-12 {
            return Err(Error::ConstraintViolation(worst));
        }
        Ok(())
    }
}

/// Breakdown of the nonlocal free energy of a state.
#[derive(Debug, Clone, Copy)]
pub struct EnergyReport {
    pub eps: f64,
    pub alpha: f64,
    pub delta: f64,
    /// `int_Omega int f log f`.
    pub entropy: f64,
    /// `-(alpha/2) int_Omega |Q|^2`.
    pub bulk: f64,
    /// `(alpha/2) int_Omega Q : (Q - Q *_Omega g_eps)`.
    pub nonlocal: f64,
    /// `(alpha/3) int_Omega (1_Omega * g_eps)`.
    pub c1: f64,
    pub total: f64,
}

impl EnergyReport {
    pub const CSV_HEADER: &'static str =
        "eps,alpha,delta,entropy,bulk,nonlocal,C1,total,apriori,min_gap";

    pub fn csv_row(&self, apriori: f64, min_gap: f64) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.eps,
            self.alpha,
            self.delta,
            self.entropy,
            self.bulk,
            self.nonlocal,
            self.c1,
            self.total,
            apriori,
            min_gap
        )
    }
}

/// Evaluate the free energy of an admissible state.
pub fn energy(
    state: &State,
    boundary: &BoundaryData,
    grid: &SphereGrid,
    spec: &KernelSpec,
) -> Result<EnergyReport> {
    state.check_constraint(boundary)?;
    let lattice = &state.q.lattice;
    let vol = lattice.node_volume();
    let alpha = state.params.alpha;
    let eps = state.params.eps;
    let omega = lattice.omega_mask();

    let omega_indices: Vec<usize> = (0..lattice.len()).filter(|&i| omega[i]).collect();
    let entropies: Vec<f64> = omega_indices
        .par_iter()
        .map(|&idx| bingham::entropy(&state.b[idx], grid))
        .collect::<Result<Vec<_>>>()?;
    let entropy = vol * entropies.iter().sum::<f64>();

    let bulk = -0.5
        * alpha
        * vol
        * omega_indices
            .iter()
            .map(|&i| state.q.values[i].frobenius_sq())
            .sum::<f64>();

    let conv = kernel::convolve_q_region(&state.q, spec, eps, &omega)?;
    let nonlocal = 0.5
        * alpha
        * vol
        * omega_indices
            .iter()
            .map(|&i| {
                let q = &state.q.values[i];
                q.dot(q) - q.dot(&conv.values[i])
            })
            .sum::<f64>();

    let ones = ScalarField::from_fn(lattice, |_| 1.0);
    let mass = kernel::convolve_scalar_region(&ones, spec, eps, &omega)?;
    let c1 = alpha / 3.0 * vol * omega_indices.iter().map(|&i| mass.values[i]).sum::<f64>();

    Ok(EnergyReport {
        eps,
        alpha,
        delta: state.params.delta,
        entropy,
        bulk,
        nonlocal,
        c1,
        total: entropy + bulk + nonlocal + c1,
    })
}

/// Homogeneous free-energy density of the state at one node.
fn homogeneous_density(state: &State, idx: usize, grid: &SphereGrid) -> Result<f64> {
    let ent = bingham::entropy(&state.b[idx], grid)?;
    Ok(ent + 0.5 * state.params.alpha * (2.0 / 3.0 - state.q.values[idx].frobenius_sq()))
}

/// The eps-uniform a-priori quantity of a state:
///
/// ```text
///   (1/eps) int_Omega (A[f] - A[h_{n_b}])
///   + (alpha/(4 eps)) intint |Q[f-bar](x) - Q[f-bar](y)|^2 g_eps(x - y),
/// ```
///
/// with the double integral evaluated through the Fourier identity
/// `intint |u(x)-u(y)|^2 g_eps = 2 int u : (u - u * g_eps)`. Bounded
/// uniformly in eps for minimizers with H^1 boundary data.
pub fn apriori_quantity(
    state: &State,
    boundary: &BoundaryData,
    grid: &SphereGrid,
    spec: &KernelSpec,
) -> Result<f64> {
    let lattice = &state.q.lattice;
    let vol = lattice.node_volume();
    let eps = state.params.eps;
    let alpha = state.params.alpha;
    let anchored = State::anchored(boundary, state.params);

    let omega_indices: Vec<usize> =
        (0..lattice.len()).filter(|&i| lattice.in_omega(i)).collect();
    let densities: Vec<f64> = omega_indices
        .par_iter()
        .map(|&idx| {
            Ok(homogeneous_density(state, idx, grid)?
                - homogeneous_density(&anchored, idx, grid)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let first = vol * densities.iter().sum::<f64>() / eps;

    let j = kernel::smoothing_form_q(&state.q, spec, eps);
    Ok(first + 0.5 * alpha * j / eps)
}

/// Energy of the state minus the energy of the anchored competitor
/// `h_{n_b}`; nonpositive (up to solver tolerance) for accepted minimizers.
pub fn minimality_gap(
    state: &State,
    boundary: &BoundaryData,
    grid: &SphereGrid,
    spec: &KernelSpec,
) -> Result<f64> {
    let anchored = State::anchored(boundary, state.params);
    let e_state = energy(state, boundary, grid, spec)?;
    let e_anchored = energy(&anchored, boundary, grid, spec)?;
    Ok(e_state.total - e_anchored.total)
}
