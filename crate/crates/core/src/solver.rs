//! Damped self-consistent-field minimization of the nonlocal free energy
//! over the admissible set, with Euler-Lagrange certification and
//! continuation in the interaction scale.
//!
//! Critical points of the energy are fixed points of the mean-field map
//!
//! ```text
//!   B(x) = alpha (Q[f] *_Omega g_eps)(x),      f(x) = Bingham(B(x)),
//! ```
//!
//! on the free interior, with the shell and exterior pinned to the boundary
//! distribution. The restricted convolution is the variation of the energy:
//! the interaction integrates over Omega only, so near the boundary the
//! effective field sees the kernel mass lost across it and the equilibrium
//! order parameter dips below its bulk value in a layer of width ~sqrt(eps).
//! One SCF step convolves the masked Q-field, evaluates the Bingham moment
//! of the new exponent nodewise, and blends with damping `theta`; the
//! damping is halved after two consecutive residual increases (the undamped
//! map can 2-cycle near the transition).
//!
//! Certification of an accepted state:
//! * fixed-point residual `max |Q_cand - Q| <= tol_q`;
//! * Euler-Lagrange residual `max |sum_i Q^i ∧ (Q^i *_Omega g_eps)| <= tol_el`
//!   on the free interior (rows of a matrix commuting with its mean field
//!   cross to zero);
//! * energy not above the anchored competitor (minimality gap);
//! * the a-priori quantity, reported for eps-uniformity checks.
//!
//! The solver finds critical points; global minimality is approximated by
//! multistart (anchored, isotropic, randomized) with lowest-energy selection
//! and is reported, never asserted.

use crate::bingham::BinghamParam;
use crate::energy::{self, BoundaryData, EnergyReport, State, StateParams};
use crate::error::{Error, Result};
use crate::field::{self, DirectorField, QTensor, QTensorField, Region};
use crate::harmonic;
use crate::kernel::{self, KernelSpec};
use crate::sphere::SphereGrid;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Solve parameters; see the field comments for defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub alpha: f64,
    pub eps: f64,
    /// Shell exponent: `delta = eps^{1/2 - sigma}`.
    pub sigma: f64,
    /// Damping of the fixed-point update, in (0, 1].
    pub theta: f64,
    /// Fixed-point residual tolerance.
    pub tol_q: f64,
    /// Euler-Lagrange residual tolerance.
    pub tol_el: f64,
    pub max_iter: usize,
    /// Number of runs beyond the anchored initialization.
    pub restarts: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(alpha: f64, eps: f64) -> Self {
        SolverConfig {
            alpha,
            eps,
            sigma: 0.25,
            theta: 0.5,
            tol_q: 1e-8,
            tol_el: 1e-6,
            max_iter: 500,
            restarts: 4,
            seed: 0,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        SolverConfig { eps, ..*self }
    }

    /// Range-check against a lattice and derive the state parameters.
    pub fn validate(&self, lattice: &field::LatticeBox) -> Result<StateParams> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(format!("theta = {} not in (0, 1]", self.theta)));
        }
        let params = StateParams::new(self.eps, self.alpha, self.sigma)?;
        if params.delta < 2.0 * lattice.h {
            return Err(Error::Config(format!(
                "shell width delta = {:.4} under-resolved: below 2h = {:.4}",
                params.delta,
                2.0 * lattice.h
            )));
        }
        if params.delta < self.eps.sqrt() {
            return Err(Error::Config(format!(
                "shell width delta = {:.4} thinner than sqrt(eps) = {:.4}",
                params.delta,
                self.eps.sqrt()
            )));
        }
        if !lattice.interior_mask(params.delta).iter().any(|&m| m) {
            return Err(Error::Config(
                "free interior is empty at this shell width".into(),
            ));
        }
        Ok(params)
    }
}

/// Mean-field exponent `alpha (Q[f] *_Omega g_eps)` over the whole lattice.
pub fn mean_field(state: &State, spec: &KernelSpec) -> Result<QTensorField> {
    let omega = state.q.lattice.omega_mask();
    let conv = kernel::convolve_q_region(&state.q, spec, state.params.eps, &omega)?;
    Ok(QTensorField {
        lattice: conv.lattice.clone(),
        values: conv
            .values
            .iter()
            .map(|q| *q * state.params.alpha)
            .collect(),
    })
}

/// One damped SCF step on the free interior; returns the fixed-point
/// residual `max |Q_candidate - Q_old|` before blending.
///
/// With `theta = 0` the state is unchanged and the residual still reported.
pub fn scf_step(
    state: &mut State,
    theta: f64,
    spec: &KernelSpec,
    grid: &SphereGrid,
) -> Result<f64> {
    let m = mean_field(state, spec)?;
    let lattice = state.q.lattice.clone();
    let delta = state.params.delta;

    let interior: Vec<usize> = (0..lattice.len())
        .filter(|&i| lattice.region(i, delta) == Region::Interior)
        .collect();

    let updates: Vec<(BinghamParam, QTensor)> = interior
        .par_iter()
        .map(|&idx| {
            let b = BinghamParam::from_matrix(m.values[idx].matrix());
            let q = crate::bingham::moment_q(&b, grid)?;
            Ok((b, q))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut residual = 0.0_f64;
    for (&idx, (b, q_cand)) in interior.iter().zip(&updates) {
        residual = residual.max((*q_cand - state.q.values[idx]).frobenius());
        state.q.values[idx] = state.q.values[idx] * (1.0 - theta) + *q_cand * theta;
        state.b[idx] = *b;
    }
    Ok(residual)
}

/// Euler-Lagrange residual: max over the free interior of
/// `|sum_i Q^i(x) ∧ (Q^i *_Omega g_eps)(x)|`, the macroscopic form of the
/// critical-point equation.
pub fn el_residual(state: &State, spec: &KernelSpec) -> Result<f64> {
    let omega = state.q.lattice.omega_mask();
    let conv = kernel::convolve_q_region(&state.q, spec, state.params.eps, &omega)?;
    let lattice = &state.q.lattice;
    let delta = state.params.delta;
    let mut worst = 0.0_f64;
    for idx in 0..lattice.len() {
        if lattice.region(idx, delta) != Region::Interior {
            continue;
        }
        let mut acc = nalgebra::Vector3::zeros();
        for i in 0..3 {
            acc += state.q.values[idx]
                .row(i)
                .cross(&conv.values[idx].row(i));
        }
        worst = worst.max(acc.norm());
    }
    Ok(worst)
}

/// Outcome of one SCF run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub init: String,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub el_residual: f64,
    pub energy: EnergyReport,
    pub apriori: f64,
    pub min_gap: f64,
}

impl RunReport {
    pub const CSV_HEADER: &'static str =
        "init,iterations,converged,residual,el_residual,eps,alpha,delta,entropy,bulk,nonlocal,C1,total,apriori,min_gap";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.init,
            self.iterations,
            self.converged,
            self.residual,
            self.el_residual,
            self.energy.csv_row(self.apriori, self.min_gap)
        )
    }
}

/// Multistart minimization outcome: the selected state plus per-run reports.
#[derive(Debug, Clone)]
pub struct Minimization {
    pub state: State,
    pub runs: Vec<RunReport>,
    /// Index of the selected run.
    pub best: usize,
}

impl Minimization {
    pub fn best_report(&self) -> &RunReport {
        &self.runs[self.best]
    }

    pub fn converged(&self) -> bool {
        self.runs[self.best].converged
    }
}

fn run_scf(
    mut state: State,
    config: &SolverConfig,
    spec: &KernelSpec,
    grid: &SphereGrid,
) -> Result<(State, usize, bool, f64)> {
    let mut theta = config.theta;
    let mut previous = f64::INFINITY;
    let mut increases = 0usize;
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iter {
        residual = scf_step(&mut state, theta, spec, grid)?;
        if residual <= config.tol_q {
            return Ok((state, it, true, residual));
        }
        if residual > previous {
            increases += 1;
            if increases >= 2 {
                theta = (0.5 * theta).max(0.05);
                increases = 0;
            }
        } else {
            increases = 0;
        }
        previous = residual;
    }
    Ok((state, config.max_iter, false, residual))
}

fn certify(
    state: &State,
    boundary: &BoundaryData,
    spec: &KernelSpec,
    grid: &SphereGrid,
    init: String,
    iterations: usize,
    converged: bool,
    residual: f64,
) -> Result<RunReport> {
    Ok(RunReport {
        init,
        iterations,
        converged,
        residual,
        el_residual: el_residual(state, spec)?,
        energy: energy::energy(state, boundary, grid, spec)?,
        apriori: energy::apriori_quantity(state, boundary, grid, spec)?,
        min_gap: energy::minimality_gap(state, boundary, grid, spec)?,
    })
}

/// Minimize from a caller-supplied initial state (single run).
pub fn minimize_from(
    init: State,
    init_label: &str,
    config: &SolverConfig,
    boundary: &BoundaryData,
    spec: &KernelSpec,
    grid: &SphereGrid,
) -> Result<Minimization> {
    config.validate(&boundary.n_b.lattice)?;
    let (state, iterations, converged, residual) = run_scf(init, config, spec, grid)?;
    let report = certify(
        &state,
        boundary,
        spec,
        grid,
        init_label.to_string(),
        iterations,
        converged,
        residual,
    )?;
    Ok(Minimization {
        state,
        runs: vec![report],
        best: 0,
    })
}

/// Multistart SCF minimization.
///
/// Runs `1 + restarts` solves initialized at (i) the anchored state, (ii)
/// the isotropic interior, (iii) randomized uniaxial interiors, and returns
/// the lowest-energy converged state; if no run converges the best state is
/// returned with its report flagged.
pub fn minimize(
    config: &SolverConfig,
    boundary: &BoundaryData,
    spec: &KernelSpec,
    grid: &SphereGrid,
) -> Result<Minimization> {
    let params = config.validate(&boundary.n_b.lattice)?;

    let mut inits: Vec<(String, State)> = vec![(
        "anchored".to_string(),
        State::anchored(boundary, params),
    )];
    if config.restarts >= 1 {
        inits.push((
            "isotropic".to_string(),
            State::isotropic_interior(boundary, params),
        ));
    }
    for k in 1..config.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
        inits.push((
            format!("random{k}"),
            State::random_uniaxial_interior(boundary, params, &mut rng),
        ));
    }

    let mut runs = Vec::with_capacity(inits.len());
    let mut states = Vec::with_capacity(inits.len());
    for (label, init) in inits {
        let (state, iterations, converged, residual) = run_scf(init, config, spec, grid)?;
        runs.push(certify(
            &state, boundary, spec, grid, label, iterations, converged, residual,
        )?);
        states.push(state);
    }

    // Lowest-energy converged run; if none converged, smallest residual.
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .min_by(|(_, a), (_, b)| a.energy.total.partial_cmp(&b.energy.total).unwrap())
        .map(|(i, _)| i)
        .unwrap_or_else(|| {
            runs.iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| a.residual.partial_cmp(&b.residual).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        });

    Ok(Minimization {
        state: states.swap_remove(best),
        runs,
        best,
    })
}

/// One row of an eps-continuation experiment.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub eps: f64,
    pub delta: f64,
    /// L2 distance of Q to the uniaxial reference on this scale's free
    /// interior.
    pub q_error: f64,
    /// Angular L2 distance of the lifted director to the reference (modulo
    /// one global sign), over the scan's common region — the free interior
    /// at the largest shell width — so successive scales compare the same
    /// functional on the same domain.
    pub angle_error: f64,
    pub apriori: f64,
    pub el_residual: f64,
    pub min_gap: f64,
    pub energy_total: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ScanRow {
    pub const CSV_HEADER: &'static str =
        "eps,delta,q_error,angle_error,apriori,el_residual,min_gap,energy_total,iterations,converged";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.eps,
            self.delta,
            self.q_error,
            self.angle_error,
            self.apriori,
            self.el_residual,
            self.min_gap,
            self.energy_total,
            self.iterations,
            self.converged
        )
    }
}

/// Reference harmonic map for the scan: heat flow from the boundary profile
/// restricted to the domain (for the affine-angle profiles used here the
/// profile map itself is the exact discrete minimizer).
pub fn scan_reference(
    boundary: &BoundaryData,
    tol: f64,
) -> Result<DirectorField> {
    let lattice = &boundary.n_b.lattice;
    let init = harmonic::director_from_fn(lattice, |x| boundary.profile.direction(x));
    let step = 0.9 * lattice.h * lattice.h / (2.0 * lattice.d as f64);
    harmonic::heat_flow(&init, step, tol, 200_000)
}

/// Continuation in eps: solve at each scale (full multistart at the first,
/// warm-started from the previous state afterwards) and compare against the
/// harmonic-map reference.
pub fn eps_scan(
    config: &SolverConfig,
    eps_list: &[f64],
    boundary: &BoundaryData,
    spec: &KernelSpec,
    grid: &SphereGrid,
) -> Result<(Vec<ScanRow>, Vec<State>)> {
    if eps_list.is_empty() {
        return Err(Error::Config("empty eps list".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("eps list must be strictly decreasing".into()));
    }

    let reference = scan_reference(boundary, 1e-10)?;
    let lattice = &boundary.n_b.lattice;
    let common_region = {
        let params0 = config.with_eps(eps_list[0]).validate(lattice)?;
        lattice.interior_mask(params0.delta)
    };

    let mut rows = Vec::with_capacity(eps_list.len());
    let mut states: Vec<State> = Vec::with_capacity(eps_list.len());

    for (step_idx, &eps) in eps_list.iter().enumerate() {
        let cfg = config.with_eps(eps);
        let params = cfg.validate(lattice)?;
        let minimization = if let Some(previous) = states.last() {
            // Warm continuation: keep the previous field, re-pin at the new
            // shell width (newly freed nodes already hold boundary values).
            let warm = State {
                q: previous.q.clone(),
                b: previous.b.clone(),
                params,
            };
            minimize_from(warm, "warm", &cfg, boundary, spec, grid)?
        } else {
            minimize(&cfg, boundary, spec, grid)?
        };
        let report = minimization.best_report().clone();
        let state = minimization.state;

        let interior = lattice.interior_mask(params.delta);
        let q_ref = QTensorField {
            lattice: lattice.clone(),
            values: (0..lattice.len())
                .map(|i| {
                    if reference.defined[i] {
                        QTensor::uniaxial(boundary.s2, &reference.values[i])
                    } else {
                        QTensor::zero()
                    }
                })
                .collect(),
        };
        let q_error = state.q.l2_distance_on(&q_ref, &interior);
        let lifted = field::orient_lift(&state.q, &common_region, 1e-6)?;
        let angle_error = harmonic::compare_directors(&lifted, &reference, &common_region);

        rows.push(ScanRow {
            eps,
            delta: params.delta,
            q_error,
            angle_error,
            apriori: report.apriori,
            el_residual: report.el_residual,
            min_gap: report.min_gap,
            energy_total: report.energy.total,
            iterations: report.iterations,
            converged: report.converged,
        });
        let _ = step_idx;
        states.push(state);
    }
    Ok((rows, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bingham;
    use crate::energy::{make_boundary, BoundaryProfile};
    use crate::field::{Domain, LatticeBox};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn setup(
        n: usize,
        alpha: f64,
    ) -> (LatticeBox, SphereGrid, BoundaryData, KernelSpec) {
        let lattice = LatticeBox::new(2, n, 3.0, Domain::Cube { half: 0.5 }).unwrap();
        let grid = SphereGrid::default_solver();
        let eta = bingham::eta1_of_alpha(alpha).unwrap();
        let boundary = make_boundary(
            BoundaryProfile::Constant(Vector3::z()),
            &lattice,
            eta,
            &grid,
        )
        .unwrap();
        let spec = KernelSpec::new(2, PI / 2.0).unwrap();
        (lattice, grid, boundary, spec)
    }

    #[test]
    fn config_validation() {
        let lattice = LatticeBox::new(2, 64, 3.0, Domain::Cube { half: 0.5 }).unwrap();
        assert!(SolverConfig::new(8.0, 4e-3).validate(&lattice).is_ok());
        assert!(SolverConfig::new(7.0, 4e-3).validate(&lattice).is_err());
        // Shell thinner than two lattice spacings.
        assert!(SolverConfig::new(8.0, 1e-4).validate(&lattice).is_err());
        // Shell swallowing the whole domain.
        let mut cfg = SolverConfig::new(8.0, 0.3);
        cfg.sigma = 0.05;
        assert!(cfg.validate(&lattice).is_err());
        let mut cfg = SolverConfig::new(8.0, 4e-3);
        cfg.theta = 0.0;
        assert!(cfg.validate(&lattice).is_err());
    }

    #[test]
    fn mean_field_constant_and_linear() {
        let (lattice, _, boundary, spec) = setup(48, 8.0);
        let params = StateParams::new(2e-3, 8.0, 0.25).unwrap();
        let eta1 = boundary.eta;
        let s2 = boundary.s2;

        // A constant uniaxial field maps to B = alpha s2 P = eta1 P deep in
        // the domain, where the kernel mass inside Omega is complete.
        let q_const = QTensorField {
            lattice: lattice.clone(),
            values: vec![QTensor::uniaxial(s2, &Vector3::z()); lattice.len()],
        };
        let state = State {
            q: q_const.clone(),
            b: vec![BinghamParam::zero(); lattice.len()],
            params,
        };
        let m = mean_field(&state, &spec).unwrap();
        let expected = QTensor::uniaxial(eta1, &Vector3::z());
        let mut checked = 0;
        for idx in 0..lattice.len() {
            if lattice.domain.inner_distance(&lattice.coords(idx), 2) >= 0.3 {
                assert!(
                    (m.values[idx] - expected).frobenius() <= 1e-8,
                    "node {idx}: {}",
                    (m.values[idx] - expected).frobenius()
                );
                checked += 1;
            }
        }
        assert!(checked > 0);

        // Zero field maps to zero; the map is linear in Q.
        let zero_state = State {
            q: QTensorField::zeros(&lattice),
            b: vec![BinghamParam::zero(); lattice.len()],
            params,
        };
        let m0 = mean_field(&zero_state, &spec).unwrap();
        assert!(m0.values.iter().all(|q| q.frobenius() <= 1e-13));

        let half_state = State {
            q: QTensorField {
                lattice: lattice.clone(),
                values: q_const.values.iter().map(|q| *q * 0.5).collect(),
            },
            b: vec![BinghamParam::zero(); lattice.len()],
            params,
        };
        let mh = mean_field(&half_state, &spec).unwrap();
        for idx in 0..lattice.len() {
            assert!(
                (mh.values[idx] - m.values[idx] * 0.5).frobenius() <= 1e-12,
                "linearity violated"
            );
        }
    }

    #[test]
    fn scf_step_theta_zero_keeps_state() {
        let (_, grid, boundary, spec) = setup(48, 8.0);
        let params = StateParams::new(1e-2, 8.0, 0.25).unwrap();
        let mut state = State::isotropic_interior(&boundary, params);
        let before = state.q.clone();
        let residual = scf_step(&mut state, 0.0, &spec, &grid).unwrap();
        assert!(residual > 0.0);
        for (a, b) in state.q.values.iter().zip(&before.values) {
            assert_eq!(a.matrix(), b.matrix());
        }
    }

    #[test]
    fn anchored_constant_state_is_fixed_point() {
        let (_, grid, boundary, spec) = setup(64, 8.0);
        let params = StateParams::new(4e-3, 8.0, 0.25).unwrap();
        let mut state = State::anchored(&boundary, params);
        let residual = scf_step(&mut state, 0.5, &spec, &grid).unwrap();
        assert!(residual <= 1e-9, "residual {residual}");
        state.check_constraint(&boundary).unwrap();
    }

    #[test]
    fn isotropic_interior_orders_above_transition() {
        // alpha = 8 > 7.5: the isotropic plateau is unstable; the pinned
        // shell seeds order and the energy drops below the initial value.
        let (_, grid, boundary, spec) = setup(48, 8.0);
        let params = StateParams::new(1.6e-2, 8.0, 0.25).unwrap();
        let mut state = State::isotropic_interior(&boundary, params);
        let e0 = energy::energy(&state, &boundary, &grid, &spec)
            .unwrap()
            .total;
        let first = scf_step(&mut state, 0.5, &spec, &grid).unwrap();
        assert!(first > 0.0);
        for _ in 0..120 {
            scf_step(&mut state, 0.5, &spec, &grid).unwrap();
        }
        let e1 = energy::energy(&state, &boundary, &grid, &spec)
            .unwrap()
            .total;
        assert!(e1 < e0, "energy did not decrease: {e0} -> {e1}");
    }

    #[test]
    fn el_residual_cases() {
        let (lattice, grid, boundary, spec) = setup(48, 8.0);
        let params = StateParams::new(1e-2, 8.0, 0.25).unwrap();

        // Globally constant uniaxial field: every row is parallel to its
        // own convolution.
        let state = State {
            q: QTensorField {
                lattice: lattice.clone(),
                values: vec![QTensor::uniaxial(0.6, &Vector3::z()); lattice.len()],
            },
            b: vec![BinghamParam::zero(); lattice.len()],
            params,
        };
        assert!(el_residual(&state, &spec).unwrap() <= 1e-12);

        // Randomized interior: order-one residual.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let random = State::random_uniaxial_interior(&boundary, params, &mut rng);
        assert!(el_residual(&random, &spec).unwrap() > 1e-2);

        let _ = grid;
    }

    #[test]
    fn minimize_constant_boundary() {
        let (lattice, grid, boundary, spec) = setup(64, 8.0);
        let mut config = SolverConfig::new(8.0, 4e-3);
        config.restarts = 2;
        config.seed = 7;
        let result = minimize(&config, &boundary, &spec, &grid).unwrap();
        assert!(result.converged());
        let report = result.best_report();
        assert!(report.el_residual <= config.tol_el, "el {}", report.el_residual);
        assert!(report.min_gap <= 1e-8, "gap {}", report.min_gap);

        // Interior matches the homogeneous uniaxial state.
        let expected = QTensor::uniaxial(boundary.s2, &Vector3::z());
        let delta = result.state.params.delta;
        for idx in 0..lattice.len() {
            if lattice.region(idx, delta) == Region::Interior {
                assert!(
                    (result.state.q.values[idx] - expected).frobenius() <= 1e-4,
                    "interior node {idx}"
                );
            }
        }

        // Pinned regions are bit-identical to the boundary field.
        for idx in 0..lattice.len() {
            if lattice.region(idx, delta) != Region::Interior {
                assert_eq!(
                    result.state.q.values[idx].matrix(),
                    boundary.h_q.values[idx].matrix()
                );
            }
        }
    }

    #[test]
    fn frame_equivariance_of_the_solve() {
        // Rotating the boundary data rotates the converged state.
        let lattice = LatticeBox::new(2, 48, 3.0, Domain::Cube { half: 0.5 }).unwrap();
        let grid = SphereGrid::default_solver();
        let spec = KernelSpec::new(2, PI / 2.0).unwrap();
        let eta = bingham::eta1_of_alpha(8.0).unwrap();
        let mut config = SolverConfig::new(8.0, 1e-2);
        config.restarts = 0;

        let rot = nalgebra::Rotation3::from_euler_angles(0.4, -0.2, 0.7);
        let b1 = make_boundary(
            BoundaryProfile::Constant(Vector3::z()),
            &lattice,
            eta,
            &grid,
        )
        .unwrap();
        let b2 = make_boundary(
            BoundaryProfile::Constant(rot * Vector3::z()),
            &lattice,
            eta,
            &grid,
        )
        .unwrap();

        let r1 = minimize(&config, &b1, &spec, &grid).unwrap();
        let r2 = minimize(&config, &b2, &spec, &grid).unwrap();
        assert!(r1.converged() && r2.converged());
        let rot_m = rot.matrix();
        for idx in 0..lattice.len() {
            let rotated = rot_m * r1.state.q.values[idx].matrix() * rot_m.transpose();
            let diff = (r2.state.q.values[idx].matrix() - rotated).norm();
            assert!(diff <= 1e-6, "node {idx}: {diff}");
        }
    }

    #[test]
    fn eps_scan_constant_boundary_trend() {
        let (_, grid, boundary, spec) = setup(64, 8.0);
        let mut config = SolverConfig::new(8.0, 1.0);
        config.restarts = 1;
        config.tol_q = 1e-10;
        let (rows, _) = eps_scan(
            &config,
            &[1.6e-2, 4e-3],
            &boundary,
            &spec,
            &grid,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.converged));
        // The exact limit is the constant state; the error cannot grow.
        assert!(rows[1].q_error <= rows[0].q_error + 1e-12);
        assert!(rows[1].angle_error <= 1e-6);
    }

    #[test]
    fn rejects_non_decreasing_eps_list() {
        let (_, grid, boundary, spec) = setup(48, 8.0);
        let config = SolverConfig::new(8.0, 1.0);
        assert!(eps_scan(&config, &[1e-2, 1e-2], &boundary, &spec, &grid).is_err());
        assert!(eps_scan(&config, &[], &boundary, &spec, &grid).is_err());
    }

    #[test]
    fn three_dimensional_smoke() {
        // Small 3D solve with constant anchoring: converges to the constant
        // uniaxial interior. The cube circumradius sqrt(3)/2 needs R >= 3.47.
        let lattice = LatticeBox::new(3, 40, 3.6, Domain::Cube { half: 0.5 }).unwrap();
        let grid = SphereGrid::default_solver();
        let spec = KernelSpec::new(3, PI / 2.0).unwrap();
        let eta = bingham::eta1_of_alpha(8.0).unwrap();
        let boundary = make_boundary(
            BoundaryProfile::Constant(Vector3::z()),
            &lattice,
            eta,
            &grid,
        )
        .unwrap();
        let mut config = SolverConfig::new(8.0, 2.5e-2);
        config.restarts = 1;
        config.max_iter = 300;
        let result = minimize(&config, &boundary, &spec, &grid).unwrap();
        assert!(result.converged());
        let expected = QTensor::uniaxial(boundary.s2, &Vector3::z());
        let delta = result.state.params.delta;
        for idx in 0..lattice.len() {
            if lattice.region(idx, delta) == Region::Interior {
                assert!((result.state.q.values[idx] - expected).frobenius() <= 1e-3);
            }
        }
        let _ = assert_abs_diff_eq!(result.best_report().min_gap, 0.0, epsilon = 1e-7);
    }
}
