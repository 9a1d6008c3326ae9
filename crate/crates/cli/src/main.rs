//! Command-line driver: wires key=value run configurations to the solver
//! and check suites, emitting CSV artifacts plus a manifest per run.
//!
//! ```text
//!   onsager <command> <config-file>
//! ```
//!
//! Commands: phase-diagram, bingham-check, kernel-check, operator-check,
//! minimize, eps-scan, harmonic-map. Exit codes: 0 success, 2 configuration
//! error, 3 solver non-convergence, 4 internal invariant violation.

mod config;

use config::RunConfig;
use nalgebra::Vector3;
use onsager::bingham::{self, BinghamParam};
use onsager::energy::{self, BoundaryData};
use onsager::field::{self, Domain, LatticeBox, QTensor, ScalarField};
use onsager::harmonic;
use onsager::kernel::{self, KernelSpec};
use onsager::solver::{self, RunReport, ScanRow, SolverConfig};
use onsager::sphere::SphereGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

enum CliError {
    Config(String),
    NonConvergence(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(m) => format!("config: {m}"),
            CliError::NonConvergence(m) => format!("non-convergence: {m}"),
            CliError::Internal(m) => format!("internal: {m}"),
        }
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<onsager::Error> for CliError {
    fn from(e: onsager::Error) -> Self {
        match e {
            onsager::Error::Config(m) => CliError::Config(m),
            onsager::Error::InvalidGrid(m) => CliError::Config(m),
            onsager::Error::NonConvergence { residual, iterations } => CliError::NonConvergence(
                format!("residual {residual:.3e} after {iterations} iterations"),
            ),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("io: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() {
    let code = match run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    };
    std::process::exit(code);
}

fn run() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        return Err(CliError::Config(format!(
            "usage: {} <command> <config-file>",
            args.first().map(String::as_str).unwrap_or("onsager")
        )));
    }
    let command = args[1].as_str();
    let text = std::fs::read_to_string(&args[2])
        .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", args[2])))?;
    let config = RunConfig::from_text(&text)?;
    if let Some(expected) = &config.command {
        if expected != command {
            return Err(CliError::Config(format!(
                "config requests command `{expected}`, invoked with `{command}`"
            )));
        }
    }

    if let Ok(threads) = std::env::var("ONSAGER_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| CliError::Config(format!("ONSAGER_THREADS = `{threads}` not a count")))?;
        // Ignore the error if a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    std::fs::create_dir_all(&config.out_dir)?;
    std::fs::write(
        Path::new(&config.out_dir).join("manifest.txt"),
        config.manifest(command),
    )?;

    match command {
        "phase-diagram" => phase_diagram(&config),
        "bingham-check" => bingham_check(&config),
        "kernel-check" => kernel_check(&config),
        "operator-check" => operator_check(&config),
        "minimize" => minimize(&config),
        "eps-scan" => eps_scan(&config),
        "harmonic-map" => harmonic_map(&config),
        other => Err(CliError::Config(format!(
            "unknown command `{other}`; expected one of phase-diagram, bingham-check, kernel-check, operator-check, minimize, eps-scan, harmonic-map"
        ))),
    }
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn output_path(config: &RunConfig, command: &str, suffix: &str) -> PathBuf {
    Path::new(&config.out_dir).join(format!("{command}_{}{suffix}", timestamp()))
}

fn write_output(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn sphere_grid(config: &RunConfig) -> Result<SphereGrid> {
    Ok(onsager::sphere::build_grid(
        config.sphere_polar,
        config.sphere_azimuth,
    )?)
}

fn lattice(config: &RunConfig) -> Result<LatticeBox> {
    Ok(LatticeBox::new(
        config.dim,
        config.lattice_n,
        config.lattice_r,
        Domain::Cube {
            half: config.omega_half,
        },
    )?)
}

fn boundary(config: &RunConfig, grid: &SphereGrid) -> Result<(BoundaryData, f64)> {
    let alpha = config.require_alpha()?;
    if !(alpha > 7.5) {
        return Err(CliError::Config(format!(
            "alpha = {alpha} must exceed 7.5 for anchored solves"
        )));
    }
    let eta = bingham::eta1_of_alpha(alpha)?;
    let lattice = lattice(config)?;
    Ok((
        energy::make_boundary(config.boundary_profile, &lattice, eta, grid)?,
        alpha,
    ))
}

fn solver_config(config: &RunConfig, alpha: f64, eps: f64) -> SolverConfig {
    SolverConfig {
        alpha,
        eps,
        sigma: config.sigma,
        theta: config.theta,
        tol_q: config.tol_q,
        tol_el: config.tol_el,
        max_iter: config.max_iter,
        restarts: config.restarts,
        seed: config.seed,
    }
}

// ---------------------------------------------------------------------------
// Check-suite plumbing
// ---------------------------------------------------------------------------

struct CheckTable {
    rows: Vec<(String, f64, f64, bool)>,
}

impl CheckTable {
    fn new() -> Self {
        CheckTable { rows: Vec::new() }
    }

    /// Pass when `value <= threshold`.
    fn push(&mut self, name: &str, value: f64, threshold: f64) {
        self.rows
            .push((name.to_string(), value, threshold, value <= threshold));
    }

    fn csv(&self) -> String {
        let mut s = String::from("check,value,threshold,pass\n");
        for (name, value, threshold, pass) in &self.rows {
            let _ = writeln!(s, "{name},{value},{threshold},{pass}");
        }
        s
    }

    fn finish(self, config: &RunConfig, command: &str) -> Result<()> {
        let csv = self.csv();
        write_output(&output_path(config, command, ".csv"), &csv)?;
        if let Some((name, value, threshold, _)) =
            self.rows.iter().find(|(_, _, _, pass)| !pass)
        {
            return Err(CliError::Internal(format!(
                "check `{name}` failed: value {value:.6e} exceeds {threshold:.3e}"
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn phase_diagram(config: &RunConfig) -> Result<()> {
    if config.eta_steps == 0 || config.eta_max <= config.eta_min {
        return Err(CliError::Config(
            "phase-diagram needs eta_min < eta_max and eta_steps > 0".into(),
        ));
    }
    let table = bingham::phase_table(config.eta_min, config.eta_max, config.eta_steps);
    let mut csv = String::from("eta,alpha,s2\n");
    for (eta, alpha, s2) in table {
        let _ = writeln!(csv, "{eta},{alpha},{s2}");
    }
    write_output(&output_path(config, "phase-diagram", ".csv"), &csv)
}

fn bingham_check(config: &RunConfig) -> Result<()> {
    let grid = sphere_grid(config)?;
    let alpha = config.alpha.unwrap_or(8.0);
    if !(alpha > 7.5) {
        return Err(CliError::Config(format!(
            "alpha = {alpha} must exceed 7.5 for the nematic-branch checks"
        )));
    }
    let eta1 = bingham::eta1_of_alpha(alpha)?;
    let mut table = CheckTable::new();

    table.push(
        "alpha_at_zero_minus_7_5",
        (bingham::alpha_of_eta(0.0) - 7.5).abs(),
        1e-9,
    );
    table.push(
        "alpha_star_minus_6_7314",
        (bingham::alpha_star() - 6.7314).abs(),
        5e-3,
    );

    let s2_dev = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0]
        .iter()
        .map(|&eta| (bingham::s2_of_eta(eta) - eta / bingham::alpha_of_eta(eta)).abs())
        .fold(0.0_f64, f64::max);
    table.push("s2_identity_max", s2_dev, 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut moment_dev = 0.0_f64;
    for _ in 0..10 {
        let nu = random_unit(&mut rng);
        let q = bingham::moment_q(&BinghamParam::uniaxial(eta1, &nu), &grid)?;
        let expected = QTensor::uniaxial(eta1 / alpha, &nu);
        moment_dev = moment_dev.max((q - expected).frobenius());
    }
    table.push("uniaxial_moment_identity_max", moment_dev, 1e-8);

    let p = BinghamParam::uniaxial(eta1, &Vector3::z());
    let q = bingham::moment_q(&p, &grid)?;
    table.push(
        "fixed_point_consistency",
        (alpha * q.matrix() - p.matrix()).norm(),
        1e-8,
    );

    table.push(
        "partition_isotropic_minus_4pi",
        (bingham::partition(&BinghamParam::zero(), &grid)? - 4.0 * std::f64::consts::PI).abs(),
        1e-11,
    );

    let (p_min, value) = bingham::minimize_homogeneous(alpha, &grid, 6, config.seed)?;
    let q_min = bingham::moment_q(&p_min, &grid)?;
    let reference = bingham::homogeneous_energy(
        &BinghamParam::uniaxial(eta1, &Vector3::z()),
        alpha,
        &grid,
    )?;
    table.push("homogeneous_minimizer_gap", (value - reference).abs(), 1e-6);
    table.push(
        "homogeneous_minimizer_uniaxiality",
        field::uniaxiality_residual(&q_min),
        1e-6,
    );
    let (s, _) = field::director_extract(&q_min, 1e-9).map_err(onsager::Error::from)?;
    table.push(
        "homogeneous_minimizer_s_minus_branch",
        (s - eta1 / alpha).abs(),
        1e-6,
    );

    table.finish(config, "bingham-check")
}

fn random_unit<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.gen_range(-1.0..1.0_f64),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn band_limited(lattice: &LatticeBox, seed: u64, kmax: i32) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kx in -kmax..=kmax {
        for ky in -kmax..=kmax {
            modes.push((
                kx,
                ky,
                rng.gen_range(-1.0..1.0_f64),
                rng.gen_range(0.0..std::f64::consts::PI),
            ));
        }
    }
    let period = 2.0 * lattice.r;
    ScalarField::from_fn(lattice, |x| {
        modes
            .iter()
            .map(|&(kx, ky, amp, phase)| {
                amp * (2.0 * std::f64::consts::PI * (kx as f64 * x[0] + ky as f64 * x[1])
                    / period
                    + phase)
                    .cos()
            })
            .sum()
    })
}

fn kernel_check(config: &RunConfig) -> Result<()> {
    let spec = KernelSpec::new(config.dim, config.kernel_a)?;
    let mut table = CheckTable::new();

    let samples = if config.dim == 2 { 81 } else { 27 };
    let check = kernel::verify_assumptions(&spec, 8.0, samples);
    table.push("ghat_range_violation", check.range_violation, 0.0);
    table.push("kernel_inequality_violation", check.inequality_violation, 0.0);
    table.push("ghat_unit_mass_error", check.unit_mass_error, 1e-12);
    table.push("ghat_gradient_at_zero", check.grad_at_zero, 1e-8);
    table.push("mu_lattice_error", check.mu_error, 1e-10);
    table.push(
        "mu_scaling_error",
        (kernel::mu_lattice_quadrature(&spec, 0.3) - 0.3 * spec.mu()).abs(),
        1e-10,
    );

    // Factorization and limit diagnostics on a 2D section.
    let spec2 = KernelSpec::new(2, config.kernel_a)?;
    let box_lattice = LatticeBox::new(2, 48, 4.0, Domain::Cube { half: 0.5 })?;
    let u = band_limited(&box_lattice, config.seed.wrapping_add(1), 3);
    for (tag, eps) in [("5e-1", 0.5), ("5e-2", 0.05), ("5e-3", 0.005)] {
        let t1 = kernel::t_eps(&u, &spec2, eps)?;
        let mut composed = vec![num_complex::Complex64::default(); box_lattice.len()];
        for (axis, component) in t1.iter().enumerate() {
            let t2 = kernel::t_eps_complex(component, &spec2, eps)?;
            for i in 0..box_lattice.len() {
                composed[i] += t2[axis].values[i];
            }
        }
        let direct = kernel::a_eps(&u, &spec2, eps)?;
        let mut err_sq = 0.0;
        for i in 0..box_lattice.len() {
            err_sq +=
                (composed[i] - num_complex::Complex64::new(direct.values[i], 0.0)).norm_sqr();
        }
        let rel = (box_lattice.node_volume() * err_sq).sqrt() / u.l2_norm();
        table.push(&format!("factorization_residual_eps_{tag}"), rel, 1e-10);
    }

    // First-order approach of T_eps to the scaled gradient.
    let bump = ScalarField::from_fn(&box_lattice, |x| {
        (-1.5 * (x[0] * x[0] + x[1] * x[1])).exp()
    });
    let grad = kernel::gradient_spectral(&bump)?;
    let c_star = spec2.limit_const();
    let error_at = |eps: f64| -> Result<f64> {
        let t = kernel::t_eps(&bump, &spec2, eps)?;
        let mut acc = 0.0;
        for axis in 0..2 {
            for i in 0..box_lattice.len() {
                let target = t[axis].values[i]
                    + num_complex::Complex64::new(0.0, c_star * grad[axis].values[i]);
                acc += target.norm_sqr();
            }
        }
        Ok((box_lattice.node_volume() * acc).sqrt())
    };
    let e1 = error_at(1e-1)?;
    let e2 = error_at(1e-2)?;
    let e3 = error_at(1e-3)?;
    table.push("t_limit_ratio_1e-2_over_1e-1", e2 / e1, 0.2);
    table.push("t_limit_ratio_1e-3_over_1e-2", e3 / e2, 0.2);

    let coarse = kernel::lipschitz_check(&spec2, &kernel::default_xi_samples(2, 6.0, 40));
    let fine = kernel::lipschitz_check(&spec2, &kernel::default_xi_samples(2, 6.0, 80));
    table.push(
        "lipschitz_slope_refinement_drift",
        (fine - coarse).abs() / coarse.max(fine),
        0.05,
    );

    let (first, second) = kernel::smoothing_diagnostics(&bump, &spec2, 1e-3)?;
    let grad_sq: f64 = grad.iter().map(|g| g.l2_norm().powi(2)).sum();
    table.push(
        "smoothing_first_over_bound",
        first / (4.0 * std::f64::consts::PI.powi(2) * spec2.mu() * grad_sq),
        1.0,
    );
    table.push("smoothing_gradient_over_limit", second / grad_sq, 1.0001);

    table.finish(config, "kernel-check")
}

fn operator_check(config: &RunConfig) -> Result<()> {
    let spec = KernelSpec::new(2, config.kernel_a)?;
    let box_lattice = LatticeBox::new(2, 48, 4.0, Domain::Cube { half: 0.5 })?;
    let phi = ScalarField::from_fn(&box_lattice, |x| {
        (-2.0 * (x[0] * x[0] + x[1] * x[1])).exp()
    });

    let mut csv = String::from("eps,max_norm_ratio,limit_error\n");
    let mut ratios = Vec::new();
    let mut limits = Vec::new();
    for eps in [1.0, 1e-2, 1e-4] {
        let mut worst: f64 = 0.0;
        let mut limit_first = 0.0;
        for k in 0..20 {
            let u = band_limited(&box_lattice, config.seed.wrapping_add(100 + k), 2);
            let (ratio, limit) = kernel::commutator_diag(&phi, &u, &spec, eps)?;
            worst = worst.max(ratio);
            if k == 0 {
                limit_first = limit;
            }
        }
        let _ = writeln!(csv, "{eps},{worst},{limit_first}");
        ratios.push(worst);
        limits.push(limit_first);
    }
    write_output(&output_path(config, "operator-check", ".csv"), &csv)?;

    let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
    if max / min >= 10.0 {
        return Err(CliError::Internal(format!(
            "commutator norm ratios vary by {:.2}x across eps",
            max / min
        )));
    }
    if limits[2] >= limits[0] {
        return Err(CliError::Internal(
            "commutator limit error did not decrease with eps".into(),
        ));
    }
    Ok(())
}

fn dump_state(
    config: &RunConfig,
    command: &str,
    state: &energy::State,
    alpha: f64,
) -> Result<()> {
    let mut qcsv: Vec<u8> = Vec::new();
    field::write_qfield_csv(&state.q, &mut qcsv)?;
    let qpath = output_path(config, &format!("{command}_qfield"), ".csv");
    std::fs::write(&qpath, &qcsv)?;
    println!("wrote {}", qpath.display());

    let mut meta: Vec<u8> = Vec::new();
    field::write_qfield_meta(
        &mut meta,
        &state.q.lattice,
        state.params.delta,
        state.params.eps,
        alpha,
    )?;
    let meta_path = qpath.with_extension("meta");
    std::fs::write(&meta_path, &meta)?;
    println!("wrote {}", meta_path.display());
    Ok(())
}

fn minimize(config: &RunConfig) -> Result<()> {
    let grid = sphere_grid(config)?;
    let (boundary, alpha) = boundary(config, &grid)?;
    let eps = config.require_eps()?;
    let spec = KernelSpec::new(config.dim, config.kernel_a)?;
    let solver = solver_config(config, alpha, eps);

    let result = solver::minimize(&solver, &boundary, &spec, &grid)?;

    let mut csv = String::from(RunReport::CSV_HEADER);
    csv.push('\n');
    for run in &result.runs {
        let _ = writeln!(csv, "{}", run.csv_row());
    }
    write_output(&output_path(config, "minimize", ".csv"), &csv)?;
    dump_state(config, "minimize", &result.state, alpha)?;

    // Director field of the free interior.
    let interior = result
        .state
        .q
        .lattice
        .interior_mask(result.state.params.delta);
    let lifted = field::orient_lift(&result.state.q, &interior, 1e-6)?;
    let mut dcsv: Vec<u8> = Vec::new();
    field::write_director_csv(&lifted, &mut dcsv)?;
    let dpath = output_path(config, "minimize_director", ".csv");
    std::fs::write(&dpath, &dcsv)?;
    println!("wrote {}", dpath.display());

    if !result.converged() {
        let report = result.best_report();
        return Err(CliError::NonConvergence(format!(
            "best run `{}` residual {:.3e} after {} iterations",
            report.init, report.residual, report.iterations
        )));
    }
    Ok(())
}

fn eps_scan(config: &RunConfig) -> Result<()> {
    let grid = sphere_grid(config)?;
    let (boundary, alpha) = boundary(config, &grid)?;
    let eps_list = config.require_eps_list()?;
    let spec = KernelSpec::new(config.dim, config.kernel_a)?;
    let solver = solver_config(config, alpha, *eps_list.first().unwrap_or(&1e-2));

    let (rows, states) = solver::eps_scan(&solver, &eps_list, &boundary, &spec, &grid)?;

    let mut csv = String::from(ScanRow::CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        let _ = writeln!(csv, "{}", row.csv_row());
    }
    write_output(&output_path(config, "eps-scan", ".csv"), &csv)?;
    if let Some(state) = states.last() {
        dump_state(config, "eps-scan", state, alpha)?;
    }

    if let Some(bad) = rows.iter().find(|r| !r.converged) {
        return Err(CliError::NonConvergence(format!(
            "scan step eps = {} did not converge",
            bad.eps
        )));
    }
    Ok(())
}

fn harmonic_map(config: &RunConfig) -> Result<()> {
    let lattice = lattice(config)?;
    let profile = config.boundary_profile;
    let init = harmonic::director_from_fn(&lattice, |x| profile.direction(x));
    let step = 0.9 * lattice.h * lattice.h / (2.0 * lattice.d as f64);
    let flow = harmonic::heat_flow(&init, step, config.tol_q.max(1e-12), config.max_iter.max(200_000))?;

    let mut dcsv: Vec<u8> = Vec::new();
    field::write_director_csv(&flow, &mut dcsv)?;
    let dpath = output_path(config, "harmonic-map_director", ".csv");
    std::fs::write(&dpath, &dcsv)?;
    println!("wrote {}", dpath.display());

    let mut csv = String::from("quantity,value\n");
    let _ = writeln!(csv, "dirichlet_energy,{}", harmonic::dirichlet_energy(&flow));
    let _ = writeln!(
        csv,
        "oseen_frank_one_constant,{}",
        harmonic::oseen_frank_energy(&flow, &harmonic::OFConstants::one_constant(1.0))
    );
    let _ = writeln!(csv, "weak_residual,{}", harmonic::weak_residual(&flow, 4));
    let _ = writeln!(csv, "saddle_splay,{}", harmonic::saddle_splay_integral(&flow));
    write_output(&output_path(config, "harmonic-map", ".csv"), &csv)
}
