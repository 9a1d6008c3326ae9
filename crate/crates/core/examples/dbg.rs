use onsager::bingham;
use onsager::energy::{make_boundary, BoundaryProfile};
use onsager::field::{Domain, LatticeBox};
use onsager::harmonic;
use onsager::kernel::KernelSpec;
use onsager::solver::*;
use onsager::sphere::SphereGrid;
use std::f64::consts::PI;

fn main() {
    let grid = SphereGrid::default_solver();
    let eta = bingham::eta1_of_alpha(8.0).unwrap();
    let eps_list = [1.6e-2, 4e-3, 1e-3];
    let n = 96;
    let a = 1.0;
    let lattice = LatticeBox::new(2, n, 3.0, Domain::Cube { half: 0.5 }).unwrap();
    let profile = BoundaryProfile::InPlane { psi0: 0.0, grad: [PI / 2.0, 0.0], bilinear: 0.0 };
    let boundary = make_boundary(profile, &lattice, eta, &grid).unwrap();
    let spec = KernelSpec::new(2, a).unwrap();
    let mut cfg = SolverConfig::new(8.0, 1.0);
    cfg.restarts = 1;
    cfg.tol_q = 1e-10;
    cfg.max_iter = 3000;
    let (rows, states) = eps_scan(&cfg, &eps_list, &boundary, &spec, &grid).unwrap();
    let reference = scan_reference(&boundary, 1e-10).unwrap();

    // fixed region: interior at the largest delta
    let delta0 = rows[0].delta;
    let fixed = lattice.interior_mask(delta0);
    for (row, state) in rows.iter().zip(&states) {
        let own = lattice.interior_mask(row.delta);
        let lift_own = onsager::field::orient_lift(&state.q, &own, 1e-6).unwrap();
        let lift_fixed = onsager::field::orient_lift(&state.q, &fixed, 1e-6).unwrap();
        let ang_own = harmonic::compare_directors(&lift_own, &reference, &own);
        let ang_fixed = harmonic::compare_directors(&lift_fixed, &reference, &fixed);
        // max nodal angle deviation in own region
        let mut worst = (0.0_f64, 0.0_f64, 0.0_f64);
        for idx in 0..lattice.len() {
            if own[idx] && lift_own.defined[idx] && reference.defined[idx] {
                let d = lift_own.values[idx].dot(&reference.values[idx]).abs().min(1.0).acos();
                if d > worst.0 {
                    let x = lattice.coords(idx);
                    worst = (d, x[0], x[1]);
                }
            }
        }
        println!("eps={:.1e} delta={:.3}: ang_own={:.3e} ang_fixed={:.3e} worst_angle={:.3e} at ({:.2},{:.2})",
                 row.eps, row.delta, ang_own, ang_fixed, worst.0, worst.1, worst.2);
    }
}
