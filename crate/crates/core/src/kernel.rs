//! The Gaussian interaction kernel, FFT convolution of lattice fields, and
//! the Fourier-multiplier operators built from its transform.
//!
//! The kernel family is
//!
//! ```text
//!   g(x)   = (a/pi)^{d/2} exp(-a |x|^2),            a in (0, pi),
//!   g_hat(xi) = exp(-pi^2 |xi|^2 / a),
//!   g_eps(x)  = eps^{-d/2} g(x / sqrt(eps)),        g_hat_eps(xi) = g_hat(sqrt(eps) xi),
//! ```
//!
//! for which `0 <= g_hat <= 1` and `c0 |xi|^2 g_hat^2 <= 1 - g_hat` holds with
//! `c0 = pi^2 / a`, and the second moment is `mu = d / (2a)`.
//!
//! Convolutions are evaluated spectrally: fields are zero-padded beyond the
//! kernel truncation radius, transformed, multiplied by the analytic symbol
//! at the lattice frequencies, and transformed back. This keeps `1 - g_hat`
//! exactly nonnegative, which the square-root multiplier below requires.
//! The derived operators are
//!
//! ```text
//!   A_eps u = (u - u * g_eps) / eps          symbol (1 - g_hat(sqrt(eps) xi)) / eps
//!   T_eps u                                  symbol xi_k sqrt((1 - g_hat(sqrt(eps) xi)) / (eps |xi|^2))
//! ```
//!
//! with `A_eps = sum_k T_eps^k ∘ T_eps^k`. As eps -> 0 the symbol of `T_eps`
//! approaches `2 pi c* xi` with `c* = sqrt(mu / (2d)) = 1 / (2 sqrt(a))`, so
//! `T_eps -> -i c* grad` on smooth fields.
//!
//! Odd multipliers are zeroed on the Nyquist planes of the padded lattice;
//! an unpaired Nyquist mode would otherwise leak a spurious real component.

use crate::error::{Error, Result};
use crate::field::{LatticeBox, QTensor, QTensorField, ScalarField};
use nalgebra::Matrix3;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

/// Gaussian interaction kernel parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub d: usize,
    /// Shape parameter of the Gaussian, in (0, pi).
    pub a: f64,
}

impl KernelSpec {
    pub fn new(d: usize, a: f64) -> Result<Self> {
        if d != 2 && d != 3 {
            return Err(Error::Config(format!("kernel dimension {d} not in {{2, 3}}")));
        }
        if !(a > 0.0 && a < PI) {
            return Err(Error::Config(format!("kernel shape a = {a} not in (0, pi)")));
        }
        Ok(KernelSpec { d, a })
    }

    /// Kernel value at a point.
    pub fn g(&self, x: &[f64; 3]) -> f64 {
        let r2: f64 = x.iter().take(self.d).map(|v| v * v).sum();
        (self.a / PI).powf(self.d as f64 / 2.0) * (-self.a * r2).exp()
    }

    /// Scaled kernel `g_eps(x) = eps^{-d/2} g(x / sqrt(eps))`.
    pub fn g_eps(&self, x: &[f64; 3], eps: f64) -> f64 {
        let scale = eps.powf(-(self.d as f64) / 2.0);
        let y = [
            x[0] / eps.sqrt(),
            x[1] / eps.sqrt(),
            x[2] / eps.sqrt(),
        ];
        scale * self.g(&y)
    }

    /// Fourier transform at squared frequency `|xi|^2`.
    pub fn g_hat(&self, xi_sq: f64) -> f64 {
        (-PI * PI * xi_sq / self.a).exp()
    }

    /// Second moment `mu = int |x|^2 g(x) dx = d / (2a)`.
    pub fn mu(&self) -> f64 {
        self.d as f64 / (2.0 * self.a)
    }

    /// Constant in the kernel inequality `c0 |xi|^2 g_hat^2 <= 1 - g_hat`.
    pub fn c0(&self) -> f64 {
        PI * PI / self.a
    }

    /// Limit constant `c* = sqrt(mu / (2d)) = 1 / (2 sqrt(a))` of the
    /// square-root multiplier.
    pub fn limit_const(&self) -> f64 {
        (self.mu() / (2.0 * self.d as f64)).sqrt()
    }

    /// Square-root multiplier profile `h(xi)` (unscaled kernel), vanishing
    /// continuously at the origin.
    pub fn h_symbol(&self, xi: &[f64; 3]) -> [f64; 3] {
        let xi_sq: f64 = xi.iter().take(self.d).map(|v| v * v).sum();
        if xi_sq == 0.0 {
            return [0.0; 3];
        }
        let factor = ((1.0 - self.g_hat(xi_sq)) / xi_sq).sqrt();
        [xi[0] * factor, xi[1] * factor, xi[2] * factor]
    }

    /// One-sided truncation radius beyond which the scaled kernel mass is
    /// negligible (tail bound below 1e-16).
    pub fn truncation_radius(&self, eps: f64) -> f64 {
        (40.0 * eps / self.a).sqrt()
    }

    /// Upper bound on the kernel mass outside a centred cube of half-width
    /// `rho` (union bound over axes, `erfc(t) <= exp(-t^2)`).
    pub fn tail_mass_outside(&self, eps: f64, rho: f64) -> f64 {
        self.d as f64 * (-self.a * rho * rho / eps).exp()
    }

    /// Padding in lattice nodes for a given spacing.
    pub fn pad_nodes(&self, eps: f64, h: f64) -> usize {
        (self.truncation_radius(eps) / h).ceil() as usize + 2
    }
}

/// Summary of the kernel assumption checks on a sampled frequency grid.
#[derive(Debug, Clone, Copy)]
pub struct KernelCheck {
    /// Max violation of `0 <= g_hat <= 1` (0 when satisfied).
    pub range_violation: f64,
    /// Max violation of `c0 |xi|^2 g_hat^2 <= 1 - g_hat` (0 when satisfied).
    pub inequality_violation: f64,
    /// |g_hat(0) - 1|.
    pub unit_mass_error: f64,
    /// |grad g_hat(0)| estimated by central differences.
    pub grad_at_zero: f64,
    /// |mu_quadrature - d/(2a)| from a lattice quadrature of |x|^2 g.
    pub mu_error: f64,
}

/// Verify the kernel assumptions on a uniform grid over `[-xi_max, xi_max]^d`.
pub fn verify_assumptions(spec: &KernelSpec, xi_max: f64, samples_per_axis: usize) -> KernelCheck {
    let mut range_violation = 0.0_f64;
    let mut inequality_violation = 0.0_f64;
    let n = samples_per_axis;
    let step = 2.0 * xi_max / (n - 1) as f64;

    let mut eval = |xi_sq: f64| {
        let ghat = spec.g_hat(xi_sq);
        range_violation = range_violation.max(ghat - 1.0).max(-ghat);
        inequality_violation =
            inequality_violation.max(spec.c0() * xi_sq * ghat * ghat - (1.0 - ghat));
    };
    if spec.d == 2 {
        for i in 0..n {
            for j in 0..n {
                let x = -xi_max + step * i as f64;
                let y = -xi_max + step * j as f64;
                eval(x * x + y * y);
            }
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = -xi_max + step * i as f64;
                    let y = -xi_max + step * j as f64;
                    let z = -xi_max + step * k as f64;
                    eval(x * x + y * y + z * z);
                }
            }
        }
    }

    let fd = 1e-5;
    let mut grad_sq = 0.0;
    for axis in 0..spec.d {
        let mut xp = [0.0; 3];
        xp[axis] = fd;
        let xi_sq = |x: &[f64; 3]| x.iter().take(spec.d).map(|v| v * v).sum::<f64>();
        let g_plus = spec.g_hat(xi_sq(&xp));
        xp[axis] = -fd;
        let g_minus = spec.g_hat(xi_sq(&xp));
        grad_sq += ((g_plus - g_minus) / (2.0 * fd)).powi(2);
    }

    KernelCheck {
        range_violation: range_violation.max(0.0),
        inequality_violation: inequality_violation.max(0.0),
        unit_mass_error: (spec.g_hat(0.0) - 1.0).abs(),
        grad_at_zero: grad_sq.sqrt(),
        mu_error: (mu_lattice_quadrature(spec, 1.0) - spec.mu()).abs(),
    }
}

/// Second moment of the kernel, and of its eps-scaling, by closed form.
pub fn mu_of(spec: &KernelSpec) -> f64 {
    spec.mu()
}

/// Honest lattice quadrature of `int |x|^2 g_eps(x) dx`; equals `eps * mu`
/// up to spectrally small sampling error.
pub fn mu_lattice_quadrature(spec: &KernelSpec, eps: f64) -> f64 {
    // Resolve and contain the Gaussian: spacing ~ sigma/6, extent ~ 8 sigma.
    let sigma = (eps / (2.0 * spec.a)).sqrt();
    let h = sigma / 6.0;
    let half = (8.0 * sigma / h).ceil() as i64;
    let vol = h.powi(spec.d as i32);
    let mut acc = 0.0;
    if spec.d == 2 {
        for i in -half..=half {
            for j in -half..=half {
                let x = [i as f64 * h, j as f64 * h, 0.0];
                let r2 = x[0] * x[0] + x[1] * x[1];
                acc += r2 * spec.g_eps(&x, eps) * vol;
            }
        }
    } else {
        for i in -half..=half {
            for j in -half..=half {
                for k in -half..=half {
                    let x = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                    acc += r2 * spec.g_eps(&x, eps) * vol;
                }
            }
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

type PlanCache = RwLock<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan_cache() -> &'static PlanCache {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn get_plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    if let Some(plan) = plan_cache().read().unwrap().get(&(len, inverse)) {
        return plan.clone();
    }
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    plan_cache()
        .write()
        .unwrap()
        .insert((len, inverse), plan.clone());
    plan
}

/// Next FFT-friendly size (factors 2, 3, 5 only) at or above `n`.
fn good_fft_size(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        let mut v = m;
        for p in [2usize, 3, 5] {
            while v % p == 0 {
                v /= p;
            }
        }
        if v == 1 {
            return m;
        }
        m += 1;
    }
}

/// In-place FFT along every axis of a row-major array.
fn fftnd(data: &mut [Complex64], dims: &[usize; 3], inverse: bool) {
    for axis in 0..3 {
        let len = dims[axis];
        if len <= 1 {
            continue;
        }
        let plan = get_plan(len, inverse);
        let stride = match axis {
            0 => dims[1] * dims[2],
            1 => dims[2],
            _ => 1,
        };
        let n_lanes = dims[0] * dims[1] * dims[2] / len;
        let mut lane = vec![Complex64::default(); len];
        for l in 0..n_lanes {
            // Decompose the lane id into the fixed indices of the other axes.
            let base = match axis {
                0 => {
                    let j = l / dims[2];
                    let k = l % dims[2];
                    j * dims[2] + k
                }
                1 => {
                    let i = l / dims[2];
                    let k = l % dims[2];
                    i * dims[1] * dims[2] + k
                }
                _ => {
                    let i = l / dims[1];
                    let j = l % dims[1];
                    i * dims[1] * dims[2] + j * dims[2]
                }
            };
            for (t, item) in lane.iter_mut().enumerate() {
                *item = data[base + t * stride];
            }
            plan.process(&mut lane);
            for (t, item) in lane.iter().enumerate() {
                data[base + t * stride] = *item;
            }
        }
    }
    if inverse {
        let norm = 1.0 / (dims[0] * dims[1] * dims[2]) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// Frequency point of the padded lattice, with its Nyquist flag.
#[derive(Debug, Clone, Copy)]
pub struct FreqPoint {
    pub xi: [f64; 3],
    pub xi_sq: f64,
    pub nyquist: bool,
}

/// Padded dimensions for a convolution with `pad` extra nodes per real axis.
fn padded_dims(lattice: &LatticeBox, pad: usize) -> [usize; 3] {
    let m = good_fft_size(lattice.n + pad);
    if lattice.d == 2 {
        [m, m, 1]
    } else {
        [m, m, m]
    }
}

/// Embed base-lattice values at the origin corner of the padded box.
fn pad_embed(values: &[Complex64], lattice: &LatticeBox, dims: &[usize; 3]) -> Vec<Complex64> {
    let base = lattice.dims();
    let mut work = vec![Complex64::default(); dims[0] * dims[1] * dims[2]];
    for i in 0..base[0] {
        for j in 0..base[1] {
            for k in 0..base[2] {
                let src = (i * base[1] + j) * base[2] + k;
                let dst = (i * dims[1] + j) * dims[2] + k;
                work[dst] = values[src];
            }
        }
    }
    work
}

/// Crop padded-box values back to the base lattice.
fn pad_crop(work: &[Complex64], lattice: &LatticeBox, dims: &[usize; 3]) -> Vec<Complex64> {
    let base = lattice.dims();
    let mut out = vec![Complex64::default(); lattice.len()];
    for i in 0..base[0] {
        for j in 0..base[1] {
            for k in 0..base[2] {
                let dst = (i * base[1] + j) * base[2] + k;
                let src = (i * dims[1] + j) * dims[2] + k;
                out[dst] = work[src];
            }
        }
    }
    out
}

/// Transform of the lattice-sampled scaled kernel, normalized to unit
/// discrete mass.
///
/// Sampling (rather than evaluating the analytic transform at the lattice
/// frequencies) keeps the convolution weights positive: under-resolved
/// kernels then act as local averages instead of ringing against sharp
/// masks, and constants are preserved exactly wherever the kernel support
/// lies in a constant region.
fn sampled_kernel_fft(
    lattice: &LatticeBox,
    dims: &[usize; 3],
    spec: &KernelSpec,
    eps: f64,
) -> Vec<Complex64> {
    let h = lattice.h;
    let signed = |k: usize, len: usize| -> f64 {
        if 2 * k <= len {
            k as f64
        } else {
            k as f64 - len as f64
        }
    };
    let mut kernel = vec![Complex64::default(); dims[0] * dims[1] * dims[2]];
    let mut mass = 0.0;
    for i in 0..dims[0] {
        let x0 = signed(i, dims[0]) * h;
        for j in 0..dims[1] {
            let x1 = signed(j, dims[1]) * h;
            for k in 0..dims[2] {
                let x2 = if dims[2] == 1 {
                    0.0
                } else {
                    signed(k, dims[2]) * h
                };
                let v = spec.g_eps(&[x0, x1, x2], eps);
                kernel[(i * dims[1] + j) * dims[2] + k] = Complex64::new(v, 0.0);
                mass += v;
            }
        }
    }
    let scale = 1.0 / mass;
    for v in kernel.iter_mut() {
        *v *= scale;
    }
    fftnd(&mut kernel, dims, false);
    kernel
}

/// Discrete convolution with the sampled normalized kernel on the padded box.
fn convolve_values(
    values: &[Complex64],
    lattice: &LatticeBox,
    spec: &KernelSpec,
    eps: f64,
    pad: usize,
) -> Vec<Complex64> {
    let dims = padded_dims(lattice, pad);
    let kernel_hat = sampled_kernel_fft(lattice, &dims, spec, eps);
    let mut work = pad_embed(values, lattice, &dims);
    fftnd(&mut work, &dims, false);
    for (w, k) in work.iter_mut().zip(&kernel_hat) {
        *w *= k;
    }
    fftnd(&mut work, &dims, true);
    pad_crop(&work, lattice, &dims)
}

/// Apply a Fourier multiplier on the unpadded (periodic) box transform.
///
/// Used for the operators defined directly by their symbols: composing them
/// stays exact (no information is lost to cropping) and constants are the
/// pure zero-frequency mode.
fn periodic_multiplier<S: Fn(&FreqPoint) -> Complex64>(
    values: &[Complex64],
    lattice: &LatticeBox,
    sym: S,
) -> Vec<Complex64> {
    let dims = lattice.dims();
    let mut work = values.to_vec();
    fftnd(&mut work, &dims, false);

    let freq_1d = |k: usize, len: usize| -> (f64, bool) {
        if len == 1 {
            return (0.0, false);
        }
        let nyq = len % 2 == 0 && k == len / 2;
        let signed = if 2 * k <= len {
            k as f64
        } else {
            k as f64 - len as f64
        };
        (signed / (len as f64 * lattice.h), nyq)
    };

    for i in 0..dims[0] {
        let (xi0, ny0) = freq_1d(i, dims[0]);
        for j in 0..dims[1] {
            let (xi1, ny1) = freq_1d(j, dims[1]);
            for k in 0..dims[2] {
                let (xi2, ny2) = freq_1d(k, dims[2]);
                let point = FreqPoint {
                    xi: [xi0, xi1, xi2],
                    xi_sq: xi0 * xi0 + xi1 * xi1 + xi2 * xi2,
                    nyquist: ny0 || ny1 || ny2,
                };
                work[(i * dims[1] + j) * dims[2] + k] *= sym(&point);
            }
        }
    }

    fftnd(&mut work, &dims, true);
    work
}

fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn real_parts(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|z| z.re).collect()
}

fn check_pad(spec: &KernelSpec, eps: f64, h: f64, pad: usize) -> Result<()> {
    let mass = spec.tail_mass_outside(eps, pad as f64 * h);
    if mass > 1e-14 {
        return Err(Error::InsufficientPadding { mass });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Convolution and multiplier operators
// ---------------------------------------------------------------------------

/// `u * g_eps` with explicit padding (in nodes per axis).
pub fn convolve_scalar_with_pad(
    field: &ScalarField,
    spec: &KernelSpec,
    eps: f64,
    pad: usize,
) -> Result<ScalarField> {
    check_pad(spec, eps, field.lattice.h, pad)?;
    let out = convolve_values(&to_complex(&field.values), &field.lattice, spec, eps, pad);
    Ok(ScalarField {
        lattice: field.lattice.clone(),
        values: real_parts(&out),
    })
}

/// Full-space convolution `u * g_eps` by zero-padded FFT.
pub fn convolve_scalar(field: &ScalarField, spec: &KernelSpec, eps: f64) -> Result<ScalarField> {
    let pad = spec.pad_nodes(eps, field.lattice.h);
    convolve_scalar_with_pad(field, spec, eps, pad)
}

/// Componentwise convolution of a Q-tensor field (one kernel transform is
/// shared across the six components).
pub fn convolve_q(field: &QTensorField, spec: &KernelSpec, eps: f64) -> Result<QTensorField> {
    let lattice = &field.lattice;
    let pad = spec.pad_nodes(eps, lattice.h);
    check_pad(spec, eps, lattice.h, pad)?;
    let dims = padded_dims(lattice, pad);
    let kernel_hat = sampled_kernel_fft(lattice, &dims, spec, eps);

    let components = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut convolved: Vec<Vec<f64>> = Vec::with_capacity(6);
    for &(r, c) in &components {
        let values: Vec<Complex64> = field
            .values
            .iter()
            .map(|q| Complex64::new(q.matrix()[(r, c)], 0.0))
            .collect();
        let mut work = pad_embed(&values, lattice, &dims);
        fftnd(&mut work, &dims, false);
        for (w, k) in work.iter_mut().zip(&kernel_hat) {
            *w *= k;
        }
        fftnd(&mut work, &dims, true);
        convolved.push(real_parts(&pad_crop(&work, lattice, &dims)));
    }

    let values = (0..lattice.len())
        .map(|i| {
            QTensor::from_matrix(&Matrix3::new(
                convolved[0][i],
                convolved[1][i],
                convolved[2][i],
                convolved[1][i],
                convolved[3][i],
                convolved[4][i],
                convolved[2][i],
                convolved[4][i],
                convolved[5][i],
            ))
        })
        .collect();
    Ok(QTensorField {
        lattice: lattice.clone(),
        values,
    })
}

/// Domain-restricted convolution `u *_Omega g_eps = (u 1_Omega) * g_eps`.
pub fn convolve_scalar_region(
    field: &ScalarField,
    spec: &KernelSpec,
    eps: f64,
    region: &[bool],
) -> Result<ScalarField> {
    let masked = ScalarField {
        lattice: field.lattice.clone(),
        values: field
            .values
            .iter()
            .zip(region)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect(),
    };
    convolve_scalar(&masked, spec, eps)
}

/// Domain-restricted convolution of a Q-tensor field.
pub fn convolve_q_region(
    field: &QTensorField,
    spec: &KernelSpec,
    eps: f64,
    region: &[bool],
) -> Result<QTensorField> {
    let masked = QTensorField {
        lattice: field.lattice.clone(),
        values: field
            .values
            .iter()
            .zip(region)
            .map(|(q, &m)| if m { *q } else { QTensor::zero() })
            .collect(),
    };
    convolve_q(&masked, spec, eps)
}

/// `A_eps u = (u - u * g_eps) / eps`, applied through its nonnegative symbol
/// `(1 - g_hat(sqrt(eps) xi)) / eps` on the periodic box transform.
pub fn a_eps(field: &ScalarField, spec: &KernelSpec, eps: f64) -> Result<ScalarField> {
    let out = periodic_multiplier(&to_complex(&field.values), &field.lattice, |p| {
        Complex64::new((1.0 - spec.g_hat(eps * p.xi_sq)) / eps, 0.0)
    });
    Ok(ScalarField {
        lattice: field.lattice.clone(),
        values: real_parts(&out),
    })
}

/// Complex field on the lattice (physical side of odd-multiplier outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub lattice: LatticeBox,
    pub values: Vec<Complex64>,
}

impl SpectralField {
    pub fn from_real(field: &ScalarField) -> Self {
        SpectralField {
            lattice: field.lattice.clone(),
            values: to_complex(&field.values),
        }
    }

    /// Lattice L2 norm (Hermitian).
    pub fn l2_norm(&self) -> f64 {
        (self.lattice.node_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sqrt()
    }

    pub fn max_real_part(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, z| a.max(z.re.abs()))
    }
}

fn t_symbol(spec: &KernelSpec, eps: f64, p: &FreqPoint, axis: usize) -> f64 {
    if p.xi_sq == 0.0 || p.nyquist {
        return 0.0;
    }
    p.xi[axis] * ((1.0 - spec.g_hat(eps * p.xi_sq)) / (eps * p.xi_sq)).sqrt()
}

/// Square-root multipliers applied to a complex field; one output per axis.
pub fn t_eps_complex(
    field: &SpectralField,
    spec: &KernelSpec,
    eps: f64,
) -> Result<Vec<SpectralField>> {
    let mut out = Vec::with_capacity(spec.d);
    for axis in 0..spec.d {
        let values = periodic_multiplier(&field.values, &field.lattice, |p| {
            Complex64::new(t_symbol(spec, eps, p, axis), 0.0)
        });
        out.push(SpectralField {
            lattice: field.lattice.clone(),
            values,
        });
    }
    Ok(out)
}

/// Square-root multipliers applied to a real field.
///
/// The symbol is real and odd, so outputs are purely imaginary on the
/// physical side for real input.
pub fn t_eps(field: &ScalarField, spec: &KernelSpec, eps: f64) -> Result<Vec<SpectralField>> {
    t_eps_complex(&SpectralField::from_real(field), spec, eps)
}

/// The nonnegative smoothing form `int u : (u - u * g_eps)` of a tensor
/// field, evaluated through the analytic symbol `1 - g_hat(sqrt(eps) xi)`
/// on the periodic box transform.
///
/// Equals `(1/2) intint |u(x) - u(y)|^2 g_eps` in the continuum; the symbol
/// route keeps the eps-uniform behavior of this diagnostic on fixed smooth
/// fields even when the kernel is narrower than the lattice spacing.
pub fn smoothing_form_q(field: &QTensorField, spec: &KernelSpec, eps: f64) -> f64 {
    let lattice = &field.lattice;
    let vol = lattice.node_volume();
    let components = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
    let mut acc = 0.0;
    for &(r, c) in &components {
        let values: Vec<Complex64> = field
            .values
            .iter()
            .map(|q| Complex64::new(q.matrix()[(r, c)], 0.0))
            .collect();
        let out = periodic_multiplier(&values, lattice, |p| {
            Complex64::new(1.0 - spec.g_hat(eps * p.xi_sq), 0.0)
        });
        // Off-diagonal components appear twice in the Frobenius pairing.
        let weight = if r == c { 1.0 } else { 2.0 };
        acc += weight
            * values
                .iter()
                .zip(&out)
                .map(|(u, v)| u.re * v.re)
                .sum::<f64>();
    }
    (vol * acc).max(0.0)
}

/// Spectral gradient (multiplier `2 pi i xi_k`) on the periodic box.
pub fn gradient_spectral(field: &ScalarField) -> Result<Vec<ScalarField>> {
    let mut out = Vec::with_capacity(field.lattice.d);
    let input = to_complex(&field.values);
    for axis in 0..field.lattice.d {
        let values = periodic_multiplier(&input, &field.lattice, |p| {
            if p.nyquist {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, 2.0 * PI * p.xi[axis])
            }
        });
        out.push(ScalarField {
            lattice: field.lattice.clone(),
            values: real_parts(&values),
        });
    }
    Ok(out)
}

/// Max finite-difference slope of the square-root profile `h` over all
/// sample pairs; finite and refinement-stable for the Gaussian family.
pub fn lipschitz_check(spec: &KernelSpec, xi_samples: &[[f64; 3]]) -> f64 {
    let mut max_slope = 0.0_f64;
    for (i, xa) in xi_samples.iter().enumerate() {
        let ha = spec.h_symbol(xa);
        for xb in xi_samples.iter().skip(i + 1) {
            let dist_sq: f64 = (0..3).map(|c| (xa[c] - xb[c]).powi(2)).sum();
            if dist_sq < 1e-24 {
                continue;
            }
            let hb = spec.h_symbol(xb);
            let diff_sq: f64 = (0..3).map(|c| (ha[c] - hb[c]).powi(2)).sum();
            max_slope = max_slope.max((diff_sq / dist_sq).sqrt());
        }
    }
    max_slope
}

/// Radial sample set for the Lipschitz check: near-zero shells plus uniform
/// coverage out to `xi_max` along random-ish directions.
pub fn default_xi_samples(d: usize, xi_max: f64, per_line: usize) -> Vec<[f64; 3]> {
    let dirs_2d = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.707, 0.707, 0.0], [0.6, -0.8, 0.0]];
    let dirs_3d = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.577, 0.577, 0.577],
        [0.6, -0.8, 0.0],
    ];
    let dirs: &[[f64; 3]] = if d == 2 { &dirs_2d } else { &dirs_3d };
    let mut samples = vec![[0.0; 3]];
    for dir in dirs {
        for k in 1..=per_line {
            let t = xi_max * k as f64 / per_line as f64;
            samples.push([dir[0] * t, dir[1] * t, dir[2] * t]);
        }
        // Near-zero shell where the profile is resolved by its linear slope.
        for k in 1..=6 {
            let t = 1e-4 * k as f64;
            samples.push([dir[0] * t, dir[1] * t, dir[2] * t]);
        }
    }
    samples
}

/// Commutator diagnostics for `[T_eps, phi] u`.
///
/// Returns `(norm_ratio, limit_error)` where `norm_ratio` is
/// `||[T_eps, phi] u||_2 / ||u||_2` and `limit_error` is
/// `||[T_eps, phi] u + i c* (grad phi) u||_2` with the spectral gradient.
pub fn commutator_diag(
    phi: &ScalarField,
    u: &ScalarField,
    spec: &KernelSpec,
    eps: f64,
) -> Result<(f64, f64)> {
    let lattice = &u.lattice;
    let phi_u = ScalarField {
        lattice: lattice.clone(),
        values: phi
            .values
            .iter()
            .zip(&u.values)
            .map(|(&p, &v)| p * v)
            .collect(),
    };
    let t_phi_u = t_eps(&phi_u, spec, eps)?;
    let t_u = t_eps(u, spec, eps)?;
    let grad_phi = gradient_spectral(phi)?;
    let c_star = spec.limit_const();

    let vol = lattice.node_volume();
    let mut comm_sq = 0.0;
    let mut limit_sq = 0.0;
    for axis in 0..spec.d {
        for i in 0..lattice.len() {
            let comm = t_phi_u[axis].values[i] - phi.values[i] * t_u[axis].values[i];
            comm_sq += comm.norm_sqr();
            let target = comm
                + Complex64::new(0.0, c_star) * (grad_phi[axis].values[i] * u.values[i]);
            limit_sq += target.norm_sqr();
        }
    }
    let u_norm = u.l2_norm();
    Ok(((vol * comm_sq).sqrt() / u_norm, (vol * limit_sq).sqrt()))
}

/// Boundedness diagnostics of the smoothing operator on a fixed field:
/// `( (1/eps) ||u * g_eps - u||_2^2 , ||grad (u * g_eps)||_2^2 )`.
pub fn smoothing_diagnostics(
    u: &ScalarField,
    spec: &KernelSpec,
    eps: f64,
) -> Result<(f64, f64)> {
    let smoothed = convolve_scalar(u, spec, eps)?;
    let diff = ScalarField {
        lattice: u.lattice.clone(),
        values: smoothed
            .values
            .iter()
            .zip(&u.values)
            .map(|(&s, &v)| s - v)
            .collect(),
    };
    let first = diff.l2_norm().powi(2) / eps;
    let grad = gradient_spectral(&smoothed)?;
    let second: f64 = grad.iter().map(|g| g.l2_norm().powi(2)).sum();
    Ok((first, second))
}
