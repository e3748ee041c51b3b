//! Layer-stripping reconstruction of the area profile from boundary data.
//!
//! The boundary measurement is a convolution: `−∂ₜΛ(f) = ĥ * f` with
//! `ĥ = δ₀ + h`, where the regular part `h` is causal and vanishes before the
//! first round trip to the inhomogeneity. Two routes produce `h`:
//!
//! - **Deconvolution** of a narrow unit-mass pulse response on the `cfl = 1`
//!   grid (exact discrete propagation on the unit plateau). The triangular
//!   Toeplitz system is solved by forward substitution, or by Tikhonov normal
//!   equations when a regularization weight is supplied.
//! - **Correlation** of a noise-driven measurement (see
//!   [`crate::correlation::estimate_impulse_response`]).
//!
//! Given `h`, the probe equation `(1 + H_a)f_a = 1` is a second-kind integral
//! equation on the window `[0, a]` whose kernel is the *symmetrized* form
//!
//! ```text
//! H_a f(t) = ∫₀ᵃ ½ [ h(|t − s|) + h(2a − t − s) ] f(s) ds
//! ```
//!
//! — equivalently the symmetric whole-window equation on `[0, 2a]` restricted
//! to inputs even about `t = a`. The literal causal half (`∫ h(|t−s|) f ds`
//! alone) does not hold the interior at unit pressure and misestimates the
//! area integral by several percent; the symmetrized operator is the one whose
//! solution actually injects a unit-pressure state to depth `a`, which the
//! interior check below verifies directly through the solver. The recovered
//! quantity is the cumulative area `Φ(a) = ∫₀ᵃ A dx = Σ f_a·dt` (rectangle
//! rule, matching the discrete kernel quadrature), and `A(a) = Φ'(a)` by
//! centered differences on the window grid.

use crate::error::{Result, WavekitError};
use crate::noise::{self, CutoffChi};
use crate::profile::AreaProfile;
use crate::solver::{self, simulate, SimGrid, Trace};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

// --- Impulse response -------------------------------------------------------

/// Provenance of an impulse-response estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HSource {
    /// Deterministic deconvolution of a narrow-pulse response.
    Deconvolved,
    /// Differentiated correlation-kernel estimate.
    CorrelationDerived,
}

/// The regular part `h` of the impulse response `ĥ = δ₀ + h`.
#[derive(Debug, Clone)]
pub struct ImpulseResponse {
    /// Sample spacing.
    pub dt: f64,
    /// `h(n·dt)`, zero over the early-time cut.
    pub h: Vec<f64>,
    /// How the estimate was produced.
    pub source: HSource,
    /// Measured coefficient of the delta (should be −Δ of the kernel = 1;
    /// stored as the kernel jump, ≈ −1). Only set by the correlation route.
    pub delta_jump: Option<f64>,
}

impl ImpulseResponse {
    /// Largest time covered by the samples.
    pub fn t_max(&self) -> f64 {
        (self.h.len().saturating_sub(1)) as f64 * self.dt
    }
}

/// Diagnostics of the deconvolution solve.
#[derive(Debug, Clone, Serialize)]
pub struct DeconvDiagnostics {
    /// Relative reconvolution residual `‖C·ĥ − m‖/‖m‖`.
    pub reconv_residual: f64,
    /// Regularization weight used.
    pub regularization: f64,
    /// Pulse width of the excitation.
    pub pulse_width: f64,
}

/// Deconvolve the impulse response from a narrow-pulse simulation.
///
/// Runs the solver at `cfl = 1` with a unit-mass cos² pulse of width
/// `pulse_mult·dx`, forms `m = −∂ₜ(trace)` by centered differences, and solves
/// the triangular Toeplitz system `C·ĥ = m` (forward substitution for
/// `reg = 0`, Tikhonov normal equations otherwise). Early times
/// `t <= pulse_width + 2·dt`, which carry the smeared delta, are zeroed.
pub fn deconvolve_impulse_response(
    profile: &AreaProfile,
    grid_l: f64,
    nx: usize,
    t_max: f64,
    pulse_mult: usize,
    reg: f64,
) -> Result<(ImpulseResponse, DeconvDiagnostics)> {
    let grid = SimGrid::new(grid_l, nx, 1.0, t_max)?;
    let dt = grid.dt;
    let pw = pulse_mult as f64 * grid.dx;
    let f = Trace::unit_bump(dt, grid.nt + 1, 0.0, pw);
    let d = solver::apply_nd(profile, &grid, &f)?;
    let nt = grid.nt;
    // m = −∂ₜ trace (centered; endpoints unused by the cut)
    let mut m = vec![0.0; nt + 1];
    for (n, v) in m.iter_mut().enumerate().take(nt).skip(1) {
        *v = -(d.samples[n + 1] - d.samples[n - 1]) / (2.0 * dt);
    }
    // discrete convolution column: c_k = f_k·dt
    let c: Vec<f64> = f.samples.iter().map(|&v| v * dt).collect();
    let i0 = f
        .first_nonzero()
        .ok_or_else(|| WavekitError::validation("pulse is identically zero"))?;
    let nh = nt + 1 - i0;

    let hhat: Vec<f64> = if reg == 0.0 {
        let mut hh = vec![0.0; nh];
        for n in 0..nh {
            let mut s = 0.0;
            for k in 1..=n {
                if i0 + k > nt || c[i0 + k] == 0.0 {
                    break;
                }
                s += c[i0 + k] * hh[n - k];
            }
            hh[n] = (m[n + i0] - s) / c[i0];
        }
        hh
    } else {
        // Tikhonov: (CᵀC + reg·I)ĥ = Cᵀm on the lower-triangular Toeplitz C
        let nsys = nh;
        let mut cm = DMatrix::zeros(nsys, nsys);
        for i in 0..nsys {
            for j in 0..=i {
                let k = i0 + (i - j);
                if k <= nt {
                    cm[(i, j)] = c[k];
                }
            }
        }
        let rhs = DVector::from_iterator(nsys, (0..nsys).map(|i| m[i + i0]));
        let normal = cm.transpose() * &cm + DMatrix::identity(nsys, nsys) * reg;
        let b = cm.transpose() * rhs;
        let sol = normal
            .lu()
            .solve(&b)
            .ok_or_else(|| WavekitError::numerical("singular Tikhonov system"))?;
        sol.iter().copied().collect()
    };

    // reconvolution residual on the uncut estimate
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..nh {
        let mut conv = 0.0;
        for k in 0..=n {
            if i0 + k > nt {
                break;
            }
            conv += c[i0 + k] * hhat[n - k];
        }
        let r = conv - m[n + i0];
        num += r * r;
        den += m[n + i0] * m[n + i0];
    }
    let reconv_residual = if den > 0.0 { (num / den).sqrt() } else { 0.0 };

    // zero the early-time cells that carry the smeared delta
    let cut = ((pw + 2.0 * dt) / dt).round() as usize;
    let mut h = hhat;
    for v in h.iter_mut().take((cut + 1).min(nh)) {
        *v = 0.0;
    }
    Ok((
        ImpulseResponse {
            dt,
            h,
            source: HSource::Deconvolved,
            delta_jump: None,
        },
        DeconvDiagnostics {
            reconv_residual,
            regularization: reg,
            pulse_width: pw,
        },
    ))
}

// --- Probe equation ---------------------------------------------------------

/// Solution of the probe equation on one window.
#[derive(Debug, Clone)]
pub struct ProbeSolution {
    /// Window end (probing depth).
    pub a: f64,
    /// Sample spacing.
    pub dt: f64,
    /// The probe input `f_a` at `t = 0, dt, …, a − dt`.
    pub f: Vec<f64>,
    /// 2-norm condition number of `I + K`.
    pub condition: f64,
}

/// Solve `(1 + H_a)f_a = 1` with the symmetrized kernel on `[0, a]`.
pub fn solve_probe_equation(ir: &ImpulseResponse, a: f64) -> Result<ProbeSolution> {
    let dt = ir.dt;
    let n = (a / dt).round() as usize;
    if n < 2 {
        return Err(WavekitError::validation("window too short for the probe"));
    }
    if 2.0 * a > ir.t_max() + dt {
        return Err(WavekitError::validation(format!(
            "probe depth {a} needs h up to t = {}, have {}",
            2.0 * a,
            ir.t_max()
        )));
    }
    let hv = |k: usize| ir.h.get(k).copied().unwrap_or(0.0);
    let mut mat = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let t = i.abs_diff(j);
            let r = 2 * n - i - j;
            mat[(i, j)] = 0.5 * (hv(t) + hv(r)) * dt + if i == j { 1.0 } else { 0.0 };
        }
    }
    let svd = mat.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-12 * smax {
        return Err(WavekitError::numerical(
            "probe system numerically singular",
        ));
    }
    let rhs = DVector::from_element(n, 1.0);
    let f = mat
        .lu()
        .solve(&rhs)
        .ok_or_else(|| WavekitError::numerical("probe solve failed"))?;
    Ok(ProbeSolution {
        a,
        dt,
        f: f.iter().copied().collect(),
        condition: smax / smin,
    })
}

/// Cumulative area `Φ(a) = Σ f_a·dt` (rectangle rule, matching the kernel
/// quadrature).
pub fn area_from_probe(sol: &ProbeSolution) -> f64 {
    sol.f.iter().sum::<f64>() * sol.dt
}

// --- Profile reconstruction -------------------------------------------------

/// One probing depth of a reconstruction sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ReconRow {
    /// Probing depth.
    pub a: f64,
    /// Recovered cumulative area `Φ(a)`.
    pub phi: f64,
    /// Recovered profile `A(a) = Φ'(a)`.
    pub a_rec: f64,
    /// Condition number of the probe system.
    pub condition: f64,
    /// Relative error vs. the truth (NaN when no truth supplied).
    pub error_rel: f64,
}

/// Reconstruction sweep summary.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub rows: Vec<ReconRow>,
    /// Max relative profile error over depths `a <= err_depth` (when truth
    /// given).
    pub max_rel_error: Option<f64>,
    pub err_depth: f64,
}

/// Sweep probing depths `da, 2·da, …, a_max`, recover `Φ` and `A`, and
/// compare against `truth` on `[0, err_depth]` when given.
pub fn reconstruct_profile(
    ir: &ImpulseResponse,
    a_max: f64,
    da: f64,
    err_depth: f64,
    truth: Option<&AreaProfile>,
) -> Result<ReconstructionReport> {
    if da <= 0.0 || a_max < 2.0 * da {
        return Err(WavekitError::validation("need da > 0 and a_max >= 2·da"));
    }
    let n_a = (a_max / da).round() as usize;
    let mut phis = Vec::with_capacity(n_a);
    let mut conds = Vec::with_capacity(n_a);
    for k in 1..=n_a {
        let sol = solve_probe_equation(ir, k as f64 * da)?;
        phis.push(area_from_probe(&sol));
        conds.push(sol.condition);
    }
    // A = Φ' by centered differences, one-sided at the ends
    let mut a_rec = vec![0.0; n_a];
    for k in 0..n_a {
        a_rec[k] = if k == 0 {
            (phis[1] - phis[0]) / da
        } else if k == n_a - 1 {
            (phis[n_a - 1] - phis[n_a - 2]) / da
        } else {
            (phis[k + 1] - phis[k - 1]) / (2.0 * da)
        };
    }
    let mut rows = Vec::with_capacity(n_a);
    let mut max_err: Option<f64> = None;
    for k in 0..n_a {
        let a = (k + 1) as f64 * da;
        let error_rel = match truth {
            Some(p) => {
                let (at, _) = p.eval(a);
                let e = (a_rec[k] - at).abs() / at;
                if a <= err_depth + 1e-9 {
                    max_err = Some(max_err.unwrap_or(0.0).max(e));
                }
                e
            }
            None => f64::NAN,
        };
        rows.push(ReconRow {
            a,
            phi: phis[k],
            a_rec: a_rec[k],
            condition: conds[k],
            error_rel,
        });
    }
    Ok(ReconstructionReport {
        rows,
        max_rel_error: max_err,
        err_depth,
    })
}

/// Forward interior check of a probe solution: drive the solver with `f_a`
/// continued symmetrically about `t = a` and measure the interior pressure at
/// the window midpoint time. Returns `max|p(x, a) − 1|` over `x ∈ [0, a − 2·dx]`.
pub fn verify_probe_interior(
    profile: &AreaProfile,
    grid_l: f64,
    nx: usize,
    sol: &ProbeSolution,
) -> Result<f64> {
    let n = sol.f.len();
    let t_total = 2.0 * sol.a + 2.0 * sol.dt;
    let grid = SimGrid::new(grid_l, nx, 1.0, t_total)?;
    if (grid.dt - sol.dt).abs() > 1e-12 * sol.dt {
        return Err(WavekitError::validation(
            "probe solution dt does not match the verification grid",
        ));
    }
    let mut fin = Trace::zeros(grid.dt, grid.nt + 1);
    for (i, &v) in sol.f.iter().enumerate() {
        fin.samples[i] = v;
        // symmetric continuation f(2a − t) beyond the window
        let mirror = 2 * n - 1 - i;
        if mirror < fin.samples.len() {
            fin.samples[mirror] = v;
        }
    }
    let r = simulate(profile, &grid, &fin, true)?;
    let p = r.pressure_row(n); // t = a
    let ia = (sol.a / grid.dx).round() as usize;
    let mut worst = 0.0f64;
    for &pi in p.iter().take(ia.saturating_sub(1)) {
        worst = worst.max((pi - 1.0).abs());
    }
    Ok(worst)
}

// --- Discriminability -------------------------------------------------------

/// L² distance of the Dirichlet traces of two profiles driven by the *same*
/// noise realization over horizon `t_horizon`.
pub fn discriminate(
    p1: &AreaProfile,
    p2: &AreaProfile,
    grid: &SimGrid,
    seed: u64,
    delta: f64,
) -> Result<f64> {
    let w = noise::sample_noise(seed, grid.nt + 1, grid.dt)?;
    let f = noise::apply_cutoff(&CutoffChi { delta }, &w);
    let d1 = solver::apply_nd(p1, grid, &f)?;
    let d2 = solver::apply_nd(p2, grid, &f)?;
    let dist2: f64 = d1
        .samples
        .iter()
        .zip(&d2.samples)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((dist2 * grid.dt).sqrt())
}

/// Deterministic self-convergence floor: L² difference of the smooth-input
/// Dirichlet trace between resolutions `nx` and `2·nx`, on `nx`'s time axis.
pub fn self_convergence_floor(
    profile: &AreaProfile,
    grid_l: f64,
    nx: usize,
    cfl: f64,
    t_max: f64,
) -> Result<f64> {
    let g1 = SimGrid::new(grid_l, nx, cfl, t_max)?;
    let g2 = SimGrid::new(grid_l, 2 * nx, cfl, t_max)?;
    let f1 = Trace::unit_bump(g1.dt, g1.nt + 1, 0.2, 0.8);
    let f2 = Trace::unit_bump(g2.dt, g2.nt + 1, 0.2, 0.8);
    let d1 = solver::apply_nd(profile, &g1, &f1)?;
    let d2 = solver::apply_nd(profile, &g2, &f2)?;
    let mut acc = 0.0;
    for n in 0..d1.samples.len() {
        if 2 * n < d2.samples.len() {
            let e = d1.samples[n] - d2.samples[2 * n];
            acc += e * e;
        }
    }
    Ok((acc * g1.dt).sqrt())
}

// --- Tests ------------------------------------------------------------------
