//! Time-averaged correlation estimation of the ND convolution kernel.
//!
//! A single-point measurement `d = Λ(χω)` driven by white noise `ω` determines
//! the convolution kernel `G` of the ND map through the lag correlation
//!
//! ```text
//! ρ_T(τ) = (1/T) ∫₀ᵀ d(t + τ)·ω(t) dt   →   G(τ)   (T → ∞)
//! ```
//!
//! discretized with whole-sample lags. Two practical amendments, both forced
//! by the step-like shape of `G` (for `A ≡ 1`, `G = −1` for `τ > 0` and `0`
//! for `τ < 0`):
//!
//! - **Anchoring.** The measured trace contains a running integral of the
//!   noise (a Brownian component), so the raw `ρ_T` carries a lag-common
//!   random offset whose variance does *not* vanish with `T`. Differencing in
//!   lag annihilates it; reintegrating from the most negative lags is the same
//!   as subtracting their mean, which is what [`cross_correlate`] does. The
//!   τ < 0 tail of the anchored estimate tends to 0, as the kernel must.
//! - **Jump-cell exclusion.** The unit delta of `ĥ = δ₀ + h` lives in the jump
//!   of `G` at `τ = 0`; its allocation over the one or two cells around zero
//!   is scheme-dependent, so error metrics exclude `|τ| <= 2·dt`.
//! - **Nyquist filtering.** The leapfrog grid carries a sawtooth mode: the
//!   `cfl = 1` discrete kernel alternates `(−2, 0)` per lag, and noise input
//!   excites a lag-common *alternating* random component whose variance, like
//!   the Brownian offset, does not vanish with `T`. A three-point binomial
//!   filter `(1/4, 1/2, 1/4)` nulls the Nyquist frequency exactly, collapsing
//!   the `(−2, 0)` kernel onto the correct `−1` plateau and removing the
//!   alternating common mode before anchoring.
//!
//! The impulse-response path low-passes the kernel estimate with a narrow
//! cos² window before differencing: at `cfl < 1` single-sample excitations
//! ring at grid-dispersion frequencies, and the smoothing (comparable to the
//! pulse width of the deconvolution route) suppresses the ringing and the
//! estimator noise at once.

use crate::error::{Result, WavekitError};
use crate::noise::{self, CutoffChi, NoiseRealization};
use crate::profile::AreaProfile;
use crate::reconstruction::{HSource, ImpulseResponse};
use crate::solver::{self, SimGrid, Trace};
use serde::Serialize;

/// Number of most-negative lags averaged into the anchor offset.
const ANCHOR_LAGS: usize = 8;
/// Blocks of the non-overlapping bootstrap variance estimate.
const BOOTSTRAP_BLOCKS: usize = 8;
/// Cells around τ = 0 excluded from kernel error metrics.
pub const JUMP_EXCLUSION_CELLS: i64 = 2;

// --- Types ------------------------------------------------------------------

/// A lag-domain estimate of the ND kernel.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    /// Lag spacing (= solver dt).
    pub dt: f64,
    /// First lag index (negative; lag time = index·dt).
    pub lag_min: i64,
    /// Anchored kernel values, one per lag.
    pub values: Vec<f64>,
    /// Per-lag block-bootstrap variances of the mean.
    pub variance: Vec<f64>,
    /// Averaging horizon `T`.
    pub t_horizon: f64,
    /// Number of averaged products per lag.
    pub n_samples: usize,
}

impl CorrelationEstimate {
    /// Lag time of entry `i`.
    pub fn lag_time(&self, i: usize) -> f64 {
        (self.lag_min + i as i64) as f64 * self.dt
    }

    /// Index of the zero lag.
    pub fn lag0_index(&self) -> usize {
        (-self.lag_min) as usize
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    /// Averaging horizon.
    pub t_horizon: f64,
    /// Mean L² kernel error over the seed ensemble.
    pub mean_error: f64,
    /// Standard deviation of the per-seed errors.
    pub std_error: f64,
}

// --- Kernel estimation ------------------------------------------------------

/// Correlate the measured trace against its driving noise over horizon
/// `t_horizon`, for lags in `[−lag_neg, lag_pos]`.
///
/// `burn_in` drops the initial transient (at least the cut-off ramp `delta`);
/// the averaging window also starts late enough that every requested negative
/// lag stays inside the data. The returned values are anchored: the mean of
/// the most negative lags is subtracted so the τ < 0 tail is zero in the
/// limit.
pub fn cross_correlate(
    d: &Trace,
    w: &NoiseRealization,
    lag_neg: f64,
    lag_pos: f64,
    t_horizon: f64,
    burn_in: f64,
) -> Result<CorrelationEstimate> {
    if (d.dt - w.dt).abs() > 1e-12 * w.dt {
        return Err(WavekitError::validation("trace and noise dt mismatch"));
    }
    let dt = w.dt;
    let kneg = (lag_neg / dt).round() as usize;
    let kpos = (lag_pos / dt).round() as usize;
    let n_avg = (t_horizon / dt).round() as usize;
    let start = ((burn_in / dt).ceil() as usize).max(kneg);
    if n_avg == 0 {
        return Err(WavekitError::validation("t_horizon shorter than one step"));
    }
    let need = start + n_avg + kpos;
    if d.samples.len() < need || w.samples.len() < start + n_avg {
        return Err(WavekitError::validation(format!(
            "trace too short: need {need} samples, have {}",
            d.samples.len()
        )));
    }

    let nlags = kneg + kpos + 1;
    let mut raw = vec![0.0; nlags];
    for (ki, r) in raw.iter_mut().enumerate() {
        let k = ki as i64 - kneg as i64;
        let mut acc = 0.0;
        for n in start..start + n_avg {
            acc += d.samples[(n as i64 + k) as usize] * w.samples[n];
        }
        *r = acc / n_avg as f64;
    }
    let mut raw = binomial_filter(&raw);

    // block bootstrap: variance of the mean from non-overlapping sub-windows,
    // each processed exactly like the full-window estimate
    let block = n_avg / BOOTSTRAP_BLOCKS;
    let mut variance = vec![0.0; nlags];
    if block > 0 {
        let mut block_rhos = Vec::with_capacity(BOOTSTRAP_BLOCKS);
        for b in 0..BOOTSTRAP_BLOCKS {
            let s0 = start + b * block;
            let mut rho_b = vec![0.0; nlags];
            for (ki, r) in rho_b.iter_mut().enumerate() {
                let k = ki as i64 - kneg as i64;
                let mut acc = 0.0;
                for n in s0..s0 + block {
                    acc += d.samples[(n as i64 + k) as usize] * w.samples[n];
                }
                *r = acc / block as f64;
            }
            block_rhos.push(binomial_filter(&rho_b));
        }
        for (ki, v) in variance.iter_mut().enumerate() {
            let mean = block_rhos.iter().map(|b| b[ki]).sum::<f64>() / BOOTSTRAP_BLOCKS as f64;
            let var = block_rhos
                .iter()
                .map(|b| (b[ki] - mean) * (b[ki] - mean))
                .sum::<f64>()
                / (BOOTSTRAP_BLOCKS - 1) as f64;
            *v = var / BOOTSTRAP_BLOCKS as f64;
        }
    }

    let anchor =
        raw.iter().take(ANCHOR_LAGS.min(nlags)).sum::<f64>() / ANCHOR_LAGS.min(nlags) as f64;
    for v in &mut raw {
        *v -= anchor;
    }

    Ok(CorrelationEstimate {
        dt,
        lag_min: -(kneg as i64),
        values: raw,
        variance,
        t_horizon,
        n_samples: n_avg,
    })
}

/// Three-point binomial filter `(1/4, 1/2, 1/4)`; exact null at the Nyquist
/// frequency. Ends are mirrored (`v[-1] := v[1]`), which keeps the Nyquist
/// null exact there too — clamping would leak the alternating mode into the
/// boundary lags and, through the anchor, bias every lag.
fn binomial_filter(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let lo = v[if i == 0 { 1.min(n - 1) } else { i - 1 }];
            let hi = v[if i + 1 >= n { n.saturating_sub(2) } else { i + 1 }];
            0.25 * lo + 0.5 * v[i] + 0.25 * hi
        })
        .collect()
}

/// L² kernel error against an oracle `G(τ)`, excluding the jump cells.
pub fn kernel_l2_error(est: &CorrelationEstimate, oracle: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for (i, &v) in est.values.iter().enumerate() {
        let k = est.lag_min + i as i64;
        if k.abs() <= JUMP_EXCLUSION_CELLS {
            continue;
        }
        let tau = k as f64 * est.dt;
        let e = v - oracle(tau);
        acc += e * e;
        count += 1;
    }
    (acc / count as f64).sqrt()
}

/// L² kernel error against per-lag oracle values on the same lag layout,
/// excluding the jump cells.
pub fn kernel_l2_error_vs(est: &CorrelationEstimate, oracle: &[f64]) -> Result<f64> {
    if oracle.len() != est.values.len() {
        return Err(WavekitError::validation("oracle lag layout mismatch"));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for (i, (&v, &o)) in est.values.iter().zip(oracle).enumerate() {
        let k = est.lag_min + i as i64;
        if k.abs() <= JUMP_EXCLUSION_CELLS {
            continue;
        }
        acc += (v - o) * (v - o);
        count += 1;
    }
    Ok((acc / count as f64).sqrt())
}

/// The deterministic discrete ND kernel on the lag grid, measured by a unit
/// impulse and Nyquist-filtered like the noise estimate. Lag layout matches
/// [`cross_correlate`] with the same `lag_neg`/`lag_pos`.
pub fn pulse_kernel_oracle(
    profile: &AreaProfile,
    grid_l: f64,
    nx: usize,
    cfl: f64,
    lag_neg: f64,
    lag_pos: f64,
) -> Result<Vec<f64>> {
    let dx = grid_l / nx as f64;
    let dt = cfl * dx;
    let kneg = (lag_neg / dt).round() as usize;
    let kpos = (lag_pos / dt).round() as usize;
    let s0 = kneg + 4;
    let grid = SimGrid::new(grid_l, nx, cfl, (s0 + kpos + 2) as f64 * dt)?;
    let mut f = Trace::zeros(grid.dt, grid.nt + 1);
    f.samples[s0] = 1.0 / grid.dt;
    let d = solver::apply_nd(profile, &grid, &f)?;
    let vals: Vec<f64> = (-(kneg as i64)..=kpos as i64)
        .map(|k| d.samples[(s0 as i64 + k) as usize])
        .collect();
    Ok(binomial_filter(&vals))
}

// --- Test-function pairing (Eq.-(4.10) form) --------------------------------

/// The correlation pairing `⟨C_T(φ), ψ⟩` of the paper's correlation operator:
/// shift-averaged product of the trace paired with `φ` and the noise paired
/// with `ψ`.
///
/// The noise factor is masked to the averaging window `[0, T)` and the shift
/// sum runs over every shift with a nonzero masked product; this makes the
/// estimator *exactly* a lag-domain quadrature of the raw cross-correlation
/// (see [`pair_ct_kernel_route`]) while differing from the textbook form only
/// by an O(support/T) edge effect.
pub fn pair_ct(
    d: &Trace,
    w: &NoiseRealization,
    phi: &Trace,
    psi: &Trace,
    t_horizon: f64,
) -> Result<f64> {
    let dt = w.dt;
    let n_avg = (t_horizon / dt).round() as usize;
    let nphi = phi.samples.len();
    let npsi = psi.samples.len();
    if d.samples.len() < n_avg + nphi {
        return Err(WavekitError::validation("trace too short for pair_ct"));
    }
    if w.samples.len() < n_avg {
        return Err(WavekitError::validation("noise too short for pair_ct"));
    }
    let mut total = 0.0;
    // beta_s is nonzero only for s in (−npsi, n_avg)
    for s in -(npsi as i64 - 1)..n_avg as i64 {
        let mut alpha = 0.0;
        for (i, &p) in phi.samples.iter().enumerate() {
            let idx = s + i as i64;
            if idx >= 0 {
                if let Some(&dv) = d.samples.get(idx as usize) {
                    alpha += dv * p;
                }
            }
        }
        let mut beta = 0.0;
        for (j, &q) in psi.samples.iter().enumerate() {
            let idx = s + j as i64;
            if idx >= 0 && (idx as usize) < n_avg {
                beta += w.samples[idx as usize] * q;
            }
        }
        total += alpha * dt * beta * dt;
    }
    Ok(total / n_avg as f64)
}

/// The same number computed through the lag domain: raw masked correlation
/// `ρ̄(k)` contracted with the cross-correlation of the test functions.
/// Agrees with [`pair_ct`] to ~1e−10 (exact Toeplitz rearrangement).
pub fn pair_ct_kernel_route(
    d: &Trace,
    w: &NoiseRealization,
    phi: &Trace,
    psi: &Trace,
    t_horizon: f64,
) -> Result<f64> {
    let dt = w.dt;
    let n_avg = (t_horizon / dt).round() as usize;
    let nphi = phi.samples.len() as i64;
    let npsi = psi.samples.len() as i64;
    if d.samples.len() < n_avg + nphi as usize || w.samples.len() < n_avg {
        return Err(WavekitError::validation("data too short for pair_ct"));
    }
    let mut total = 0.0;
    for k in (1 - npsi)..nphi {
        // rho_bar(k) over the masked noise window
        let mut rho = 0.0;
        for u in 0..n_avg as i64 {
            let idx = u + k;
            if idx >= 0 {
                if let Some(&dv) = d.samples.get(idx as usize) {
                    rho += dv * w.samples[u as usize];
                }
            }
        }
        rho /= n_avg as f64;
        // cross-correlation of the test functions at lag k
        let mut tcc = 0.0;
        for j in 0..npsi {
            let i = j + k;
            if i >= 0 && i < nphi {
                tcc += phi.samples[i as usize] * psi.samples[j as usize];
            }
        }
        total += rho * tcc * dt * dt;
    }
    Ok(total)
}

// --- Impulse response from the kernel estimate ------------------------------

/// Smooth a sequence with a unit-mass cos² window of half-width `width`.
pub fn smooth_cos2(values: &[f64], dt: f64, width: f64) -> Vec<f64> {
    let m = (width / dt).round() as i64;
    if m < 1 {
        return values.to_vec();
    }
    let taps: Vec<f64> = (-m..=m)
        .map(|j| {
            let c = (std::f64::consts::PI * j as f64 / (2.0 * m as f64 + 2.0)).cos();
            c * c
        })
        .collect();
    let norm: f64 = taps.iter().sum();
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (ti, &t) in taps.iter().enumerate() {
                let idx = i + ti as i64 - m;
                let v = if idx < 0 {
                    values[0]
                } else if idx >= n {
                    values[(n - 1) as usize]
                } else {
                    values[idx as usize]
                };
                acc += t * v;
            }
            acc / norm
        })
        .collect()
}

/// Extract the regular impulse-response part `h = −G'` from a kernel estimate.
///
/// The estimate is low-passed with a cos² window of half-width `smooth_width`,
/// differentiated by centered differences for `t > 2·smooth_width` (the cells
/// carrying the smeared delta are zeroed), and the delta coefficient is
/// validated: the smoothed jump across `τ = 0` must be within `jump_tol` of
/// −1, else the estimate is flagged as corrupted/under-averaged.
pub fn estimate_impulse_response(
    g: &CorrelationEstimate,
    smooth_width: f64,
    jump_tol: f64,
) -> Result<ImpulseResponse> {
    let smoothed = smooth_cos2(&g.values, g.dt, smooth_width);
    let i0 = g.lag0_index();
    let jcut = ((2.0 * smooth_width) / g.dt).round() as usize;
    if i0 < jcut {
        return Err(WavekitError::validation(
            "kernel estimate lacks the negative-lag margin for the jump check",
        ));
    }
    let kpos = smoothed.len() - 1 - i0;
    if kpos <= jcut + 1 {
        return Err(WavekitError::validation("lag range too short for h"));
    }
    let jump = smoothed[i0 + jcut] - smoothed[i0 - jcut];
    if (jump + 1.0).abs() > jump_tol {
        return Err(WavekitError::numerical(format!(
            "delta-coefficient check failed: jump {jump:.4} not within {jump_tol} of -1 \
             (corrupted or under-averaged estimate)"
        )));
    }
    let mut h = vec![0.0; kpos + 1];
    for (j, hv) in h.iter_mut().enumerate().take(kpos).skip(jcut) {
        *hv = -(smoothed[i0 + j + 1] - smoothed[i0 + j - 1]) / (2.0 * g.dt);
    }
    Ok(ImpulseResponse {
        dt: g.dt,
        h,
        source: HSource::CorrelationDerived,
        delta_jump: Some(jump),
    })
}

// --- Convergence study ------------------------------------------------------

/// Per-horizon kernel error of the estimator on the constant profile, where
/// the deterministic oracle is exact (`G = −1` for τ > 0, `0` for τ < 0).
///
/// Runs at `cfl = 1` (exact discrete propagation for `A ≡ 1`) so the measured
/// error is purely statistical. Returns one row per horizon, aggregated over
/// `n_seeds` ensemble members derived from `base_seed`.
pub fn convergence_study(
    grid_l: f64,
    grid_nx: usize,
    t_list: &[f64],
    n_seeds: u64,
    base_seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let profile = AreaProfile::constant();
    let lag_neg = 1.0;
    let lag_pos = 2.0;
    let mut rows = Vec::new();
    for &t_horizon in t_list {
        let mut errs = Vec::new();
        for member in 0..n_seeds {
            let seed = noise::ensemble_seed(base_seed, member);
            let est = noise_kernel_estimate(
                &profile, grid_l, grid_nx, 1.0, seed, t_horizon, lag_neg, lag_pos,
            )?;
            errs.push(kernel_l2_error(&est, |tau| if tau > 0.0 { -1.0 } else { 0.0 }));
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
            / (errs.len().max(2) - 1) as f64;
        rows.push(ConvergenceRow {
            t_horizon,
            mean_error: mean,
            std_error: var.sqrt(),
        });
    }
    Ok(rows)
}

/// One noise-driven solve + kernel estimate on a given profile.
#[allow(clippy::too_many_arguments)]
pub fn noise_kernel_estimate(
    profile: &AreaProfile,
    grid_l: f64,
    grid_nx: usize,
    cfl: f64,
    seed: u64,
    t_horizon: f64,
    lag_neg: f64,
    lag_pos: f64,
) -> Result<CorrelationEstimate> {
    let dx = grid_l / grid_nx as f64;
    let dt = cfl * dx;
    let delta = 10.0 * dt;
    let burn_in = lag_neg + 40.0 * dt + delta;
    let t_total = t_horizon + burn_in + lag_pos + 2.0 * dt;
    let grid = SimGrid::new(grid_l, grid_nx, cfl, t_total)?;
    let w = noise::sample_noise(seed, grid.nt + 1, grid.dt)?;
    if w.samples.iter().all(|&v| v == 0.0) {
        return Err(WavekitError::numerical("degenerate zero noise input"));
    }
    let f = noise::apply_cutoff(&CutoffChi { delta }, &w);
    let d = solver::apply_nd(profile, &grid, &f)?;
    cross_correlate(&d, &w, lag_neg, lag_pos, t_horizon, burn_in)
}

// --- Tests ------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ensemble_seed;

    fn noise_run(
        profile: &AreaProfile,
        nx: usize,
        cfl: f64,
        seed: u64,
        t_total: f64,
    ) -> (Trace, NoiseRealization, SimGrid) {
        let grid = SimGrid::new(3.0, nx, cfl, t_total).unwrap();
        let w = noise::sample_noise(seed, grid.nt + 1, grid.dt).unwrap();
        let f = noise::apply_cutoff(&CutoffChi { delta: 10.0 * grid.dt }, &w);
        let d = solver::apply_nd(profile, &grid, &f).unwrap();
        (d, w, grid)
    }

    #[test]
    fn zero_trace_gives_zero_estimate() {
        let w = noise::sample_noise(1, 5000, 0.02).unwrap();
        let d = Trace::zeros(0.02, 5000);
        let est = cross_correlate(&d, &w, 0.5, 1.0, 60.0, 0.5).unwrap();
        assert!(est.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_kernel_within_variance_band() {
        // A≡1: estimate ≈ −1 at τ = +0.5, ≈ 0 at τ = −0.5, within 3σ
        let est = noise_kernel_estimate(
            &AreaProfile::constant(),
            3.0,
            150,
            1.0,
            ensemble_seed(11, 0),
            500.0,
            1.0,
            1.0,
        )
        .unwrap();
        let i0 = est.lag0_index();
        let k = (0.5 / est.dt).round() as usize;
        let sd_pos = est.variance[i0 + k].sqrt().max(1e-6);
        let sd_neg = est.variance[i0 - k].sqrt().max(1e-6);
        // anchoring itself carries the common offset's uncertainty, so allow
        // the band of the larger of the two scales
        let band = 3.0 * sd_pos.max(sd_neg) + 0.05;
        assert!(
            (est.values[i0 + k] + 1.0).abs() <= band,
            "G(+0.5) = {} band {band}",
            est.values[i0 + k]
        );
        assert!(
            est.values[i0 - k].abs() <= band,
            "G(−0.5) = {} band {band}",
            est.values[i0 - k]
        );
    }

    #[test]
    fn pair_ct_two_routes_agree() {
        let p = AreaProfile::smoothstep(2.0, 0.5, 1.5).unwrap();
        let (d, w, grid) = noise_run(&p, 100, 0.9, 77, 80.0);
        let phi = Trace::unit_bump(grid.dt, 120, 0.3, 0.8);
        let psi = Trace::unit_bump(grid.dt, 100, 0.2, 0.9);
        let a = pair_ct(&d, &w, &phi, &psi, 60.0).unwrap();
        let b = pair_ct_kernel_route(&d, &w, &phi, &psi, 60.0).unwrap();
        assert!(
            (a - b).abs() <= 1e-10 * a.abs().max(1.0),
            "routes differ: {a} vs {b}"
        );
    }

    #[test]
    fn pair_ct_is_bilinear() {
        let p = AreaProfile::constant();
        let (d, w, grid) = noise_run(&p, 100, 0.9, 5, 60.0);
        let phi1 = Trace::unit_bump(grid.dt, 120, 0.3, 0.8);
        let phi2 = Trace::unit_bump(grid.dt, 120, 0.8, 0.6);
        let psi = Trace::unit_bump(grid.dt, 100, 0.2, 0.9);
        let mut combo = phi1.clone();
        for (c, (&a, &b)) in combo
            .samples
            .iter_mut()
            .zip(phi1.samples.iter().zip(&phi2.samples))
        {
            *c = 2.0 * a - 3.0 * b;
        }
        let lhs = pair_ct(&d, &w, &combo, &psi, 40.0).unwrap();
        let rhs = 2.0 * pair_ct(&d, &w, &phi1, &psi, 40.0).unwrap()
            - 3.0 * pair_ct(&d, &w, &phi2, &psi, 40.0).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn pair_ct_zero_phi() {
        let p = AreaProfile::constant();
        let (d, w, grid) = noise_run(&p, 100, 0.9, 6, 40.0);
        let phi = Trace::zeros(grid.dt, 50);
        let psi = Trace::unit_bump(grid.dt, 100, 0.2, 0.9);
        assert_eq!(pair_ct(&d, &w, &phi, &psi, 30.0).unwrap(), 0.0);
    }

    #[test]
    fn pair_ct_mean_matches_reversed_pairing() {
        // ensemble mean of pair_ct ≈ <Λ̃(φ), ψ> for mean-zero φ on A≡1
        let grid = SimGrid::new(3.0, 100, 0.9, 40.0).unwrap();
        let dt = grid.dt;
        let b1 = Trace::unit_bump(dt, 200, 0.4, 0.6);
        let b2 = Trace::unit_bump(dt, 200, 1.8, 0.6);
        let mut phi = b1.clone();
        for (v, (&x, &y)) in phi.samples.iter_mut().zip(b1.samples.iter().zip(&b2.samples)) {
            *v = x - y; // mean-zero difference of bumps
        }
        let psi = Trace::unit_bump(dt, 150, 0.5, 0.8);
        // deterministic target from the exact A≡1 oracle:
        // Λ̃(φ)(t) = −∫_t^∞ φ = −(total − cumint) with total = 0 here
        let o = solver::exact_constant_oracle(&phi);
        // o(t) = −∫₀ᵗ φ; Λ̃(φ)(t) = −∫ₜ^∞ φ = o(∞) − o(t) + ... careful:
        // −∫ₜ^∞ φ = −(∫₀^∞ − ∫₀ᵗ) = o_total + ∫₀ᵗ φ where o_total = −∫₀^∞ φ = 0
        let lambdatilde: Vec<f64> = o.samples.iter().map(|&v| -v).collect();
        let target = noise::pair(&lambdatilde[..psi.samples.len()], &psi.samples, dt);
        let p = AreaProfile::constant();
        let mut vals = Vec::new();
        for s in 0..100u64 {
            let w = noise::sample_noise(ensemble_seed(31, s), grid.nt + 1, dt).unwrap();
            let f = noise::apply_cutoff(&CutoffChi { delta: 10.0 * dt }, &w);
            let d = solver::apply_nd(&p, &grid, &f).unwrap();
            vals.push(pair_ct(&d, &w, &phi, &psi, 30.0).unwrap());
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        assert!(
            (mean - target).abs() <= 3.0 * se + 0.02,
            "mean {mean} vs target {target} (se {se})"
        );
    }

    #[test]
    fn estimate_ir_trivial_for_constant() {
        // the per-seed statistical floor of h is O(0.5) rms at this horizon
        // (differencing amplifies the lag noise by 1/(2·dt)); the trivial
        // profile is recognized by the delta jump and the absence of any
        // coherent h beyond that floor
        let est = noise_kernel_estimate(
            &AreaProfile::constant(),
            3.0,
            150,
            1.0,
            ensemble_seed(17, 3),
            2000.0,
            1.0,
            2.5,
        )
        .unwrap();
        let ir = estimate_impulse_response(&est, 0.15, 0.25).unwrap();
        let active: Vec<f64> = ir.h.iter().filter(|v| **v != 0.0).copied().collect();
        let rms = (active.iter().map(|v| v * v).sum::<f64>() / active.len() as f64).sqrt();
        assert!(rms < 1.0, "A≡1 h rms {rms} above the statistical floor");
        let mean = active.iter().sum::<f64>() / active.len() as f64;
        assert!(mean.abs() < 0.2, "A≡1 h mean {mean} should be ~0");
        let j = ir.delta_jump.unwrap();
        assert!((-1.05..=-0.95).contains(&j), "jump {j}");
    }

    #[test]
    fn degenerate_zero_noise_flagged() {
        let err = {
            let grid = SimGrid::new(3.0, 50, 1.0, 10.0).unwrap();
            let w = NoiseRealization {
                seed: 0,
                dt: grid.dt,
                samples: vec![0.0; grid.nt + 1],
            };
            if w.samples.iter().all(|&v| v == 0.0) {
                Err(WavekitError::numerical("degenerate zero noise input"))
            } else {
                Ok(())
            }
        };
        assert!(err.is_err());
    }
}
