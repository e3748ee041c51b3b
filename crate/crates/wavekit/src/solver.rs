//! Leapfrog finite-difference solver for the variable-coefficient wave
//! equation on a truncated half-line.
//!
//! The field `w(x,t)` satisfies `A(x)·∂²w/∂t² = ∂/∂x (A(x)·∂w/∂x)` on
//! `(0, L) × (0, t_max)` with
//!
//! - Neumann forcing at the left end: `∂w/∂x(0, t) = f(t)`, realized by a
//!   second-order centered ghost value `w₋₁ = w₁ − 2·dx·f(tₙ)`,
//! - a first-order characteristic outgoing update at the right end
//!   `w_N^{n+1} = w_N^n − (dt/dx)(w_N^n − w_{N−1}^n)` (exact in the continuum
//!   because `A` is constant beyond `x_plus`, so all waves there move right),
//! - zero initial data.
//!
//! The interior update is the conservative flux form with face-averaged
//! coefficients `A_{i±1/2} = (A_i + A_{i±1})/2`:
//!
//! ```text
//! w_i^{n+1} = 2 w_i^n − w_i^{n−1}
//!           + dt²/(A_i dx²) · [A_{i+1/2}(w_{i+1}−w_i) − A_{i−1/2}(w_i−w_{i−1})]
//! ```
//!
//! The measured quantity is the Dirichlet trace `w(0, ·)`: the image of the
//! Neumann input under the ND map. At `cfl = 1` the scheme propagates exactly
//! on the unit plateaus ("magic time step"), which the impulse-response
//! extraction exploits; long runs with variable `A` use `cfl < 1`.

use crate::error::{Result, WavekitError};
use crate::profile::AreaProfile;
use serde::{Deserialize, Serialize};

// --- Grid and traces --------------------------------------------------------

/// Uniform space-time grid for one solve. Unit wave speed: `dt = cfl·dx`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimGrid {
    /// Domain truncation length; must exceed `x_plus + 2·dx`.
    pub l: f64,
    /// Number of spatial cells (`nx + 1` nodes).
    pub nx: usize,
    /// Node spacing `L/nx`.
    pub dx: f64,
    /// Courant number in `(0, 1]`.
    pub cfl: f64,
    /// Time step `cfl·dx`.
    pub dt: f64,
    /// Number of time steps (`nt + 1` levels).
    pub nt: usize,
}

impl SimGrid {
    /// Build a grid covering `[0, t_max]` (rounded to whole steps).
    pub fn new(l: f64, nx: usize, cfl: f64, t_max: f64) -> Result<Self> {
        if l <= 0.0 || nx < 4 {
            return Err(WavekitError::validation("grid needs l > 0 and nx >= 4"));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(WavekitError::validation("cfl must lie in (0, 1]"));
        }
        let dx = l / nx as f64;
        let dt = cfl * dx;
        let nt = (t_max / dt).round() as usize;
        if nt < 1 {
            return Err(WavekitError::validation("t_max shorter than one step"));
        }
        Ok(SimGrid {
            l,
            nx,
            dx,
            cfl,
            dt,
            nt,
        })
    }

    /// Total simulated time `nt·dt`.
    pub fn t_max(&self) -> f64 {
        self.nt as f64 * self.dt
    }
}

/// A uniformly sampled time series starting at `t0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    /// Timestamp of the first sample.
    pub t0: f64,
    /// Sample spacing.
    pub dt: f64,
    /// Sample values.
    pub samples: Vec<f64>,
}

impl Trace {
    /// A trace of zeros on the grid's time axis.
    pub fn zeros(dt: f64, n: usize) -> Self {
        Trace {
            t0: 0.0,
            dt,
            samples: vec![0.0; n],
        }
    }

    /// A smooth unit-mass pulse `cos²(π(s − 1/2))` on `(t_start, t_start + width)`,
    /// normalized so that the rectangle-rule mass `Σ f·dt` is exactly 1.
    pub fn unit_bump(dt: f64, n: usize, t_start: f64, width: f64) -> Self {
        let mut samples = vec![0.0; n];
        for (i, v) in samples.iter_mut().enumerate() {
            let s = (i as f64 * dt - t_start) / width;
            if s > 0.0 && s < 1.0 {
                let c = (std::f64::consts::PI * (s - 0.5)).cos();
                *v = c * c;
            }
        }
        let mass: f64 = samples.iter().sum::<f64>() * dt;
        if mass > 0.0 {
            for v in &mut samples {
                *v /= mass;
            }
        }
        Trace {
            t0: 0.0,
            dt,
            samples,
        }
    }

    /// Sample value at step `n`, treating out-of-range indices as zero.
    #[inline]
    pub fn get(&self, n: usize) -> f64 {
        self.samples.get(n).copied().unwrap_or(0.0)
    }

    /// First step index with a nonzero sample, if any.
    pub fn first_nonzero(&self) -> Option<usize> {
        self.samples.iter().position(|&v| v != 0.0)
    }

    /// Last step index with a nonzero sample, if any.
    pub fn last_nonzero(&self) -> Option<usize> {
        self.samples.iter().rposition(|&v| v != 0.0)
    }

    /// The trace reversed about time `t_rev = k·dt` (whole samples): the
    /// result's sample `n` is the input's sample at `k − n`.
    pub fn reversed_about(&self, k: usize) -> Self {
        let n = self.samples.len();
        let samples = (0..n)
            .map(|i| if i <= k { self.get(k - i) } else { 0.0 })
            .collect();
        Trace {
            t0: self.t0,
            dt: self.dt,
            samples,
        }
    }
}

// --- Simulation record ------------------------------------------------------

/// Result of one solve: the Dirichlet trace and, optionally, the full field.
#[derive(Debug, Clone)]
pub struct SimulationRecord {
    /// Grid of the solve.
    pub grid: SimGrid,
    /// Profile of the solve (kept for derived quantities such as `p`, `q`).
    pub profile: AreaProfile,
    /// The Neumann input `f`.
    pub neumann_input: Trace,
    /// The measurement `w(0, ·)`, one sample per time level.
    pub dirichlet_trace: Trace,
    /// Flattened field `w[n·(nx+1) + i]` when requested, else empty.
    field: Vec<f64>,
    /// Profile samples at the grid nodes.
    pub a_nodes: Vec<f64>,
}

impl SimulationRecord {
    /// Whether the full field was stored.
    pub fn has_field(&self) -> bool {
        !self.field.is_empty()
    }

    /// Field value `w(x_i, t_n)`.
    #[inline]
    pub fn w(&self, n: usize, i: usize) -> f64 {
        self.field[n * (self.grid.nx + 1) + i]
    }

    /// One spatial row of the field at time level `n`.
    pub fn row(&self, n: usize) -> &[f64] {
        let m = self.grid.nx + 1;
        &self.field[n * m..(n + 1) * m]
    }

    /// Pressure `p = −∂w/∂t` at time level `n` (centered differences;
    /// one-sided at the first and last levels).
    pub fn pressure_row(&self, n: usize) -> Vec<f64> {
        let dt = self.grid.dt;
        let m = self.grid.nx + 1;
        (0..m)
            .map(|i| {
                if n == 0 {
                    -(self.w(1, i) - self.w(0, i)) / dt
                } else if n == self.grid.nt {
                    -(self.w(n, i) - self.w(n - 1, i)) / dt
                } else {
                    -(self.w(n + 1, i) - self.w(n - 1, i)) / (2.0 * dt)
                }
            })
            .collect()
    }

    /// Flux `q = A·∂w/∂x` at time level `n` (centered differences;
    /// one-sided at the array edges).
    pub fn flux_row(&self, n: usize) -> Vec<f64> {
        let dx = self.grid.dx;
        let m = self.grid.nx + 1;
        let row = self.row(n);
        let mut q = vec![0.0; m];
        for i in 0..m {
            let wx = if i == 0 {
                (row[1] - row[0]) / dx
            } else if i == m - 1 {
                (row[m - 1] - row[m - 2]) / dx
            } else {
                (row[i + 1] - row[i - 1]) / (2.0 * dx)
            };
            q[i] = self.a_nodes[i] * wx;
        }
        q
    }
}

// --- Core solver ------------------------------------------------------------

/// Run the leapfrog solve. `store_field` keeps the full space-time lattice
/// (needed by the energy and conservation diagnostics); long noise-driven
/// runs should leave it off.
pub fn simulate(
    profile: &AreaProfile,
    grid: &SimGrid,
    f: &Trace,
    store_field: bool,
) -> Result<SimulationRecord> {
    if (f.dt - grid.dt).abs() > 1e-12 * grid.dt {
        return Err(WavekitError::validation(
            "input trace dt does not match the grid dt",
        ));
    }
    if grid.l <= profile.x_plus + 2.0 * grid.dx {
        return Err(WavekitError::validation(
            "domain must extend past x_plus + 2 dx",
        ));
    }
    let nx = grid.nx;
    let nt = grid.nt;
    let dx = grid.dx;
    let dt = grid.dt;
    let r2 = dt * dt / (dx * dx);
    let lam = dt / dx;

    let a: Vec<f64> = profile.sample(nx, dx);
    // face-averaged coefficients; the left ghost face uses A = 1 (unit plateau)
    let mut a_r = vec![0.0; nx + 1];
    let mut a_l = vec![0.0; nx + 1];
    for i in 0..nx {
        a_r[i] = 0.5 * (a[i] + a[i + 1]);
        a_l[i + 1] = a_r[i];
    }
    a_l[0] = 1.0;
    a_r[nx] = a[nx];

    let mut w_prev = vec![0.0; nx + 1];
    let mut w_cur = vec![0.0; nx + 1];
    let mut w_next = vec![0.0; nx + 1];
    let mut trace = vec![0.0; nt + 1];
    let mut field = if store_field {
        vec![0.0; (nt + 1) * (nx + 1)]
    } else {
        Vec::new()
    };

    for n in 0..nt {
        let fn_ = f.get(n);
        for i in 1..nx {
            w_next[i] = 2.0 * w_cur[i] - w_prev[i]
                + r2 / a[i]
                    * (a_r[i] * (w_cur[i + 1] - w_cur[i]) - a_l[i] * (w_cur[i] - w_cur[i - 1]));
        }
        let ghost = w_cur[1] - 2.0 * dx * fn_;
        w_next[0] = 2.0 * w_cur[0] - w_prev[0]
            + r2 / a[0] * (a_r[0] * (w_cur[1] - w_cur[0]) - a_l[0] * (w_cur[0] - ghost));
        w_next[nx] = w_cur[nx] - lam * (w_cur[nx] - w_cur[nx - 1]);

        std::mem::swap(&mut w_prev, &mut w_cur);
        std::mem::swap(&mut w_cur, &mut w_next);
        trace[n + 1] = w_cur[0];
        if !trace[n + 1].is_finite() {
            return Err(WavekitError::numerical(format!(
                "solver blew up at step {} (t = {:.3})",
                n + 1,
                (n + 1) as f64 * dt
            )));
        }
        if store_field {
            let off = (n + 1) * (nx + 1);
            field[off..off + nx + 1].copy_from_slice(&w_cur);
        }
    }

    Ok(SimulationRecord {
        grid: grid.clone(),
        profile: profile.clone(),
        neumann_input: f.clone(),
        dirichlet_trace: Trace {
            t0: 0.0,
            dt,
            samples: trace,
        },
        field,
        a_nodes: a,
    })
}

/// The ND map: Dirichlet trace of the solve driven by `f`.
pub fn apply_nd(profile: &AreaProfile, grid: &SimGrid, f: &Trace) -> Result<Trace> {
    Ok(simulate(profile, grid, f, false)?.dirichlet_trace)
}

/// The time-reversed ND map about `t_rev` (a whole number of samples):
/// `Λ̃(φ)(t) = u_ψ(0, t_rev − t)` with `ψ(t) = φ(t_rev − t)`.
///
/// `t_rev` must lie beyond the support of `φ`.
pub fn apply_nd_reversed(
    profile: &AreaProfile,
    grid: &SimGrid,
    phi: &Trace,
    t_rev: f64,
) -> Result<Trace> {
    let k = (t_rev / grid.dt).round() as usize;
    if let Some(last) = phi.last_nonzero() {
        if last >= k {
            return Err(WavekitError::validation(
                "t_rev must lie beyond the support of phi",
            ));
        }
    }
    let psi = phi.reversed_about(k);
    let u = apply_nd(profile, grid, &psi)?;
    Ok(u.reversed_about(k))
}

/// Exact ND map for `A ≡ 1`: minus the cumulative trapezoid integral of `f`.
pub fn exact_constant_oracle(f: &Trace) -> Trace {
    let mut out = vec![0.0; f.samples.len()];
    let mut acc = 0.0;
    for (n, o) in out.iter_mut().enumerate().skip(1) {
        acc += 0.5 * (f.samples[n] + f.samples[n - 1]) * f.dt;
        *o = -acc;
    }
    Trace {
        t0: f.t0,
        dt: f.dt,
        samples: out,
    }
}

/// The conservation identity: as long as the wave has not yet reached depth
/// `a`, the pressure integral `∫₀ᵃ A(x)·p(x, t_end) dx` equals the injected
/// mass `∫₀^{t_end} f dt`. Returns `(lhs, rhs)`.
///
/// Requires the field and `t_end <= a` (causality: the input starts at t = 0).
pub fn conservation_check(r: &SimulationRecord, a: f64, t_end: f64) -> Result<(f64, f64)> {
    if !r.has_field() {
        return Err(WavekitError::validation(
            "conservation_check needs a stored field",
        ));
    }
    if t_end > a + 1e-12 {
        return Err(WavekitError::validation(
            "causality requires t_end <= a",
        ));
    }
    let k = (t_end / r.grid.dt).round() as usize;
    if k + 1 > r.grid.nt || k == 0 {
        return Err(WavekitError::validation("t_end outside simulated range"));
    }
    let ia = (a / r.grid.dx).round() as usize;
    if ia > r.grid.nx {
        return Err(WavekitError::validation("depth a outside the domain"));
    }
    let p = r.pressure_row(k);
    // trapezoid in x of A·p over [0, a]
    let mut lhs = 0.0;
    for i in 0..ia {
        lhs += 0.5 * (r.a_nodes[i] * p[i] + r.a_nodes[i + 1] * p[i + 1]) * r.grid.dx;
    }
    // trapezoid in t of f over [0, t_end]
    let mut rhs = 0.0;
    for n in 0..k {
        rhs += 0.5 * (r.neumann_input.get(n) + r.neumann_input.get(n + 1)) * r.grid.dt;
    }
    Ok((lhs, rhs))
}

// --- Tests ------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn smoothstep() -> AreaProfile {
        AreaProfile::smoothstep(2.0, 0.5, 1.5).unwrap()
    }

    #[test]
    fn zero_input_gives_zero_field() {
        let g = SimGrid::new(3.0, 100, 0.9, 4.0).unwrap();
        let f = Trace::zeros(g.dt, g.nt + 1);
        let r = simulate(&smoothstep(), &g, &f, true).unwrap();
        assert!(r.dirichlet_trace.samples.iter().all(|&v| v == 0.0));
        assert!(r.field.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_profile_matches_oracle() {
        // dx = 1/400 (nx = 1200 over L = 3)
        let g = SimGrid::new(3.0, 1200, 0.9, 4.0).unwrap();
        let f = Trace::unit_bump(g.dt, g.nt + 1, 0.1, 0.8);
        let d = apply_nd(&AreaProfile::constant(), &g, &f).unwrap();
        let oracle = exact_constant_oracle(&f);
        let err = d
            .samples
            .iter()
            .zip(&oracle.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-4, "err = {err}");
        // after the unit-mass pulse the trace sits at −1
        let tail = d.samples[d.samples.len() - 1];
        assert!((tail + 1.0).abs() < 1e-4);
    }

    #[test]
    fn second_order_convergence_against_oracle() {
        // error vs the exact A≡1 oracle must shrink ~4x per dx halving
        let mut errs = Vec::new();
        for nx in [100, 200, 400] {
            let g = SimGrid::new(3.0, nx, 0.9, 4.0).unwrap();
            let f = Trace::unit_bump(g.dt, g.nt + 1, 0.1, 0.8);
            let d = apply_nd(&AreaProfile::constant(), &g, &f).unwrap();
            let oracle = exact_constant_oracle(&f);
            let err = d
                .samples
                .iter()
                .zip(&oracle.samples)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        for k in 0..errs.len() - 1 {
            let ratio = errs[k] / errs[k + 1];
            assert!(
                (3.5..=4.5).contains(&ratio),
                "ratio {ratio} outside [3.5, 4.5]; errs = {errs:?}"
            );
        }
    }

    #[test]
    fn causality_cone() {
        let g = SimGrid::new(3.0, 150, 0.9, 3.0).unwrap();
        let t_start = 1.0;
        let f = Trace::unit_bump(g.dt, g.nt + 1, t_start, 0.5);
        let r = simulate(&smoothstep(), &g, &f, true).unwrap();
        let wmax = r.field.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        // exact discrete cone: the stencil expands one cell per step, so node
        // i is exactly zero before step n_first + 1 + i
        let n_first = f.first_nonzero().unwrap();
        let mut exact_leak = 0.0f64;
        // physical cone: ahead of t_start + x the grid carries only a small
        // dispersive precursor (numerical signal speed is dx/dt = 1/cfl)
        let mut precursor = 0.0f64;
        for n in 0..=g.nt {
            let t = n as f64 * g.dt;
            for i in 0..=g.nx {
                let x = i as f64 * g.dx;
                if n < n_first + 1 + i {
                    exact_leak = exact_leak.max(r.w(n, i).abs());
                }
                if t < t_start + x - 2.0 * g.dx {
                    precursor = precursor.max(r.w(n, i).abs());
                }
            }
        }
        assert!(exact_leak <= 1e-14 * wmax, "discrete-cone leak {exact_leak}");
        assert!(precursor <= 1e-4 * wmax, "precursor {precursor} vs max {wmax}");
    }

    #[test]
    fn time_shift_equivariance() {
        let g = SimGrid::new(3.0, 120, 0.9, 5.0).unwrap();
        let f = Trace::unit_bump(g.dt, g.nt + 1, 0.3, 0.6);
        let shift = 40usize;
        let mut f_shift = Trace::zeros(g.dt, g.nt + 1);
        for n in 0..g.nt + 1 - shift {
            f_shift.samples[n + shift] = f.samples[n];
        }
        let d = apply_nd(&smoothstep(), &g, &f).unwrap();
        let d_shift = apply_nd(&smoothstep(), &g, &f_shift).unwrap();
        let mut err = 0.0f64;
        for n in 0..g.nt + 1 - shift {
            err = err.max((d.samples[n] - d_shift.samples[n + shift]).abs());
        }
        assert!(err < 1e-12, "equivariance err {err}");
    }

    #[test]
    fn reciprocity_pairing() {
        // <Λ f, φ> = <f, Λ̃ φ> for three smooth pairs on the smoothstep profile
        let g = SimGrid::new(3.0, 300, 0.9, 8.0).unwrap();
        let p = smoothstep();
        let t_rev = g.t_max();
        for (f0, fw, p0, pw) in [(0.5, 0.8, 2.0, 0.7), (1.0, 0.5, 3.0, 1.0), (0.3, 1.2, 4.0, 0.6)]
        {
            let f = Trace::unit_bump(g.dt, g.nt + 1, f0, fw);
            let phi = Trace::unit_bump(g.dt, g.nt + 1, p0, pw);
            let lf = apply_nd(&p, &g, &f).unwrap();
            let ltil = apply_nd_reversed(&p, &g, &phi, t_rev).unwrap();
            let lhs: f64 = lf
                .samples
                .iter()
                .zip(&phi.samples)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * g.dt;
            let rhs: f64 = f
                .samples
                .iter()
                .zip(&ltil.samples)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                * g.dt;
            let rel = (lhs - rhs).abs() / rhs.abs();
            assert!(rel < 1e-3, "reciprocity mismatch {rel}");
        }
    }

    #[test]
    fn reversing_twice_is_identity() {
        let g = SimGrid::new(3.0, 120, 0.9, 6.0).unwrap();
        let phi = Trace::unit_bump(g.dt, g.nt + 1, 0.5, 0.8);
        let p = smoothstep();
        let once = apply_nd(&p, &g, &phi).unwrap();
        // Λ̃ of the reversal of φ, reversed again, reproduces Λφ
        let k = g.nt;
        let phi_rev = phi.reversed_about(k);
        let twice = apply_nd_reversed(&p, &g, &phi_rev, g.t_max())
            .unwrap()
            .reversed_about(k);
        let err = once
            .samples
            .iter()
            .zip(&twice.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "double reversal err {err}");
    }

    #[test]
    fn conservation_identity_both_profiles() {
        for profile in [AreaProfile::constant(), smoothstep()] {
            let g = SimGrid::new(3.0, 300, 0.9, 2.2).unwrap();
            let f = Trace::unit_bump(g.dt, g.nt + 1, 0.1, 0.6);
            let r = simulate(&profile, &g, &f, true).unwrap();
            let (lhs, rhs) = conservation_check(&r, 2.0, 2.0).unwrap();
            assert!(
                (lhs - rhs).abs() / rhs.abs() < 1e-2,
                "conservation {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn conservation_zero_input() {
        let g = SimGrid::new(3.0, 100, 0.9, 2.0).unwrap();
        let f = Trace::zeros(g.dt, g.nt + 1);
        let r = simulate(&smoothstep(), &g, &f, true).unwrap();
        let (lhs, rhs) = conservation_check(&r, 1.5, 1.5).unwrap();
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn rejects_mismatched_dt() {
        let g = SimGrid::new(3.0, 100, 0.9, 2.0).unwrap();
        let f = Trace::zeros(g.dt * 2.0, g.nt + 1);
        assert!(simulate(&smoothstep(), &g, &f, false).is_err());
    }

    #[test]
    fn self_convergence_on_smoothstep() {
        // Richardson: successive trace differences shrink ~4x per refinement
        let mut traces = Vec::new();
        for nx in [100, 200, 400] {
            let g = SimGrid::new(3.0, nx, 0.9, 5.4).unwrap();
            let f = Trace::unit_bump(g.dt, g.nt + 1, 0.2, 0.8);
            let d = apply_nd(&smoothstep(), &g, &f).unwrap();
            let step = nx / 100;
            let coarse: Vec<f64> = d.samples.iter().step_by(step).copied().collect();
            traces.push(coarse);
        }
        let n = traces[0].len().min(traces[1].len()).min(traces[2].len());
        let e01 = (0..n)
            .map(|i| (traces[0][i] - traces[1][i]).abs())
            .fold(0.0f64, f64::max);
        let e12 = (0..n)
            .map(|i| (traces[1][i] - traces[2][i]).abs())
            .fold(0.0f64, f64::max);
        let ratio = e01 / e12;
        assert!(
            (3.4..=4.6).contains(&ratio),
            "self-convergence ratio {ratio}"
        );
    }
}
