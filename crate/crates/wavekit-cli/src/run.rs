//! Stage implementations behind the subcommands.
//!
//! Every stage writes CSV outputs with JSON sidecars into the configured
//! output directory and reports a [`StageOutcome`]; the caller aggregates the
//! outcomes into the run manifest. Acceptance-style tolerances (energy
//! certificate, reconstruction error) set `pass = false` rather than
//! erroring, so the CLI can exit with the dedicated tolerance code.

use anyhow::{bail, Context};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;
use wavekit::correlation::{
    cross_correlate, estimate_impulse_response, kernel_l2_error_vs, noise_kernel_estimate,
    pulse_kernel_oracle, ConvergenceRow,
};
use wavekit::energy;
use wavekit::noise::{self, CutoffChi};
use wavekit::persist::{self, Sidecar};
use wavekit::reconstruction::{
    deconvolve_impulse_response, reconstruct_profile, ReconstructionReport,
};
use wavekit::solver::{self, simulate, Trace};

use crate::config::RunConfig;

/// The energy stage needs only a short post-input window; cap its horizon so
/// storing the full field stays cheap regardless of the configured `t_max`.
const ENERGY_T_MAX: f64 = 25.0;
/// Jump tolerance of the correlation-derived delta coefficient.
const JUMP_TOL: f64 = 0.25;

/// Result of one pipeline stage.
#[derive(Debug, Clone, Serialize)]
pub struct StageOutcome {
    pub name: String,
    pub outputs: Vec<String>,
    pub pass: bool,
    pub seconds: f64,
}

/// The run manifest: configuration identity plus per-stage records.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub stages: Vec<StageOutcome>,
}

/// Reconstruction source selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconMode {
    Direct,
    FromNoise,
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    let body = serde_json::to_string_pretty(manifest)?;
    std::fs::write(dir.join("manifest.json"), body + "\n")?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn rel(dir: &Path, name: &str) -> (PathBuf, String) {
    (dir.join(name), name.to_string())
}

macro_rules! say {
    ($quiet:expr, $($arg:tt)*) => {
        if !$quiet {
            println!($($arg)*);
        }
    };
}

// --- simulate ----------------------------------------------------------------

/// Run one forward solve and persist the Dirichlet trace. With a `[noise]`
/// section the input is the cut-off noise `χω`; otherwise a deterministic
/// unit-mass bump.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, quiet: bool) -> anyhow::Result<StageOutcome> {
    let t0 = Instant::now();
    ensure_dir(out)?;
    let profile = cfg.build_profile()?;
    let grid = cfg.build_grid()?;
    let hash = cfg.hash();

    let (input, sidecar) = match &cfg.noise {
        Some(n) => {
            let w = noise::sample_noise(n.seed, grid.nt + 1, grid.dt)?;
            let f = noise::apply_cutoff(&CutoffChi { delta: n.delta }, &w);
            (f, Sidecar::seeded("simulate", &hash, n.seed))
        }
        None => (
            Trace::unit_bump(grid.dt, grid.nt + 1, 0.2, 0.8),
            Sidecar::deterministic("simulate", &hash),
        ),
    };
    let record = simulate(&profile, &grid, &input, false)?;
    let (path, name) = rel(out, "trace.csv");
    persist::write_trace_csv(&path, &record.dirichlet_trace)?;
    persist::write_sidecar(&path, &sidecar.with("t_max", grid.t_max()))?;
    say!(quiet, "simulate: {} samples -> {}", grid.nt + 1, path.display());
    Ok(StageOutcome {
        name: "simulate".into(),
        outputs: vec![name],
        pass: true,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// --- correlate ---------------------------------------------------------------

/// Noise-driven kernel estimates, one per horizon in `t_list`, plus the
/// seed-ensemble convergence study against the deterministic pulse oracle.
pub fn cmd_correlate(cfg: &RunConfig, out: &Path, quiet: bool) -> anyhow::Result<StageOutcome> {
    let t0 = Instant::now();
    ensure_dir(out)?;
    let profile = cfg.build_profile()?;
    let grid = cfg.build_grid()?;
    let hash = cfg.hash();
    let Some(ns) = &cfg.noise else {
        bail!("correlate requires [noise] (missing key: noise.seed)");
    };
    let Some(cs) = &cfg.correlation else {
        bail!("correlate requires a [correlation] section");
    };
    let burn_in = cs.lag_neg + ns.delta + 40.0 * grid.dt;
    for &t in &cs.t_list {
        if t + burn_in + cs.lag_pos + 2.0 * grid.dt > grid.t_max() {
            bail!(
                "correlation horizon T = {t} exceeds grid.t_max − burn-in ({:.1})",
                grid.t_max() - burn_in - cs.lag_pos
            );
        }
    }

    let w = noise::sample_noise(ns.seed, grid.nt + 1, grid.dt)?;
    let f = noise::apply_cutoff(&CutoffChi { delta: ns.delta }, &w);
    let d = solver::apply_nd(&profile, &grid, &f)?;

    let mut outputs = Vec::new();
    for &t in &cs.t_list {
        let est = cross_correlate(&d, &w, cs.lag_neg, cs.lag_pos, t, burn_in)?;
        let (path, name) = rel(out, &format!("kernel_T{t}.csv"));
        persist::write_correlation_csv(&path, &est)?;
        persist::write_sidecar(
            &path,
            &Sidecar::seeded("correlate", &hash, ns.seed).with("t_horizon", t),
        )?;
        say!(quiet, "correlate: T = {t} -> {}", path.display());
        outputs.push(name);
    }

    // convergence study over the seed ensemble, against the pulse oracle
    let oracle = pulse_kernel_oracle(
        &profile,
        cfg.grid.l,
        cfg.nx()?,
        cfg.grid.cfl,
        cs.lag_neg,
        cs.lag_pos,
    )?;
    let mut rows = Vec::new();
    for &t in &cs.t_list {
        let mut errs = Vec::new();
        for member in 0..cs.n_seeds {
            let est = noise_kernel_estimate(
                &profile,
                cfg.grid.l,
                cfg.nx()?,
                cfg.grid.cfl,
                noise::ensemble_seed(ns.seed, member),
                t,
                cs.lag_neg,
                cs.lag_pos,
            )?;
            errs.push(kernel_l2_error_vs(&est, &oracle)?);
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
            / (errs.len().max(2) - 1) as f64;
        rows.push(ConvergenceRow {
            t_horizon: t,
            mean_error: mean,
            std_error: var.sqrt(),
        });
    }
    let (path, name) = rel(out, "study.csv");
    persist::write_study_csv(&path, &rows)?;
    persist::write_sidecar(
        &path,
        &Sidecar::seeded("correlate", &hash, ns.seed).with("n_seeds", cs.n_seeds),
    )?;
    outputs.push(name);
    Ok(StageOutcome {
        name: "correlate".into(),
        outputs,
        pass: true,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// --- energy ------------------------------------------------------------------

/// Energy decay certificate on a deterministic bump-driven solve.
pub fn cmd_energy(cfg: &RunConfig, out: &Path, quiet: bool) -> anyhow::Result<StageOutcome> {
    let t0 = Instant::now();
    ensure_dir(out)?;
    let profile = cfg.build_profile()?;
    let hash = cfg.hash();
    let t_max = cfg.grid.t_max.min(ENERGY_T_MAX);
    let grid = solver::SimGrid::new(cfg.grid.l, cfg.nx()?, cfg.grid.cfl, t_max)?;
    let input = Trace::unit_bump(grid.dt, grid.nt + 1, 0.2, 0.8);
    let tau0 = 1.2; // input supported in [0.2, 1.0]
    let record = simulate(&profile, &grid, &input, true)?;
    let stride = (grid.nt / 600).max(1);
    let report = energy::decay_report(&record, tau0, stride)?;

    let residual_ok = report.min_residual >= -1e-10;
    let pointwise_ok = report
        .rows
        .iter()
        .all(|r| r.boundary_gap <= r.bound * (1.0 + 1e-12));
    let rate_ok = report.lambda == 0.0 || report.fitted_rate >= report.lambda;
    let pass = residual_ok && pointwise_ok && rate_ok;

    let (path, name) = rel(out, "energy.csv");
    persist::write_energy_csv(&path, &report)?;
    persist::write_sidecar(&path, &Sidecar::deterministic("energy", &hash))?;

    #[derive(Serialize)]
    struct EnergyReportJson<'a> {
        #[serde(flatten)]
        report: &'a energy::DecayReport,
        residual_ok: bool,
        pointwise_ok: bool,
        rate_ok: bool,
        pass: bool,
    }
    let body = serde_json::to_string_pretty(&EnergyReportJson {
        report: &report,
        residual_ok,
        pointwise_ok,
        rate_ok,
        pass,
    })?;
    let json_name = "energy_report.json";
    std::fs::write(out.join(json_name), body + "\n")?;
    say!(
        quiet,
        "energy: lambda = {:.4}, fitted rate = {:.4}, pass = {pass}",
        report.lambda,
        report.fitted_rate
    );
    Ok(StageOutcome {
        name: "energy".into(),
        outputs: vec![name, json_name.into()],
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// --- reconstruct -------------------------------------------------------------

/// Recover the profile, either from a deterministic pulse deconvolution or
/// through the full noise → correlation → impulse-response chain.
pub fn cmd_reconstruct(
    cfg: &RunConfig,
    out: &Path,
    mode: ReconMode,
    quiet: bool,
) -> anyhow::Result<StageOutcome> {
    let t0 = Instant::now();
    ensure_dir(out)?;
    let profile = cfg.build_profile()?;
    let hash = cfg.hash();
    let Some(rs) = &cfg.reconstruction else {
        bail!("reconstruct requires a [reconstruction] section");
    };
    let err_depth = rs.err_depth.unwrap_or(rs.a_max - 4.0 * rs.da);
    let tolerance = rs.tolerance.unwrap_or(match mode {
        ReconMode::Direct => 0.05,
        ReconMode::FromNoise => 0.15,
    });

    let mut outputs = Vec::new();
    let (ir, mode_name, sidecar) = match mode {
        ReconMode::Direct => {
            let t_h = 2.0 * rs.a_max + 0.5;
            if t_h > cfg.grid.t_max {
                bail!(
                    "a_max = {} beyond h coverage: needs grid.t_max >= {t_h}",
                    rs.a_max
                );
            }
            let (ir, diag) = deconvolve_impulse_response(
                &profile,
                cfg.grid.l,
                cfg.nx()?,
                t_h,
                rs.pulse_mult,
                rs.tikhonov,
            )?;
            say!(
                quiet,
                "reconstruct(direct): reconvolution residual {:.2e}",
                diag.reconv_residual
            );
            (
                ir,
                "direct",
                Sidecar::deterministic("reconstruct", &hash)
                    .with("reconv_residual", diag.reconv_residual),
            )
        }
        ReconMode::FromNoise => {
            let Some(ns) = &cfg.noise else {
                bail!("reconstruct --mode from-noise requires [noise] (missing key: noise.seed)");
            };
            let Some(cs) = &cfg.correlation else {
                bail!("reconstruct --mode from-noise requires a [correlation] section");
            };
            let grid = cfg.build_grid()?;
            if cs.lag_pos < 2.0 * rs.a_max + 4.0 * grid.dt {
                bail!(
                    "a_max = {} beyond h coverage: needs correlation.lag_pos >= {}",
                    rs.a_max,
                    2.0 * rs.a_max + 4.0 * grid.dt
                );
            }
            let t = *cs.t_list.last().expect("validated non-empty");
            let est = noise_kernel_estimate(
                &profile,
                cfg.grid.l,
                cfg.nx()?,
                cfg.grid.cfl,
                ns.seed,
                t,
                cs.lag_neg,
                cs.lag_pos,
            )?;
            let ir = estimate_impulse_response(&est, cs.smooth_width, JUMP_TOL)?;
            say!(
                quiet,
                "reconstruct(from-noise): T = {t}, delta jump {:.3}",
                ir.delta_jump.unwrap_or(f64::NAN)
            );
            (
                ir,
                "from-noise",
                Sidecar::seeded("reconstruct", &hash, ns.seed).with("t_horizon", t),
            )
        }
    };

    let (hpath, hname) = rel(out, &format!("impulse_{mode_name}.csv"));
    persist::write_impulse_csv(&hpath, &ir)?;
    persist::write_sidecar(&hpath, &sidecar.clone().with("stage_detail", "impulse"))?;
    outputs.push(hname);

    let report = reconstruct_profile(&ir, rs.a_max, rs.da, err_depth, Some(&profile))?;
    let err = report.max_rel_error.unwrap_or(f64::NAN);
    let pass = err.is_finite() && err <= tolerance;
    let (rpath, rname) = rel(out, &format!("reconstruction_{mode_name}.csv"));
    persist::write_reconstruction_csv(&rpath, &report)?;
    persist::write_sidecar(
        &rpath,
        &sidecar
            .with("max_rel_error", err)
            .with("tolerance", tolerance),
    )?;
    outputs.push(rname);

    let json_name = format!("reconstruction_{mode_name}.json");
    #[derive(Serialize)]
    struct ReconJson<'a> {
        mode: &'a str,
        tolerance: f64,
        err_depth: f64,
        #[serde(flatten)]
        report: &'a ReconstructionReport,
        pass: bool,
    }
    let body = serde_json::to_string_pretty(&ReconJson {
        mode: mode_name,
        tolerance,
        err_depth,
        report: &report,
        pass,
    })?;
    std::fs::write(out.join(&json_name), body + "\n")?;
    outputs.push(json_name);
    say!(
        quiet,
        "reconstruct({mode_name}): max rel error {err:.4} (tolerance {tolerance}), pass = {pass}"
    );
    Ok(StageOutcome {
        name: format!("reconstruct-{mode_name}"),
        outputs,
        pass,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

// --- demo --------------------------------------------------------------------

/// The full paper pipeline on the smoothstep default: noise → correlation →
/// impulse response → reconstruction, plus the deterministic reference and
/// the energy certificate.
pub fn cmd_demo(cfg: &RunConfig, out: &Path, quiet: bool) -> anyhow::Result<Vec<StageOutcome>> {
    let stages = vec![
        cmd_correlate(cfg, out, quiet)?,
        cmd_energy(cfg, out, quiet)?,
        cmd_reconstruct(cfg, out, ReconMode::Direct, quiet)?,
        cmd_reconstruct(cfg, out, ReconMode::FromNoise, quiet)?,
    ];
    say!(
        quiet,
        "demo: {} stages, all pass = {}",
        stages.len(),
        stages.iter().all(|s| s.pass)
    );
    Ok(stages)
}
