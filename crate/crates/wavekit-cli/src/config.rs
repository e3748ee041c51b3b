//! Run configuration: TOML sections, validation, and hashing.
//!
//! Every section rejects unknown keys so typos fail loudly before any
//! computation. The configuration hash (SHA-256 of the canonical serialized
//! form) is recorded in every output sidecar and in the run manifest, making
//! outputs traceable to the exact configuration that produced them.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use wavekit::profile::AreaProfile;
use wavekit::solver::SimGrid;

/// Top-level run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSection,
    pub grid: GridSection,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub correlation: Option<CorrelationSection>,
    #[serde(default)]
    pub reconstruction: Option<ReconstructionSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Area-profile choice.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSection {
    /// One of `constant`, `smoothstep`, `bump`, `tabulated`.
    pub kind: String,
    #[serde(default)]
    pub a_inf: Option<f64>,
    #[serde(default)]
    pub x_minus: Option<f64>,
    #[serde(default)]
    pub x_plus: Option<f64>,
    /// Peak value (bump profile only).
    #[serde(default)]
    pub peak: Option<f64>,
    /// `[[x, A], …]` samples (tabulated profile only).
    #[serde(default)]
    pub table: Option<Vec<[f64; 2]>>,
}

/// Space-time grid. Exactly one of `nx`/`dx` must be given.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub l: f64,
    #[serde(default)]
    pub nx: Option<usize>,
    #[serde(default)]
    pub dx: Option<f64>,
    pub cfl: f64,
    pub t_max: f64,
}

/// Noise excitation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub seed: u64,
    /// Switch-on ramp length of the cut-off χ.
    pub delta: f64,
}

/// Correlation-estimator settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSection {
    /// Averaging horizons for kernel estimates / the convergence study.
    pub t_list: Vec<f64>,
    /// Most negative lag (positive number, in time units).
    pub lag_neg: f64,
    /// Most positive lag.
    pub lag_pos: f64,
    /// cos² half-width used before differentiating the kernel estimate.
    #[serde(default = "default_smooth_width")]
    pub smooth_width: f64,
    /// Ensemble size of the convergence study.
    #[serde(default = "default_n_seeds")]
    pub n_seeds: u64,
}

fn default_smooth_width() -> f64 {
    0.15
}

fn default_n_seeds() -> u64 {
    4
}

/// Reconstruction sweep settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionSection {
    /// Deepest probing depth.
    pub a_max: f64,
    /// Depth step of the sweep.
    pub da: f64,
    /// Deconvolution pulse width, in cells.
    #[serde(default = "default_pulse_mult")]
    pub pulse_mult: usize,
    /// Tikhonov weight for the deconvolution (0 = triangular solve).
    #[serde(default)]
    pub tikhonov: f64,
    /// Acceptance tolerance on the max relative profile error; defaults by
    /// mode (5% direct, 15% from-noise) when omitted.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Depth up to which the error metric applies; defaults to
    /// `a_max − 4·da` (end cells carry one-sided differences).
    #[serde(default)]
    pub err_depth: Option<f64>,
}

fn default_pulse_mult() -> usize {
    8
}

/// Output destination.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> String {
    "out".to_string()
}

impl RunConfig {
    /// Parse and validate a TOML config file.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks beyond what serde enforces.
    pub fn validate(&self) -> anyhow::Result<()> {
        match (self.grid.nx, self.grid.dx) {
            (Some(_), Some(_)) => bail!("grid: give either nx or dx, not both"),
            (None, None) => bail!("grid: one of nx or dx is required"),
            _ => {}
        }
        self.build_grid()?; // checks cfl ∈ (0, 1], nx, t_max
        self.build_profile()?; // checks the profile section
        if let Some(n) = &self.noise {
            if n.delta <= 0.0 {
                bail!("noise.delta must be positive");
            }
        }
        if let Some(c) = &self.correlation {
            if c.t_list.is_empty() {
                bail!("correlation.t_list must not be empty");
            }
            if c.lag_neg <= 0.0 || c.lag_pos <= 0.0 {
                bail!("correlation lag range must be positive on both sides");
            }
        }
        if let Some(r) = &self.reconstruction {
            if r.da <= 0.0 || r.a_max <= 0.0 {
                bail!("reconstruction.a_max and .da must be positive");
            }
        }
        Ok(())
    }

    /// Number of spatial cells (from `nx` or `dx`).
    pub fn nx(&self) -> anyhow::Result<usize> {
        match (self.grid.nx, self.grid.dx) {
            (Some(nx), None) => Ok(nx),
            (None, Some(dx)) => {
                if dx <= 0.0 {
                    bail!("grid.dx must be positive");
                }
                Ok((self.grid.l / dx).round() as usize)
            }
            _ => bail!("grid: one of nx or dx is required"),
        }
    }

    /// Build the validated solver grid.
    pub fn build_grid(&self) -> anyhow::Result<SimGrid> {
        Ok(SimGrid::new(
            self.grid.l,
            self.nx()?,
            self.grid.cfl,
            self.grid.t_max,
        )?)
    }

    /// Build the validated area profile.
    pub fn build_profile(&self) -> anyhow::Result<AreaProfile> {
        let p = &self.profile;
        let xm = p.x_minus.unwrap_or(0.5);
        let xp = p.x_plus.unwrap_or(1.5);
        let profile = match p.kind.as_str() {
            "constant" => AreaProfile::constant(),
            "smoothstep" => {
                let a_inf = p
                    .a_inf
                    .ok_or_else(|| anyhow::anyhow!("profile.a_inf required for smoothstep"))?;
                AreaProfile::smoothstep(a_inf, xm, xp)?
            }
            "bump" => {
                let peak = p
                    .peak
                    .ok_or_else(|| anyhow::anyhow!("profile.peak required for bump"))?;
                AreaProfile::bump(peak, xm, xp)?
            }
            "tabulated" => {
                let table = p
                    .table
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("profile.table required for tabulated"))?;
                let pts: Vec<(f64, f64)> = table.iter().map(|r| (r[0], r[1])).collect();
                let a_inf = p
                    .a_inf
                    .or_else(|| pts.last().map(|&(_, a)| a))
                    .ok_or_else(|| anyhow::anyhow!("profile.a_inf required for tabulated"))?;
                AreaProfile::tabulated(&pts, a_inf, xm, xp)?
            }
            other => bail!("unknown profile.kind {other:?}"),
        };
        Ok(profile)
    }

    /// SHA-256 of the canonical serialized configuration (hex).
    pub fn hash(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

/// The built-in demo configuration: smoothstep truth, moderate grid, one
/// stochastic horizon.
pub fn demo_config() -> RunConfig {
    RunConfig {
        profile: ProfileSection {
            kind: "smoothstep".into(),
            a_inf: Some(2.0),
            x_minus: Some(0.5),
            x_plus: Some(1.5),
            peak: None,
            table: None,
        },
        grid: GridSection {
            l: 3.0,
            nx: Some(150),
            dx: None,
            cfl: 0.9,
            t_max: 2030.0,
        },
        noise: Some(NoiseSection {
            seed: 4242,
            delta: 0.2,
        }),
        correlation: Some(CorrelationSection {
            t_list: vec![2000.0],
            lag_neg: 1.0,
            lag_pos: 6.0,
            smooth_width: 0.15,
            n_seeds: 2,
        }),
        reconstruction: Some(ReconstructionSection {
            a_max: 2.4,
            da: 0.1,
            pulse_mult: 8,
            tikhonov: 0.0,
            tolerance: None,
            err_depth: None,
        }),
        output: OutputSection {
            dir: "out/demo".into(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"
[profile]
kind = "constant"

[grid]
l = 3.0
nx = 100
cfl = 0.9
t_max = 5.0
"#
    }

    #[test]
    fn minimal_config_parses() {
        let cfg: RunConfig = toml::from_str(minimal()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.nx().unwrap(), 100);
        assert_eq!(cfg.output.dir, "out");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = minimal().replace("t_max = 5.0", "t_max = 5.0\nbogus = 1");
        assert!(toml::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a: RunConfig = toml::from_str(minimal()).unwrap();
        let b: RunConfig = toml::from_str(minimal()).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c: RunConfig =
            toml::from_str(&minimal().replace("cfl = 0.9", "cfl = 0.8")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn dx_and_nx_are_mutually_exclusive() {
        let text = minimal().replace("nx = 100", "nx = 100\ndx = 0.03");
        let cfg: RunConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn demo_config_is_valid() {
        demo_config().validate().unwrap();
    }
}
