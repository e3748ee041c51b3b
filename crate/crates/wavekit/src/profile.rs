//! Admissible area profiles `A(x)` and their decay constants.
//!
//! A profile is *admissible* when it is strictly positive, equal to `1` for
//! `x <= x_minus`, and equal to `A_inf` for `x >= x_plus`. The left plateau
//! value is fixed at 1 (a choice of units); the coefficient varies only on
//! `(x_minus, x_plus)`.
//!
//! The energy certificate needs three constants derived from the profile:
//!
//! - `M = max |A'(x)/A(x)|` over `[0, x_plus]` (units 1/length),
//! - `ell = x_plus`, the right end of the coefficient variation,
//! - `lambda = (M/2)·e^(−M·ell)·sqrt(1 − 2·M·ell·e^(−2·M·ell))` (units 1/time),
//!
//! the certified exponential decay rate of the weighted energy. The square-root
//! argument is always positive because `x·e^(−x) <= 1/e < 1/2`.

use crate::error::{Result, WavekitError};
use serde::{Deserialize, Serialize};

/// Resolution of the dense grid used for admissibility checks and for the
/// grid maximum defining `M` (per unit length).
const VALIDATION_POINTS_PER_UNIT: usize = 4096;

// --- Profile ----------------------------------------------------------------

/// The parametric family of an [`AreaProfile`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum ProfileKind {
    /// `A(x) = 1` everywhere (no scatterer).
    Constant,
    /// C² polynomial ramp `1 + (A_inf − 1)·(3s² − 2s³)` on the normalized
    /// coordinate `s = (x − x_minus)/(x_plus − x_minus)`.
    Smoothstep,
    /// A localized bulge `1 + (peak − 1)·sin²(π s)` returning to `A_inf = 1`
    /// at `x_plus`; `peak` is the maximum cross-section.
    Bump { peak: f64 },
    /// Piecewise-linear interpolation of `(x, A)` samples; admissibility is
    /// enforced by validation rather than by construction.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

/// An admissible cross-sectional area profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaProfile {
    /// Parametric family and shape parameters.
    pub kind: ProfileKind,
    /// Right plateau value `A(x) = A_inf` for `x >= x_plus`.
    pub a_inf: f64,
    /// End of the left unit plateau.
    pub x_minus: f64,
    /// Start of the right plateau.
    pub x_plus: f64,
}

/// Constants entering the energy decay certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayConstants {
    /// `M = max |A'/A|` over `[0, ell]`, units 1/length.
    pub m: f64,
    /// Right end of the coefficient variation (`= x_plus`).
    pub ell: f64,
    /// Certified decay rate, units 1/time; `lambda = 0` iff `M = 0`.
    pub lambda: f64,
}

/// The closed-form certified decay rate for given `M` and `ell`.
///
/// `lambda = (M/2)·e^(−M·ell)·sqrt(1 − 2·M·ell·e^(−2·M·ell))`.
pub fn lambda_closed_form(m: f64, ell: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    let me = m * ell;
    0.5 * m * (-me).exp() * (1.0 - 2.0 * me * (-2.0 * me).exp()).sqrt()
}

impl AreaProfile {
    /// The constant profile `A ≡ 1`.
    pub fn constant() -> Self {
        AreaProfile {
            kind: ProfileKind::Constant,
            a_inf: 1.0,
            x_minus: 1.0,
            x_plus: 2.0,
        }
    }

    /// A smoothstep ramp from 1 to `a_inf` over `(x_minus, x_plus)`.
    pub fn smoothstep(a_inf: f64, x_minus: f64, x_plus: f64) -> Result<Self> {
        let p = AreaProfile {
            kind: ProfileKind::Smoothstep,
            a_inf,
            x_minus,
            x_plus,
        };
        p.validate()?;
        Ok(p)
    }

    /// A bump rising to `peak` between the plateaus; both plateaus are at 1.
    pub fn bump(peak: f64, x_minus: f64, x_plus: f64) -> Result<Self> {
        let p = AreaProfile {
            kind: ProfileKind::Bump { peak },
            a_inf: 1.0,
            x_minus,
            x_plus,
        };
        p.validate()?;
        Ok(p)
    }

    /// A tabulated profile from `(x, A)` samples with strictly increasing `x`.
    ///
    /// Values are linearly interpolated; `A'` comes from the segment slopes.
    /// Outside the table the profile continues with 1 on the left and `a_inf`
    /// on the right.
    pub fn tabulated(
        points: &[(f64, f64)],
        a_inf: f64,
        x_minus: f64,
        x_plus: f64,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(WavekitError::validation(
                "tabulated profile needs at least 2 points",
            ));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(WavekitError::validation(
                    "tabulated profile abscissae must be strictly increasing",
                ));
            }
        }
        if points.iter().any(|&(_, a)| a <= 0.0) {
            return Err(WavekitError::validation(
                "tabulated profile has nonpositive values",
            ));
        }
        let p = AreaProfile {
            kind: ProfileKind::Tabulated {
                xs: points.iter().map(|p| p.0).collect(),
                values: points.iter().map(|p| p.1).collect(),
            },
            a_inf,
            x_minus,
            x_plus,
        };
        p.validate()?;
        Ok(p)
    }

    /// Evaluate `(A(x), A'(x))` at `x >= 0`.
    ///
    /// Beyond `x_plus` this returns `(a_inf, 0)` for every kind.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match &self.kind {
            ProfileKind::Constant => (1.0, 0.0),
            ProfileKind::Smoothstep => {
                if x <= self.x_minus {
                    (1.0, 0.0)
                } else if x >= self.x_plus {
                    (self.a_inf, 0.0)
                } else {
                    let w = self.x_plus - self.x_minus;
                    let s = (x - self.x_minus) / w;
                    let ramp = s * s * (3.0 - 2.0 * s);
                    let dramp = 6.0 * s * (1.0 - s) / w;
                    (
                        1.0 + (self.a_inf - 1.0) * ramp,
                        (self.a_inf - 1.0) * dramp,
                    )
                }
            }
            ProfileKind::Bump { peak } => {
                if x <= self.x_minus || x >= self.x_plus {
                    (1.0, 0.0)
                } else {
                    let w = self.x_plus - self.x_minus;
                    let s = (x - self.x_minus) / w;
                    let sn = (std::f64::consts::PI * s).sin();
                    let cn = (std::f64::consts::PI * s).cos();
                    (
                        1.0 + (peak - 1.0) * sn * sn,
                        (peak - 1.0) * 2.0 * sn * cn * std::f64::consts::PI / w,
                    )
                }
            }
            ProfileKind::Tabulated { xs, values } => {
                if x <= xs[0] {
                    (values[0], 0.0)
                } else if x >= *xs.last().unwrap() {
                    (*values.last().unwrap(), 0.0)
                } else {
                    // binary search for the containing segment
                    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
                        Ok(i) => i.min(xs.len() - 2),
                        Err(i) => i - 1,
                    };
                    let slope = (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
                    (values[i] + slope * (x - xs[i]), slope)
                }
            }
        }
    }

    /// Check every admissibility invariant on a dense grid.
    // negated comparisons are deliberate: NaN must fail validation
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.a_inf <= 0.0 {
            return Err(WavekitError::validation("a_inf must be positive"));
        }
        if !(self.x_minus > 0.0) || !(self.x_plus > self.x_minus) {
            return Err(WavekitError::validation(
                "require 0 < x_minus < x_plus",
            ));
        }
        if let ProfileKind::Bump { peak } = self.kind {
            if peak <= 0.0 {
                return Err(WavekitError::validation("bump peak must be positive"));
            }
            if (self.a_inf - 1.0).abs() > 1e-12 {
                return Err(WavekitError::validation(
                    "bump profiles return to the unit plateau; a_inf must be 1",
                ));
            }
        }
        let n = (VALIDATION_POINTS_PER_UNIT as f64 * self.x_plus).ceil() as usize;
        let tol = 1e-9;
        for i in 0..=n {
            let x = self.x_plus * i as f64 / n as f64;
            let (a, ap) = self.eval(x);
            if !(a > 0.0) || !a.is_finite() || !ap.is_finite() {
                return Err(WavekitError::validation(format!(
                    "profile not positive/finite at x = {x}"
                )));
            }
            // Tabulated kinds satisfy the plateau conditions only up to their
            // sampled data; enforce them for every kind.
            if x <= self.x_minus && (a - 1.0).abs() > tol {
                return Err(WavekitError::validation(format!(
                    "left plateau violated at x = {x}: A = {a}"
                )));
            }
        }
        let (a_end, _) = self.eval(self.x_plus);
        if (a_end - self.a_inf).abs() > tol {
            return Err(WavekitError::validation(format!(
                "right plateau violated at x_plus: A = {a_end}, expected {}",
                self.a_inf
            )));
        }
        Ok(())
    }

    /// Compute `(M, ell, lambda)` by a dense-grid maximum of `|A'/A|`.
    pub fn decay_constants(&self) -> DecayConstants {
        let ell = self.x_plus;
        let n = (VALIDATION_POINTS_PER_UNIT as f64 * ell).ceil() as usize;
        let mut m: f64 = 0.0;
        for i in 0..=n {
            let x = ell * i as f64 / n as f64;
            let (a, ap) = self.eval(x);
            m = m.max((ap / a).abs());
        }
        DecayConstants {
            m,
            ell,
            lambda: lambda_closed_form(m, ell),
        }
    }

    /// Sample `A` at the `nx + 1` nodes of a uniform grid with spacing `dx`.
    pub fn sample(&self, nx: usize, dx: f64) -> Vec<f64> {
        (0..=nx).map(|i| self.eval(i as f64 * dx).0).collect()
    }
}

// --- Tests ------------------------------------------------------------------
