//! Declarative experiment configuration.
//!
//! One TOML file drives every experiment; unknown keys are hard errors so
//! typos cannot silently fall back to defaults. Every tolerance consumed by
//! a pass/fail gate lives here, pre-registered, with the defaults spelled
//! out in one place.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::loewner::ExtensionPolicy;

fn d_dt() -> f64 {
    1e-3
}
fn d_horizon() -> f64 {
    1.0
}
fn d_exclusion_cap() -> f64 {
    0.01
}
fn d_extension() -> ExtensionPolicy {
    ExtensionPolicy::default()
}

/// Shared simulation parameters plus one optional section per experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kappa: f64,
    pub seed: u64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_extension")]
    pub extension: ExtensionPolicy,
    #[serde(default = "d_exclusion_cap")]
    pub exclusion_cap: f64,
    #[serde(default)]
    pub onepoint: OnepointConfig,
    #[serde(default)]
    pub mink_lr: MinkLrConfig,
    #[serde(default)]
    pub k_kappa: KKappaConfig,
    #[serde(default)]
    pub sigma_conv: SigmaConvConfig,
    #[serde(default)]
    pub gmc_norm: GmcNormConfig,
    #[serde(default)]
    pub main_theorem: MainTheoremConfig,
    #[serde(default)]
    pub two_point: TwoPointConfig,
}

impl ExperimentConfig {
    pub fn with_kappa_seed(kappa: f64, seed: u64) -> Self {
        Self {
            kappa,
            seed,
            dt: d_dt(),
            horizon: d_horizon(),
            extension: d_extension(),
            exclusion_cap: d_exclusion_cap(),
            onepoint: OnepointConfig::default(),
            mink_lr: MinkLrConfig::default(),
            k_kappa: KKappaConfig::default(),
            sigma_conv: SigmaConvConfig::default(),
            gmc_norm: GmcNormConfig::default(),
            main_theorem: MainTheoremConfig::default(),
            two_point: TwoPointConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Hash of the parsed configuration. Canonical JSON keys are sorted, so
    /// the hash does not depend on key order in the file.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        format!("{:x}", h.finalize())
    }
}

/// Rectangle used by grid-based experiments.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn grid(&self, nx: usize, ny: usize) -> Result<crate::measures::GridSpec> {
        crate::measures::GridSpec::new(self.x0, self.x1, self.y0, self.y1, nx, ny)
    }
}

fn d_rect() -> Rect {
    Rect {
        x0: -1.0,
        x1: 1.0,
        y0: 1.0,
        y1: 2.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnepointConfig {
    /// Probe points (re, im).
    pub points: Vec<(f64, f64)>,
    /// e^{-r} = radius_fraction * 2 Im z.
    pub radius_fraction: f64,
    pub samples: usize,
    /// Acceptance band for 2 e^{r(2-d)} P / G.
    pub ratio_band: (f64, f64),
    /// Radius fractions above this are outside the sharp regime: reported,
    /// not gated.
    pub report_only_above_fraction: f64,
    /// Cap on the undecided-side fraction among radius hits.
    pub undecided_cap: f64,
}

impl Default for OnepointConfig {
    fn default() -> Self {
        Self {
            points: vec![(0.0, 1.0), (1.0, 1.0)],
            radius_fraction: 0.1,
            samples: 20_000,
            ratio_band: (0.85, 1.15),
            report_only_above_fraction: 0.25,
            undecided_cap: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinkLrConfig {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Descending radius sweep.
    pub u_sweep: Vec<f64>,
    pub samples: usize,
    /// |median ratio - 1| at the finest u must stay under this.
    pub median_tolerance: f64,
    /// Monte Carlo expectation gate: relative deviation of the ensemble
    /// mean one-sided mass from half the Green quadrature.
    pub expectation_tolerance: f64,
    /// Index into `u_sweep` at which the expectation gate applies.
    pub expectation_u_index: usize,
    pub bootstrap: usize,
}

impl Default for MinkLrConfig {
    fn default() -> Self {
        Self {
            rect: d_rect(),
            nx: 20,
            ny: 10,
            u_sweep: vec![0.1, 0.05, 0.025],
            samples: 20_000,
            median_tolerance: 0.2,
            expectation_tolerance: 0.15,
            expectation_u_index: 1,
            bootstrap: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KKappaConfig {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    /// Radii for the tube-ratio estimator.
    pub u_sweep: Vec<f64>,
    /// Radii for the disc-distance estimator.
    pub disc_u_sweep: Vec<f64>,
    pub samples: usize,
    pub disc_samples: usize,
    /// Flag threshold on relative disagreement of the two estimators.
    pub agreement_tolerance: f64,
    pub trace_substeps: usize,
    /// Capacity time up to which curves are traced (distances only need
    /// the curve until it has escaped the window).
    pub trace_horizon: f64,
    pub bootstrap: usize,
}

impl Default for KKappaConfig {
    fn default() -> Self {
        Self {
            rect: d_rect(),
            nx: 16,
            ny: 8,
            u_sweep: vec![0.1, 0.05],
            samples: 1200,
            disc_u_sweep: vec![0.4, 0.2, 0.1],
            disc_samples: 1500,
            agreement_tolerance: 0.3,
            trace_substeps: 2,
            trace_horizon: 48.0,
            bootstrap: 300,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConvConfig {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    /// (delta, u) refinement pairs, coarse to fine.
    pub sweep: Vec<(f64, f64)>,
    pub samples: usize,
    /// Relative tolerance on the median ratio against 1 - kappa/8 at the
    /// finest pair.
    pub tolerance: f64,
    pub bootstrap: usize,
}

impl Default for SigmaConvConfig {
    fn default() -> Self {
        Self {
            rect: d_rect(),
            nx: 20,
            ny: 10,
            sweep: vec![(0.08, 0.1), (0.04, 0.06), (0.02, 0.03)],
            samples: 6000,
            tolerance: 0.25,
            bootstrap: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmcNormConfig {
    pub gammas: Vec<f64>,
    pub fields: usize,
    pub epsilon: f64,
    /// Machine tolerance for the exact boundary identity.
    pub identity_tolerance: f64,
    /// Tolerance for the tilt mismatch at off-origin atoms.
    pub tilt_tolerance: f64,
    /// Tolerance for the gamma_delta exponent identity and the Green
    /// normalization.
    pub algebra_tolerance: f64,
}

impl Default for GmcNormConfig {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 1.0, 1.5],
            fields: 100_000,
            epsilon: 0.05,
            identity_tolerance: 1e-12,
            tilt_tolerance: 1e-2,
            algebra_tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    /// Conformal-radius threshold for the tube reference.
    pub u: f64,
    /// Chaos regularization radius.
    pub epsilon: f64,
    /// Grid cells per u (cell size = u / cells_per_u).
    pub cells_per_u: f64,
    /// Boundary atoms per side interval.
    pub boundary_atoms: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MainTheoremConfig {
    pub curves: usize,
    pub fields_per_curve: usize,
    /// Segment start as a fraction of the horizon (end is the horizon).
    pub r_fraction: f64,
    pub sweep: Vec<SweepPoint>,
    /// Gate on the median |log(LHS/(C RHS))| at the finest sweep point.
    pub median_log_tolerance: f64,
    /// Gate on the median |log(RHS_L/RHS_R)|.
    pub lr_log_tolerance: f64,
    /// Tip-zone coverage cap as a fraction of boundary interval length.
    pub tip_coverage_cap: f64,
    /// Critical runs report against this threshold instead of gating.
    pub critical_report_threshold: f64,
    pub bootstrap: usize,
}

impl Default for MainTheoremConfig {
    fn default() -> Self {
        Self {
            curves: 50,
            fields_per_curve: 200,
            r_fraction: 0.2,
            sweep: vec![
                SweepPoint {
                    u: 0.20,
                    epsilon: 0.20,
                    cells_per_u: 3.0,
                    boundary_atoms: 24,
                },
                SweepPoint {
                    u: 0.12,
                    epsilon: 0.12,
                    cells_per_u: 3.0,
                    boundary_atoms: 36,
                },
                SweepPoint {
                    u: 0.07,
                    epsilon: 0.07,
                    cells_per_u: 3.0,
                    boundary_atoms: 48,
                },
            ],
            median_log_tolerance: 0.35,
            lr_log_tolerance: 0.25,
            tip_coverage_cap: 0.05,
            critical_report_threshold: 0.6,
            bootstrap: 400,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPointConfig {
    /// Base point (re, im), Im >= 1.
    pub base: (f64, f64),
    /// Horizontal separations to the partner points.
    pub separations: Vec<f64>,
    /// Radius levels e^{-r}, descending.
    pub radii: Vec<f64>,
    pub samples: usize,
    /// Allowed slack below the bound's separation exponent d - 2.
    pub exponent_slack: f64,
    /// Allowed deviation of the fitted r-exponent from 2(d - 2).
    pub r_exponent_tolerance: f64,
}

impl Default for TwoPointConfig {
    fn default() -> Self {
        Self {
            base: (0.0, 1.1),
            separations: vec![0.125, 0.25, 0.5, 1.0],
            radii: vec![0.2, 0.14, 0.1],
            samples: 30_000,
            exponent_slack: 0.15,
            r_exponent_tolerance: 0.2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml("kappa = 3.0\nseed = 7\n").unwrap();
        assert_eq!(cfg.kappa, 3.0);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.onepoint.samples, 20_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("kappa = 3.0\nseed = 7\nbogus = 1\n").is_err());
        assert!(
            ExperimentConfig::from_toml("kappa = 3.0\nseed = 7\n[onepoint]\ntypo_samples = 5\n")
                .is_err()
        );
    }

    #[test]
    fn hash_is_stable_under_field_reordering() {
        let a = ExperimentConfig::from_toml("kappa = 3.0\nseed = 7\ndt = 1e-3\n").unwrap();
        let b = ExperimentConfig::from_toml("seed = 7\ndt = 1e-3\nkappa = 3.0\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml("kappa = 3.0\nseed = 8\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
