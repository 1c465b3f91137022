//! Gaussian multiplicative chaos weights over atom-list references.
//!
//! A chaos measure here is a reference [`WeightedMeasure`] with each atom
//! weight multiplied by an exponential of the sampled field value at that
//! atom. Four normalizations are supported: the interior epsilon power
//! eps^{gamma^2/8}, the boundary power eps^{gamma^2/4}, the Wick form
//! e^{-(gamma^2/8) var} (with the variance read from the ensemble diagonal,
//! never the closed form, so algebraic identities between normalizations
//! stay exact), and the derivative-type critical normalization at gamma = 2,
//! whose finite-eps approximant is signed.
//!
//! The boundary field after the centred map is evaluated through the exact
//! pullback rule: a radius-eps probe at a boundary point x corresponds to a
//! radius eps |(f_T^{-1})'(x)| probe at f_T^{-1}(x), plus the additive term
//! (2/gamma + gamma/2) log |(f_T^{-1})'(x)|. This is the discrete shadow of
//! the change-of-coordinates rule for chaos measures, which is what makes
//! pathwise left/right comparisons meaningful at finite eps.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l_function, FieldSample, Probe, ProbeEnsemble};
use crate::loewner::{inverse_centered_map_with, DrivingPath};
use crate::measures::{MeasureKind, WeightedMeasure};
use crate::params::KappaParams;

/// Multiplicative normalization applied alongside e^{(gamma/2) field}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// eps^{gamma^2/8}: interior reference measures.
    EpsilonPowerInterior,
    /// eps^{gamma^2/4}: boundary (real-line) reference measures.
    EpsilonPowerBoundary,
    /// e^{-(gamma^2/8) var}: the Wick exponential.
    Wick,
    /// (-field/2 + log(1/eps)) e^{field - log(1/eps)}: critical, gamma = 2.
    CriticalDerivative,
}

impl Normalization {
    fn tag(&self) -> &'static str {
        match self {
            Normalization::EpsilonPowerInterior => "eps-interior",
            Normalization::EpsilonPowerBoundary => "eps-boundary",
            Normalization::Wick => "wick",
            Normalization::CriticalDerivative => "critical",
        }
    }
}

/// Chaos parameters: gamma, the probe radius, and the normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub normalization: Normalization,
}

impl ChaosConfig {
    pub fn new(gamma: f64, epsilon: f64, normalization: Normalization) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 2.0) {
            return Err(Error::Parameter(format!(
                "gamma must lie in (0, 2], got {gamma}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if normalization == Normalization::CriticalDerivative {
            if gamma != 2.0 {
                return Err(Error::Parameter(
                    "critical normalization requires gamma = 2".into(),
                ));
            }
            if epsilon >= 1.0 {
                return Err(Error::Parameter(
                    "critical approximant requires eps < 1 (log(1/eps) > 0)".into(),
                ));
            }
        }
        Ok(Self {
            gamma,
            epsilon,
            normalization,
        })
    }
}

/// Excursions beyond this many standard deviations are clipped (and
/// counted) before exponentiation.
const CLIP_SDS: f64 = 12.0;

/// Result of a chaos weighting, with the bookkeeping the signed critical
/// approximant needs.
#[derive(Debug, Clone)]
pub struct ChaosOutcome {
    pub measure: WeightedMeasure,
    /// Atoms whose critical factor came out negative (kept, counted).
    pub negative_atoms: usize,
    /// Field excursions clipped at the 12-sigma guard.
    pub clipped: usize,
}

/// Per-atom weight factor for one field value.
fn weight_factor(
    cfg: &ChaosConfig,
    field_value: f64,
    variance: Option<f64>,
    clipped: &mut usize,
) -> f64 {
    let mut v = field_value;
    if let Some(var) = variance {
        let cap = CLIP_SDS * var.max(0.0).sqrt();
        if v.abs() > cap {
            v = v.clamp(-cap, cap);
            *clipped += 1;
        }
    }
    let g = cfg.gamma;
    match cfg.normalization {
        Normalization::EpsilonPowerInterior => {
            (0.5 * g * v).exp() * cfg.epsilon.powf(g * g / 8.0)
        }
        Normalization::EpsilonPowerBoundary => {
            (0.5 * g * v).exp() * cfg.epsilon.powf(g * g / 4.0)
        }
        Normalization::Wick => {
            let var = variance.expect("Wick normalization needs the ensemble variance");
            (0.5 * g * v - g * g / 8.0 * var).exp()
        }
        Normalization::CriticalDerivative => {
            let log_inv_eps = -cfg.epsilon.ln();
            (-0.5 * v + log_inv_eps) * (v - log_inv_eps).exp()
        }
    }
}

/// Apply chaos weights given field values (and variances, for the Wick and
/// clip paths) aligned index-for-index with the reference atoms.
pub fn chaos_measure_from_values(
    reference: &WeightedMeasure,
    values: &[f64],
    variances: Option<&[f64]>,
    cfg: &ChaosConfig,
) -> Result<ChaosOutcome> {
    if values.len() != reference.len() {
        return Err(Error::Alignment {
            index: values.len().min(reference.len()),
        });
    }
    if let Some(vars) = variances {
        if vars.len() != reference.len() {
            return Err(Error::Alignment { index: vars.len() });
        }
    }
    let mut out = WeightedMeasure::new(
        MeasureKind::Chaos {
            gamma: cfg.gamma,
            epsilon: cfg.epsilon,
            normalization: cfg.normalization.tag().to_string(),
        },
        reference.provenance.clone(),
    );
    out.exclusions = reference.exclusions;
    let mut negative = 0usize;
    let mut clipped = 0usize;
    for i in 0..reference.len() {
        let var = variances.map(|v| v[i]);
        let factor = weight_factor(cfg, values[i], var, &mut clipped);
        let w = reference.weight(i) * factor;
        if !w.is_finite() {
            return Err(Error::Quality(format!("non-finite chaos weight at atom {i}")));
        }
        if w < 0.0 {
            negative += 1;
        }
        out.push(reference.point(i), w);
    }
    Ok(ChaosOutcome {
        measure: out,
        negative_atoms: negative,
        clipped,
    })
}

/// Apply chaos weights using a sampled field whose ensemble probes sit at
/// the reference atoms with radius `cfg.epsilon`.
pub fn chaos_measure(
    reference: &WeightedMeasure,
    ensemble: &ProbeEnsemble,
    field: &FieldSample,
    cfg: &ChaosConfig,
) -> Result<ChaosOutcome> {
    if ensemble.len() != reference.len() || field.values.len() != reference.len() {
        return Err(Error::Alignment {
            index: ensemble.len().min(reference.len()),
        });
    }
    for (i, p) in ensemble.probes().iter().enumerate() {
        let atom = reference.point(i);
        if (p.center() - atom).norm() > 1e-12 * (1.0 + atom.norm())
            || (p.radius - cfg.epsilon).abs() > 1e-12 * cfg.epsilon
        {
            return Err(Error::Alignment { index: i });
        }
    }
    let vars: Vec<f64> = (0..ensemble.len()).map(|i| ensemble.variance(i)).collect();
    chaos_measure_from_values(reference, &field.values, Some(&vars), cfg)
}

/// Critical boundary approximant on a real-line reference.
pub fn critical_boundary_measure(
    reference: &WeightedMeasure,
    values: &[f64],
    epsilon: f64,
) -> Result<ChaosOutcome> {
    if epsilon >= 1.0 {
        return Err(Error::Parameter(
            "critical approximant requires eps < 1".into(),
        ));
    }
    for i in 0..reference.len() {
        if reference.point(i).im.abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "critical boundary measure needs atoms on the real line; atom {i} has Im = {}",
                reference.point(i).im
            )));
        }
    }
    let cfg = ChaosConfig::new(2.0, epsilon, Normalization::CriticalDerivative)?;
    chaos_measure_from_values(reference, values, None, &cfg)
}

/// Both sides of the boundary-measure identity: the eps-power boundary
/// weights (left) against Wick weights on the e^{(gamma^2/8) l}-tilted
/// reference (right). Exact for atoms whose variance is -2 log eps and
/// whose l vanishes; elsewhere the gap is the finite-eps correction.
pub fn relation_nu_mu_tilde(
    reference: &WeightedMeasure,
    values: &[f64],
    variances: &[f64],
    gamma: f64,
    epsilon: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() != reference.len() || variances.len() != reference.len() {
        return Err(Error::Alignment {
            index: values.len().min(reference.len()),
        });
    }
    let nu_cfg = ChaosConfig::new(gamma, epsilon, Normalization::EpsilonPowerBoundary)?;
    let wick_cfg = ChaosConfig::new(gamma, epsilon, Normalization::Wick)?;
    let mut lhs = Vec::with_capacity(reference.len());
    let mut rhs = Vec::with_capacity(reference.len());
    let mut clipped = 0usize;
    for i in 0..reference.len() {
        let w = reference.weight(i);
        lhs.push(w * weight_factor(&nu_cfg, values[i], None, &mut clipped));
        let tilt = (gamma * gamma / 8.0 * l_function(reference.point(i))).exp();
        rhs.push(w * tilt * weight_factor(&wick_cfg, values[i], Some(variances[i]), &mut clipped));
    }
    Ok((lhs, rhs))
}

/// A boundary probe pulled back through the inverse centred map: the probe
/// the field sampler must evaluate, plus the derivative term.
#[derive(Debug, Clone, Copy)]
pub struct PulledBoundaryProbe {
    /// Boundary coordinate in the image domain.
    pub x: f64,
    /// Probe at f_T^{-1}(x) with radius eps |(f_T^{-1})'(x)|.
    pub probe: Probe,
    /// log |(f_T^{-1})'(x)|.
    pub log_abs_deriv: f64,
}

/// Radii outside this range are rejected as outside the sampler's
/// validated regime.
pub const PULLED_RADIUS_RANGE: (f64, f64) = (1e-8, 10.0);

/// Pull a boundary probe (x, eps) back through the centred map at `t_map`.
pub fn pull_back_boundary_probe(
    driver: &DrivingPath,
    t_map: f64,
    x: f64,
    epsilon: f64,
    tip_tol: f64,
) -> Result<PulledBoundaryProbe> {
    let inv = inverse_centered_map_with(driver, t_map, Complex64::new(x, 0.0), tip_tol)?;
    let radius = epsilon * inv.log_abs_deriv.exp();
    if !(radius >= PULLED_RADIUS_RANGE.0 && radius <= PULLED_RADIUS_RANGE.1) {
        return Err(Error::Regime {
            radius,
            min: PULLED_RADIUS_RANGE.0,
            max: PULLED_RADIUS_RANGE.1,
        });
    }
    Ok(PulledBoundaryProbe {
        x,
        probe: Probe::new(inv.point, radius),
        log_abs_deriv: inv.log_abs_deriv,
    })
}

/// The boundary field after the centred map, at one pulled-back probe:
/// field value at the pullback plus (2/gamma + gamma/2) log |(f_T^{-1})'|.
pub fn gamma_t_boundary(
    pulled: &PulledBoundaryProbe,
    field_value: f64,
    params: &KappaParams,
) -> f64 {
    let g = params.gamma;
    field_value + (2.0 / g + 0.5 * g) * pulled.log_abs_deriv
}
