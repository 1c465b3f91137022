//! Chordal SLE via the chordal Loewner evolution.
//!
//! A sampled Brownian driving function is held on a capacity-time grid and
//! treated as piecewise constant on each cell. Everything else is derived
//! from that one object: the curve itself by composing per-cell slit maps,
//! forward point evaluation by integrating the Loewner ODE (or by the exact
//! per-cell slit update, which doubles as a cross-check), the inverse
//! centred map by running the slit maps backwards, and conformal radii,
//! side labels and hitting radii from a single forward walker with a
//! stabilization rule.

mod driving;
mod flow;
mod inverse;
mod resolve;
mod trace;

pub use driving::{sample_driving, DrivingPath, ExtensionPolicy};
pub use flow::{
    centered_map, conformal_radius, flow_delta, flow_point, flow_point_slit, FlowResult,
    SlitWalker, SWALLOW_THRESHOLD,
};
pub use inverse::{
    inverse_centered_map, inverse_centered_map_with, pullback_mount_cell, InverseMapPoint,
    TIP_DISCRIMINANT_TOL,
};
pub use resolve::{
    curve_side, hitting_radii, limit_conformal_radius, resolve_probe, CrLimit, EscapePolicy,
    HitOutcome, ProbeResolution, ResolutionPolicy, Side, SideLabel, StabilizationPolicy,
};
pub use trace::{trace_curve, trace_curve_prefix, trace_curve_sampled, CurveTrace};

use num_complex::Complex64;

/// Square root mapping into the closed upper half-plane.
///
/// The Loewner slit maps and their inverses need the branch of the square
/// root whose image lies in the closed upper half-plane (argument halved
/// from [0, 2pi)), not the principal branch. Hand-rolled: this sits in the
/// innermost loop of every ensemble, and the polar-form sqrt in num-complex
/// costs an atan2 plus sincos per call.
#[inline]
pub(crate) fn sqrt_upper(s: Complex64) -> Complex64 {
    let (x, y) = (s.re, s.im);
    let r = (x * x + y * y).sqrt();
    let (a, b) = if x >= 0.0 {
        let a = (0.5 * (r + x)).sqrt();
        let b = if a == 0.0 { 0.0 } else { y.abs() / (2.0 * a) };
        (a, b)
    } else {
        let b = (0.5 * (r - x)).sqrt();
        let a = if b == 0.0 { 0.0 } else { y.abs() / (2.0 * b) };
        (a, b)
    };
    if y >= 0.0 {
        Complex64::new(a, b)
    } else {
        Complex64::new(-a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_upper_stays_in_upper_half_plane() {
        for &(re, im) in &[(4.0, 2.0), (4.0, -2.0), (-3.0, 0.0), (-1.0, -1.0), (2.0, 0.0)] {
            let r = sqrt_upper(Complex64::new(re, im));
            assert!(r.im >= 0.0, "sqrt_upper({re}+{im}i) left the half-plane");
            let back = r * r;
            assert!((back - Complex64::new(re, im)).norm() < 1e-12 * (1.0 + back.norm()));
        }
    }
}
